//! Versioned binary files for models and datasets.
//!
//! Both share one framing: magic bytes `DCOP`, format version `u32`, a
//! file-type byte (`M` model, `D` dataset), then the payload. All integers
//! are little-endian; all floats are little-endian IEEE-754 f64, so
//! round-trips are bitwise exact.
//!
//! Model payload: kind tag, layout dims (state, history points, input
//! channels, output points), output grid (t0, dt), delay/horizon metadata,
//! normalization vectors, layer blobs (rows, cols, activation, row-major
//! weights, bias), training metadata.
//!
//! Dataset payload: kind tag, plant name, delay/horizon/split, layout dims,
//! target grid, then per entry the state, the history samples, and the
//! target points as contiguous f64 arrays.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::delayline::InputHistory;
use crate::predictor::Trajectory;

use super::{
    Activation, DatasetEntry, DenseLayer, OperatorDataset, OperatorKind, SurrogateError,
    SurrogateModel, TrainingMeta,
};

const MAGIC: &[u8; 4] = b"DCOP";
const VERSION: u32 = 1;
const FILE_MODEL: u8 = b'M';
const FILE_DATASET: u8 = b'D';

struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.inner.write_all(&[v])
    }
    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.inner.write_all(&v.to_le_bytes())
    }
    fn f64s(&mut self, vs: &[f64]) -> std::io::Result<()> {
        for v in vs {
            self.f64(*v)?;
        }
        Ok(())
    }
    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.u32(s.len() as u32)?;
        self.inner.write_all(s.as_bytes())
    }
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn u8(&mut self) -> Result<u8, SurrogateError> {
        let mut b = [0u8; 1];
        self.inner.read_exact(&mut b)?;
        Ok(b[0])
    }
    fn u32(&mut self) -> Result<u32, SurrogateError> {
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64, SurrogateError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64, SurrogateError> {
        let mut b = [0u8; 8];
        self.inner.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, SurrogateError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
    fn str(&mut self) -> Result<String, SurrogateError> {
        let n = self.u32()? as usize;
        if n > 1 << 20 {
            return Err(SurrogateError::BadFile("unreasonable string length".into()));
        }
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf)?;
        String::from_utf8(buf).map_err(|_| SurrogateError::BadFile("invalid utf-8".into()))
    }
    fn dim(&mut self, what: &str) -> Result<usize, SurrogateError> {
        let v = self.u32()? as usize;
        if v == 0 || v > 1 << 24 {
            return Err(SurrogateError::BadFile(format!("bad {what}: {v}")));
        }
        Ok(v)
    }
}

fn kind_tag(kind: OperatorKind) -> u8 {
    match kind {
        OperatorKind::MultiStep => 0,
        OperatorKind::Predictor => 1,
    }
}

fn kind_from_tag(tag: u8) -> Result<OperatorKind, SurrogateError> {
    match tag {
        0 => Ok(OperatorKind::MultiStep),
        1 => Ok(OperatorKind::Predictor),
        other => Err(SurrogateError::BadFile(format!("unknown kind tag {other}"))),
    }
}

fn check_header<R: Read>(r: &mut Reader<R>, expected_type: u8) -> Result<(), SurrogateError> {
    let mut magic = [0u8; 4];
    r.inner.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SurrogateError::BadFile(format!(
            "bad magic bytes {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SurrogateError::BadFile(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let ftype = r.u8()?;
    if ftype != expected_type {
        return Err(SurrogateError::BadFile(format!(
            "wrong file type {:?}, expected {:?}",
            ftype as char, expected_type as char
        )));
    }
    Ok(())
}

pub fn save_model(model: &SurrogateModel, path: &Path) -> Result<(), SurrogateError> {
    let mut w = Writer {
        inner: BufWriter::new(File::create(path)?),
    };
    w.inner.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u8(FILE_MODEL)?;
    w.u8(kind_tag(model.kind))?;
    w.u32(model.state_dim as u32)?;
    w.u32(model.history_points as u32)?;
    w.u32(model.input_dim as u32)?;
    w.u32(model.out_points as u32)?;
    w.f64(model.out_t0)?;
    w.f64(model.out_dt)?;
    w.f64(model.delay)?;
    w.f64(model.horizon)?;
    w.f64s(&model.norm_mean)?;
    w.f64s(&model.norm_std)?;
    w.u32(model.layers.len() as u32)?;
    for layer in &model.layers {
        w.u32(layer.rows as u32)?;
        w.u32(layer.cols as u32)?;
        w.u8(match layer.activation {
            Activation::Tanh => 0,
            Activation::Linear => 1,
        })?;
        w.f64s(&layer.weights)?;
        w.f64s(&layer.bias)?;
    }
    w.str(&model.meta.dataset_id)?;
    w.u32(model.meta.epochs)?;
    w.u64(model.meta.seed)?;
    w.f64(model.meta.mean_sup_error)?;
    w.f64(model.meta.max_sup_error)?;
    w.inner.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SurrogateModel, SurrogateError> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    check_header(&mut r, FILE_MODEL)?;
    let kind = kind_from_tag(r.u8()?)?;
    let state_dim = r.dim("state_dim")?;
    let history_points = r.dim("history_points")?;
    let input_dim = r.dim("input_dim")?;
    let out_points = r.dim("out_points")?;
    let out_t0 = r.f64()?;
    let out_dt = r.f64()?;
    let delay = r.f64()?;
    let horizon = r.f64()?;
    let flat_in = state_dim + history_points * input_dim;
    let norm_mean = r.f64s(flat_in)?;
    let norm_std = r.f64s(flat_in)?;
    let n_layers = r.dim("layer count")?;
    let mut layers = Vec::with_capacity(n_layers);
    let mut expect_cols = flat_in;
    for i in 0..n_layers {
        let rows = r.dim("layer rows")?;
        let cols = r.dim("layer cols")?;
        if cols != expect_cols {
            return Err(SurrogateError::BadFile(format!(
                "layer {i} expects {expect_cols} inputs, file says {cols}"
            )));
        }
        let activation = match r.u8()? {
            0 => Activation::Tanh,
            1 => Activation::Linear,
            other => {
                return Err(SurrogateError::BadFile(format!(
                    "unknown activation tag {other}"
                )))
            }
        };
        let weights = r.f64s(rows * cols)?;
        let bias = r.f64s(rows)?;
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(SurrogateError::BadFile(format!(
                "layer {i} contains non-finite weights"
            )));
        }
        layers.push(DenseLayer {
            weights,
            bias,
            activation,
            rows,
            cols,
        });
        expect_cols = rows;
    }
    if expect_cols != out_points * state_dim {
        return Err(SurrogateError::BadFile(format!(
            "final layer width {expect_cols} does not match output layout {}",
            out_points * state_dim
        )));
    }
    let meta = TrainingMeta {
        dataset_id: r.str()?,
        epochs: r.u32()?,
        seed: r.u64()?,
        mean_sup_error: r.f64()?,
        max_sup_error: r.f64()?,
    };
    Ok(SurrogateModel {
        kind,
        state_dim,
        history_points,
        input_dim,
        out_points,
        out_t0,
        out_dt,
        delay,
        horizon,
        norm_mean,
        norm_std,
        layers,
        meta,
    })
}

pub fn save_dataset(dataset: &OperatorDataset, path: &Path) -> Result<(), SurrogateError> {
    if dataset.entries.is_empty() {
        return Err(SurrogateError::EmptyDataset);
    }
    let proto = &dataset.entries[0];
    let mut w = Writer {
        inner: BufWriter::new(File::create(path)?),
    };
    w.inner.write_all(MAGIC)?;
    w.u32(VERSION)?;
    w.u8(FILE_DATASET)?;
    w.u8(kind_tag(dataset.kind))?;
    w.str(&dataset.plant_name)?;
    w.f64(dataset.delay)?;
    w.f64(dataset.horizon)?;
    w.f64(dataset.validation_split)?;
    w.u32(proto.x.len() as u32)?;
    w.u32(proto.history.grid_points() as u32)?;
    w.u32(proto.history.input_dim() as u32)?;
    w.u32(proto.target.points.len() as u32)?;
    w.f64(proto.target.t0)?;
    w.f64(proto.target.dt)?;
    w.u32(dataset.entries.len() as u32)?;
    for e in &dataset.entries {
        w.f64s(&e.x)?;
        for s in e.history.samples() {
            w.f64s(s)?;
        }
        for p in &e.target.points {
            w.f64s(p)?;
        }
    }
    w.inner.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<OperatorDataset, SurrogateError> {
    let mut r = Reader {
        inner: BufReader::new(File::open(path)?),
    };
    check_header(&mut r, FILE_DATASET)?;
    let kind = kind_from_tag(r.u8()?)?;
    let plant_name = r.str()?;
    let delay = r.f64()?;
    let horizon = r.f64()?;
    let validation_split = r.f64()?;
    let state_dim = r.dim("state_dim")?;
    let history_points = r.dim("history_points")?;
    let input_dim = r.dim("input_dim")?;
    let target_points = r.dim("target_points")?;
    let target_t0 = r.f64()?;
    let target_dt = r.f64()?;
    let n_entries = r.dim("entry count")?;
    let mut entries = Vec::with_capacity(n_entries);
    for _ in 0..n_entries {
        let x = r.f64s(state_dim)?;
        let mut samples = Vec::with_capacity(history_points);
        for _ in 0..history_points {
            samples.push(r.f64s(input_dim)?);
        }
        let history = InputHistory::from_samples(delay, samples)
            .map_err(|e| SurrogateError::BadFile(format!("bad history: {e}")))?;
        let mut points = Vec::with_capacity(target_points);
        for _ in 0..target_points {
            points.push(r.f64s(state_dim)?);
        }
        entries.push(DatasetEntry {
            x,
            history,
            target: Trajectory::new(target_t0, target_dt, points),
        });
    }
    Ok(OperatorDataset {
        kind,
        plant_name,
        delay,
        horizon,
        validation_split,
        entries,
    })
}
