//! Versioned binary persistence: model files and detector checkpoints.
//!
//! Both formats are little-endian with a magic tag, a format version, and an
//! FNV-1a integrity checksum over the payload. Files are written to a
//! temporary sibling and atomically renamed into place.

use crate::detect::{CovariateSpec, Detector, DetectorConfig, DetectorMode, StageScore};
use crate::dist::ConcentrationVector;
use crate::dynamics::{Architecture, HiddenState, ModelParams, TrainingConfig};
use crate::error::{Error, Result};
use crate::grid::BinGrid;
use crate::numeric::fnv1a64;
use std::fs;
use std::path::Path;

const MODEL_MAGIC: &[u8; 4] = b"DWM1";
const CHECKPOINT_MAGIC: &[u8; 4] = b"DWC1";
const FORMAT_VERSION: u32 = 1;

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for v in vs {
            self.f64(*v);
        }
    }

    pub fn u64s(&mut self, vs: &[u64]) {
        self.u64(vs.len() as u64);
        for v in vs {
            self.u64(*v);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::StateCorrupt("truncated record".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > self.buf.len() / 8 + 1 {
            return Err(Error::StateCorrupt("implausible vector length".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.u64()? as usize;
        if n > self.buf.len() / 8 + 1 {
            return Err(Error::StateCorrupt("implausible vector length".into()));
        }
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::StateCorrupt("invalid utf-8 string".into()))
    }

    pub fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn frame(magic: &[u8; 4], payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 16);
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&fnv1a64(&payload).to_le_bytes());
    out
}

fn unframe<'a>(magic: &[u8; 4], bytes: &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < 16 || &bytes[..4] != magic {
        return Err(Error::StateCorrupt("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::StateCorrupt(format!(
            "unsupported format version {version}"
        )));
    }
    let payload = &bytes[8..bytes.len() - 8];
    let want = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    if fnv1a64(payload) != want {
        return Err(Error::StateCorrupt("checksum mismatch".into()));
    }
    Ok(payload)
}

/// Write bytes via a temporary sibling and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn mode_tag(mode: DetectorMode) -> u8 {
    match mode {
        DetectorMode::Asymptotic => 0,
        DetectorMode::Finite => 1,
        DetectorMode::Single => 2,
    }
}

fn mode_from_tag(tag: u8) -> Result<DetectorMode> {
    match tag {
        0 => Ok(DetectorMode::Asymptotic),
        1 => Ok(DetectorMode::Finite),
        2 => Ok(DetectorMode::Single),
        _ => Err(Error::StateCorrupt(format!("unknown mode tag {tag}"))),
    }
}

fn write_grid(w: &mut ByteWriter, grid: &BinGrid) {
    w.f64s(grid.knots());
}

fn read_grid(r: &mut ByteReader) -> Result<BinGrid> {
    BinGrid::from_knots(r.f64s()?)
}

fn write_training(w: &mut ByteWriter, t: &TrainingConfig) {
    w.u64(t.epochs as u64);
    w.f64(t.learning_rate);
    w.f64(t.lr_decay);
    w.f64(t.clip_norm);
    w.u64(t.batch_size as u64);
    w.u64(t.context_length as u64);
    w.u64(t.seed);
}

fn read_training(r: &mut ByteReader) -> Result<TrainingConfig> {
    Ok(TrainingConfig {
        epochs: r.u64()? as usize,
        learning_rate: r.f64()?,
        lr_decay: r.f64()?,
        clip_norm: r.f64()?,
        batch_size: r.u64()? as usize,
        context_length: r.u64()? as usize,
        seed: r.u64()?,
    })
}

/// Everything a detector needs to score a stream: grid, architecture,
/// weights, the detection mode, and the training provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub params: ModelParams,
    pub grid: BinGrid,
    pub mode: DetectorMode,
    /// Samples per window in finite mode; 1 in single mode.
    pub n_t: u64,
    /// Aggregation window in seconds; 0 when the input is already
    /// per-interval.
    pub window_secs: u64,
    /// Number of training intervals; also the default detection start and
    /// the scale of the age covariate.
    pub train_len: u64,
    pub training: TrainingConfig,
    pub final_nll: f64,
}

impl SavedModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        write_grid(&mut w, &self.grid);
        let arch = self.params.arch();
        w.u32(arch.layers as u32);
        w.u32(arch.hidden as u32);
        w.u32(arch.bins as u32);
        w.u32(arch.cov_dim as u32);
        w.u8(mode_tag(self.mode));
        w.u64(self.n_t);
        w.u64(self.window_secs);
        w.u64(self.train_len);
        w.f64s(self.params.flatten());
        write_training(&mut w, &self.training);
        w.f64(self.final_nll);
        frame(MODEL_MAGIC, w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let payload = unframe(MODEL_MAGIC, bytes)?;
        let mut r = ByteReader::new(payload);
        let grid = read_grid(&mut r)?;
        let arch = Architecture {
            layers: r.u32()? as usize,
            hidden: r.u32()? as usize,
            bins: r.u32()? as usize,
            cov_dim: r.u32()? as usize,
        };
        let mode = mode_from_tag(r.u8()?)?;
        let n_t = r.u64()?;
        let window_secs = r.u64()?;
        let train_len = r.u64()?;
        let params = ModelParams::from_flat(arch, r.f64s()?)?;
        let training = read_training(&mut r)?;
        let final_nll = r.f64()?;
        if grid.bin_count() != arch.bins {
            return Err(Error::StateCorrupt(
                "model grid does not match architecture".into(),
            ));
        }
        if !r.done() {
            return Err(Error::StateCorrupt("trailing bytes in model file".into()));
        }
        Ok(SavedModel {
            params,
            grid,
            mode,
            n_t,
            window_secs,
            train_len,
            training,
            final_nll,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Serialize a detector plus its owning metric id.
pub fn detector_to_bytes(metric_id: &str, d: &Detector) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.str(metric_id);
    w.u8(mode_tag(d.config.mode));
    w.f64(d.config.epsilon);
    w.u64(d.config.mc_samples as u64);
    w.u64(d.config.intermediate_every.unwrap_or(0));
    w.u64(d.config.seed);
    w.u64(d.cov.age_offset);
    w.f64(d.cov.age_scale);
    write_grid(&mut w, &d.grid);
    w.u32(d.state.h.len() as u32);
    w.u32(d.state.h.first().map_or(0, |h| h.len()) as u32);
    w.f64s(&d.state.flatten());
    w.f64s(d.predictive.alpha());
    w.f64s(&d.last_z);
    w.u64(d.interval);
    w.u64s(&d.buffer);
    w.u64(d.buffered);
    w.u64s(&d.chunk);
    w.u64(d.chunk_len);
    w.u64(d.chunk_ordinal);
    match d.last_point {
        None => w.u8(0),
        Some(s) => {
            w.u8(1);
            w.f64(s.log_p);
            w.u8(s.flagged as u8);
        }
    }
    frame(CHECKPOINT_MAGIC, w.into_inner())
}

/// Restore a detector checkpoint; the integrity checksum and internal
/// dimensions are verified.
pub fn detector_from_bytes(bytes: &[u8]) -> Result<(String, Detector)> {
    let payload = unframe(CHECKPOINT_MAGIC, bytes)?;
    let mut r = ByteReader::new(payload);
    let metric_id = r.str()?;
    let mode = mode_from_tag(r.u8()?)?;
    let epsilon = r.f64()?;
    let mc_samples = r.u64()? as usize;
    let intermediate = r.u64()?;
    let seed = r.u64()?;
    let cov = CovariateSpec {
        age_offset: r.u64()?,
        age_scale: r.f64()?,
    };
    let grid = read_grid(&mut r)?;
    let layers = r.u32()? as usize;
    let hidden = r.u32()? as usize;
    let flat_state = r.f64s()?;
    let arch_probe = Architecture {
        layers,
        hidden,
        bins: grid.bin_count(),
        cov_dim: 0,
    };
    let state = HiddenState::from_flat(&arch_probe, &flat_state)?;
    let predictive = ConcentrationVector::new(r.f64s()?)
        .map_err(|e| Error::StateCorrupt(format!("bad predictive: {e}")))?;
    let last_z = r.f64s()?;
    let interval = r.u64()?;
    let buffer = r.u64s()?;
    let buffered = r.u64()?;
    let chunk = r.u64s()?;
    let chunk_len = r.u64()?;
    let chunk_ordinal = r.u64()?;
    let last_point = match r.u8()? {
        0 => None,
        1 => Some(StageScore {
            log_p: r.f64()?,
            flagged: r.u8()? != 0,
        }),
        _ => return Err(Error::StateCorrupt("bad stage-score tag".into())),
    };
    if !r.done() {
        return Err(Error::StateCorrupt("trailing bytes in checkpoint".into()));
    }
    let d = grid.bin_count();
    if predictive.dim() != d || last_z.len() != d || buffer.len() != d || chunk.len() != d {
        return Err(Error::StateCorrupt("checkpoint dimensions disagree".into()));
    }
    let config = DetectorConfig {
        mode,
        epsilon,
        mc_samples,
        intermediate_every: if intermediate == 0 { None } else { Some(intermediate) },
        seed,
    };
    Ok((
        metric_id,
        Detector {
            config,
            grid,
            cov,
            state,
            predictive,
            last_z,
            interval,
            buffer,
            buffered,
            chunk,
            chunk_len,
            chunk_ordinal,
            last_point,
        },
    ))
}

pub fn write_checkpoint(path: &Path, metric_id: &str, d: &Detector) -> Result<()> {
    write_atomic(path, &detector_to_bytes(metric_id, d))
}

pub fn read_checkpoint(path: &Path) -> Result<(String, Detector)> {
    detector_from_bytes(&fs::read(path)?)
}
