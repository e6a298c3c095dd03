//! Binary checkpoints.
//!
//! Layout (little-endian): `SFFNCKPT`, `u32` version, `u32` length + model
//! config text, `u64` step, `u8` optimizer flag, then every parameter tensor as
//! `f64` in declaration order. With the flag set, the Adam step count (`u64`)
//! follows, then all first moments, then all second moments.

use std::fs;
use std::path::Path;

use super::AdamState;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, TransformerLM};

const MAGIC: &[u8; 8] = b"SFFNCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TransformerLM,
    pub optimizer: Option<AdamState>,
    /// Optimizer steps completed.
    pub step: usize,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::BadCheckpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, out: &mut [f64]) -> Result<()> {
        let bytes = self.take(out.len() * 8)?;
        for (o, c) in out.iter_mut().zip(bytes.chunks_exact(8)) {
            *o = f64::from_le_bytes(c.try_into().unwrap());
        }
        Ok(())
    }
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.model.config().to_text();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(cfg.as_bytes());
        out.extend_from_slice(&(self.step as u64).to_le_bytes());
        out.push(self.optimizer.is_some() as u8);
        for t in self.model.tensors() {
            put_f64s(&mut out, t.data.as_slice());
        }
        if let Some(opt) = &self.optimizer {
            out.extend_from_slice(&opt.step.to_le_bytes());
            opt.m.iter().for_each(|m| put_f64s(&mut out, m));
            opt.v.iter().for_each(|v| put_f64s(&mut out, v));
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8).ok() != Some(&MAGIC[..]) {
            return Err(Error::BadCheckpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::BadCheckpoint(format!(
                "unsupported version {version}"
            )));
        }
        let n = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(n)?)
            .map_err(|_| Error::BadCheckpoint("config text is not UTF-8".into()))?;
        let config = ModelConfig::parse(text)?;
        let step = r.u64()? as usize;
        let has_opt = match r.take(1)?[0] {
            0 => false,
            1 => true,
            f => return Err(Error::BadCheckpoint(format!("bad optimizer flag {f}"))),
        };
        // Any seed works: every value is overwritten below.
        let mut model = TransformerLM::new(&config, 0)?;
        for t in model.tensors_mut() {
            r.f64s(t.data.as_mut_slice())?;
        }
        let optimizer = if has_opt {
            let mut opt = AdamState::for_model(&model);
            opt.step = r.u64()?;
            for m in &mut opt.m {
                r.f64s(m)?;
            }
            for v in &mut opt.v {
                r.f64s(v)?;
            }
            Some(opt)
        } else {
            None
        };
        if r.pos != buf.len() {
            return Err(Error::BadCheckpoint(format!(
                "{} trailing bytes",
                buf.len() - r.pos
            )));
        }
        Ok(Self {
            model,
            optimizer,
            step,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Load and require the stored model config to equal `expected`.
    pub fn load_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Self> {
        let c = Self::load(path)?;
        if c.model.config() != expected {
            return Err(Error::CheckpointConfigMismatch);
        }
        Ok(c)
    }
}
