//! Pre-tokenized corpora on disk.
//!
//! Layout: `TOKS` magic, `u16` version, `u16` bits per id (16 or 32),
//! `u64` id count, then the ids, all little-endian.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TOKS";
const VERSION: u16 = 1;
const HEADER: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    tokens: Vec<u32>,
    bits: u16,
}

impl TokenStream {
    /// In-memory stream; picks 16-bit storage when every id fits.
    pub fn from_tokens(tokens: Vec<u32>) -> Self {
        let bits = if tokens.iter().all(|&t| t <= u16::MAX as u32) {
            16
        } else {
            32
        };
        Self { tokens, bits }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: &str| Error::BadTokenFile {
            path: path.to_path_buf(),
            reason: reason.into(),
        };
        let bytes = fs::read(path)?;
        if bytes.len() < HEADER || &bytes[..4] != MAGIC {
            return Err(bad("missing TOKS header"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let bits = u16::from_le_bytes([bytes[6], bytes[7]]);
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let width = match bits {
            16 => 2,
            32 => 4,
            _ => return Err(bad(&format!("token width {bits} is not 16 or 32"))),
        };
        let body = &bytes[HEADER..];
        if body.len() != count * width {
            return Err(bad(&format!(
                "header declares {count} ids but body holds {} bytes",
                body.len()
            )));
        }
        let tokens = if width == 2 {
            body.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
                .collect()
        } else {
            body.chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        };
        Ok(Self { tokens, bits })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::with_capacity(HEADER + self.tokens.len() * self.bits as usize / 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.bits.to_le_bytes());
        out.extend_from_slice(&(self.tokens.len() as u64).to_le_bytes());
        for &t in &self.tokens {
            if self.bits == 16 {
                out.extend_from_slice(&(t as u16).to_le_bytes());
            } else {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        fs::File::create(path)?.write_all(&out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bits(&self) -> u16 {
        self.bits
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn max_id(&self) -> Option<u32> {
        self.tokens.iter().copied().max()
    }

    pub fn check_vocab(&self, vocab: usize) -> Result<()> {
        match self.tokens.iter().find(|&&t| t as usize >= vocab) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab }),
            None => Ok(()),
        }
    }

    /// Split off the last `frac` of the stream, e.g. for evaluation.
    pub fn split_tail(mut self, frac: f64) -> (Self, Self) {
        let cut = self.tokens.len() - (self.tokens.len() as f64 * frac).round() as usize;
        let tail = self.tokens.split_off(cut);
        let bits = self.bits;
        (self, Self { tokens: tail, bits })
    }
}
