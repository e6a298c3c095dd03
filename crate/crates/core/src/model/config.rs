use crate::error::{Error, Result};
use crate::kv::{render, KvMap};
use crate::numeric::GeluMode;

/// Accounting default; also the reference vocabulary of every preset.
pub const DEFAULT_VOCAB: usize = 32000;
pub const DEFAULT_SEQ_LEN: usize = 1024;
pub const DEFAULT_INIT_STD: f64 = 0.02;
pub const DEFAULT_ROTARY_BASE: f64 = 10000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FfnKind {
    Dense,
    /// Every FFN matrix factorized at `rank`; block 0 keeps dense weights when
    /// `first_block_dense` is set.
    LowRank {
        rank: usize,
        first_block_dense: bool,
    },
}

impl FfnKind {
    pub fn low_rank(rank: usize) -> Self {
        FfnKind::LowRank {
            rank,
            first_block_dense: true,
        }
    }

    /// Rank used by block `layer`, or `None` if that block is dense.
    pub fn rank_for_layer(&self, layer: usize) -> Option<usize> {
        match *self {
            FfnKind::Dense => None,
            FfnKind::LowRank {
                first_block_dense: true,
                ..
            } if layer == 0 => None,
            FfnKind::LowRank { rank, .. } => Some(rank),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub width: usize,
    pub n_layers: usize,
    pub vocab: usize,
    pub seq_len: usize,
    pub intermediate: usize,
    pub ffn: FfnKind,
    pub n_heads: usize,
    /// Total query width (`n_heads · head_dim`); also the input width of W_O.
    pub q_dim: usize,
    /// Total key/value width (`n_kv_heads · head_dim`).
    pub kv_dim: usize,
    pub rotary_base: f64,
    pub init_std: f64,
    pub gelu: GeluMode,
}

fn default_heads(width: usize) -> usize {
    if width >= 64 && width.is_multiple_of(64) {
        width / 64
    } else {
        1
    }
}

impl ModelConfig {
    /// Dense model with `intermediate = 4·width`, full-width attention and
    /// 64-wide heads where the width allows it.
    pub fn dense(width: usize, n_layers: usize, vocab: usize) -> Self {
        Self {
            width,
            n_layers,
            vocab,
            seq_len: DEFAULT_SEQ_LEN,
            intermediate: 4 * width,
            ffn: FfnKind::Dense,
            n_heads: default_heads(width),
            q_dim: width,
            kv_dim: width,
            rotary_base: DEFAULT_ROTARY_BASE,
            init_std: DEFAULT_INIT_STD,
            gelu: GeluMode::Exact,
        }
    }

    pub fn with_low_rank(mut self, rank: usize) -> Self {
        self.ffn = FfnKind::low_rank(rank);
        self
    }

    pub fn with_heads(mut self, n_heads: usize, n_kv_heads: usize) -> Self {
        let head_dim = self.q_dim / n_heads;
        self.n_heads = n_heads;
        self.kv_dim = n_kv_heads * head_dim;
        self
    }

    pub fn with_seq_len(mut self, seq_len: usize) -> Self {
        self.seq_len = seq_len;
        self
    }

    /// Same model with every FFN dense.
    pub fn dense_twin(&self) -> Self {
        Self {
            ffn: FfnKind::Dense,
            ..self.clone()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.q_dim / self.n_heads
    }

    pub fn n_kv_heads(&self) -> usize {
        self.kv_dim / self.head_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.vocab == 0 || self.seq_len == 0 || self.intermediate == 0 {
            return bad("width, vocab, seq_len and intermediate must be positive".into());
        }
        if self.n_heads == 0 || self.q_dim == 0 || self.kv_dim == 0 {
            return bad("heads, q_dim and kv_dim must be positive".into());
        }
        if !self.q_dim.is_multiple_of(self.n_heads) {
            return bad(format!(
                "q_dim {} not divisible by {} heads",
                self.q_dim, self.n_heads
            ));
        }
        let hd = self.head_dim();
        if !hd.is_multiple_of(2) {
            return bad(format!("head_dim {hd} must be even for rotary pairs"));
        }
        if !self.kv_dim.is_multiple_of(hd) {
            return bad(format!(
                "kv_dim {} is not a multiple of head_dim {hd}",
                self.kv_dim
            ));
        }
        if !self.n_heads.is_multiple_of(self.n_kv_heads()) {
            return bad(format!(
                "{} query heads cannot be grouped over {} kv heads",
                self.n_heads,
                self.n_kv_heads()
            ));
        }
        if let FfnKind::LowRank { rank, .. } = self.ffn {
            let max = self.width.min(self.intermediate);
            if rank == 0 || rank > max {
                return bad(format!("rank {rank} outside 1..={max}"));
            }
        }
        // written so that NaN fails too
        let finite_scales = self.rotary_base > 0.0 && self.init_std >= 0.0;
        if !finite_scales {
            return bad("rotary_base must be positive and init_std non-negative".into());
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Option<Self> {
        let v = DEFAULT_VOCAB;
        let cfg = match name {
            "s" => Self::dense(768, 12, v),
            "m" => Self::dense(1024, 24, v),
            "l" => Self::dense(1536, 24, v),
            "xl" => Self::dense(2048, 24, v),
            "gqa-m" => Self {
                intermediate: 4864,
                ..Self::dense(1024, 24, v)
            }
            .with_heads(16, 4),
            "gqa-l" => Self {
                intermediate: 7424,
                ..Self::dense(1536, 24, v)
            }
            .with_heads(24, 4),
            "wide-m" => Self {
                intermediate: 4864,
                q_dim: 512,
                ..Self::dense(1024, 24, v)
            }
            .with_heads(8, 4)
            .with_low_rank(512),
            "wide-l" => Self {
                intermediate: 7424,
                q_dim: 768,
                ..Self::dense(1536, 24, v)
            }
            .with_heads(12, 4)
            .with_low_rank(768),
            "desk" => Self::dense(64, 2, 257).with_seq_len(128),
            _ => return None,
        };
        Some(cfg)
    }

    pub const PRESETS: [&'static str; 9] = [
        "s", "m", "l", "xl", "gqa-m", "gqa-l", "wide-m", "wide-l", "desk",
    ];

    pub const KEYS: [&'static str; 14] = [
        "width",
        "layers",
        "vocab",
        "seq_len",
        "intermediate",
        "ffn",
        "rank",
        "first_block_dense",
        "heads",
        "q_dim",
        "kv_dim",
        "rotary_base",
        "init_std",
        "gelu",
    ];

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("width", self.width.to_string()),
            ("layers", self.n_layers.to_string()),
            ("vocab", self.vocab.to_string()),
            ("seq_len", self.seq_len.to_string()),
            ("intermediate", self.intermediate.to_string()),
        ];
        match self.ffn {
            FfnKind::Dense => out.push(("ffn", "dense".into())),
            FfnKind::LowRank {
                rank,
                first_block_dense,
            } => {
                out.push(("ffn", "lowrank".into()));
                out.push(("rank", rank.to_string()));
                out.push(("first_block_dense", first_block_dense.to_string()));
            }
        }
        out.extend([
            ("heads", self.n_heads.to_string()),
            ("q_dim", self.q_dim.to_string()),
            ("kv_dim", self.kv_dim.to_string()),
            ("rotary_base", self.rotary_base.to_string()),
            ("init_std", self.init_std.to_string()),
            (
                "gelu",
                match self.gelu {
                    GeluMode::Exact => "exact",
                    GeluMode::Tanh => "tanh",
                }
                .into(),
            ),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        render(&self.to_pairs())
    }

    /// Build from the model keys of `map`, starting from `base` when given.
    /// Width-derived fields follow a changed width unless set explicitly.
    pub fn from_kv(map: &KvMap, base: Option<&ModelConfig>) -> Result<Self> {
        let base = base
            .cloned()
            .unwrap_or_else(|| Self::dense(768, 12, DEFAULT_VOCAB));
        let width = map.get("width")?.unwrap_or(base.width);
        let width_changed = width != base.width;
        let derived = |key: &str, from_base: usize, from_width: usize| -> Result<usize> {
            Ok(map
                .get(key)?
                .unwrap_or(if width_changed { from_width } else { from_base }))
        };
        let q_dim = derived("q_dim", base.q_dim, width)?;
        let n_heads = derived("heads", base.n_heads, default_heads(width))?;
        let kv_dim = derived("kv_dim", base.kv_dim, q_dim)?;
        let intermediate = derived("intermediate", base.intermediate, 4 * width)?;
        let ffn = match map.get_raw("ffn") {
            None if !map.contains("rank") => base.ffn,
            Some("dense") => FfnKind::Dense,
            None | Some("lowrank") => {
                let (base_rank, base_first) = match base.ffn {
                    FfnKind::LowRank {
                        rank,
                        first_block_dense,
                    } => (Some(rank), first_block_dense),
                    FfnKind::Dense => (None, true),
                };
                let rank = match (map.get("rank")?, base_rank) {
                    (Some(r), _) => r,
                    (None, Some(r)) if !width_changed => r,
                    _ => width / 2,
                };
                FfnKind::LowRank {
                    rank,
                    first_block_dense: map.get("first_block_dense")?.unwrap_or(base_first),
                }
            }
            Some(other) => {
                return Err(Error::Parse(format!(
                    "ffn must be dense or lowrank, got `{other}`"
                )))
            }
        };
        let gelu = match map.get_raw("gelu") {
            None => base.gelu,
            Some("exact") => GeluMode::Exact,
            Some("tanh") => GeluMode::Tanh,
            Some(other) => {
                return Err(Error::Parse(format!(
                    "gelu must be exact or tanh, got `{other}`"
                )))
            }
        };
        Ok(Self {
            width,
            n_layers: map.get("layers")?.unwrap_or(base.n_layers),
            vocab: map.get("vocab")?.unwrap_or(base.vocab),
            seq_len: map.get("seq_len")?.unwrap_or(base.seq_len),
            intermediate,
            ffn,
            n_heads,
            q_dim,
            kv_dim,
            rotary_base: map.get("rotary_base")?.unwrap_or(base.rotary_base),
            init_std: map.get("init_std")?.unwrap_or(base.init_std),
            gelu,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map = KvMap::parse(text)?;
        map.reject_unknown(&Self::KEYS)?;
        Self::from_kv(&map, None)
    }
}
