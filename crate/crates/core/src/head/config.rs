use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};

/// Weight domain of a projection head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Complex,
}

impl Domain {
    /// Real scalars stored per weight entry.
    pub fn real_parts(self) -> usize {
        match self {
            Domain::Real => 1,
            Domain::Complex => 2,
        }
    }
}

/// Which final projection replaces the backbone's last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadVariant {
    /// One weight matrix shared by every variate.
    Ci,
    /// Softmax-gated mixture of full-rank experts.
    Vemoe,
    /// Softmax-gated mixture of rank-`r` factorized experts.
    VemoeLora,
}

impl HeadVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadVariant::Ci => "ci",
            HeadVariant::Vemoe => "vemoe",
            HeadVariant::VemoeLora => "vemoe_lora",
        }
    }
}

impl std::str::FromStr for HeadVariant {
    type Err = VeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ci" => Ok(HeadVariant::Ci),
            "vemoe" => Ok(HeadVariant::Vemoe),
            "vemoe_lora" => Ok(HeadVariant::VemoeLora),
            other => Err(VeError::Config(format!(
                "unknown head variant {other:?} (expected ci, vemoe or vemoe_lora)"
            ))),
        }
    }
}

/// Rank for factorized experts under a parameter expansion ratio `p`:
/// `floor(p (D+1) H / (k (D+1+H)))`, raised to 1 when it floors to zero.
pub fn lora_rank(input_dim: usize, horizon: usize, experts: usize, expansion: f64) -> usize {
    let d1 = (input_dim + 1) as f64;
    let h = horizon as f64;
    let raw = (expansion * d1 * h / (experts as f64 * (d1 + h))).floor();
    if raw < 1.0 {
        1
    } else {
        raw as usize
    }
}

/// Shape and budget of a variate-embedded head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeHeadConfig {
    /// Number of variates `C`.
    pub channels: usize,
    /// Last-layer feature width `D` (the bias makes it `D+1`).
    pub input_dim: usize,
    /// Output width `H`.
    pub horizon: usize,
    /// Embedding dimension, equal to the number of experts `k`.
    pub experts: usize,
    /// Parameter expansion ratio `p`; set only for factorized experts.
    pub expansion: Option<f64>,
    /// Expert rank; `None` for full-rank experts.
    pub rank: Option<usize>,
    pub domain: Domain,
}

impl VeHeadConfig {
    pub fn full(channels: usize, input_dim: usize, horizon: usize, experts: usize, domain: Domain) -> Self {
        Self {
            channels,
            input_dim,
            horizon,
            experts,
            expansion: None,
            rank: None,
            domain,
        }
    }

    pub fn lora(
        channels: usize,
        input_dim: usize,
        horizon: usize,
        experts: usize,
        expansion: f64,
        domain: Domain,
    ) -> Self {
        Self {
            channels,
            input_dim,
            horizon,
            experts,
            expansion: Some(expansion),
            rank: Some(lora_rank(input_dim, horizon, experts, expansion)),
            domain,
        }
    }

    pub fn for_variant(
        variant: HeadVariant,
        channels: usize,
        input_dim: usize,
        horizon: usize,
        experts: usize,
        expansion: f64,
        domain: Domain,
    ) -> Result<Self> {
        let cfg = match variant {
            HeadVariant::Ci => Self::full(channels, input_dim, horizon, 1, domain),
            HeadVariant::Vemoe => Self::full(channels, input_dim, horizon, experts, domain),
            HeadVariant::VemoeLora => Self::lora(channels, input_dim, horizon, experts, expansion, domain),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn variant(&self) -> HeadVariant {
        if self.rank.is_some() {
            HeadVariant::VemoeLora
        } else {
            HeadVariant::Vemoe
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.input_dim == 0 || self.horizon == 0 || self.experts == 0 {
            return Err(VeError::Config(format!("head dimensions must be positive: {self:?}")));
        }
        if let Some(r) = self.rank {
            if r == 0 {
                return Err(VeError::Config("expert rank must be at least 1".into()));
            }
            match self.expansion {
                Some(p) if p > 0.0 && p.is_finite() => {}
                other => {
                    return Err(VeError::Config(format!(
                        "expansion ratio must be positive, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Expansion ratio actually realized by the (possibly clamped) rank:
    /// the factorized budget `k r (D+1+H)` over the shared budget `(D+1) H`.
    pub fn effective_expansion(&self) -> Option<f64> {
        self.rank.map(|r| {
            let (d1, h) = ((self.input_dim + 1) as f64, self.horizon as f64);
            (self.experts * r) as f64 * (d1 + h) / (d1 * h)
        })
    }
}

/// How complex weight entries are tallied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountConvention {
    /// Real scalars: a complex weight counts twice.
    RealScalars,
    /// Tensor entries: a complex weight counts once.
    Entries,
}

/// Trainable scalar count of a final projection, counting complex weights as
/// two real scalars. The gate logits are always real.
pub fn param_count(config: &VeHeadConfig, variant: HeadVariant) -> usize {
    param_count_with(config, variant, CountConvention::RealScalars)
}

pub fn param_count_with(config: &VeHeadConfig, variant: HeadVariant, convention: CountConvention) -> usize {
    let weight_factor = match convention {
        CountConvention::RealScalars => config.domain.real_parts(),
        CountConvention::Entries => 1,
    };
    let (c, d1, h, k) = (config.channels, config.input_dim + 1, config.horizon, config.experts);
    match variant {
        HeadVariant::Ci => weight_factor * d1 * h,
        HeadVariant::Vemoe => c * k + weight_factor * k * d1 * h,
        HeadVariant::VemoeLora => {
            let r = config
                .rank
                .unwrap_or_else(|| lora_rank(config.input_dim, h, k, config.expansion.unwrap_or(1.0)));
            c * k + weight_factor * k * r * (d1 + h)
        }
    }
}
