use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::decomp::{decompose, DEFAULT_KERNEL};
use super::fits::{default_cutoff, output_bins, validate_cutoff, SpectralPlan};
use crate::data::{revin_denormalize, revin_normalize, RevInState};
use crate::error::{Result, VeError};
use crate::head::{HeadCache, HeadVariant, ProjectionHead, VariateEmbedding, VeHead};
use crate::numeric::{Parameters, RealMatrix, Scalar, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    Linear,
    #[serde(rename = "dlinear")]
    DLinear,
    Fits,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::Linear => "linear",
            BackboneKind::DLinear => "dlinear",
            BackboneKind::Fits => "fits",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = VeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(BackboneKind::Linear),
            "dlinear" => Ok(BackboneKind::DLinear),
            "fits" => Ok(BackboneKind::Fits),
            other => Err(VeError::Config(format!("unknown backbone '{other}'"))),
        }
    }
}

/// Head choice of a model; `experts` and `expansion` are unused by `Ci`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub variant: HeadVariant,
    pub experts: usize,
    pub expansion: f64,
}

impl HeadSpec {
    pub fn ci() -> Self {
        Self {
            variant: HeadVariant::Ci,
            experts: 1,
            expansion: 1.0,
        }
    }

    pub fn vemoe(experts: usize) -> Self {
        Self {
            variant: HeadVariant::Vemoe,
            experts,
            expansion: 1.0,
        }
    }

    pub fn lora(experts: usize, expansion: f64) -> Self {
        Self {
            variant: HeadVariant::VemoeLora,
            experts,
            expansion,
        }
    }
}

/// Everything needed to build an untrained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub backbone: BackboneKind,
    pub lookback: usize,
    pub horizon: usize,
    /// Moving-average window of the decomposition backbone.
    pub kernel: usize,
    /// Retained spectral bins of the frequency backbone; `None` picks the default.
    pub cutoff: Option<usize>,
    pub head: HeadSpec,
}

impl ModelSpec {
    pub fn new(backbone: BackboneKind, lookback: usize, horizon: usize, head: HeadSpec) -> Self {
        Self {
            backbone,
            lookback,
            horizon,
            kernel: DEFAULT_KERNEL,
            cutoff: None,
            head,
        }
    }

    pub fn resolved_cutoff(&self) -> usize {
        self.cutoff.unwrap_or_else(|| default_cutoff(self.lookback))
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback < 2 || self.horizon == 0 {
            return Err(VeError::Config(format!(
                "look-back must be >= 2 and horizon >= 1, got {} and {}",
                self.lookback, self.horizon
            )));
        }
        if self.head.variant != HeadVariant::Ci && self.head.experts == 0 {
            return Err(VeError::Config("expert count must be positive".into()));
        }
        match self.backbone {
            BackboneKind::DLinear if self.kernel == 0 || self.kernel % 2 == 0 => Err(VeError::Config(format!(
                "moving-average kernel must be odd and positive, got {}",
                self.kernel
            ))),
            BackboneKind::Fits => validate_cutoff(self.lookback, self.resolved_cutoff()),
            _ => Ok(()),
        }
    }

    /// `(members, D, H')` of the final projection.
    pub fn head_shape(&self) -> (usize, usize, usize) {
        match self.backbone {
            BackboneKind::Linear => (1, self.lookback, self.horizon),
            BackboneKind::DLinear => (2, self.lookback, self.horizon),
            BackboneKind::Fits => {
                let cutoff = self.resolved_cutoff();
                (1, cutoff, output_bins(self.lookback, self.horizon, cutoff))
            }
        }
    }
}

/// A channel-independent backbone with a real projection head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBackbone {
    pub lookback: usize,
    pub horizon: usize,
    pub head: ProjectionHead<f64>,
}

/// Trend/seasonal decomposition with one head member per component. In VE
/// mode both members read the same embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DLinearBackbone {
    pub lookback: usize,
    pub horizon: usize,
    pub kernel: usize,
    pub head: ProjectionHead<f64>,
}

/// Low-pass spectral interpolation with a complex head mapping `cutoff`
/// input bins to the upsampled band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsBackbone {
    pub lookback: usize,
    pub horizon: usize,
    pub cutoff: usize,
    pub head: ProjectionHead<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "backbone")]
pub enum ForecastModel {
    Linear(LinearBackbone),
    #[serde(rename = "dlinear")]
    DLinear(DLinearBackbone),
    Fits(FitsBackbone),
}

/// Intermediate values of a forward pass for [`ForecastModel::backward`].
#[derive(Debug, Clone)]
pub struct ModelCache {
    revin: RevInState,
    windows: usize,
    channels: usize,
    inner: InnerCache,
}

#[derive(Debug, Clone)]
enum InnerCache {
    Real {
        inputs: Vec<Vec<f64>>,
        head: HeadCache<f64>,
    },
    Complex {
        inputs: Vec<Complex64>,
        head: HeadCache<Complex64>,
    },
}

fn build_head<S: Scalar, R: Rng + ?Sized>(
    spec: &ModelSpec,
    channels: usize,
    rng: &mut R,
) -> Result<ProjectionHead<S>> {
    let (members, d, h) = spec.head_shape();
    ProjectionHead::for_variant(
        spec.head.variant,
        members,
        channels,
        d,
        h,
        spec.head.experts,
        spec.head.expansion,
        rng,
    )
}

fn check_batch(inputs: &Tensor3, lookback: usize) -> Result<()> {
    if inputs.time() != lookback {
        return Err(VeError::shape(format!(
            "input windows have {} steps, model expects {lookback}",
            inputs.time()
        )));
    }
    Ok(())
}

impl ForecastModel {
    pub fn new<R: Rng + ?Sized>(spec: &ModelSpec, channels: usize, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        if channels == 0 {
            return Err(VeError::Config("model needs at least one variate".into()));
        }
        let (l, h) = (spec.lookback, spec.horizon);
        Ok(match spec.backbone {
            BackboneKind::Linear => ForecastModel::Linear(LinearBackbone {
                lookback: l,
                horizon: h,
                head: build_head(spec, channels, rng)?,
            }),
            BackboneKind::DLinear => ForecastModel::DLinear(DLinearBackbone {
                lookback: l,
                horizon: h,
                kernel: spec.kernel,
                head: build_head(spec, channels, rng)?,
            }),
            BackboneKind::Fits => ForecastModel::Fits(FitsBackbone {
                lookback: l,
                horizon: h,
                cutoff: spec.resolved_cutoff(),
                head: build_head(spec, channels, rng)?,
            }),
        })
    }

    pub fn kind(&self) -> BackboneKind {
        match self {
            ForecastModel::Linear(_) => BackboneKind::Linear,
            ForecastModel::DLinear(_) => BackboneKind::DLinear,
            ForecastModel::Fits(_) => BackboneKind::Fits,
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            ForecastModel::Linear(m) => m.lookback,
            ForecastModel::DLinear(m) => m.lookback,
            ForecastModel::Fits(m) => m.lookback,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ForecastModel::Linear(m) => m.horizon,
            ForecastModel::DLinear(m) => m.horizon,
            ForecastModel::Fits(m) => m.horizon,
        }
    }

    pub fn head_variant(&self) -> HeadVariant {
        match self {
            ForecastModel::Linear(m) => m.head.variant(),
            ForecastModel::DLinear(m) => m.head.variant(),
            ForecastModel::Fits(m) => m.head.variant(),
        }
    }

    /// Variate count fixed by a VE head.
    pub fn channels(&self) -> Option<usize> {
        match self {
            ForecastModel::Linear(m) => m.head.channels(),
            ForecastModel::DLinear(m) => m.head.channels(),
            ForecastModel::Fits(m) => m.head.channels(),
        }
    }

    /// Trainable scalars, counting complex weights twice.
    pub fn param_count(&self) -> usize {
        match self {
            ForecastModel::Linear(m) => m.head.param_count(),
            ForecastModel::DLinear(m) => m.head.param_count(),
            ForecastModel::Fits(m) => m.head.param_count(),
        }
    }

    pub fn embedding(&self) -> Option<&VariateEmbedding> {
        match self {
            ForecastModel::Linear(m) => m.head.as_ve().map(|h| &h.embedding),
            ForecastModel::DLinear(m) => m.head.as_ve().map(|h| &h.embedding),
            ForecastModel::Fits(m) => m.head.as_ve().map(|h| &h.embedding),
        }
    }

    /// Real head of the time-domain backbones.
    pub fn real_head(&self) -> Option<&ProjectionHead<f64>> {
        match self {
            ForecastModel::Linear(m) => Some(&m.head),
            ForecastModel::DLinear(m) => Some(&m.head),
            ForecastModel::Fits(_) => None,
        }
    }

    pub fn complex_head(&self) -> Option<&ProjectionHead<Complex64>> {
        match self {
            ForecastModel::Fits(m) => Some(&m.head),
            _ => None,
        }
    }

    /// Entry-wise magnitude of every variate's effective weights, averaged
    /// over head members: one `H' × (D+1)` matrix per variate.
    pub fn variate_weight_magnitudes(&self) -> Option<Vec<RealMatrix>> {
        fn mags<S: Scalar>(head: &VeHead<S>) -> Vec<RealMatrix> {
            let members = head.banks.len();
            let mut out: Vec<RealMatrix> = Vec::new();
            for m in 0..members {
                let ws = head.variate_weights(m).expect("member in range");
                for (c, w) in ws.iter().enumerate() {
                    let mag = w.map_modulus();
                    if m == 0 {
                        out.push(mag);
                    } else {
                        out[c].add_assign(&mag);
                    }
                }
            }
            for w in &mut out {
                for v in w.as_mut_slice() {
                    *v /= members as f64;
                }
            }
            out
        }
        match self {
            ForecastModel::Linear(m) => m.head.as_ve().map(mags),
            ForecastModel::DLinear(m) => m.head.as_ve().map(mags),
            ForecastModel::Fits(m) => m.head.as_ve().map(mags),
        }
    }

    pub fn validate_input(&self, inputs: &Tensor3) -> Result<()> {
        check_batch(inputs, self.lookback())?;
        if let Some(c) = self.channels() {
            if c != inputs.channels() {
                return Err(VeError::shape(format!(
                    "model has {c} variates, input has {}",
                    inputs.channels()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Tensor3) -> Result<Tensor3> {
        Ok(self.forward_train(inputs)?.0)
    }

    /// Forecasts `B × H × C` from `B × L × C` windows and keeps what the
    /// backward pass needs.
    pub fn forward_train(&self, inputs: &Tensor3) -> Result<(Tensor3, ModelCache)> {
        self.validate_input(inputs)?;
        let (windows, _, channels) = inputs.dims();
        let (normed, revin) = revin_normalize(inputs)?;
        let rows = normed.to_variate_rows();
        let horizon = self.horizon();
        let (pred_rows, inner) = match self {
            ForecastModel::Linear(m) => {
                let x = rows.into_vec();
                let (y, head) = m.head.forward(&[&x], windows, channels)?;
                (y, InnerCache::Real { inputs: vec![x], head })
            }
            ForecastModel::DLinear(m) => {
                let l = m.lookback;
                let mut trend = Vec::with_capacity(rows.as_slice().len());
                let mut seasonal = Vec::with_capacity(rows.as_slice().len());
                for row in rows.as_slice().chunks_exact(l) {
                    let (t, s) = decompose(row, m.kernel)?;
                    trend.extend(t);
                    seasonal.extend(s);
                }
                let (y, head) = m.head.forward(&[&trend, &seasonal], windows, channels)?;
                (
                    y,
                    InnerCache::Real {
                        inputs: vec![trend, seasonal],
                        head,
                    },
                )
            }
            ForecastModel::Fits(m) => {
                let plan = SpectralPlan::new(m.lookback, m.horizon, m.cutoff)?;
                let mut bands = vec![Complex64::new(0.0, 0.0); rows.rows() * m.cutoff];
                for (row, band) in rows.as_slice().chunks_exact(m.lookback).zip(bands.chunks_exact_mut(m.cutoff)) {
                    plan.analyze(row, band)?;
                }
                let (mapped, head) = m.head.forward(&[&bands], windows, channels)?;
                let mut y = Vec::with_capacity(rows.rows() * horizon);
                for band in mapped.chunks_exact(plan.out_bins) {
                    let series = plan.synthesize(band)?;
                    y.extend_from_slice(&series[m.lookback..]);
                }
                (y, InnerCache::Complex { inputs: bands, head })
            }
        };
        let pred_rows = RealMatrix::from_vec(windows * channels, horizon, pred_rows)?;
        let pred = revin_denormalize(&Tensor3::from_variate_rows(&pred_rows, windows, channels)?, &revin)?;
        Ok((
            pred,
            ModelCache {
                revin,
                windows,
                channels,
                inner,
            },
        ))
    }

    /// Gradient of a loss with respect to every trainable parameter, given
    /// its gradient with respect to the denormalized forecast. The result
    /// has the same structure as `self`.
    pub fn backward(&self, cache: &ModelCache, grad_pred: &Tensor3) -> Result<ForecastModel> {
        let (windows, channels, horizon) = (cache.windows, cache.channels, self.horizon());
        if grad_pred.dims() != (windows, horizon, channels) {
            return Err(VeError::shape(format!(
                "forecast gradient is {:?}, expected {:?}",
                grad_pred.dims(),
                (windows, horizon, channels)
            )));
        }
        // d(pred)/d(normalized pred) is the window std
        let mut scaled = grad_pred.clone();
        for b in 0..windows {
            for t in 0..horizon {
                for c in 0..channels {
                    scaled.set(b, t, c, grad_pred.get(b, t, c) * cache.revin.stds.get(b, c));
                }
            }
        }
        let grad_rows = scaled.to_variate_rows().into_vec();
        match (self, &cache.inner) {
            (ForecastModel::Linear(m), InnerCache::Real { inputs, head }) => {
                let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                let (g, _) = m.head.backward(head, &refs, &grad_rows, false)?;
                Ok(ForecastModel::Linear(LinearBackbone {
                    lookback: m.lookback,
                    horizon: m.horizon,
                    head: g,
                }))
            }
            (ForecastModel::DLinear(m), InnerCache::Real { inputs, head }) => {
                let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                let (g, _) = m.head.backward(head, &refs, &grad_rows, false)?;
                Ok(ForecastModel::DLinear(DLinearBackbone {
                    lookback: m.lookback,
                    horizon: m.horizon,
                    kernel: m.kernel,
                    head: g,
                }))
            }
            (ForecastModel::Fits(m), InnerCache::Complex { inputs, head }) => {
                let plan = SpectralPlan::new(m.lookback, m.horizon, m.cutoff)?;
                let mut grad_band = vec![Complex64::new(0.0, 0.0); windows * channels * plan.out_bins];
                for (g, out) in grad_rows.chunks_exact(horizon).zip(grad_band.chunks_exact_mut(plan.out_bins)) {
                    plan.synthesize_adjoint(g, out)?;
                }
                let (g, _) = m.head.backward(head, &[inputs], &grad_band, false)?;
                Ok(ForecastModel::Fits(FitsBackbone {
                    lookback: m.lookback,
                    horizon: m.horizon,
                    cutoff: m.cutoff,
                    head: g,
                }))
            }
            _ => Err(VeError::shape("cache was produced by a different backbone")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| VeError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| VeError::Format(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| VeError::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| VeError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    /// Structural consistency of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let (members, d, h) = match self {
            ForecastModel::Linear(m) => (1, m.lookback, m.horizon),
            ForecastModel::DLinear(m) => {
                if m.kernel == 0 || m.kernel % 2 == 0 {
                    return Err(VeError::Format(format!("invalid kernel {}", m.kernel)));
                }
                (2, m.lookback, m.horizon)
            }
            ForecastModel::Fits(m) => {
                validate_cutoff(m.lookback, m.cutoff)?;
                (1, m.cutoff, output_bins(m.lookback, m.horizon, m.cutoff))
            }
        };
        let (hm, hd, hh) = match self {
            ForecastModel::Linear(m) => head_dims(&m.head)?,
            ForecastModel::DLinear(m) => head_dims(&m.head)?,
            ForecastModel::Fits(m) => head_dims(&m.head)?,
        };
        if (hm, hd, hh) != (members, d, h) {
            return Err(VeError::Format(format!(
                "head has {hm} members of {hh}x{}, backbone needs {members} of {h}x{}",
                hd + 1,
                d + 1
            )));
        }
        Ok(())
    }
}

fn head_dims<S: Scalar>(head: &ProjectionHead<S>) -> Result<(usize, usize, usize)> {
    match head {
        ProjectionHead::ChannelIndependent(h) => {
            if h.weights.is_empty() || h.weights.iter().any(|w| w.shape() != (h.horizon, h.input_dim + 1)) {
                return Err(VeError::Format("channel-independent weights do not match their shape".into()));
            }
        }
        ProjectionHead::VariateEmbedded(h) => h.validate().map_err(|e| VeError::Format(e.to_string()))?,
    }
    Ok((head.members(), head.input_dim(), head.horizon()))
}

impl Parameters for ForecastModel {
    fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            ForecastModel::Linear(m) => m.head.write_params(out),
            ForecastModel::DLinear(m) => m.head.write_params(out),
            ForecastModel::Fits(m) => m.head.write_params(out),
        }
    }

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()> {
        match self {
            ForecastModel::Linear(m) => m.head.read_params(src),
            ForecastModel::DLinear(m) => m.head.read_params(src),
            ForecastModel::Fits(m) => m.head.read_params(src),
        }
    }
}

pub fn linear_forward(model: &LinearBackbone, inputs: &Tensor3) -> Result<Tensor3> {
    ForecastModel::Linear(model.clone()).forward(inputs)
}

pub fn dlinear_forward(model: &DLinearBackbone, inputs: &Tensor3) -> Result<Tensor3> {
    ForecastModel::DLinear(model.clone()).forward(inputs)
}

pub fn fits_forward(model: &FitsBackbone, inputs: &Tensor3) -> Result<Tensor3> {
    ForecastModel::Fits(model.clone()).forward(inputs)
}
