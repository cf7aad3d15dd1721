//! Final projection heads shared by every backbone.
//!
//! Inputs use a variate-major layout: for `n` windows and `C` variates the
//! row of window `w` and variate `c` is `c * n + w`. A head can have several
//! members (DLinear's trend and seasonal inputs); the output is the sum of
//! every member's projection.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VeError};
use crate::numeric::{Matrix, Parameters, RealMatrix, Scalar};

use super::config::{param_count, Domain, HeadVariant, VeHeadConfig};
use super::experts::{compose_experts, uniform_matrix, ExpertBank};
use super::gate::{gate_weights, softmax_backward, GateMatrix, VariateEmbedding};
use super::project::{mix_one, project_block, project_block_backward};

/// Standard deviation of the initial embedding logits.
pub const VE_INIT_STD: f64 = 0.01;

/// One weight matrix per member, shared by all variates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct CiHead<S> {
    pub input_dim: usize,
    pub horizon: usize,
    pub weights: Vec<Matrix<S>>,
}

/// One bank of experts per member, all gated by a single embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
pub struct VeHead<S> {
    pub config: VeHeadConfig,
    pub embedding: VariateEmbedding,
    pub banks: Vec<ExpertBank<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Scalar"))]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProjectionHead<S> {
    ChannelIndependent(CiHead<S>),
    VariateEmbedded(VeHead<S>),
}

/// Values from a forward pass needed by the matching backward pass.
#[derive(Debug, Clone)]
pub struct HeadCache<S> {
    windows: usize,
    channels: usize,
    gate: Option<GateMatrix>,
    experts: Vec<Vec<Matrix<S>>>,
}

impl<S: Scalar> CiHead<S> {
    pub fn init<R: Rng + ?Sized>(members: usize, input_dim: usize, horizon: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((input_dim + 1) as f64).sqrt();
        Self {
            input_dim,
            horizon,
            weights: (0..members)
                .map(|_| uniform_matrix(horizon, input_dim + 1, bound, rng))
                .collect(),
        }
    }

    pub fn from_weights(weights: Vec<Matrix<S>>) -> Result<Self> {
        let (h, d1) = weights
            .first()
            .map(Matrix::shape)
            .ok_or_else(|| VeError::Config("head needs at least one member".into()))?;
        if d1 < 2 || weights.iter().any(|w| w.shape() != (h, d1)) {
            return Err(VeError::shape("member weights must share an H x (D+1) shape with D >= 1"));
        }
        Ok(Self {
            input_dim: d1 - 1,
            horizon: h,
            weights,
        })
    }
}

impl<S: Scalar> VeHead<S> {
    pub fn init<R: Rng + ?Sized>(config: VeHeadConfig, members: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if members == 0 {
            return Err(VeError::Config("head needs at least one member".into()));
        }
        let normal = Normal::new(0.0, VE_INIT_STD).expect("positive std");
        let logits = RealMatrix::from_fn(config.experts, config.channels, |_, _| normal.sample(rng));
        let banks = (0..members)
            .map(|_| ExpertBank::init(config.experts, config.input_dim, config.horizon, config.rank, rng))
            .collect();
        Ok(Self {
            config,
            embedding: VariateEmbedding::new(logits),
            banks,
        })
    }

    pub fn from_parts(config: VeHeadConfig, embedding: VariateEmbedding, banks: Vec<ExpertBank<S>>) -> Result<Self> {
        let head = Self {
            config,
            embedding,
            banks,
        };
        head.validate()?;
        Ok(head)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let cfg = &self.config;
        if self.embedding.logits.shape() != (cfg.experts, cfg.channels) {
            return Err(VeError::shape(format!(
                "embedding is {:?}, config wants {}x{}",
                self.embedding.logits.shape(),
                cfg.experts,
                cfg.channels
            )));
        }
        if self.banks.is_empty() {
            return Err(VeError::Config("head needs at least one member".into()));
        }
        for bank in &self.banks {
            bank.validate()?;
            if bank.experts() != cfg.experts
                || bank.expert_shape() != (cfg.horizon, cfg.input_dim + 1)
                || bank.rank() != cfg.rank
            {
                return Err(VeError::shape("expert bank does not match the head config"));
            }
        }
        Ok(())
    }

    pub fn gate(&self) -> GateMatrix {
        gate_weights(&self.embedding)
    }

    /// Per-variate effective weights of one member.
    pub fn variate_weights(&self, member: usize) -> Result<Vec<Matrix<S>>> {
        let bank = self
            .banks
            .get(member)
            .ok_or_else(|| VeError::Index(format!("member {member} of {}", self.banks.len())))?;
        let experts = compose_experts(bank);
        let gate = self.gate();
        Ok((0..self.config.channels).map(|c| mix_one(&experts, &gate, c)).collect())
    }
}

impl<S: Scalar> ProjectionHead<S> {
    pub fn ci<R: Rng + ?Sized>(members: usize, input_dim: usize, horizon: usize, rng: &mut R) -> Self {
        ProjectionHead::ChannelIndependent(CiHead::init(members, input_dim, horizon, rng))
    }

    pub fn ve<R: Rng + ?Sized>(config: VeHeadConfig, members: usize, rng: &mut R) -> Result<Self> {
        Ok(ProjectionHead::VariateEmbedded(VeHead::init(config, members, rng)?))
    }

    /// Builds the head for a variant; `experts` and `expansion` are ignored by `Ci`.
    pub fn for_variant<R: Rng + ?Sized>(
        variant: HeadVariant,
        members: usize,
        channels: usize,
        input_dim: usize,
        horizon: usize,
        experts: usize,
        expansion: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if members == 0 || input_dim == 0 || horizon == 0 {
            return Err(VeError::Config("head dimensions must be positive".into()));
        }
        let domain = if S::REAL_PARTS == 2 { Domain::Complex } else { Domain::Real };
        match variant {
            HeadVariant::Ci => Ok(Self::ci(members, input_dim, horizon, rng)),
            _ => {
                let cfg =
                    VeHeadConfig::for_variant(variant, channels, input_dim, horizon, experts, expansion, domain)?;
                Self::ve(cfg, members, rng)
            }
        }
    }

    pub fn variant(&self) -> HeadVariant {
        match self {
            ProjectionHead::ChannelIndependent(_) => HeadVariant::Ci,
            ProjectionHead::VariateEmbedded(h) => h.config.variant(),
        }
    }

    pub fn members(&self) -> usize {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.weights.len(),
            ProjectionHead::VariateEmbedded(h) => h.banks.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.input_dim,
            ProjectionHead::VariateEmbedded(h) => h.config.input_dim,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.horizon,
            ProjectionHead::VariateEmbedded(h) => h.config.horizon,
        }
    }

    /// Variate count fixed by the head, if any.
    pub fn channels(&self) -> Option<usize> {
        match self {
            ProjectionHead::ChannelIndependent(_) => None,
            ProjectionHead::VariateEmbedded(h) => Some(h.config.channels),
        }
    }

    pub fn as_ve(&self) -> Option<&VeHead<S>> {
        match self {
            ProjectionHead::VariateEmbedded(h) => Some(h),
            ProjectionHead::ChannelIndependent(_) => None,
        }
    }

    /// Closed-form parameter count summed over members, counting complex
    /// weights as two scalars.
    pub fn param_count(&self) -> usize {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.weights.len() * h.horizon * (h.input_dim + 1) * S::REAL_PARTS,
            ProjectionHead::VariateEmbedded(h) => {
                let cfg = &h.config;
                let one = param_count(cfg, cfg.variant());
                let logits = cfg.channels * cfg.experts;
                logits + h.banks.len() * (one - logits)
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            ProjectionHead::ChannelIndependent(h) => ProjectionHead::ChannelIndependent(CiHead {
                input_dim: h.input_dim,
                horizon: h.horizon,
                weights: h.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect(),
            }),
            ProjectionHead::VariateEmbedded(h) => ProjectionHead::VariateEmbedded(VeHead {
                config: h.config,
                embedding: VariateEmbedding::zeros(h.config.experts, h.config.channels),
                banks: h.banks.iter().map(ExpertBank::zeros_like).collect(),
            }),
        }
    }

    fn check_inputs(&self, inputs: &[&[S]], windows: usize, channels: usize) -> Result<()> {
        if inputs.len() != self.members() {
            return Err(VeError::shape(format!("{} inputs for {} head members", inputs.len(), self.members())));
        }
        if let Some(c) = self.channels() {
            if c != channels {
                return Err(VeError::shape(format!("head has {c} variates, input has {channels}")));
            }
        }
        let need = windows * channels * self.input_dim();
        if let Some(bad) = inputs.iter().find(|x| x.len() != need) {
            return Err(VeError::shape(format!("member input has {} values, expected {need}", bad.len())));
        }
        Ok(())
    }

    /// Projects `windows × channels` rows of width `D` per member to rows of
    /// width `H`, summing over members.
    pub fn forward(&self, inputs: &[&[S]], windows: usize, channels: usize) -> Result<(Vec<S>, HeadCache<S>)> {
        self.check_inputs(inputs, windows, channels)?;
        let (d, h) = (self.input_dim(), self.horizon());
        let mut out = vec![S::zero(); windows * channels * h];
        let cache = match self {
            ProjectionHead::ChannelIndependent(head) => {
                for (x, w) in inputs.iter().zip(&head.weights) {
                    project_block(x, w, &mut out);
                }
                HeadCache {
                    windows,
                    channels,
                    gate: None,
                    experts: Vec::new(),
                }
            }
            ProjectionHead::VariateEmbedded(head) => {
                let gate = head.gate();
                let experts: Vec<Vec<Matrix<S>>> = head.banks.iter().map(compose_experts).collect();
                for c in 0..channels {
                    let (xs, ys) = (c * windows * d..(c + 1) * windows * d, c * windows * h..(c + 1) * windows * h);
                    for (x, ex) in inputs.iter().zip(&experts) {
                        let w = mix_one(ex, &gate, c);
                        project_block(&x[xs.clone()], &w, &mut out[ys.clone()]);
                    }
                }
                HeadCache {
                    windows,
                    channels,
                    gate: Some(gate),
                    experts,
                }
            }
        };
        Ok((out, cache))
    }

    /// Parameter gradients (as a head of the same shape) and, if requested,
    /// gradients with respect to every member input.
    pub fn backward(
        &self,
        cache: &HeadCache<S>,
        inputs: &[&[S]],
        grad_out: &[S],
        want_input_grad: bool,
    ) -> Result<(Self, Option<Vec<Vec<S>>>)> {
        let (windows, channels) = (cache.windows, cache.channels);
        self.check_inputs(inputs, windows, channels)?;
        let (d, h) = (self.input_dim(), self.horizon());
        if grad_out.len() != windows * channels * h {
            return Err(VeError::shape(format!(
                "upstream gradient has {} values, expected {}",
                grad_out.len(),
                windows * channels * h
            )));
        }
        let mut grad_x: Option<Vec<Vec<S>>> =
            want_input_grad.then(|| inputs.iter().map(|x| vec![S::zero(); x.len()]).collect());
        let grads = match self {
            ProjectionHead::ChannelIndependent(head) => {
                let mut gw: Vec<Matrix<S>> = head.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
                for (m, (x, w)) in inputs.iter().zip(&head.weights).enumerate() {
                    let gx = grad_x.as_mut().map(|g| g[m].as_mut_slice());
                    project_block_backward(x, w, grad_out, &mut gw[m], gx);
                }
                ProjectionHead::ChannelIndependent(CiHead {
                    input_dim: d,
                    horizon: h,
                    weights: gw,
                })
            }
            ProjectionHead::VariateEmbedded(head) => {
                let gate = cache
                    .gate
                    .as_ref()
                    .ok_or_else(|| VeError::shape("cache was produced by a different head"))?;
                let k = head.config.experts;
                let mut grad_gate = RealMatrix::zeros(k, channels);
                let mut grad_experts: Vec<Vec<Matrix<S>>> = cache
                    .experts
                    .iter()
                    .map(|ex| ex.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect())
                    .collect();
                let mut gw = Matrix::zeros(h, d + 1);
                for c in 0..channels {
                    let (xs, ys) = (c * windows * d..(c + 1) * windows * d, c * windows * h..(c + 1) * windows * h);
                    for (m, (x, ex)) in inputs.iter().zip(&cache.experts).enumerate() {
                        let w = mix_one(ex, gate, c);
                        gw.fill_zero();
                        let gx = grad_x.as_mut().map(|g| &mut g[m][xs.clone()]);
                        project_block_backward(&x[xs.clone()], &w, &grad_out[ys.clone()], &mut gw, gx);
                        for (j, p) in ex.iter().enumerate() {
                            grad_experts[m][j].add_scaled(&gw, gate.get(j, c));
                            grad_gate.set(j, c, grad_gate.get(j, c) + gw.re_inner(p));
                        }
                    }
                }
                let banks = head
                    .banks
                    .iter()
                    .zip(grad_experts)
                    .map(|(bank, ge)| bank.backward(ge))
                    .collect::<Result<Vec<_>>>()?;
                ProjectionHead::VariateEmbedded(VeHead {
                    config: head.config,
                    embedding: VariateEmbedding::new(softmax_backward(gate, &grad_gate)),
                    banks,
                })
            }
        };
        Ok((grads, grad_x))
    }
}

impl<S: Scalar> Parameters for ProjectionHead<S> {
    fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.weights.write_params(out),
            ProjectionHead::VariateEmbedded(h) => {
                h.embedding.logits.write_params(out);
                h.banks.write_params(out);
            }
        }
    }

    fn read_params(&mut self, src: &mut &[f64]) -> Result<()> {
        match self {
            ProjectionHead::ChannelIndependent(h) => h.weights.read_params(src),
            ProjectionHead::VariateEmbedded(h) => {
                h.embedding.logits.read_params(src)?;
                h.banks.read_params(src)
            }
        }
    }
}

/// Gradients of a single-member head evaluated on a `D × C` input.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients<S> {
    pub embedding: RealMatrix,
    pub bank: ExpertBank<S>,
    pub input: Matrix<S>,
}

fn single_member<S: Scalar>(config: &VeHeadConfig, ve: &VariateEmbedding, bank: &ExpertBank<S>) -> Result<ProjectionHead<S>> {
    Ok(ProjectionHead::VariateEmbedded(VeHead::from_parts(
        *config,
        ve.clone(),
        vec![bank.clone()],
    )?))
}

/// `Y: H × C` from last-layer inputs `X: D × C` through gating, expert
/// composition, mixing and projection.
pub fn head_forward<S: Scalar>(
    config: &VeHeadConfig,
    ve: &VariateEmbedding,
    bank: &ExpertBank<S>,
    x: &Matrix<S>,
) -> Result<Matrix<S>> {
    let head = single_member(config, ve, bank)?;
    let (d, channels) = x.shape();
    if d != config.input_dim {
        return Err(VeError::shape(format!("input has {d} rows, head expects {}", config.input_dim)));
    }
    let xt = x.transpose();
    let (y, _) = head.forward(&[xt.as_slice()], 1, channels)?;
    Ok(Matrix::from_vec(channels, config.horizon, y)?.transpose())
}

pub fn head_backward<S: Scalar>(
    config: &VeHeadConfig,
    ve: &VariateEmbedding,
    bank: &ExpertBank<S>,
    x: &Matrix<S>,
    grad_y: &Matrix<S>,
) -> Result<HeadGradients<S>> {
    let head = single_member(config, ve, bank)?;
    let (d, channels) = x.shape();
    if d != config.input_dim || grad_y.shape() != (config.horizon, channels) {
        return Err(VeError::shape("input or upstream gradient does not match the head"));
    }
    let xt = x.transpose();
    let (_, cache) = head.forward(&[xt.as_slice()], 1, channels)?;
    let gt = grad_y.transpose();
    let (grads, gx) = head.backward(&cache, &[xt.as_slice()], gt.as_slice(), true)?;
    let gx = gx.expect("requested").pop().expect("one member");
    match grads {
        ProjectionHead::VariateEmbedded(g) => Ok(HeadGradients {
            embedding: g.embedding.logits,
            bank: g.banks.into_iter().next().expect("one member"),
            input: Matrix::from_vec(channels, d, gx)?.transpose(),
        }),
        ProjectionHead::ChannelIndependent(_) => unreachable!("gradient mirrors the head"),
    }
}
