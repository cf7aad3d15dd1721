//! Variate-embedded projection heads: gating, expert banks, mixing and
//! parameter accounting.

mod config;
mod experts;
mod gate;
mod model;
mod project;

pub use config::{lora_rank, param_count, param_count_with, CountConvention, Domain, HeadVariant, VeHeadConfig};
pub use experts::{compose_experts, ExpertBank};
pub use gate::{gate_weights, GateMatrix, VariateEmbedding};
pub use model::{head_backward, head_forward, CiHead, HeadCache, HeadGradients, ProjectionHead, VeHead, VE_INIT_STD};
pub use project::{mix_weights, ve_project};
