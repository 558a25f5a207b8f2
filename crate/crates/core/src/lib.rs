//! Energy-efficient power allocation for downlink NOMA.
//!
//! The crate covers the full pipeline: Rayleigh channel dataset generation,
//! the NOMA system math (SINR, rates, energy efficiency, feasibility), a
//! graph-attention power allocator trained unsupervised with a penalty
//! loss, a fractional-programming convex baseline, a grid-search oracle,
//! and the evaluation harness that compares them.

pub mod autodiff;
pub mod baselines;
pub mod data;
pub mod eval;
pub mod model;
pub mod noma;
pub mod training;

pub use baselines::{brute_force_oracle, sca_solve, ScaConfig, SolveResult, SolveStatus};
pub use data::{DatasetKind, DatasetSpec};
pub use eval::{EvalReport, ScaleTag};
pub use model::{Allocator, GatModel, MlpConfig, MlpModel, ModelConfig, ParamSet, Variant};
pub use noma::{
    FeasibilityReport, NetworkInstance, NomaError, PowerAllocation, SystemConfig, FEASIBILITY_TOL,
};
pub use training::{Checkpoint, TrainConfig, TrainError};
