//! Gaussian rough paths on finite grids.
//!
//! The crate covers the truncated tensor algebra and its nilpotent group
//! ([`tensor`]), signature lifts of piecewise-linear paths ([`lift`]),
//! p-variation / Hölder metrics and 2D ρ-variation ([`variation`]), Gaussian
//! kernels and sampling ([`gaussian`]), Karhunen-Loève projections ([`kl`])
//! and a reproducible experiment driver ([`experiments`]).

pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod kl;
pub mod lift;
pub mod tensor;
pub mod variation;

pub use error::{Error, Result};
pub use gaussian::{cov_matrix, sample, CovKernel, CovMatrix, GaussianSampler, TableKernel};
pub use kl::{kl_decompose, IndexSet, KlBasis};
pub use lift::{lift_pl, GroupPath, SamplePath, TimeGrid};
pub use tensor::{GroupElement, LieElement, TensorElement};
pub use variation::{PVarMode, RhoVarMode};
pub use experiments::{ExperimentConfig, ResultRecord};
