//! Stochastic simulation of allele frequencies under temporally and
//! spatially fluctuating selection.
//!
//! * [`nonspatial`]: the event-driven Lambda-Fleming-Viot process with a
//!   fluctuating environment and its diffusion rescaling.
//! * [`slfv`]: the spatial version on a periodic grid, with tracers and
//!   local averaging.
//! * [`limits`]: Euler-Maruyama and finite-difference integrators for the
//!   limiting diffusion and SPDEs, plus the geometric constants `Γ_R`, `V_R`.
//! * [`duals`]: branching-annihilating dual processes and Monte-Carlo
//!   checks of the moment dualities.
//! * [`moran`]: the deme-based spatial Moran model with ancestral-origin
//!   tracking and record files.
//!
//! Shared pieces (domains, kernels, environment fields, seeded streams)
//! live in [`domain`], [`kernel`], [`environment`] and [`rng`].

pub mod domain;
pub mod duals;
pub mod environment;
pub mod error;
pub mod field;
pub mod factor;
pub mod kernel;
pub mod limits;
pub mod moran;
pub mod nonspatial;
pub mod parallel;
pub mod rng;
pub mod slfv;
pub mod stats;

pub use domain::SpatialDomain;
pub use environment::{EnvironmentField, EnvironmentSampler};
pub use error::{Error, Result};
pub use field::FrequencyField;
pub use kernel::{EnvironmentKernel, KernelKind, UnderlyingCorrelation};
pub use rng::{RngContract, Substream};
