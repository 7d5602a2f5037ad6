//! Integrators and constants for the scaling limits.

pub mod constants;
pub mod io;
pub mod noise;
pub mod sde;
pub mod spde;

pub use constants::{gamma_r, v_r};
pub use noise::{coloured_noise_increment, ColouredNoise};
pub use sde::{diffusion_law, sde_step, simulate_diffusion, ClampCounter, DiffusionParams};
pub use spde::{spde_step, tracer_spde_step, SpdeParams, SpdeTerms, TracerSpdeState};
