//! Coupled random-walker / reaction-diffusion model of self-wiring neurite
//! growth.
//!
//! Growth cones perform chemotactic random walks driven by concentration
//! gradients, while every walker feeds mollified point sources back into the
//! diffusion equations for the cue species. The crate contains the analytic
//! layer used to validate the solver (heat kernels, Duhamel integrals, a
//! Picard fixed-point solver), the periodic finite element field solver, the
//! walker dynamics, the experiment scenarios, the deterministic small-width
//! limit, and the configuration / output plumbing shared with the CLI.

pub mod checks;
pub mod fem;
pub mod geom;
pub mod io;
pub mod kernel;
pub mod limit;
pub mod quad;
pub mod scenario;
pub mod walker;
