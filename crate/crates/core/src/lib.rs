//! Relative homology of real Milnor fibres.
//!
//! The pipeline perturbs a polynomial germ `f` to `f_t = f - Σ t_i x_i`,
//! enumerates the critical points of `f_t` on the sphere of radius `delta`,
//! keeps those with value above `epsilon`, and reads off
//! `H_k(Φ, ∂Φ; Z)` as the number of critical points of Morse index `k`.
//! An independent mesh-based oracle triangulates the fibre and computes the
//! same groups by integer Smith normal form.

pub mod fibre;
pub mod homology;
pub mod morsify;
pub mod newton;
pub mod oracle;
pub mod pipeline;
pub mod poly;
pub mod report;
pub mod sampling;
pub mod sphcrit;

pub use poly::{PolyError, Polynomial};
pub use sphcrit::{CriticalPoint, SolverConfig};
