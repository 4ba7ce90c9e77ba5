//! Boltzmann loop-decorated triangulations: analytic toolkit, weight
//! sequences, planar-map peeling, ricocheted random walks, and the
//! positive self-similar scaling limit.
//!
//! The crate is organized around the objects of the theory:
//!
//! * [`analytic`] — special functions: the harmonic sequence `h0`, the
//!   first-entry kernel of the negative half-line, nesting rate function,
//!   and decay constants.
//! * [`weights`] — face-weight sequences, the fixed-point (effective)
//!   weights, admissibility and criticality diagnostics, and synthesis of
//!   non-generic critical step laws.
//! * [`enumerate`] — exhaustive enumeration of peeling event sequences on
//!   small perimeters, partition-function truncations, and cross-checks
//!   against classical map counts.
//! * [`peeling`] — a half-edge representation of loop-decorated maps, the
//!   peeling events, Boltzmann samplers, and targeted peeling replay.
//! * [`arrw`] — the asymmetric ricocheted random walk: simulation,
//!   trapping probabilities by three independent routes, the conditioned
//!   walk, and nesting statistics.
//! * [`stable`] — the limiting positive self-similar Markov process: Lévy
//!   exponents, generators, simulation, and the scaling-limit experiments.

pub mod analytic;
pub mod arrw;
mod numeric;
pub mod enumerate;
pub mod peeling;
pub mod stable;
pub mod weights;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum LoopMapError {
    /// Argument outside a function's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A required numerical procedure failed to converge.
    #[error("convergence failure: {0}")]
    Convergence(String),
    /// A structural invariant of a map representation was violated.
    #[error("invalid map structure: {0}")]
    Structure(String),
    /// Parse or serialization failure.
    #[error("format error: {0}")]
    Format(String),
    /// I/O wrapper.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LoopMapError> = std::result::Result<T, E>;
