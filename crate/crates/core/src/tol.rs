//! Centralized numerical tolerances.
//!
//! Three regimes cover the whole crate; tests and invariant checks reference
//! these named constants instead of scattering literals:
//!
//! * [`CONSTRUCTION`] — exactness of directly constructed objects (state
//!   norms, POVM completeness, Choi marginals, Gram matrices).
//! * [`ALGEBRAIC`] — agreement of independently derived quantities (protocol
//!   output laws, closed-form curves vs. simulation, adjoint identities).
//! * [`SOLVER`] — feasibility/stationarity targets for iterative solvers.

/// Construction-time exactness: objects built in closed form.
pub const CONSTRUCTION: f64 = 1e-12;

/// Algebraic identities: quantities reached through longer float pipelines.
pub const ALGEBRAIC: f64 = 1e-9;

/// Iterative solver feasibility and convergence residuals.
pub const SOLVER: f64 = 1e-8;

/// How Hermitian an input must be before symmetrization is refused.
pub const HERMITICITY: f64 = 1e-10;

/// Second-largest eigenvalue below this means "rank one" (pure-state
/// shortcut in fidelity computations).
pub const RANK_ONE: f64 = 1e-10;

/// Window tolerance for see-saw convergence (ΔF over a window of iterations).
pub const SEESAW_WINDOW: f64 = 1e-7;

/// Revalidation tolerance for deserialized objects: solver-grade data that
/// made one exact round trip through JSON.
pub const SERIALIZED: f64 = ALGEBRAIC;
