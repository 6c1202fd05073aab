//! Exact simulation and see-saw optimization of entanglement-assisted
//! prepare-and-measure protocols with quantum inputs.
//!
//! The crate is organized in five layers, each usable on its own:
//!
//! * [`tensor`] — dense complex linear algebra over labelled tensor-product
//!   spaces: Kronecker products, partial trace/transpose, subsystem
//!   permutation, Hermitian eigendecomposition, PSD projection.
//! * [`quantum`] — quantum primitives: fidelity, maximally entangled states,
//!   Weyl (generalized Pauli) operators, Choi representations of channels,
//!   POVMs, symmetric informationally complete measurements and other
//!   2-designs.
//! * [`scenario`] — prepare-and-measure scenarios with quantum inputs:
//!   input ensembles, resource states, protocol containers, correlation
//!   tables, and the fidelity/universality metrics defined on them.
//! * [`optimizer`] — a first-order semidefinite-programming solver and the
//!   see-saw loops built on it for optimizing protocols and random-access
//!   codes.
//! * [`protocols`] — concrete constructions: qubit stochastic teleportation,
//!   its composition with no-signaling boxes, random-access codes, message
//!   classicalization/quantization transformers, and closed-form fidelity
//!   curves.
//! * [`serialize`] — JSON mirrors of the protocol containers (complex
//!   entries as `[re, im]` pairs), validated on the way back in.
//!
//! # Conventions
//!
//! * Subsystem 0 is the **leftmost** tensor factor; flat indices are
//!   row-major over the subsystem list.
//! * Choi operators are states on `out ⊗ in` with unit trace and
//!   `tr_out = I/d_in`; the represented channel acts as
//!   `Λ(X) = d_in · tr_in[(1_out ⊗ Xᵀ) η]`.
//! * Maximally entangled states are normalized:
//!   `|φ⁺⟩ = (1/√d) Σ_j |jj⟩`.
//! * Weyl operators on dimension `d`: `X|j⟩ = |j+1 mod d⟩`,
//!   `Z|j⟩ = ω^j |j⟩` with `ω = exp(2πi/d)`, so `ZX = ωXZ`. A pair label
//!   `(u, v)` means `XᵘZᵛ` and flattens to `u·d + v`.

pub mod error;
pub mod optimizer;
pub mod protocols;
pub mod quantum;
pub mod scenario;
pub mod serialize;
pub mod tensor;
pub mod tol;

pub use error::{Error, Result};
pub use optimizer::{
    rac_seesaw, seesaw_from, seesaw_run, seesaw_worstcase, FidelityObjective, RacSeesawReport,
    SdpProblem, SdpSolution, SdpStatus, SeesawConfig, SeesawReport,
};
pub use protocols::{NsBox, RacStrategy};
pub use quantum::{ChoiState, Design2, KrausOp, Povm, WeylOps};
pub use scenario::{
    ClassicalProtocol, CorrelationTable, InputSet, MessageKind, Protocol, QuantumProtocol,
    ResourceSpec, ScenarioSpec,
};
pub use tensor::{Dims, Operator, PureVector, C64};
