//! Iterative identification of the space-dependent source `f(x)` of a 2D
//! parabolic equation
//!
//! ```text
//! du/dt - div(k grad u) + c u = f(x)     in Ω × (0, T]
//! k du/dn + mu u = 0                     on ∂Ω
//! ```
//!
//! from a final-time observation `u(x, T)` or a time-weighted average of the
//! solution. Space is discretised with P1 finite elements on a structured
//! triangulation of a rectangle, time with fully implicit (or Crank–Nicolson)
//! two-level schemes. Every inverse algorithm only solves standard Cauchy
//! problems, one per Picard iteration.
//!
//! Module map:
//!
//! * [`linalg`]: CSR matrices, preconditioned CG, mass-weighted norms and the
//!   smallest generalized eigenvalue `δ` of `(K, M)`.
//! * [`fem`]: meshes, assembly of `M` and `K`, L2 projection and `A = M⁻¹K`.
//! * [`forward`]: time grids, source terms, time stepping with streaming
//!   observers.
//! * [`inverse`]: the four identification iterations and their reports.
//! * [`harness`]: the configuration-driven experiment runner behind the CLI.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fem;
pub mod forward;
pub mod harness;
pub mod inverse;
pub mod linalg;

pub use error::{Error, Result};
pub use fem::{DiscreteOperator, Field, Mesh};
pub use forward::{Scheme, SourceTerm, TimeGrid};
pub use inverse::{IterationOptions, IterationReport, ObservationData};
