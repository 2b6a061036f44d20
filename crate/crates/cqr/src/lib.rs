//! Minimization of quartically regularized cubic polynomials
//! `m3(s) = f0 + g.s + 1/2 s.Hs + 1/6 T[s]^3 + sigma/4 |s|^4`
//! by repeated global minimization of cubic-quartic regularized quadratic
//! models, with an adaptive cubic-regularization baseline for comparison.

pub mod ar3;
pub mod arc;
pub mod driver;
pub mod error;
pub mod io;
pub mod model;
pub mod pencil;
pub mod secular;
pub mod suite;
pub mod tensor;

pub use ar3::{Ar3Problem, LocalExpansion};
pub use arc::{minimize_arc, solve_cubic_subproblem, CubicModel, CubicOutcome};
pub use driver::{minimize, BetaChoice, DriverConfig, IterRecord, RunLog, RunStatus, TheoryConstants, Variant};
pub use error::{CqrError, Result};
pub use model::{CqrPolynomial, NecessaryReport};
pub use pencil::PencilDecomposition;
pub use secular::{classify_case, solve, CaseLabel, SecularOutcome, SolveStatus, Trench};
pub use suite::{Family, SuiteSpec};
pub use tensor::SymTensor3;
