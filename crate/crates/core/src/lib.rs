//! Block encodings and a QSVT linear solver for the linearized 1-D
//! Vlasov-Ampere system in frequency domain.
//!
//! The crate builds gate-level quantum circuits that block-encode the
//! discretized operator `i*omega0*I + A` (advection, field coupling and
//! current deposition on a position/velocity grid), verifies every circuit
//! against an independently assembled classical matrix, inverts the system
//! with a quantum singular value transformation, and cost-accounts the
//! circuits under two lowering strategies.
//!
//! Module map:
//!
//! * [`problem`] - grid, Maxwellian background, classical operator assembly
//!   and dense solve; this is the reference every circuit is checked against.
//! * [`circuit`] - register/gate IR and reusable construction primitives
//!   (state preparation, amplitude assignment, constant adders, predicate
//!   flips, controls/inversion).
//! * [`sim`] - exact statevector simulation, unitary and block extraction.
//! * [`blockenc`] - the operator block encodings, from single stencil pieces
//!   up to the full LCU of `i*omega0*I + A`.
//! * [`qsvt`] - inverse polynomial, phase finding and the end-to-end solve.
//! * [`lower`] - lowering to a CX + single-qubit basis under a baseline and
//!   an optimized strategy, with resource reports.
//!
//! All numerics are generic over the real scalar type through [`Scalar`];
//! `f64` aliases for the main types live at the crate root ([`Mat`], [`Cx`],
//! ...). Tolerances quoted in the verification suites assume `f64`.

pub mod blockenc;
pub mod circuit;
pub mod linalg;
pub mod lower;
pub mod problem;
pub mod qsvt;
pub mod scalar;
pub mod sim;

pub use scalar::Scalar;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("profile table has {got} entries, grid needs {need}")]
    ProfileLength { got: usize, need: usize },
    #[error("quantum coupling encoding requires spatially uniform density and temperature profiles")]
    NonUniformProfile,
    #[error("amplitude list must have norm 1 (got {0}) ")]
    NotNormalized(f64),
    #[error("amplitude list length {got} does not match register capacity {need}")]
    AmplitudeLength { got: usize, need: usize },
    #[error("amplitude magnitude {0} outside [-1, 1]")]
    AmplitudeRange(f64),
    #[error("matrix is singular (pivot {0} below threshold)")]
    Singular(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("qubit {0} referenced twice in one gate")]
    QubitCollision(usize),
    #[error("qubit {qubit} out of range for circuit of width {width}")]
    QubitRange { qubit: usize, width: usize },
    #[error("circuit width {width} exceeds the {limit}-qubit limit for {what}")]
    WidthGuard { width: usize, what: &'static str, limit: usize },
    #[error("circuits act on different widths ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("target tolerance {eps} needs polynomial degree above the cap {cap} (estimated {est})")]
    DegreeCap { eps: f64, cap: usize, est: usize },
    #[error("phase iteration did not converge: residual {residual} after {iters} iterations")]
    PhaseConvergence { residual: f64, iters: usize },
    #[error("condition number {kappa} too small: singular values extend below 1/kappa")]
    KappaTooSmall { kappa: f64 },
    #[error("solver configuration rejected: {0}")]
    Config(String),
    #[error("non-basis gate {0} present; lower the circuit first")]
    NonBasisGate(String),
    #[error("malformed circuit text, line {line}: {msg}")]
    CircuitText { line: usize, msg: String },
    #[error("malformed dump: {0}")]
    DumpFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Complex scalar over the crate's default `f64` precision.
pub type Cx = num_complex::Complex<f64>;
/// Dense complex matrix at the default precision.
pub type Mat = linalg::ComplexMatrix<f64>;
/// Circuit IR at the default precision (gate angles are `f64`).
pub type Circ = circuit::Circuit<f64>;
/// Block encoding at the default precision.
pub type BlockEnc = blockenc::BlockEncoding<f64>;
