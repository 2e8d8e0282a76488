use thiserror::Error;

/// Failures reported by the library. Variants map one-to-one onto the
/// contract violations of the individual modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("lattice basis is degenerate (|det| = {0:e})")]
    DegenerateBasis(f64),
    #[error("no nonzero dual lattice vector within radius {0}")]
    EmptyBall(f64),
    #[error("coefficients are not Hermitian: offending pairs {0:?}")]
    NotHermitian(Vec<([i64; 2], [i64; 2])>),
    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitianMatrix(f64),
    #[error("vector ({0}, {1}) is not in the dual lattice")]
    NotLatticeVector(f64, f64),
    #[error("plane-wave cutoff too small: {0}")]
    CutoffTooSmall(String),
    #[error("potential lattice does not match the basis lattice")]
    LatticeMismatch,
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("design matrix ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("point with |xi|^2 = {0} lies outside the annulus [{1}, {2}]")]
    OutsideAnnulus(f64, f64, f64),
    #[error("block-lemma hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("crystallographic order cannot break a tie: {0}")]
    LabelAmbiguity(String),
    #[error("second-order denominator {0:e} below threshold {1:e}")]
    SmallDenominator(f64, f64),
    #[error("point is not in a resonance zone")]
    NotResonant,
    #[error("three reduced eigenvalues cluster within s at eta2 = {0}")]
    TripleCluster(f64),
    #[error("Schur complement not invertible: {0}")]
    NotInvertible(String),
    #[error("no root in bracket: {0}")]
    NoRoot(String),
    #[error("several roots in bracket: {0}")]
    MultiRoot(String),
    #[error("iteration is not contracting (step ratio {0})")]
    NoContraction(f64),
    #[error("argument outside the domain: {0}")]
    DomainError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
