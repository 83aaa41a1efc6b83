//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// All failure modes of the toolkit. Variant names follow the operation
/// contracts; the payload carries the offending value or a short context
/// string for diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    // -- problem construction --
    #[error("refraction index vanishes at sampled point {0:?}")]
    IndexVanishes(Vec<f64>),
    #[error("refraction index equals 1 at sampled collar point {0:?}")]
    IndexOneOnCollar(Vec<f64>),
    #[error("bad geometry: {0}")]
    BadGeometry(String),
    #[error("no admissible direction: the cone and (-inf,0] cover every grid direction")]
    NoAdmissibleDirection,
    #[error("spectral parameter must be nonzero")]
    ZeroSpectralParameter,

    // -- symbol machinery --
    #[error("characteristic root is real to tolerance (ellipticity violated): {0}")]
    RealRoot(String),
    #[error("leading coefficient a = 0 in the inner characteristic polynomial")]
    ZeroLeadingCoefficient,
    #[error("root imaginary parts are in the wrong half planes: {0}")]
    WrongHalfPlane(String),
    #[error("boundary symbol not elliptic: |(rho2-rho1)(lam1-rho2)| = {0:.3e} below threshold {1:.3e}")]
    NotElliptic(f64, f64),
    #[error("parametrix depth {0} exceeds the supported maximum {1}")]
    DepthTooLarge(usize, usize),
    #[error("symbolic term count {0} exceeds the configured cap {1}")]
    SymbolicOverflow(usize, usize),
    #[error("parametrix structure violated at nu = {nu}: degree {degree} > {degree_bound} or power {power} > {power_bound}")]
    StructureViolation {
        nu: usize,
        degree: usize,
        power: usize,
        degree_bound: usize,
        power_bound: usize,
    },

    // -- half-space model --
    #[error("data profile does not decay: Im theta = {0:.3e} <= 0")]
    NonDecayingData(f64),
    #[error("companion matrix eigenvalues collide: {0}")]
    DegenerateCompanionMatrix(String),
    #[error("convergence fit unstable: {0}")]
    FitUnstable(String),

    // -- discretization --
    #[error("too few collocation nodes: {0} < {1}")]
    TooFewNodes(usize, usize),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("index evaluator is not radially symmetric (relative spread {0:.3e})")]
    NotRadial(f64),
    #[error("angular mode |m| = {0} exceeds the supported maximum {1}")]
    ModeTooLarge(i32, i32),
    #[error("operator near singular at parameter {0}: condition estimate {1:.3e}")]
    NearSingular(num_complex::Complex64, f64),

    // -- eigensolver --
    #[error("argument outside validated range: {0}")]
    OutOfValidatedRange(String),
    #[error("search region touches the cone C_e (relative distance {0:.3e} < margin {1:.3e})")]
    RegionTouchesCone(f64, f64),
    #[error("unresolved cluster: candidates at {0} and {1} closer than the winding radius")]
    UnresolvedCluster(num_complex::Complex64, num_complex::Complex64),
    #[error("spectrum report does not cover |k| <= {0}: region extends to {1}")]
    IncompleteCoverage(f64, f64),

    // -- resolvent scans and quasimodes --
    #[error("scan grid has {0} cells, above the budget {1}")]
    GridTooFine(usize, usize),
    #[error("sign hypothesis on Im n violated at sampled point {0:?}")]
    HypothesisViolated(Vec<f64>),
    #[error("sigma_min underflow on the real axis at k = {0}: {1:.3e}")]
    SingularOnRealAxis(f64, f64),
    #[error("DSZ sign condition fails: Im<xi0, dV(x0)> = {0:.3e}")]
    SignConditionFails(f64),
    #[error("no Im Q > 0 branch of the Riccati equation at the requested point")]
    NoDecayingBranch,
    #[error("quasimode support leaks through the boundary: outside mass {0:.3e}")]
    SupportLeaksBoundary(f64),
    #[error("the set {{Im n >= delta}} is empty for delta = {0}")]
    EmptyOmega(f64),

    // -- operator algebra --
    #[error("instance ill-conditioned: condition estimate {0:.3e}")]
    IllConditioned(f64),
    #[error("eigenvalue extraction unstable: {0}")]
    EigenExtractionUnstable(String),

    // -- plumbing --
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
