use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum QcError {
    #[error("map is not an orientation-preserving diffeomorphism: 1 + p'({x}) = {value}")]
    NonInvertible { x: f64, value: f64 },

    #[error("inversion did not converge at x = {x} (residual {residual:e} after {iters} iterations)")]
    NoConvergence { x: f64, residual: f64, iters: usize },

    #[error("Fourier tail too large after fit: tail/total = {ratio:e} (limit {limit:e})")]
    TruncationOverflow { ratio: f64, limit: f64 },

    #[error("continued fraction stopped early at depth {depth}: remainder below machine precision")]
    PrecisionExhausted { depth: usize },

    #[error("orbit momentum exceeded diffusion guard: |r| = {r:e} at step {step}")]
    Overflow { r: f64, step: usize },

    #[error("minimization did not converge: residual {residual:e} after {iters} iterations")]
    MinimizeNoConvergence { residual: f64, iters: usize },

    #[error("all minimization starts ended at saddle points (top Hessian eigenvalue {top_eig:e})")]
    SaddlePoint { top_eig: f64 },

    #[error("invariance certification failed: residual {residual:e} exceeds {tol:e}")]
    InvarianceCertificationFailed { residual: f64, tol: f64 },

    #[error("the two constructions of g disagree: sup difference {sup:e}")]
    ConsistencyFailure { sup: f64 },

    #[error("small divisor breakdown at mode k = {k}: |e^(2pi i k a) - 1| = {divisor:e}, |coeff| = {coeff:e}")]
    SmallDivisorBreakdown { k: i64, divisor: f64, coeff: f64 },

    #[error("reduction residual too large: {residual:e} exceeds {tol:e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("conjugator singular at phase {x}: det = {det:e}")]
    SingularConjugator { x: f64, det: f64 },

    #[error("cocycle not homotopic to identity: first-column winding {winding}")]
    WindingNonzero { winding: i64 },

    #[error("strip offset {delta} at or beyond fitted analyticity width {h0}")]
    StripTooWide { delta: f64, h0: f64 },

    #[error("nu0 = {nu0} is positive; only the nu0 < 0 normalization is supported")]
    PositiveNu0 { nu0: f64 },

    #[error("cocycle iterate norm exceeded overflow guard at step {step}")]
    IterateOverflow { step: usize },

    #[error("dual vector support of {support} modes exceeds stored potential window of {window} modes")]
    WindowTooSmall { support: usize, window: usize },

    #[error("hyperbolicity test inconclusive: margin {margin:e} within noise {noise:e}")]
    Inconclusive { margin: f64, noise: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, QcError>;
