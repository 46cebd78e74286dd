use thiserror::Error;

pub type Result<T> = std::result::Result<T, QlError>;

#[derive(Debug, Clone, Error)]
pub enum QlError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("insufficient decay: measured tail slope {slope:.3}, need <= -0.5")]
    InsufficientDecay { slope: f64 },
    #[error("wrong variant: {0}")]
    Variant(String),
    #[error("convexity monitor `{monitor}` violated at s = {s:.6e} (value {value:.3e})")]
    MonitorViolation {
        monitor: &'static str,
        s: f64,
        value: f64,
    },
    #[error("step too large: {0}")]
    Stability(String),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("warp field blew up (u <= 0) at s = {s:.6e}")]
    BlowUp { s: f64 },
    #[error("exact identity violated: {0}")]
    IdentityFault(String),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("conformal factor deviation {deviation:.3e} >= eps = {eps:.3e}; shrink delta")]
    ShrinkDelta { deviation: f64, eps: f64 },
    #[error("no minimal sphere found")]
    NoMinimalSphere,
    #[error("interior rejected: {0}")]
    InteriorRejected(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        source: Box<QlError>,
    },
}

impl QlError {
    pub fn at_stage(self, stage: &'static str) -> Self {
        QlError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_finite(what: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(QlError::Numeric(format!("{what} is not finite ({x})")))
    }
}
