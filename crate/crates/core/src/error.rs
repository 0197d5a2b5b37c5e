use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("sample-rate mismatch in {context}: {left} Hz vs {right} Hz")]
    RateMismatch {
        context: &'static str,
        left: f64,
        right: f64,
    },

    #[error("bit length {0} is not a multiple of 3")]
    BitLength(usize),

    #[error("empty waveform")]
    Empty,

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("signal has zero power")]
    ZeroPower,

    #[error("bandwidth {bandwidth:.4e} Hz is not below the limit {limit:.4e} Hz")]
    AboveNyquist { bandwidth: f64, limit: f64 },

    #[error("nonlinear phase per step {phase:.3e} rad exceeds bound {bound:.3e} rad")]
    StepTooCoarse { phase: f64, bound: f64 },

    #[error("target OSNR {target:.2} dB is above the noise already present ({current:.2} dB)")]
    OsnrFloor { target: f64, current: f64 },

    #[error("noise bookkeeping is not available for this field")]
    NoiseUntracked,

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("backpropagation plan covers {plan_km} km but the link is {link_km} km")]
    PlanMismatch { plan_km: f64, link_km: f64 },

    #[error("no dominant spectral peak for frequency-offset estimation (peak/mean {0:.2})")]
    NoSpectralPeak(f64),

    #[error("required-OSNR bracket [{lo}, {hi}] dB does not straddle target BER {target:e} (BER {ber_lo:e} .. {ber_hi:e})")]
    Bracket {
        lo: f64,
        hi: f64,
        target: f64,
        ber_lo: f64,
        ber_hi: f64,
    },

    #[error("no alignment above threshold (best normalized correlation {0:.3})")]
    SyncFailure(f64),

    #[error("invalid waveform dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
