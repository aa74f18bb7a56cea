use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spreading factor {0} is outside 5..=12")]
    InvalidSpreadingFactor(u8),

    #[error("spreading factor SF{sf} is not available in band {band}")]
    UnsupportedSpreadingFactor { sf: u8, band: &'static str },

    #[error("coding rate index {0} is outside 1..=4 (4/5 .. 4/8)")]
    InvalidCodingRate(u8),

    #[error("payload of {bytes} B is not allowed at SF{sf} (limit {limit} B)")]
    PayloadSize { bytes: usize, sf: u8, limit: usize },

    #[error("tx power {power} dBm exceeds the {band} limit of {limit} dBm")]
    TxPowerTooHigh {
        power: f64,
        band: &'static str,
        limit: f64,
    },

    #[error("no sensitivity entry for SF{sf} at {bandwidth_hz} Hz in the {band} profile")]
    MissingSensitivity {
        sf: u8,
        bandwidth_hz: u32,
        band: &'static str,
    },

    #[error("record of {bytes} B does not fit a relay frame of {limit} B")]
    Oversize { bytes: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
