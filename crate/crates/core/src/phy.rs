//! LoRa physical-layer arithmetic.
//!
//! Symbol timing, frame time on air, per-SF payload limits, receiver
//! sensitivities and co-SF capture thresholds for the two bands the
//! simulator models: EU868 (SX1272 class radios) and the 2.4 GHz ISM band
//! (SX1280 class radios).

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// LoRa spreading factor, 5..=12.
///
/// SF5 and SF6 exist only on the 2.4 GHz band; use [`Band::supports`] to
/// check a factor against a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const MIN: SpreadingFactor = SpreadingFactor(5);
    pub const MAX: SpreadingFactor = SpreadingFactor(12);

    pub fn new(value: u8) -> Result<Self> {
        if (5..=12).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::InvalidSpreadingFactor(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// All factors from 5 to 12 in ascending order.
    pub fn all() -> impl DoubleEndedIterator<Item = SpreadingFactor> {
        (5..=12).map(SpreadingFactor)
    }

    pub(crate) fn index(self) -> usize {
        (self.0 - 5) as usize
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BandId {
    Eu868,
    Ism2g4,
}

impl BandId {
    pub fn name(self) -> &'static str {
        match self {
            BandId::Eu868 => "EU868",
            BandId::Ism2g4 => "ISM2G4",
        }
    }

    pub fn band(self) -> Band {
        match self {
            BandId::Eu868 => Band::eu868(),
            BandId::Ism2g4 => Band::ism2g4(),
        }
    }
}

impl fmt::Display for BandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regulatory and channel-plan description of a frequency band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub id: BandId,
    pub carrier_ghz: f64,
    pub channel_count: u8,
    /// Fraction of time a radio may be on air, `None` when unrestricted.
    pub duty_cycle_limit: Option<f64>,
    pub max_tx_power_dbm: f64,
}

impl Band {
    /// EU868 with its three default uplink channels, 1% duty cycle and
    /// the regional +16 dBm EIRP ceiling.
    pub fn eu868() -> Self {
        Band {
            id: BandId::Eu868,
            carrier_ghz: 0.868,
            channel_count: 3,
            duty_cycle_limit: Some(0.01),
            max_tx_power_dbm: 16.0,
        }
    }

    /// 2.4 GHz ISM band: 16 channels, no duty cycle, SX1280 output ceiling.
    pub fn ism2g4() -> Self {
        Band {
            id: BandId::Ism2g4,
            carrier_ghz: 2.4,
            channel_count: 16,
            duty_cycle_limit: None,
            max_tx_power_dbm: 12.5,
        }
    }

    pub fn min_sf(&self) -> SpreadingFactor {
        match self.id {
            BandId::Eu868 => SpreadingFactor(7),
            BandId::Ism2g4 => SpreadingFactor(5),
        }
    }

    pub fn max_sf(&self) -> SpreadingFactor {
        SpreadingFactor::MAX
    }

    pub fn supports(&self, sf: SpreadingFactor) -> bool {
        sf >= self.min_sf() && sf <= self.max_sf()
    }

    /// Valid spreading factors for this band, ascending.
    pub fn spreading_factors(&self) -> impl DoubleEndedIterator<Item = SpreadingFactor> {
        (self.min_sf().0..=self.max_sf().0).map(SpreadingFactor)
    }
}

/// PHY configuration of a single transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub band: BandId,
    pub sf: SpreadingFactor,
    pub bandwidth_hz: u32,
    /// `k` in a coding rate of 4/(4+k).
    pub coding_rate: u8,
    pub tx_power_dbm: f64,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_on: bool,
}

impl RadioParams {
    /// Parameters with the frame defaults used throughout the simulator:
    /// CR 4/5, 8-symbol preamble, explicit header and CRC.
    pub fn new(
        band: BandId,
        sf: SpreadingFactor,
        bandwidth_hz: u32,
        tx_power_dbm: f64,
    ) -> Result<Self> {
        let params = RadioParams {
            band,
            sf,
            bandwidth_hz,
            coding_rate: 1,
            tx_power_dbm,
            preamble_symbols: 8,
            explicit_header: true,
            crc_on: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let band = self.band.band();
        if !band.supports(self.sf) {
            return Err(Error::UnsupportedSpreadingFactor {
                sf: self.sf.0,
                band: band.id.name(),
            });
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(Error::InvalidCodingRate(self.coding_rate));
        }
        if self.tx_power_dbm > band.max_tx_power_dbm {
            return Err(Error::TxPowerTooHigh {
                power: self.tx_power_dbm,
                band: band.id.name(),
                limit: band.max_tx_power_dbm,
            });
        }
        if self.bandwidth_hz == 0 {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        Ok(())
    }

    pub fn with_sf(mut self, sf: SpreadingFactor) -> Self {
        self.sf = sf;
        self
    }

    /// Low data rate optimisation is mandatory once a symbol exceeds 16 ms.
    pub fn low_data_rate_optimize(&self) -> bool {
        symbol_duration(self) > 0.016
    }
}

/// Duration of one chirp, `2^SF / BW` seconds.
pub fn symbol_duration(params: &RadioParams) -> f64 {
    (1u32 << params.sf.0) as f64 / params.bandwidth_hz as f64
}

/// Number of payload symbols (including the 8 header-block symbols) for a
/// frame of `payload_bytes`.
pub fn payload_symbol_count(params: &RadioParams, payload_bytes: usize) -> u32 {
    let sf = params.sf.0 as i64;
    let de = params.low_data_rate_optimize() as i64;
    let crc = params.crc_on as i64;
    let implicit = !params.explicit_header as i64;
    let numerator = 8 * payload_bytes as i64 - 4 * sf + 28 + 16 * crc - 20 * implicit;
    let denominator = 4 * (sf - 2 * de);
    // ceil for a positive denominator; negative numerators clamp to zero below
    let blocks = if numerator > 0 {
        (numerator + denominator - 1) / denominator
    } else {
        0
    };
    8 + (blocks * (params.coding_rate as i64 + 4)) as u32
}

/// Frame time on air in seconds.
pub fn time_on_air(params: &RadioParams, payload_bytes: usize) -> Result<f64> {
    let limit = max_payload(params.sf);
    if payload_bytes == 0 || payload_bytes > limit {
        return Err(Error::PayloadSize {
            bytes: payload_bytes,
            sf: params.sf.0,
            limit,
        });
    }
    let symbols =
        params.preamble_symbols as f64 + 4.25 + payload_symbol_count(params, payload_bytes) as f64;
    Ok(symbols * symbol_duration(params))
}

/// Largest MAC payload a frame may carry at the given spreading factor.
///
/// SF5 and SF6 inherit the SF7 limit.
pub fn max_payload(sf: SpreadingFactor) -> usize {
    match sf.0 {
        5..=8 => 222,
        9 => 115,
        _ => 51,
    }
}

/// Co-SF capture thresholds in dB, one per spreading factor 5..=12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureTable {
    gamma_db: [f64; 8],
}

impl CaptureTable {
    pub const DEFAULT_GAMMA_DB: f64 = 6.0;

    pub fn uniform(gamma_db: f64) -> Self {
        CaptureTable {
            gamma_db: [gamma_db; 8],
        }
    }

    /// Builds a table from the SF7..SF12 diagonal; SF5 and SF6 reuse the
    /// SF7 value.
    pub fn from_diagonal(sf7_to_sf12: [f64; 6]) -> Self {
        let mut gamma_db = [0.0; 8];
        gamma_db[2..].copy_from_slice(&sf7_to_sf12);
        gamma_db[0] = sf7_to_sf12[0];
        gamma_db[1] = sf7_to_sf12[0];
        CaptureTable { gamma_db }
    }

    pub fn gamma(&self, sf: SpreadingFactor) -> f64 {
        self.gamma_db[sf.index()]
    }

    pub fn set(&mut self, sf: SpreadingFactor, gamma_db: f64) {
        self.gamma_db[sf.index()] = gamma_db;
    }
}

impl Default for CaptureTable {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_GAMMA_DB)
    }
}

/// Receiver sensitivities and supply currents of one radio family.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioProfile {
    pub band: BandId,
    sensitivity: BTreeMap<(SpreadingFactor, u32), f64>,
    /// (output power dBm, supply current mA), ascending in power.
    tx_current: Vec<(f64, f64)>,
    pub rx_current_ma: f64,
    pub sleep_current_ma: f64,
    pub supply_voltage: f64,
}

impl RadioProfile {
    /// Semtech SX1272, used for every EU868 radio.
    pub fn sx1272() -> Self {
        let sensitivity = [
            // SX1272 datasheet, "Receiver specification", RFS_L125_HF
            // (LoRa sensitivity at 125 kHz, LnaBoost on).
            (7, 125_000, -124.0),
            (8, 125_000, -127.0),
            (9, 125_000, -130.0),
            (10, 125_000, -133.0),
            (11, 125_000, -135.0),
            (12, 125_000, -137.0),
        ];
        RadioProfile {
            band: BandId::Eu868,
            sensitivity: sensitivity
                .iter()
                .map(|&(sf, bw, s)| ((SpreadingFactor(sf), bw), s))
                .collect(),
            // SX1272 datasheet, "Power consumption": IDDT at +7 dBm and
            // +13 dBm on RFO, +17 dBm and +20 dBm on PA_BOOST.
            tx_current: vec![(7.0, 18.0), (13.0, 28.0), (17.0, 90.0), (20.0, 125.0)],
            // IDDR_L, LoRa receive at 125 kHz.
            rx_current_ma: 10.5,
            // IDDSL, sleep mode.
            sleep_current_ma: 0.0001,
            supply_voltage: 3.3,
        }
    }

    /// Semtech SX1280, used for every 2.4 GHz radio.
    pub fn sx1280() -> Self {
        let sensitivity = [
            // SX1280 datasheet, "Receiver sensitivity", LoRa at 203 kHz.
            (5, 203_125, -109.0),
            (6, 203_125, -111.0),
            (7, 203_125, -115.0),
            (8, 203_125, -118.0),
            (9, 203_125, -121.0),
            (10, 203_125, -124.0),
            (11, 203_125, -127.0),
            (12, 203_125, -130.0),
        ];
        RadioProfile {
            band: BandId::Ism2g4,
            sensitivity: sensitivity
                .iter()
                .map(|&(sf, bw, s)| ((SpreadingFactor(sf), bw), s))
                .collect(),
            // SX1280 datasheet, "Power consumption": IDDTX at 0 dBm and
            // +12.5 dBm with the DC-DC regulator.
            tx_current: vec![(0.0, 10.0), (12.5, 24.0)],
            // IDDRX, LoRa 203 kHz with DC-DC.
            rx_current_ma: 5.5,
            // IDDSLEEP with data retention.
            sleep_current_ma: 0.0012,
            supply_voltage: 3.3,
        }
    }

    pub fn for_band(band: BandId) -> Self {
        match band {
            BandId::Eu868 => Self::sx1272(),
            BandId::Ism2g4 => Self::sx1280(),
        }
    }

    pub fn set_sensitivity(&mut self, sf: SpreadingFactor, bandwidth_hz: u32, dbm: f64) {
        self.sensitivity.insert((sf, bandwidth_hz), dbm);
    }

    /// Sensitivity entries are stored per nominal bandwidth; 203 kHz and
    /// 203.125 kHz refer to the same SX1280 setting.
    fn bw_key(&self, bandwidth_hz: u32) -> u32 {
        if self.band == BandId::Ism2g4 && bandwidth_hz == 203_000 {
            203_125
        } else {
            bandwidth_hz
        }
    }

    pub fn sensitivity_entries(&self) -> impl Iterator<Item = (SpreadingFactor, u32, f64)> + '_ {
        self.sensitivity.iter().map(|(&(sf, bw), &s)| (sf, bw, s))
    }

    /// Replaces the TX current curve; points are sorted by output power.
    pub fn set_tx_current_curve(&mut self, mut points: Vec<(f64, f64)>) {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.tx_current = points;
    }

    pub fn tx_current_curve(&self) -> &[(f64, f64)] {
        &self.tx_current
    }

    /// Supply current while transmitting at `power_dbm`: the lowest table
    /// setting able to reach that power, or the highest setting when the
    /// table tops out below it.
    pub fn tx_current_ma(&self, power_dbm: f64) -> f64 {
        self.tx_current
            .iter()
            .find(|&&(p, _)| p >= power_dbm)
            .or(self.tx_current.last())
            .map_or(0.0, |&(_, ma)| ma)
    }
}

/// Tabulated receiver sensitivity in dBm.
pub fn sensitivity(profile: &RadioProfile, sf: SpreadingFactor, bandwidth_hz: u32) -> Result<f64> {
    profile
        .sensitivity
        .get(&(sf, profile.bw_key(bandwidth_hz)))
        .copied()
        .ok_or(Error::MissingSensitivity {
            sf: sf.0,
            bandwidth_hz,
            band: profile.band.name(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(v: u8) -> SpreadingFactor {
        SpreadingFactor::new(v).unwrap()
    }

    fn eu(sf_v: u8) -> RadioParams {
        RadioParams::new(BandId::Eu868, sf(sf_v), 125_000, 14.0).unwrap()
    }

    fn ism(sf_v: u8) -> RadioParams {
        RadioParams::new(BandId::Ism2g4, sf(sf_v), 203_000, 12.5).unwrap()
    }

    #[test]
    fn symbol_durations() {
        assert!((symbol_duration(&eu(7)) - 1.024e-3).abs() < 1e-15);
        assert!((symbol_duration(&eu(12)) - 32.768e-3).abs() < 1e-15);
        // 128 / 203000 evaluated by hand: 0.000630542 s
        assert!((symbol_duration(&ism(7)) - 0.630_542e-3).abs() < 1e-9);
    }

    #[test]
    fn sf7_ten_bytes_is_40_25_symbols() {
        let toa = time_on_air(&eu(7), 10).unwrap();
        assert!((toa - 0.041_216).abs() < 1e-12, "{toa}");
    }

    #[test]
    fn zero_and_oversize_payloads_rejected() {
        assert!(matches!(
            time_on_air(&eu(7), 0),
            Err(Error::PayloadSize { .. })
        ));
        assert!(matches!(
            time_on_air(&eu(10), 52),
            Err(Error::PayloadSize { limit: 51, .. })
        ));
        assert!(time_on_air(&eu(10), 51).is_ok());
    }

    #[test]
    fn ldro_only_above_16ms() {
        assert!(!eu(10).low_data_rate_optimize());
        assert!(eu(11).low_data_rate_optimize());
        assert!(ism(12).low_data_rate_optimize());
        assert!(!ism(11).low_data_rate_optimize());
    }

    #[test]
    fn payload_limits() {
        assert_eq!(max_payload(sf(9)), 115);
        assert_eq!(max_payload(sf(12)), 51);
        assert_eq!(max_payload(sf(5)), 222);
        assert_eq!(max_payload(sf(6)), 222);
        assert_eq!(max_payload(sf(8)), 222);
        assert_eq!(max_payload(sf(11)), 51);
    }

    #[test]
    fn band_sf_sets() {
        assert!(RadioParams::new(BandId::Eu868, sf(6), 125_000, 14.0).is_err());
        assert!(RadioParams::new(BandId::Ism2g4, sf(5), 203_000, 12.5).is_ok());
        assert_eq!(Band::eu868().spreading_factors().count(), 6);
        assert_eq!(Band::ism2g4().spreading_factors().count(), 8);
        assert!(SpreadingFactor::new(4).is_err());
        assert!(SpreadingFactor::new(13).is_err());
    }

    #[test]
    fn tx_power_ceiling() {
        assert!(RadioParams::new(BandId::Eu868, sf(7), 125_000, 16.0).is_ok());
        assert!(RadioParams::new(BandId::Eu868, sf(7), 125_000, 16.5).is_err());
        assert!(RadioParams::new(BandId::Ism2g4, sf(7), 203_000, 13.0).is_err());
    }

    #[test]
    fn sensitivity_lookup() {
        let p = RadioProfile::sx1272();
        assert_eq!(sensitivity(&p, sf(12), 125_000).unwrap(), -137.0);
        assert_eq!(sensitivity(&p, sf(7), 125_000).unwrap(), -124.0);
        assert!(matches!(
            sensitivity(&p, sf(5), 125_000),
            Err(Error::MissingSensitivity { .. })
        ));
        let q = RadioProfile::sx1280();
        assert_eq!(sensitivity(&q, sf(5), 203_000).unwrap(), -109.0);
        assert_eq!(sensitivity(&q, sf(5), 203_125).unwrap(), -109.0);
    }

    #[test]
    fn sensitivity_strictly_decreasing_in_sf() {
        for (profile, bw) in [
            (RadioProfile::sx1272(), 125_000),
            (RadioProfile::sx1280(), 203_000),
        ] {
            let band = profile.band.band();
            let values: Vec<f64> = band
                .spreading_factors()
                .map(|s| sensitivity(&profile, s, bw).unwrap())
                .collect();
            assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
        }
    }

    #[test]
    fn capture_table_extends_diagonal() {
        let t = CaptureTable::from_diagonal([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(t.gamma(sf(5)), 1.0);
        assert_eq!(t.gamma(sf(6)), 1.0);
        assert_eq!(t.gamma(sf(12)), 6.0);
        assert_eq!(CaptureTable::default().gamma(sf(9)), 6.0);
    }

    #[test]
    fn tx_current_picks_reaching_setting() {
        let p = RadioProfile::sx1272();
        assert_eq!(p.tx_current_ma(12.5), 28.0);
        assert_eq!(p.tx_current_ma(16.0), 90.0);
        assert_eq!(p.tx_current_ma(25.0), 125.0);
        assert_eq!(RadioProfile::sx1280().tx_current_ma(12.5), 24.0);
    }
}
