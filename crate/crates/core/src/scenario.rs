//! Experiment configuration and seeded deployment generation.
//!
//! A [`Scenario`] is immutable: node positions, indoor flags, the building
//! grid and the per-run seeds. Every random decision of a run draws from a
//! named ChaCha8 stream derived from `(base_seed, run_index)`, so runs are
//! reproducible bit-for-bit and the streams do not perturb each other (for
//! example, adding relays never moves end devices).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::phy::{Band, BandId, CaptureTable, RadioProfile};
use crate::propagation::{BuildingGrid, Position};

/// Network architecture under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Architecture {
    /// End devices talk directly to the gateway at EU868.
    SubGhzOnly,
    /// End devices talk directly to a 2.4 GHz gateway.
    TwoPointFourOnly,
    /// 2.4 GHz end devices clustered around dual-radio relays that forward
    /// aggregated frames to the gateway at EU868.
    Proposal,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [
        Architecture::SubGhzOnly,
        Architecture::TwoPointFourOnly,
        Architecture::Proposal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::SubGhzOnly => "subghz",
            Architecture::TwoPointFourOnly => "24ghz",
            Architecture::Proposal => "proposal",
        }
    }

    /// Band used by end-device uplinks.
    pub fn ed_band(self) -> BandId {
        match self {
            Architecture::SubGhzOnly => BandId::Eu868,
            _ => BandId::Ism2g4,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "subghz" | "sub-ghz" | "eu868" => Ok(Architecture::SubGhzOnly),
            "24ghz" | "2.4ghz" | "ism2g4" => Ok(Architecture::TwoPointFourOnly),
            "proposal" | "relay" => Ok(Architecture::Proposal),
            other => Err(Error::Config(format!(
                "unknown architecture '{other}' (expected subghz, 24ghz or proposal)"
            ))),
        }
    }
}

/// How the LOS/NLOS state of a link is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosModel {
    /// Segment against building footprints.
    Geometric,
    /// TR 38.901 UMa LOS probability, drawn once per node pair.
    Probabilistic,
}

impl FromStr for LosModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "geometric" => Ok(LosModel::Geometric),
            "probabilistic" => Ok(LosModel::Probabilistic),
            other => Err(Error::Config(format!(
                "unknown LOS model '{other}' (expected geometric or probabilistic)"
            ))),
        }
    }
}

/// Every knob of one experiment. Defaults reproduce the reference setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub architecture: Architecture,
    pub n_eds: usize,
    pub n_relays: usize,
    /// Side of the square deployment area, m.
    pub area_side: f64,
    pub building_side: f64,
    pub building_pitch: f64,
    pub building_height: f64,
    /// Simulated duration T, s.
    pub sim_time: f64,
    /// Payload generation period T_U, s.
    pub payload_interval: f64,
    /// Payload size B_U, bytes.
    pub payload_bytes: usize,
    pub ed_tx_power: f64,
    pub relay_tx_power: f64,
    pub ed_gain: f64,
    pub relay_gain: f64,
    pub gw_gain: f64,
    pub eu868_bandwidth: u32,
    pub ism_bandwidth: u32,
    /// `k` in CR 4/(4+k).
    pub coding_rate: u8,
    pub preamble_symbols: u16,
    pub gw_height: f64,
    pub node_height: f64,
    /// Penetration loss added per indoor endpoint, dB.
    pub o2i_loss: f64,
    pub shadowing: bool,
    pub shadowing_sigma_los: f64,
    pub shadowing_sigma_nlos: f64,
    pub los_model: LosModel,
    /// Link margin required by ADR above sensitivity, dB.
    pub adr_margin: f64,
    pub capture: CaptureTable,
    /// Relays inject their own B_U payload every T_U.
    pub relay_self_traffic: bool,
    /// Class A receive window length, in symbols of the uplink data rate.
    pub rx_window_symbols: f64,
    pub rx1_delay: f64,
    pub rx2_delay: f64,
    /// Relay frame-queue length at which further sealed frames are
    /// dropped and counted.
    pub relay_queue_limit: usize,
    pub eu868_profile: RadioProfile,
    pub ism_profile: RadioProfile,
    pub run_count: usize,
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            architecture: Architecture::Proposal,
            n_eds: 500,
            n_relays: 5,
            area_side: 5000.0,
            building_side: 50.0,
            building_pitch: 100.0,
            building_height: 20.0,
            sim_time: 300.0,
            payload_interval: 1.0,
            payload_bytes: 10,
            ed_tx_power: 12.5,
            relay_tx_power: 16.0,
            ed_gain: 0.0,
            relay_gain: 0.0,
            gw_gain: 0.0,
            eu868_bandwidth: 125_000,
            ism_bandwidth: 203_000,
            coding_rate: 1,
            preamble_symbols: 8,
            gw_height: 25.0,
            node_height: 1.5,
            o2i_loss: 20.0,
            shadowing: true,
            shadowing_sigma_los: 4.0,
            shadowing_sigma_nlos: 6.0,
            los_model: LosModel::Geometric,
            adr_margin: 10.0,
            capture: CaptureTable::default(),
            relay_self_traffic: true,
            rx_window_symbols: 5.0,
            rx1_delay: 1.0,
            rx2_delay: 2.0,
            relay_queue_limit: 10_000,
            eu868_profile: RadioProfile::sx1272(),
            ism_profile: RadioProfile::sx1280(),
            run_count: 1000,
            base_seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn with_architecture(mut self, architecture: Architecture) -> Self {
        self.architecture = architecture;
        self
    }

    pub fn profile(&self, band: BandId) -> &RadioProfile {
        match band {
            BandId::Eu868 => &self.eu868_profile,
            BandId::Ism2g4 => &self.ism_profile,
        }
    }

    pub fn bandwidth(&self, band: BandId) -> u32 {
        match band {
            BandId::Eu868 => self.eu868_bandwidth,
            BandId::Ism2g4 => self.ism_bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.architecture == Architecture::Proposal {
            let limit = Band::ism2g4().channel_count as usize;
            if self.n_relays > limit {
                return cfg_err(format!(
                    "{} relays exceed the {limit} available 2.4 GHz cluster channels",
                    self.n_relays
                ));
            }
        }
        if !(self.sim_time > 0.0) {
            return cfg_err(format!(
                "simulation time must be positive, got {}",
                self.sim_time
            ));
        }
        if !(self.payload_interval > 0.0) {
            return cfg_err(format!(
                "payload interval must be positive, got {}",
                self.payload_interval
            ));
        }
        if self.payload_bytes == 0 || self.payload_bytes > 51 {
            return cfg_err(format!(
                "payload size must be within 1..=51 B to fit every SF, got {}",
                self.payload_bytes
            ));
        }
        if !(self.gw_height > 0.0) || !(self.node_height > 0.0) {
            return cfg_err("antenna heights must be positive".into());
        }
        if !(1..=4).contains(&self.coding_rate) {
            return Err(Error::InvalidCodingRate(self.coding_rate));
        }
        if self.adr_margin < 0.0 {
            return cfg_err(format!(
                "ADR margin must be non-negative, got {}",
                self.adr_margin
            ));
        }
        if self.relay_queue_limit == 0 {
            return cfg_err("relay queue limit must be at least 1".into());
        }
        if self.run_count == 0 {
            return cfg_err("run count must be at least 1".into());
        }
        let ed_band = self.architecture.ed_band().band();
        if self.ed_tx_power > ed_band.max_tx_power_dbm {
            return Err(Error::TxPowerTooHigh {
                power: self.ed_tx_power,
                band: ed_band.id.name(),
                limit: ed_band.max_tx_power_dbm,
            });
        }
        let eu = Band::eu868();
        if self.architecture == Architecture::Proposal && self.relay_tx_power > eu.max_tx_power_dbm
        {
            return Err(Error::TxPowerTooHigh {
                power: self.relay_tx_power,
                band: eu.id.name(),
                limit: eu.max_tx_power_dbm,
            });
        }
        for band in [BandId::Eu868, BandId::Ism2g4] {
            let profile = self.profile(band);
            for sf in band.band().spreading_factors() {
                crate::phy::sensitivity(profile, sf, self.bandwidth(band))?;
            }
        }
        BuildingGrid::new(
            self.area_side,
            self.building_side,
            self.building_pitch,
            self.building_height,
        )?;
        Ok(())
    }
}

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    EdPlacement = 1,
    RelayPlacement = 2,
    Shadowing = 3,
    Los = 4,
    EdPhase = 5,
    RelayPhase = 6,
    Channel = 7,
}

/// SplitMix64 finaliser, used to decorrelate seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed material of one run.
///
/// The run seed is `splitmix64(base_seed + splitmix64(run_index))`. A named
/// stream is a ChaCha8 generator seeded with the run seed and switched to
/// the stream's ChaCha stream id. Keyed generators (one per node pair)
/// additionally mix the key into the seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub run_seed: u64,
}

impl RunSeeds {
    pub fn new(base_seed: u64, run_index: u64) -> Self {
        RunSeeds {
            run_seed: splitmix64(base_seed.wrapping_add(splitmix64(run_index))),
        }
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run_seed);
        rng.set_stream(stream as u64);
        rng
    }

    pub fn keyed(&self, stream: Stream, key: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.run_seed ^ splitmix64(key)));
        rng.set_stream(stream as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub position: Position,
    pub indoor: bool,
}

/// One immutable deployment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub run_index: u64,
    pub gateway: Position,
    pub eds: Vec<Node>,
    pub relays: Vec<Node>,
    pub grid: BuildingGrid,
    pub seeds: RunSeeds,
}

/// Centres of the building lattice.
pub fn building_centers(grid: &BuildingGrid) -> Vec<Position> {
    grid.centers()
}

fn place(rng: &mut ChaCha8Rng, count: usize, grid: &BuildingGrid, height: f64) -> Vec<Node> {
    let side = grid.area_side;
    (0..count)
        .map(|_| {
            let x = rng.random::<f64>() * side;
            let y = rng.random::<f64>() * side;
            Node {
                position: Position::new(x, y, height),
                indoor: grid.is_indoor(x, y),
            }
        })
        .collect()
}

/// Builds the deployment of run `run_index`. Deterministic in
/// `(config, run_index)`; the gateway sits at the centre of the area.
pub fn generate(config: &ExperimentConfig, run_index: u64) -> Result<Scenario> {
    config.validate()?;
    let grid = BuildingGrid::new(
        config.area_side,
        config.building_side,
        config.building_pitch,
        config.building_height,
    )?;
    let seeds = RunSeeds::new(config.base_seed, run_index);
    let eds = place(
        &mut seeds.stream(Stream::EdPlacement),
        config.n_eds,
        &grid,
        config.node_height,
    );
    let n_relays = if config.architecture == Architecture::Proposal {
        config.n_relays
    } else {
        0
    };
    let relays = place(
        &mut seeds.stream(Stream::RelayPlacement),
        n_relays,
        &grid,
        config.node_height,
    );
    let half = config.area_side / 2.0;
    Ok(Scenario {
        config: config.clone(),
        run_index,
        gateway: Position::new(half, half, config.gw_height),
        eds,
        relays,
        grid,
        seeds,
    })
}
