//! Frozen per-run link budgets.
//!
//! Every link the run can use is evaluated once at scenario time: LOS
//! state, UMa path loss, one lognormal shadowing draw per ordered node pair
//! and the O2I penalty of indoor endpoints. The table is read-only
//! afterwards.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::phy::BandId;
use crate::propagation::{self, is_los, LinkState};
use crate::scenario::{Architecture, LosModel, Node, Scenario, Stream};

/// A radio endpoint in the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Gateway,
    Ed(u32),
    Relay(u32),
}

impl NodeRef {
    fn code(self) -> u64 {
        match self {
            NodeRef::Gateway => 0,
            NodeRef::Ed(i) => (1 << 30) | i as u64,
            NodeRef::Relay(j) => (2 << 30) | j as u64,
        }
    }
}

/// Received power, in dBm, of `tx` at `rx`.
pub trait LinkPowers {
    fn rx_power_dbm(&self, tx: NodeRef, rx: NodeRef) -> f64;
}

#[derive(Debug, Clone)]
pub struct LinkTable {
    n_relays: usize,
    pub ed_gw: Vec<LinkState>,
    pub ed_relay: Vec<LinkState>,
    pub relay_gw: Vec<LinkState>,
    ed_gw_power: Vec<f64>,
    ed_relay_power: Vec<f64>,
    relay_gw_power: Vec<f64>,
    /// Links evaluated outside the path-loss model's validity range.
    pub validity_warnings: usize,
}

struct LinkBuilder<'a> {
    scenario: &'a Scenario,
    warnings: usize,
}

impl LinkBuilder<'_> {
    fn link(&mut self, tx: (NodeRef, Node), rx: (NodeRef, Node), band: BandId) -> LinkState {
        let cfg = &self.scenario.config;
        let (a, b) = (&tx.1.position, &rx.1.position);
        let los = match cfg.los_model {
            LosModel::Geometric => is_los(a, b, &self.scenario.grid),
            LosModel::Probabilistic => {
                let (lo, hi) = if tx.0.code() <= rx.0.code() {
                    (tx.0, rx.0)
                } else {
                    (rx.0, tx.0)
                };
                let key = lo.code() << 32 | hi.code();
                let u: f64 = self.scenario.seeds.keyed(Stream::Los, key).random();
                u < propagation::uma_los_probability(a.distance_2d(b))
            }
        };
        let pl = propagation::path_loss(band.band().carrier_ghz, a, b, los);
        if !pl.within_validity {
            self.warnings += 1;
        }
        let shadowing = if cfg.shadowing {
            let sigma = if los {
                cfg.shadowing_sigma_los
            } else {
                cfg.shadowing_sigma_nlos
            };
            let z: f64 = self
                .scenario
                .seeds
                .keyed(Stream::Shadowing, tx.0.code() << 32 | rx.0.code())
                .sample(StandardNormal);
            sigma * z
        } else {
            0.0
        };
        let indoor_ends = tx.1.indoor as u32 + rx.1.indoor as u32;
        LinkState {
            los,
            distance_2d: pl.distance_2d,
            distance_3d: pl.distance_3d,
            path_loss: pl.db,
            shadowing,
            o2i_loss: cfg.o2i_loss * indoor_ends as f64,
        }
    }
}

impl LinkTable {
    pub fn build(scenario: &Scenario) -> LinkTable {
        let cfg = &scenario.config;
        let gw = (
            NodeRef::Gateway,
            Node {
                position: scenario.gateway,
                indoor: false,
            },
        );
        let mut b = LinkBuilder {
            scenario,
            warnings: 0,
        };
        let ed = |i: usize| (NodeRef::Ed(i as u32), scenario.eds[i]);
        let relay = |j: usize| (NodeRef::Relay(j as u32), scenario.relays[j]);

        let proposal = cfg.architecture == Architecture::Proposal;
        let ed_gw: Vec<LinkState> = if proposal {
            Vec::new()
        } else {
            (0..scenario.eds.len())
                .map(|i| b.link(ed(i), gw, cfg.architecture.ed_band()))
                .collect()
        };
        let n_relays = scenario.relays.len();
        let mut ed_relay = Vec::with_capacity(scenario.eds.len() * n_relays);
        for i in 0..scenario.eds.len() {
            for j in 0..n_relays {
                ed_relay.push(b.link(ed(i), relay(j), BandId::Ism2g4));
            }
        }
        let relay_gw: Vec<LinkState> = (0..n_relays)
            .map(|j| b.link(relay(j), gw, BandId::Eu868))
            .collect();

        let ed_power = |l: &LinkState, g_rx: f64| {
            propagation::received_power(cfg.ed_tx_power, cfg.ed_gain, g_rx, l)
        };
        LinkTable {
            n_relays,
            ed_gw_power: ed_gw.iter().map(|l| ed_power(l, cfg.gw_gain)).collect(),
            ed_relay_power: ed_relay
                .iter()
                .map(|l| ed_power(l, cfg.relay_gain))
                .collect(),
            relay_gw_power: relay_gw
                .iter()
                .map(|l| {
                    propagation::received_power(cfg.relay_tx_power, cfg.relay_gain, cfg.gw_gain, l)
                })
                .collect(),
            ed_gw,
            ed_relay,
            relay_gw,
            validity_warnings: b.warnings,
        }
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    pub fn ed_to_gateway(&self, ed: usize) -> f64 {
        self.ed_gw_power[ed]
    }

    pub fn ed_to_relay(&self, ed: usize, relay: usize) -> f64 {
        self.ed_relay_power[ed * self.n_relays + relay]
    }

    /// Received powers of one ED at every relay, by relay id.
    pub fn ed_to_relays(&self, ed: usize) -> &[f64] {
        &self.ed_relay_power[ed * self.n_relays..(ed + 1) * self.n_relays]
    }

    pub fn relay_to_gateway(&self, relay: usize) -> f64 {
        self.relay_gw_power[relay]
    }

    pub fn relay_to_gateway_all(&self) -> &[f64] {
        &self.relay_gw_power
    }
}

impl LinkPowers for LinkTable {
    fn rx_power_dbm(&self, tx: NodeRef, rx: NodeRef) -> f64 {
        match (tx, rx) {
            (NodeRef::Ed(i), NodeRef::Gateway) if !self.ed_gw_power.is_empty() => {
                self.ed_to_gateway(i as usize)
            }
            (NodeRef::Ed(i), NodeRef::Relay(j)) => self.ed_to_relay(i as usize, j as usize),
            (NodeRef::Relay(j), NodeRef::Gateway) => self.relay_to_gateway(j as usize),
            _ => f64::NEG_INFINITY,
        }
    }
}
