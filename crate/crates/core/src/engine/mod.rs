//! The discrete-event kernel.
//!
//! A run plays periodic payload generation, duty-cycle gated transmissions
//! and relay forwarding over `[0, T]`. Link budgets and MAC decisions are
//! fixed before the first event; afterwards the only randomness is the
//! per-frame channel choice, drawn from its own stream in event order.

mod event;
mod medium;

pub use event::{Event, EventKind, EventQueue};
pub use medium::{replay, resolve_reception, FailureCause, Medium, ReceptionOutcome, Transmission};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::links::{LinkTable, NodeRef};
use crate::metrics::{
    DeliveredFrame, DeviceLedger, EnergyModel, FrameCounters, LinkClass, RunMetrics,
};
use crate::phy::{
    max_payload, symbol_duration, time_on_air, Band, BandId, RadioParams, SpreadingFactor,
};
use crate::protocol::{
    adr_select_sf, duty_cycle_gate, form_clusters, orthogonalize_relay_sfs, pick_uplink_channel,
    relay_enqueue, DutyCycleGovernor, Record, RelayBuffer,
};
use crate::scenario::{Architecture, ExperimentConfig, Scenario, Stream};

/// Time of the `k`-th payload of a source with the given phase.
fn payload_time(phase: f64, interval: f64, k: u64) -> f64 {
    phase + k as f64 * interval
}

fn draw_phases(rng: &mut ChaCha8Rng, count: usize, interval: f64) -> Vec<f64> {
    (0..count).map(|_| rng.random::<f64>() * interval).collect()
}

/// Initial payload phase of every ED, uniform in `[0, T_U)`.
pub fn ed_phases(scenario: &Scenario) -> Vec<f64> {
    draw_phases(
        &mut scenario.seeds.stream(Stream::EdPhase),
        scenario.eds.len(),
        scenario.config.payload_interval,
    )
}

fn relay_phases(scenario: &Scenario) -> Vec<f64> {
    draw_phases(
        &mut scenario.seeds.stream(Stream::RelayPhase),
        scenario.relays.len(),
        scenario.config.payload_interval,
    )
}

/// Every ED payload generation instant in `[0, T]` as `(time, ed)`, sorted
/// by time then ED id.
pub fn schedule_ed_traffic(scenario: &Scenario) -> Vec<(f64, u32)> {
    let cfg = &scenario.config;
    let mut events: Vec<(f64, u32)> = ed_phases(scenario)
        .into_iter()
        .enumerate()
        .flat_map(|(i, phase)| {
            (0..)
                .map(move |k| payload_time(phase, cfg.payload_interval, k))
                .take_while(|&t| t <= cfg.sim_time)
                .map(move |t| (t, i as u32))
        })
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    events
}

struct EdState {
    params: RadioParams,
    band: Band,
    /// `None` when there is nobody to send to.
    target: Option<NodeRef>,
    /// Cluster channel; `None` picks a random channel per frame.
    channel: Option<u8>,
    governor: DutyCycleGovernor,
    /// Generation time of the payload waiting for the radio.
    pending: Option<f64>,
    busy: bool,
    ledger: DeviceLedger,
}

struct RelayState {
    params: RadioParams,
    buffer: RelayBuffer,
    governor: DutyCycleGovernor,
    busy: bool,
    ledger: DeviceLedger,
}

fn radio(
    cfg: &ExperimentConfig,
    band: BandId,
    sf: SpreadingFactor,
    power: f64,
) -> Result<RadioParams> {
    let mut params = RadioParams::new(band, sf, cfg.bandwidth(band), power)?;
    params.coding_rate = cfg.coding_rate;
    params.preamble_symbols = cfg.preamble_symbols;
    params.validate()?;
    Ok(params)
}

struct Simulation<'a> {
    cfg: &'a ExperimentConfig,
    links: LinkTable,
    queue: EventQueue,
    medium: Medium,
    arena: Vec<Transmission>,
    eds: Vec<EdState>,
    relays: Vec<RelayState>,
    ed_phases: Vec<f64>,
    relay_phases: Vec<f64>,
    channel_rng: ChaCha8Rng,
    metrics: RunMetrics,
}

impl<'a> Simulation<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self> {
        let cfg = &scenario.config;
        let links = LinkTable::build(scenario);
        let ed_band = cfg.architecture.ed_band();
        let ed_profile = cfg.profile(ed_band);
        let ed_bw = cfg.bandwidth(ed_band);
        let max_sf = ed_band.band().max_sf();
        let governor = DutyCycleGovernor::new(ed_band.band().duty_cycle_limit);
        let ed_state = |target, sf, channel| -> Result<EdState> {
            Ok(EdState {
                params: radio(cfg, ed_band, sf, cfg.ed_tx_power)?,
                band: ed_band.band(),
                target,
                channel,
                governor,
                pending: None,
                busy: false,
                ledger: DeviceLedger::new(cfg.ed_tx_power),
            })
        };

        let mut eds = Vec::with_capacity(scenario.eds.len());
        let mut relays = Vec::with_capacity(scenario.relays.len());
        let unserved;
        if cfg.architecture == Architecture::Proposal {
            let plan = form_clusters(
                scenario.eds.len(),
                scenario.relays.len(),
                |i| links.ed_to_relays(i),
                ed_profile,
                ed_bw,
                cfg.adr_margin,
            )?;
            unserved = plan.unserved_count();
            for a in &plan.assignments {
                eds.push(match a {
                    Some(a) => {
                        let NodeRef::Relay(j) = a.target else {
                            unreachable!("EDs only associate with relays")
                        };
                        ed_state(
                            Some(a.target),
                            a.sf,
                            Some(plan.clusters[j as usize].channel_2g4),
                        )?
                    }
                    None => ed_state(None, max_sf, None)?,
                });
            }

            let eu_profile = cfg.profile(BandId::Eu868);
            let eu_bw = cfg.bandwidth(BandId::Eu868);
            let powers = links.relay_to_gateway_all();
            let candidates = powers
                .iter()
                .map(|&p| {
                    Ok(adr_select_sf(p, eu_profile, eu_bw, cfg.adr_margin)?
                        .unwrap_or(SpreadingFactor::MAX))
                })
                .collect::<Result<Vec<_>>>()?;
            let sfs = orthogonalize_relay_sfs(&candidates, powers, eu_profile, eu_bw)?;
            for (j, sf) in sfs.into_iter().enumerate() {
                relays.push(RelayState {
                    params: radio(cfg, BandId::Eu868, sf, cfg.relay_tx_power)?,
                    buffer: RelayBuffer::new(j, max_payload(sf)),
                    governor: DutyCycleGovernor::new(Band::eu868().duty_cycle_limit),
                    busy: false,
                    ledger: DeviceLedger::new(cfg.relay_tx_power),
                });
            }
        } else {
            let mut count = 0;
            for i in 0..scenario.eds.len() {
                let p_r = links.ed_to_gateway(i);
                let sf =
                    adr_select_sf(p_r, ed_profile, ed_bw, cfg.adr_margin)?.unwrap_or_else(|| {
                        count += 1;
                        max_sf
                    });
                eds.push(ed_state(Some(NodeRef::Gateway), sf, None)?);
            }
            unserved = count;
        }

        let metrics = RunMetrics {
            architecture: cfg.architecture,
            sim_time: cfg.sim_time,
            delivered: Vec::new(),
            ed_usage: Vec::new(),
            ed_energy_model: EnergyModel::from_profile(ed_profile),
            relay_usage: Vec::new(),
            relay_energy_mj: Vec::new(),
            unserved_ed_count: unserved,
            counters: [FrameCounters::default(); 3],
            superseded_payloads: 0,
            relay_queue_overflow: 0,
            relay_pending_bytes: 0,
            validity_warnings: links.validity_warnings,
        };
        Ok(Simulation {
            cfg,
            links,
            queue: EventQueue::new(),
            medium: Medium::new(),
            arena: Vec::new(),
            eds,
            relays,
            ed_phases: ed_phases(scenario),
            relay_phases: relay_phases(scenario),
            channel_rng: scenario.seeds.stream(Stream::Channel),
            metrics,
        })
    }

    fn execute(mut self) -> Result<RunMetrics> {
        let horizon = self.cfg.sim_time;
        for (i, &phase) in self.ed_phases.iter().enumerate() {
            if self.eds[i].target.is_some() && phase <= horizon {
                self.queue
                    .push(phase, EventKind::PayloadReady(NodeRef::Ed(i as u32), 0));
            }
        }
        if self.cfg.relay_self_traffic {
            for (j, &phase) in self.relay_phases.iter().enumerate() {
                if phase <= horizon {
                    self.queue
                        .push(phase, EventKind::PayloadReady(NodeRef::Relay(j as u32), 0));
                }
            }
        }

        while let Some(event) = self.queue.pop_until(horizon) {
            let now = event.time;
            match event.kind {
                EventKind::PayloadReady(node, k) => self.on_payload(node, k, now)?,
                EventKind::TxStart(node) => self.on_tx_start(node, now)?,
                EventKind::TxEnd(id) => self.on_tx_end(id, now)?,
                EventKind::Planned(_) => unreachable!("runs never schedule planned frames"),
            }
        }
        Ok(self.finish())
    }

    fn on_payload(&mut self, node: NodeRef, k: u64, now: f64) -> Result<()> {
        let next = k + 1;
        match node {
            NodeRef::Ed(i) => {
                let ed = &mut self.eds[i as usize];
                if ed.pending.replace(now).is_some() {
                    self.metrics.superseded_payloads += 1;
                }
                if !ed.busy {
                    self.schedule_ed(i as usize, now)?;
                }
                let t = payload_time(self.ed_phases[i as usize], self.cfg.payload_interval, next);
                if t <= self.cfg.sim_time {
                    self.queue.push(t, EventKind::PayloadReady(node, next));
                }
            }
            NodeRef::Relay(j) => {
                let record = Record {
                    origin: node,
                    bytes: self.cfg.payload_bytes,
                    generated_at: now,
                };
                self.relay_accept(j as usize, record, now)?;
                let t = payload_time(
                    self.relay_phases[j as usize],
                    self.cfg.payload_interval,
                    next,
                );
                if t <= self.cfg.sim_time {
                    self.queue.push(t, EventKind::PayloadReady(node, next));
                }
            }
            NodeRef::Gateway => unreachable!("the gateway generates no traffic"),
        }
        Ok(())
    }

    fn schedule_ed(&mut self, i: usize, now: f64) -> Result<()> {
        let ed = &mut self.eds[i];
        let toa = time_on_air(&ed.params, self.cfg.payload_bytes)?;
        let start = duty_cycle_gate(&mut ed.governor, now, toa);
        ed.busy = true;
        self.queue
            .push(start, EventKind::TxStart(NodeRef::Ed(i as u32)));
        Ok(())
    }

    fn schedule_relay(&mut self, j: usize, now: f64) -> Result<()> {
        let relay = &mut self.relays[j];
        let Some(frame) = relay.buffer.frame_queue.front() else {
            return Ok(());
        };
        let toa = time_on_air(&relay.params, frame.bytes)?;
        let start = duty_cycle_gate(&mut relay.governor, now, toa);
        relay.busy = true;
        self.queue
            .push(start, EventKind::TxStart(NodeRef::Relay(j as u32)));
        Ok(())
    }

    /// Buffers a record at relay `j` and wakes its EU868 radio when a frame
    /// is sealed.
    fn relay_accept(&mut self, j: usize, record: Record, now: f64) -> Result<()> {
        let relay = &mut self.relays[j];
        if relay_enqueue(&mut relay.buffer, record)? == 0 {
            return Ok(());
        }
        while relay.buffer.frame_queue.len() > self.cfg.relay_queue_limit {
            relay.buffer.frame_queue.pop_back();
            self.metrics.relay_queue_overflow += 1;
        }
        if !relay.busy {
            self.schedule_relay(j, now)?;
        }
        Ok(())
    }

    fn on_tx_start(&mut self, node: NodeRef, now: f64) -> Result<()> {
        let tx = match node {
            NodeRef::Ed(i) => {
                let ed = &mut self.eds[i as usize];
                let generated_at = ed
                    .pending
                    .take()
                    .expect("a scheduled ED frame has a payload");
                let channel = match ed.channel {
                    Some(c) => c,
                    None => pick_uplink_channel(&ed.band, &mut self.channel_rng),
                };
                let bytes = self.cfg.payload_bytes;
                Transmission {
                    tx_node: node,
                    rx_target: ed.target.expect("only EDs with a receiver transmit"),
                    band: ed.band.id,
                    channel,
                    params: ed.params,
                    start: now,
                    duration: time_on_air(&ed.params, bytes)?,
                    payload_bytes: bytes,
                    records: vec![Record {
                        origin: node,
                        bytes,
                        generated_at,
                    }],
                }
            }
            NodeRef::Relay(j) => {
                let relay = &mut self.relays[j as usize];
                let frame = relay
                    .buffer
                    .frame_queue
                    .pop_front()
                    .expect("a scheduled relay frame exists");
                let band = Band::eu868();
                Transmission {
                    tx_node: node,
                    rx_target: NodeRef::Gateway,
                    band: band.id,
                    channel: pick_uplink_channel(&band, &mut self.channel_rng),
                    params: relay.params,
                    start: now,
                    duration: time_on_air(&relay.params, frame.bytes)?,
                    payload_bytes: frame.bytes,
                    records: frame.records,
                }
            }
            NodeRef::Gateway => unreachable!("the gateway never transmits"),
        };
        let id = self.arena.len();
        let end = tx.end();
        self.metrics.counters_mut(link_class(&tx)).started += 1;
        self.arena.push(tx);
        self.medium.begin(id, &self.arena);
        self.queue.push(end, EventKind::TxEnd(id));
        Ok(())
    }

    fn on_tx_end(&mut self, id: usize, now: f64) -> Result<()> {
        let others = self.medium.finish(id, &self.arena);
        let tx = &self.arena[id];
        let profile = self.cfg.profile(tx.band);
        let outcome = resolve_reception(
            tx,
            others.iter().map(|&o| &self.arena[o]),
            &self.links,
            &self.cfg.capture,
            profile,
        )?;
        let counters = self.metrics.counters_mut(link_class(tx));
        match outcome.failure_cause {
            FailureCause::None => counters.delivered += 1,
            FailureCause::NoCoverage => counters.lost_noise += 1,
            FailureCause::Interference => counters.lost_interference += 1,
        }

        // Class A receive windows follow every uplink.
        let window = self.cfg.rx_window_symbols * symbol_duration(&tx.params);
        let ledger = match tx.tx_node {
            NodeRef::Ed(i) => &mut self.eds[i as usize].ledger,
            NodeRef::Relay(j) => &mut self.relays[j as usize].ledger,
            NodeRef::Gateway => unreachable!(),
        };
        ledger.transmit(tx.start, now);
        for delay in [self.cfg.rx1_delay, self.cfg.rx2_delay] {
            ledger.listen(now + delay, now + delay + window);
        }

        if outcome.delivered {
            match tx.rx_target {
                NodeRef::Gateway => {
                    self.metrics.delivered.push(DeliveredFrame {
                        source: tx.tx_node,
                        bytes: tx.payload_bytes,
                    });
                }
                NodeRef::Relay(j) => {
                    let records = tx.records.clone();
                    for record in records {
                        self.relay_accept(j as usize, record, now)?;
                    }
                }
                NodeRef::Ed(_) => unreachable!("EDs never receive uplinks"),
            }
        }

        match self.arena[id].tx_node {
            NodeRef::Ed(i) => {
                let ed = &mut self.eds[i as usize];
                ed.busy = false;
                if ed.pending.is_some() {
                    self.schedule_ed(i as usize, now)?;
                }
            }
            NodeRef::Relay(j) => {
                self.relays[j as usize].busy = false;
                self.schedule_relay(j as usize, now)?;
            }
            NodeRef::Gateway => unreachable!(),
        }
        Ok(())
    }

    fn finish(mut self) -> RunMetrics {
        let horizon = self.cfg.sim_time;
        // Frames still on air: count them and charge their airtime up to T.
        for tx in self.arena.iter().filter(|t| t.end() > horizon) {
            self.metrics.counters_mut(link_class(tx)).in_flight += 1;
            match tx.tx_node {
                NodeRef::Ed(i) => self.eds[i as usize].ledger.transmit(tx.start, tx.end()),
                NodeRef::Relay(j) => self.relays[j as usize].ledger.transmit(tx.start, tx.end()),
                NodeRef::Gateway => {}
            }
        }
        self.metrics.ed_usage = self.eds.iter().map(|ed| ed.ledger.usage(horizon)).collect();

        let eu_model = EnergyModel::from_profile(self.cfg.profile(BandId::Eu868));
        let ism = self.cfg.profile(BandId::Ism2g4);
        // The 2.4 GHz radio of a relay listens for its cluster all the time.
        let ism_listen_mj = ism.supply_voltage * ism.rx_current_ma * horizon;
        for relay in &self.relays {
            let usage = relay.ledger.usage(horizon);
            self.metrics
                .relay_energy_mj
                .push(crate::metrics::ed_energy(&usage, &eu_model) + ism_listen_mj);
            self.metrics.relay_usage.push(usage);
            self.metrics.relay_pending_bytes += relay.buffer.pending_bytes
                + relay
                    .buffer
                    .frame_queue
                    .iter()
                    .map(|f| f.bytes)
                    .sum::<usize>();
        }
        self.metrics
    }
}

fn link_class(tx: &Transmission) -> LinkClass {
    match (tx.tx_node, tx.rx_target) {
        (NodeRef::Relay(_), _) => LinkClass::RelayToGateway,
        (_, NodeRef::Relay(_)) => LinkClass::EdToRelay,
        _ => LinkClass::EdToGateway,
    }
}

/// Simulates one scenario over `[0, T]`.
///
/// Deterministic in the scenario. Frames still on air at `T` are reported
/// as in flight and count neither as delivered nor as lost.
pub fn run(scenario: &Scenario) -> Result<RunMetrics> {
    Simulation::new(scenario)?.execute()
}
