//! Invariants of the MAC rules and of whole runs.

use proptest::prelude::*;
use relaysim_core::engine::replay;
use relaysim_core::metrics::LinkClass;
use relaysim_core::phy::{max_payload, sensitivity, time_on_air};
use relaysim_core::protocol::{
    adr_select_sf, duty_cycle_gate, form_clusters, orthogonalize_relay_sfs, relay_enqueue,
    DutyCycleGovernor, Record, RelayBuffer,
};
use relaysim_core::{
    generate, run, Architecture, BandId, CaptureTable, ExperimentConfig, LinkPowers, NodeRef,
    RadioParams, RadioProfile, SpreadingFactor, Transmission,
};

fn sf(v: u8) -> SpreadingFactor {
    SpreadingFactor::new(v).unwrap()
}

/// `None` (no coverage) ranks above every SF.
fn rank(choice: Option<SpreadingFactor>) -> u8 {
    choice.map_or(u8::MAX, SpreadingFactor::value)
}

struct PerTransmitter(Vec<f64>);

impl LinkPowers for PerTransmitter {
    fn rx_power_dbm(&self, tx: NodeRef, _rx: NodeRef) -> f64 {
        match tx {
            NodeRef::Ed(i) => self.0[i as usize],
            _ => f64::NEG_INFINITY,
        }
    }
}

proptest! {
    #[test]
    fn adr_is_monotone_in_received_power(a in -160.0f64..-60.0, b in -160.0f64..-60.0) {
        let (weak, strong) = if a <= b { (a, b) } else { (b, a) };
        for (profile, bw) in [(RadioProfile::sx1272(), 125_000), (RadioProfile::sx1280(), 203_000)] {
            let w = adr_select_sf(weak, &profile, bw, 10.0).unwrap();
            let s = adr_select_sf(strong, &profile, bw, 10.0).unwrap();
            prop_assert!(rank(s) <= rank(w));
            if let Some(chosen) = s {
                prop_assert!(strong >= sensitivity(&profile, chosen, bw).unwrap());
            }
        }
    }

    #[test]
    fn relay_buffer_conserves_bytes_and_order(sizes in proptest::collection::vec(1usize..=222, 0..60)) {
        let mut buffer = RelayBuffer::new(0, 222);
        let mut sealed = 0;
        for (k, &bytes) in sizes.iter().enumerate() {
            let record = Record { origin: NodeRef::Ed(k as u32), bytes, generated_at: k as f64 };
            sealed += relay_enqueue(&mut buffer, record).unwrap();
        }
        prop_assert_eq!(sealed, buffer.frame_queue.len());
        let mut seen = Vec::new();
        for frame in &buffer.frame_queue {
            prop_assert!(frame.bytes <= 222 && !frame.records.is_empty());
            prop_assert_eq!(frame.bytes, frame.records.iter().map(|r| r.bytes).sum::<usize>());
            seen.extend(frame.records.iter().map(|r| r.bytes));
        }
        prop_assert!(buffer.pending_bytes < 222);
        prop_assert_eq!(buffer.pending_bytes, buffer.pending_records.iter().map(|r| r.bytes).sum::<usize>());
        seen.extend(buffer.pending_records.iter().map(|r| r.bytes));
        prop_assert_eq!(seen, sizes);
    }

    #[test]
    fn duty_cycle_gate_bounds_airtime(
        frames in proptest::collection::vec((0.0f64..5.0, 0.01f64..2.5), 1..80),
        horizon in 10.0f64..600.0,
    ) {
        let mut gov = DutyCycleGovernor::new(Some(0.01));
        let mut ready = 0.0;
        let mut previous: Option<(f64, f64)> = None;
        let mut on_air = 0.0;
        for &(gap, toa) in &frames {
            ready += gap;
            let start = duty_cycle_gate(&mut gov, ready, toa);
            prop_assert!(start >= ready);
            if let Some((s, t)) = previous {
                prop_assert!(start >= s + t / 0.01 - 1e-9);
            }
            previous = Some((start, toa));
            if start < horizon {
                on_air += toa.min(horizon - start);
            }
        }
        let longest = frames.iter().map(|f| f.1).fold(0.0, f64::max);
        prop_assert!(on_air <= 0.01 * horizon + longest + 1e-9);
    }

    #[test]
    fn cluster_channels_are_distinct(
        n_relays in 1usize..=16,
        powers in proptest::collection::vec(-140.0f64..-60.0, 16 * 20),
    ) {
        let n_eds = 20;
        let profile = RadioProfile::sx1280();
        let rows = |i: usize| &powers[i * 16..i * 16 + n_relays];
        let plan = form_clusters(n_eds, n_relays, rows, &profile, 203_000, 10.0).unwrap();
        let mut channels: Vec<u8> = plan.clusters.iter().map(|c| c.channel_2g4).collect();
        prop_assert!(channels.iter().all(|&c| c < 16));
        channels.sort_unstable();
        channels.dedup();
        prop_assert_eq!(channels.len(), n_relays);
        for (i, a) in plan.assignments.iter().enumerate() {
            let a = a.unwrap();
            let NodeRef::Relay(j) = a.target else { panic!("EDs attach to relays") };
            let best = rows(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(rows(i)[j as usize], best);
            let member = plan.clusters[j as usize].member_ed_ids.contains(&i);
            prop_assert_eq!(member, a.served);
        }
    }

    #[test]
    fn relay_sfs_only_move_up_and_stay_covered(
        powers in proptest::collection::vec(-140.0f64..-100.0, 1..16),
    ) {
        let profile = RadioProfile::sx1272();
        let candidates: Vec<SpreadingFactor> = powers
            .iter()
            .map(|&p| adr_select_sf(p, &profile, 125_000, 10.0).unwrap().unwrap_or(sf(12)))
            .collect();
        let assigned = orthogonalize_relay_sfs(&candidates, &powers, &profile, 125_000).unwrap();
        for (k, (&c, &a)) in candidates.iter().zip(&assigned).enumerate() {
            prop_assert!(a >= c);
            if a != c {
                prop_assert!(powers[k] >= sensitivity(&profile, a, 125_000).unwrap());
                prop_assert!(!assigned[..k].contains(&a));
            }
        }
    }

    #[test]
    fn different_sfs_never_interfere(
        starts in proptest::collection::vec(0.0f64..1.0, 6),
        powers in proptest::collection::vec(-120.0f64..-20.0, 6),
    ) {
        let plan: Vec<Transmission> = (0..6)
            .map(|k| Transmission {
                tx_node: NodeRef::Ed(k as u32),
                rx_target: NodeRef::Gateway,
                band: BandId::Eu868,
                channel: 0,
                params: RadioParams::new(BandId::Eu868, sf(7 + k as u8), 125_000, 14.0).unwrap(),
                start: starts[k],
                duration: 1.0,
                payload_bytes: 10,
                records: Vec::new(),
            })
            .collect();
        let outcomes = replay(
            &plan,
            &PerTransmitter(powers),
            &CaptureTable::uniform(6.0),
            &RadioProfile::sx1272(),
        )
        .unwrap();
        prop_assert!(outcomes.iter().all(|o| o.delivered));
    }
}

fn small(architecture: Architecture) -> ExperimentConfig {
    ExperimentConfig {
        n_eds: 60,
        n_relays: 4,
        area_side: 2000.0,
        sim_time: 120.0,
        ..Default::default()
    }
    .with_architecture(architecture)
}

#[test]
fn eu868_radios_respect_the_duty_cycle() {
    let longest_ed = time_on_air(
        &RadioParams::new(BandId::Eu868, sf(12), 125_000, 12.5).unwrap(),
        10,
    )
    .unwrap();
    let longest_relay = time_on_air(
        &RadioParams::new(BandId::Eu868, sf(12), 125_000, 16.0).unwrap(),
        max_payload(sf(12)),
    )
    .unwrap();
    for seed in 0..3 {
        let cfg = small(Architecture::SubGhzOnly);
        let m = run(&generate(&cfg, seed).unwrap()).unwrap();
        for usage in &m.ed_usage {
            assert!(usage.tx_seconds <= 0.01 * cfg.sim_time + longest_ed + 1e-9);
        }
        let cfg = small(Architecture::Proposal);
        let m = run(&generate(&cfg, seed).unwrap()).unwrap();
        assert_eq!(m.relay_usage.len(), 4);
        for usage in &m.relay_usage {
            assert!(usage.tx_seconds <= 0.01 * cfg.sim_time + longest_relay + 1e-9);
        }
    }
}

#[test]
fn every_started_frame_is_accounted_for() {
    for architecture in Architecture::ALL {
        let m = run(&generate(&small(architecture), 1).unwrap()).unwrap();
        for class in LinkClass::ALL {
            let c = m.counters(class);
            assert_eq!(
                c.started,
                c.delivered + c.lost_noise + c.lost_interference + c.in_flight,
                "{architecture} {class:?}"
            );
        }
        let to_gateway = m.counters(LinkClass::EdToGateway).delivered
            + m.counters(LinkClass::RelayToGateway).delivered;
        assert_eq!(to_gateway as usize, m.delivered.len());
    }
}

#[test]
fn relay_payloads_are_never_duplicated_or_invented() {
    let cfg = small(Architecture::Proposal);
    let m = run(&generate(&cfg, 2).unwrap()).unwrap();
    let at_relays = m.counters(LinkClass::EdToRelay).delivered as usize;
    let self_generated = 4 * (cfg.sim_time / cfg.payload_interval) as usize + 4;
    let mut forwarded = 0;
    for frame in &m.delivered {
        assert!(matches!(frame.source, NodeRef::Relay(_)));
        assert!(frame.bytes <= 222 && frame.bytes % cfg.payload_bytes == 0);
        forwarded += frame.bytes / cfg.payload_bytes;
    }
    assert!(forwarded > 0);
    assert!(forwarded <= at_relays + self_generated);
}

#[test]
fn runs_are_deterministic() {
    for architecture in Architecture::ALL {
        let cfg = small(architecture);
        let a = run(&generate(&cfg, 5).unwrap()).unwrap();
        let b = run(&generate(&cfg, 5).unwrap()).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.delivered, b.delivered);
        let c = run(&generate(&cfg, 6).unwrap()).unwrap();
        assert_ne!(a.delivered, c.delivered);
    }
}
