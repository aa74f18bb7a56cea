//! Throughput, device energy and cross-run statistics.

use crate::links::NodeRef;
use crate::phy::RadioProfile;
use crate::scenario::Architecture;

/// Hop a frame travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkClass {
    EdToGateway,
    EdToRelay,
    RelayToGateway,
}

impl LinkClass {
    pub const ALL: [LinkClass; 3] = [
        LinkClass::EdToGateway,
        LinkClass::EdToRelay,
        LinkClass::RelayToGateway,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Frame outcomes of one link class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCounters {
    pub started: u64,
    pub delivered: u64,
    pub lost_noise: u64,
    pub lost_interference: u64,
    /// Still on air when the simulation ended.
    pub in_flight: u64,
}

/// A frame accepted by the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveredFrame {
    pub source: NodeRef,
    pub bytes: usize,
}

/// Time one radio spent in each state over the simulated horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeviceUsage {
    pub tx_power_dbm: f64,
    pub tx_count: u64,
    pub tx_seconds: f64,
    pub rx_seconds: f64,
    pub sleep_seconds: f64,
}

/// Three-state (TX / RX / sleep) supply model of one radio.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub supply_voltage: f64,
    /// (output power dBm, current mA), ascending in power.
    pub tx_curve: Vec<(f64, f64)>,
    pub rx_current_ma: f64,
    pub sleep_current_ma: f64,
}

impl EnergyModel {
    pub fn from_profile(profile: &RadioProfile) -> Self {
        EnergyModel {
            supply_voltage: profile.supply_voltage,
            tx_curve: profile.tx_current_curve().to_vec(),
            rx_current_ma: profile.rx_current_ma,
            sleep_current_ma: profile.sleep_current_ma,
        }
    }

    /// Current of the lowest curve point reaching `power_dbm`, else of the
    /// highest point.
    pub fn tx_current_ma(&self, power_dbm: f64) -> f64 {
        self.tx_curve
            .iter()
            .find(|&&(p, _)| p >= power_dbm)
            .or(self.tx_curve.last())
            .map_or(0.0, |&(_, ma)| ma)
    }
}

/// Energy drawn by one device, mJ.
pub fn ed_energy(usage: &DeviceUsage, model: &EnergyModel) -> f64 {
    let charge = model.tx_current_ma(usage.tx_power_dbm) * usage.tx_seconds
        + model.rx_current_ma * usage.rx_seconds
        + model.sleep_current_ma * usage.sleep_seconds;
    model.supply_voltage * charge
}

/// Delivered payload bits per second: `sum(8 * B_i) / T`.
pub fn throughput(delivered: &[DeliveredFrame], sim_time: f64) -> f64 {
    let bits: u64 = delivered.iter().map(|f| 8 * f.bytes as u64).sum();
    bits as f64 / sim_time
}

/// Sorts and merges overlapping intervals.
pub(crate) fn merge_intervals(mut intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
    for (s, e) in intervals {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

fn clipped_length(intervals: &[(f64, f64)], horizon: f64) -> f64 {
    intervals
        .iter()
        .map(|&(s, e)| (e.min(horizon) - s.max(0.0)).max(0.0))
        .sum()
}

/// Length of the intersection of two merged interval lists within
/// `[0, horizon]`.
fn overlap_length(a: &[(f64, f64)], b: &[(f64, f64)], horizon: f64) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let s = a[i].0.max(b[j].0).max(0.0);
        let e = a[i].1.min(b[j].1).min(horizon);
        if e > s {
            total += e - s;
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Radio activity of one device as recorded during a run.
///
/// Receive windows that overlap a transmission are not counted twice: the
/// radio is half duplex, so transmitting wins.
#[derive(Debug, Clone, Default)]
pub struct DeviceLedger {
    pub tx_power_dbm: f64,
    tx: Vec<(f64, f64)>,
    rx: Vec<(f64, f64)>,
}

impl DeviceLedger {
    pub fn new(tx_power_dbm: f64) -> Self {
        DeviceLedger {
            tx_power_dbm,
            ..Default::default()
        }
    }

    pub fn transmit(&mut self, start: f64, end: f64) {
        self.tx.push((start, end));
    }

    pub fn listen(&mut self, start: f64, end: f64) {
        self.rx.push((start, end));
    }

    /// Folds the ledger into state durations over `[0, horizon]`; the
    /// three durations sum to the horizon.
    pub fn usage(&self, horizon: f64) -> DeviceUsage {
        let tx = merge_intervals(self.tx.clone());
        let rx = merge_intervals(self.rx.clone());
        let tx_seconds = clipped_length(&tx, horizon);
        let rx_seconds = clipped_length(&rx, horizon) - overlap_length(&rx, &tx, horizon);
        DeviceUsage {
            tx_power_dbm: self.tx_power_dbm,
            tx_count: self.tx.iter().filter(|&&(s, _)| s < horizon).count() as u64,
            tx_seconds,
            rx_seconds,
            sleep_seconds: (horizon - tx_seconds - rx_seconds).max(0.0),
        }
    }
}

/// Everything one simulation run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub architecture: Architecture,
    pub sim_time: f64,
    pub delivered: Vec<DeliveredFrame>,
    pub ed_usage: Vec<DeviceUsage>,
    pub ed_energy_model: EnergyModel,
    /// EU868 radio of each relay.
    pub relay_usage: Vec<DeviceUsage>,
    /// Both radios of each relay, mJ.
    pub relay_energy_mj: Vec<f64>,
    pub unserved_ed_count: usize,
    pub counters: [FrameCounters; 3],
    /// ED payloads replaced in the single-slot buffer before they could be
    /// sent.
    pub superseded_payloads: u64,
    /// Sealed relay frames dropped by the queue guard.
    pub relay_queue_overflow: u64,
    /// Bytes still waiting in relay aggregation buffers at the end.
    pub relay_pending_bytes: usize,
    pub validity_warnings: usize,
}

impl RunMetrics {
    pub fn counters(&self, class: LinkClass) -> &FrameCounters {
        &self.counters[class.index()]
    }

    pub(crate) fn counters_mut(&mut self, class: LinkClass) -> &mut FrameCounters {
        &mut self.counters[class.index()]
    }

    pub fn throughput(&self) -> f64 {
        throughput(&self.delivered, self.sim_time)
    }

    pub fn ed_energy_mj(&self) -> Vec<f64> {
        self.ed_usage
            .iter()
            .map(|u| ed_energy(u, &self.ed_energy_model))
            .collect()
    }

    /// Mean energy over every end device, served or not; 0 without EDs.
    pub fn mean_ed_energy_mj(&self) -> f64 {
        if self.ed_usage.is_empty() {
            return 0.0;
        }
        self.ed_energy_mj().iter().sum::<f64>() / self.ed_usage.len() as f64
    }

    pub fn frames_lost_noise(&self) -> u64 {
        self.counters.iter().map(|c| c.lost_noise).sum()
    }

    pub fn frames_lost_interference(&self) -> u64 {
        self.counters.iter().map(|c| c.lost_interference).sum()
    }
}

/// Sample statistics of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single run).
    pub std: f64,
    /// Half-width of the normal-approximation 95% confidence interval.
    pub ci95: f64,
}

impl Summary {
    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.ci95, self.mean + self.ci95)
    }
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            n,
            mean: f64::NAN,
            std: f64::NAN,
            ci95: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary {
        n,
        mean,
        std,
        ci95: 1.96 * std / (n as f64).sqrt(),
    }
}

/// The per-run scalars that get aggregated across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunDigest {
    pub throughput: f64,
    pub ed_energy_mj: f64,
    pub unserved_eds: f64,
    pub frames_lost_noise: f64,
    pub frames_lost_interference: f64,
}

impl RunMetrics {
    pub fn digest(&self) -> RunDigest {
        RunDigest {
            throughput: self.throughput(),
            ed_energy_mj: self.mean_ed_energy_mj(),
            unserved_eds: self.unserved_ed_count as f64,
            frames_lost_noise: self.frames_lost_noise() as f64,
            frames_lost_interference: self.frames_lost_interference() as f64,
        }
    }
}

/// Cross-run statistics of the reported metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateMetrics {
    pub throughput: Summary,
    pub ed_energy_mj: Summary,
    pub unserved_eds: Summary,
    pub frames_lost_noise: Summary,
    pub frames_lost_interference: Summary,
}

pub fn aggregate(runs: &[RunDigest]) -> AggregateMetrics {
    let over = |f: fn(&RunDigest) -> f64| summarize(&runs.iter().map(f).collect::<Vec<_>>());
    AggregateMetrics {
        throughput: over(|r| r.throughput),
        ed_energy_mj: over(|r| r.ed_energy_mj),
        unserved_eds: over(|r| r.unserved_eds),
        frames_lost_noise: over(|r| r.frames_lost_noise),
        frames_lost_interference: over(|r| r.frames_lost_interference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, bytes: usize) -> Vec<DeliveredFrame> {
        vec![
            DeliveredFrame {
                source: NodeRef::Relay(0),
                bytes
            };
            n
        ]
    }

    #[test]
    fn throughput_examples() {
        assert!((throughput(&frames(10, 222), 300.0) - 59.2).abs() < 1e-12);
        assert_eq!(throughput(&[], 300.0), 0.0);
        let mut mixed = frames(5, 220);
        mixed.extend(frames(3, 51));
        assert!((throughput(&mixed, 300.0) - 10_024.0 / 300.0).abs() < 1e-12);
        assert!((throughput(&mixed, 300.0) - 33.41).abs() < 0.005);
    }

    fn sx1280_model() -> EnergyModel {
        EnergyModel::from_profile(&RadioProfile::sx1280())
    }

    #[test]
    fn tx_energy_example() {
        let usage = DeviceUsage {
            tx_power_dbm: 12.5,
            tx_count: 1,
            tx_seconds: 0.041_216,
            ..Default::default()
        };
        let model = EnergyModel {
            sleep_current_ma: 0.0,
            ..sx1280_model()
        };
        assert!((ed_energy(&usage, &model) - 3.264_307_2).abs() < 1e-9);
    }

    #[test]
    fn sleep_only_energy() {
        let ledger = DeviceLedger::new(12.5);
        let u = ledger.usage(300.0);
        let model = sx1280_model();
        assert_eq!(u.sleep_seconds, 300.0);
        assert!((ed_energy(&u, &model) - 3.3 * 0.0012 * 300.0).abs() < 1e-12);
    }

    #[test]
    fn ledger_components_sum_to_horizon() {
        let mut l = DeviceLedger::new(12.5);
        l.transmit(0.0, 0.5);
        l.listen(1.5, 1.6);
        l.listen(2.5, 2.6);
        l.transmit(1.0, 1.55); // overlaps the first window
        l.listen(2.55, 2.65); // overlaps the second window
        l.transmit(9.9, 10.4); // runs past the horizon
        let u = l.usage(10.0);
        assert!((u.tx_seconds - 1.15).abs() < 1e-12);
        assert!((u.rx_seconds - 0.2).abs() < 1e-12, "{}", u.rx_seconds);
        assert!((u.tx_seconds + u.rx_seconds + u.sleep_seconds - 10.0).abs() < 1e-12);
        assert_eq!(u.tx_count, 3);
    }

    #[test]
    fn summary_statistics() {
        let s = summarize(&[10.0, 20.0]);
        assert_eq!(s.mean, 15.0);
        assert!((s.std - 50f64.sqrt()).abs() < 1e-12);
        let flat = summarize(&[4.0; 7]);
        assert_eq!((flat.std, flat.ci95), (0.0, 0.0));
        assert_eq!(summarize(&[3.0]).ci95, 0.0);
    }

    #[test]
    fn tx_current_monotone_lookup() {
        let m = EnergyModel::from_profile(&RadioProfile::sx1272());
        assert!(m.tx_curve.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(m.tx_current_ma(16.0), 90.0);
    }
}
