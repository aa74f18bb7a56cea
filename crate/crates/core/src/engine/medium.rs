//! Shared-channel bookkeeping and per-frame reception decisions.

use std::collections::HashMap;

use crate::error::Result;
use crate::links::{LinkPowers, NodeRef};
use crate::phy::{sensitivity, BandId, CaptureTable, RadioParams, RadioProfile, SpreadingFactor};
use crate::protocol::Record;

use super::event::{EventKind, EventQueue};

/// One frame on the air.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub tx_node: NodeRef,
    pub rx_target: NodeRef,
    pub band: BandId,
    pub channel: u8,
    pub params: RadioParams,
    pub start: f64,
    /// Time on air of the frame.
    pub duration: f64,
    pub payload_bytes: usize,
    pub records: Vec<Record>,
}

impl Transmission {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Positive-length overlap in time.
    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureCause {
    None,
    NoCoverage,
    Interference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReceptionOutcome {
    pub delivered: bool,
    pub failure_cause: FailureCause,
}

impl ReceptionOutcome {
    const DELIVERED: ReceptionOutcome = ReceptionOutcome {
        delivered: true,
        failure_cause: FailureCause::None,
    };

    fn lost(cause: FailureCause) -> Self {
        ReceptionOutcome {
            delivered: false,
            failure_cause: cause,
        }
    }
}

/// Decides whether `t` is decoded at its target.
///
/// `overlapping` holds every frame on the same band and channel whose
/// airtime intersects `t`. The frame needs coverage at its SF and, against
/// the summed power of the same-SF frames among them, an SIR of at least
/// the capture threshold. Other SFs are treated as orthogonal.
pub fn resolve_reception<'a>(
    t: &Transmission,
    overlapping: impl IntoIterator<Item = &'a Transmission>,
    powers: &impl LinkPowers,
    capture: &CaptureTable,
    profile: &RadioProfile,
) -> Result<ReceptionOutcome> {
    let p_r = powers.rx_power_dbm(t.tx_node, t.rx_target);
    if p_r < sensitivity(profile, t.params.sf, t.params.bandwidth_hz)? {
        return Ok(ReceptionOutcome::lost(FailureCause::NoCoverage));
    }
    let interference_mw: f64 = overlapping
        .into_iter()
        .filter(|o| o.params.sf == t.params.sf)
        .map(|o| dbm_to_mw(powers.rx_power_dbm(o.tx_node, t.rx_target)))
        .sum();
    if interference_mw == 0.0 {
        return Ok(ReceptionOutcome::DELIVERED);
    }
    let sir_db = 10.0 * (dbm_to_mw(p_r) / interference_mw).log10();
    if sir_db >= capture.gamma(t.params.sf) {
        Ok(ReceptionOutcome::DELIVERED)
    } else {
        Ok(ReceptionOutcome::lost(FailureCause::Interference))
    }
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Frames currently on air and the overlaps found so far for each frame.
///
/// Frames are grouped by (band, channel, SF): frames on other SFs never
/// take part in a reception decision, so they are not tracked as
/// overlaps.
#[derive(Debug, Default)]
pub struct Medium {
    active: HashMap<(BandId, u8, SpreadingFactor), Vec<usize>>,
    overlaps: Vec<Vec<usize>>,
}

impl Medium {
    pub fn new() -> Self {
        Self::default()
    }

    /// Puts frame `id` on air. Frames ending exactly at its start do not
    /// overlap it.
    pub fn begin(&mut self, id: usize, arena: &[Transmission]) {
        if self.overlaps.len() <= id {
            self.overlaps.resize_with(id + 1, Vec::new);
        }
        let t = &arena[id];
        let active = self
            .active
            .entry((t.band, t.channel, t.params.sf))
            .or_default();
        for &other in active.iter() {
            if arena[other].end() > t.start {
                self.overlaps[other].push(id);
                self.overlaps[id].push(other);
            }
        }
        active.push(id);
    }

    /// Takes frame `id` off the air and returns every same-SF frame that
    /// overlapped it.
    pub fn finish(&mut self, id: usize, arena: &[Transmission]) -> Vec<usize> {
        let t = &arena[id];
        if let Some(active) = self.active.get_mut(&(t.band, t.channel, t.params.sf)) {
            active.retain(|&x| x != id);
        }
        std::mem::take(&mut self.overlaps[id])
    }
}

/// Plays a fixed list of frames through the event queue and the medium
/// and returns each frame's outcome, in plan order.
pub fn replay(
    plan: &[Transmission],
    powers: &impl LinkPowers,
    capture: &CaptureTable,
    profile: &RadioProfile,
) -> Result<Vec<ReceptionOutcome>> {
    let mut queue = EventQueue::new();
    for (id, t) in plan.iter().enumerate() {
        queue.push(t.start, EventKind::Planned(id));
    }
    let mut medium = Medium::new();
    let mut outcomes = vec![None; plan.len()];
    while let Some(event) = queue.pop_until(f64::INFINITY) {
        match event.kind {
            EventKind::Planned(id) => {
                medium.begin(id, plan);
                queue.push(plan[id].end(), EventKind::TxEnd(id));
            }
            EventKind::TxEnd(id) => {
                let others = medium.finish(id, plan);
                let outcome = resolve_reception(
                    &plan[id],
                    others.iter().map(|&o| &plan[o]),
                    powers,
                    capture,
                    profile,
                )?;
                outcomes[id] = Some(outcome);
            }
            _ => unreachable!("replay only schedules planned frames"),
        }
    }
    Ok(outcomes
        .into_iter()
        .map(|o| o.expect("every planned frame ends"))
        .collect())
}
