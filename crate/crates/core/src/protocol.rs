//! MAC-level behaviour: clustering, ADR, relay SF orthogonalisation,
//! relay aggregation buffers, duty-cycle governance and channel choice.
//!
//! All decisions that depend on link quality use the frozen per-pair link
//! budgets and are taken once, before the first event.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::links::NodeRef;
use crate::phy::{sensitivity, Band, RadioProfile, SpreadingFactor};

/// Lowest SF whose sensitivity plus `margin` is met by `p_r`.
///
/// Falls back to the band's largest SF when only the bare sensitivity is
/// met, and returns `None` when not even that holds.
pub fn adr_select_sf(
    p_r: f64,
    profile: &RadioProfile,
    bandwidth_hz: u32,
    margin: f64,
) -> Result<Option<SpreadingFactor>> {
    let band = profile.band.band();
    for sf in band.spreading_factors() {
        if p_r >= sensitivity(profile, sf, bandwidth_hz)? + margin {
            return Ok(Some(sf));
        }
    }
    let max = band.max_sf();
    Ok((p_r >= sensitivity(profile, max, bandwidth_hz)?).then_some(max))
}

/// Makes relay SFs unique where coverage allows.
///
/// Relays are visited by ascending id. A relay whose candidate is already
/// taken moves to the smallest free SF above it that it can still reach
/// the gateway with; if there is none it keeps its candidate.
pub fn orthogonalize_relay_sfs(
    candidates: &[SpreadingFactor],
    relay_powers: &[f64],
    profile: &RadioProfile,
    bandwidth_hz: u32,
) -> Result<Vec<SpreadingFactor>> {
    let band = profile.band.band();
    let mut assigned: Vec<SpreadingFactor> = Vec::with_capacity(candidates.len());
    for (&candidate, &p_r) in candidates.iter().zip(relay_powers) {
        if !assigned.contains(&candidate) {
            assigned.push(candidate);
            continue;
        }
        let mut choice = candidate;
        for sf in band.spreading_factors().filter(|&sf| sf > candidate) {
            if !assigned.contains(&sf) && p_r >= sensitivity(profile, sf, bandwidth_hz)? {
                choice = sf;
                break;
            }
        }
        assigned.push(choice);
    }
    Ok(assigned)
}

/// One relay and the end devices it serves on its dedicated channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub relay_id: usize,
    pub member_ed_ids: Vec<usize>,
    pub channel_2g4: u8,
    /// SF of each member, parallel to `member_ed_ids`.
    pub ed_sf: Vec<SpreadingFactor>,
}

/// Uplink target of one end device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdAssignment {
    pub target: NodeRef,
    pub sf: SpreadingFactor,
    /// False when the target cannot hear the device even at the largest
    /// SF. Such devices still transmit (they have no way to know) but
    /// never get a frame through.
    pub served: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    pub clusters: Vec<Cluster>,
    /// Indexed by ED id; `None` only when there is no relay at all.
    pub assignments: Vec<Option<EdAssignment>>,
}

impl ClusterPlan {
    pub fn unserved_count(&self) -> usize {
        self.assignments
            .iter()
            .filter(|a| !a.is_some_and(|a| a.served))
            .count()
    }
}

/// Associates every ED with the relay it hears strongest (lowest id on
/// ties) and gives cluster `j` the 2.4 GHz channel `j`.
///
/// `ed_relay_power(i)` returns the received powers of ED `i` at each relay.
pub fn form_clusters<'a>(
    n_eds: usize,
    n_relays: usize,
    ed_relay_power: impl Fn(usize) -> &'a [f64],
    profile: &RadioProfile,
    bandwidth_hz: u32,
    margin: f64,
) -> Result<ClusterPlan> {
    let band = profile.band.band();
    if n_relays > band.channel_count as usize {
        return Err(Error::Config(format!(
            "{n_relays} clusters exceed the {} available channels",
            band.channel_count
        )));
    }
    let mut clusters: Vec<Cluster> = (0..n_relays)
        .map(|j| Cluster {
            relay_id: j,
            member_ed_ids: Vec::new(),
            channel_2g4: j as u8,
            ed_sf: Vec::new(),
        })
        .collect();
    let mut assignments = Vec::with_capacity(n_eds);
    for i in 0..n_eds {
        let powers = ed_relay_power(i);
        let best = powers
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (j, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((j, p)),
            });
        let Some((relay, p_r)) = best else {
            assignments.push(None);
            continue;
        };
        let assignment = match adr_select_sf(p_r, profile, bandwidth_hz, margin)? {
            Some(sf) => {
                clusters[relay].member_ed_ids.push(i);
                clusters[relay].ed_sf.push(sf);
                EdAssignment {
                    target: NodeRef::Relay(relay as u32),
                    sf,
                    served: true,
                }
            }
            None => EdAssignment {
                target: NodeRef::Relay(relay as u32),
                sf: band.max_sf(),
                served: false,
            },
        };
        assignments.push(Some(assignment));
    }
    Ok(ClusterPlan {
        clusters,
        assignments,
    })
}

/// A payload as carried inside a relay frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub origin: NodeRef,
    pub bytes: usize,
    pub generated_at: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SealedFrame {
    pub records: Vec<Record>,
    pub bytes: usize,
}

/// Aggregation state of one relay.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayBuffer {
    pub relay_id: usize,
    pub pending_bytes: usize,
    pub pending_records: Vec<Record>,
    pub frame_queue: VecDeque<SealedFrame>,
    pub max_frame_bytes: usize,
}

impl RelayBuffer {
    pub fn new(relay_id: usize, max_frame_bytes: usize) -> Self {
        RelayBuffer {
            relay_id,
            pending_bytes: 0,
            pending_records: Vec::new(),
            frame_queue: VecDeque::new(),
            max_frame_bytes,
        }
    }

    fn seal(&mut self) {
        let records = std::mem::take(&mut self.pending_records);
        self.frame_queue.push_back(SealedFrame {
            records,
            bytes: self.pending_bytes,
        });
        self.pending_bytes = 0;
    }
}

/// Adds a record to the relay's pending set, sealing frames as they fill.
///
/// A record that would overflow the pending set seals it first and starts
/// the next one; a record that fills the set exactly is sealed with it.
/// Returns how many frames were appended to the queue (0, 1, or 2 when a
/// full-size record follows a partial set).
pub fn relay_enqueue(buffer: &mut RelayBuffer, record: Record) -> Result<usize> {
    if record.bytes > buffer.max_frame_bytes {
        return Err(Error::Oversize {
            bytes: record.bytes,
            limit: buffer.max_frame_bytes,
        });
    }
    let mut sealed = 0;
    if buffer.pending_bytes + record.bytes > buffer.max_frame_bytes {
        buffer.seal();
        sealed += 1;
    }
    buffer.pending_bytes += record.bytes;
    buffer.pending_records.push(record);
    if buffer.pending_bytes == buffer.max_frame_bytes {
        buffer.seal();
        sealed += 1;
    }
    Ok(sealed)
}

/// Uniform channel index within the band's channel plan.
pub fn pick_uplink_channel(band: &Band, rng: &mut impl Rng) -> u8 {
    rng.random_range(0..band.channel_count)
}

/// Enforces the off-time that follows every transmission in a
/// duty-cycle-limited band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleGovernor {
    pub limit: Option<f64>,
    pub next_allowed_time: f64,
}

impl DutyCycleGovernor {
    pub fn new(limit: Option<f64>) -> Self {
        DutyCycleGovernor {
            limit,
            next_allowed_time: 0.0,
        }
    }
}

/// Start time of a frame that is ready at `ready_time`; books the
/// off-time that follows it.
pub fn duty_cycle_gate(gov: &mut DutyCycleGovernor, ready_time: f64, toa: f64) -> f64 {
    let Some(limit) = gov.limit else {
        return ready_time;
    };
    let start = ready_time.max(gov.next_allowed_time);
    gov.next_allowed_time = start + toa + toa * (1.0 / limit - 1.0);
    start
}
