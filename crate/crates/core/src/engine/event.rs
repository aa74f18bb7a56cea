//! Time-ordered event queue.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::links::NodeRef;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// Node `.0` has a fresh payload; `.1` is the payload's index in the
    /// node's periodic sequence.
    PayloadReady(NodeRef, u64),
    /// The node's radio keys up its next frame.
    TxStart(NodeRef),
    /// Transmission with the given arena index leaves the air.
    TxEnd(usize),
    /// A pre-built frame of a replay plan goes on air.
    Planned(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed so that BinaryHeap pops the earliest event first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue on `(time, sequence)`; the sequence number is the insertion
/// order, so equal timestamps are processed first-in first-out.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, kind: EventKind) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event {
            time,
            sequence,
            kind,
        });
    }

    /// Pops the next event if it happens no later than `horizon`.
    pub fn pop_until(&mut self, horizon: f64) -> Option<Event> {
        if self.heap.peek()?.time > horizon {
            return None;
        }
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
