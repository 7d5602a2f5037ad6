//! The event clock: one pending time per (deme, kind), per migration pair,
//! and one for the environment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Neutral,
    Selective,
    Migration,
    Environment,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Neutral => "neutral",
            EventKind::Selective => "selective",
            EventKind::Migration => "migration",
            EventKind::Environment => "environment",
        }
    }
}

/// One clock entry. `site` is the deme for reproduction, the pair index for
/// migration, and 0 for the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub kind: EventKind,
    pub site: usize,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    /// Position in the clock's slot table; breaks exact ties deterministically.
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so that the max-heap pops the earliest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// A fired entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockEvent {
    pub time: f64,
    pub slot: Slot,
}

#[derive(Debug, Clone)]
pub struct EventClock {
    slots: Vec<(Slot, f64)>,
    heap: BinaryHeap<Entry>,
    now: f64,
}

impl EventClock {
    /// Entries with rate 0 never fire and are not stored. Initial times are
    /// drawn in the order of `slots`.
    pub fn new<R: Rng + ?Sized>(slots: Vec<(Slot, f64)>, rng: &mut R) -> Self {
        let mut heap = BinaryHeap::with_capacity(slots.len());
        for (index, &(_, rate)) in slots.iter().enumerate() {
            if rate > 0.0 {
                heap.push(Entry {
                    time: exp(rate, rng),
                    index,
                });
            }
        }
        Self {
            slots,
            heap,
            now: 0.0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Time of the next entry without firing it.
    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    /// Pops the earliest entry, advances the current time to it and redraws
    /// that entry as `now + Exp(rate)`. `None` when every rate is zero.
    pub fn next_event<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<ClockEvent> {
        let mut top = self.heap.peek_mut()?;
        let (slot, rate) = self.slots[top.index];
        let time = top.time;
        self.now = time;
        top.time = time + exp(rate, rng);
        drop(top);
        Some(ClockEvent { time, slot })
    }
}

fn exp<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    Exp::new(rate).expect("positive rate").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RngContract, Substream};

    #[test]
    fn only_positive_rates_fire() {
        let mut rng = RngContract::new(1).stream(Substream::EventTimes, 0);
        let slots = vec![
            (
                Slot {
                    kind: EventKind::Neutral,
                    site: 0,
                },
                3.0,
            ),
            (
                Slot {
                    kind: EventKind::Selective,
                    site: 0,
                },
                0.0,
            ),
        ];
        let mut clock = EventClock::new(slots, &mut rng);
        let mut last = 0.0;
        for _ in 0..100 {
            let e = clock.next_event(&mut rng).unwrap();
            assert_eq!(e.slot.kind, EventKind::Neutral);
            assert!(e.time > last);
            last = e.time;
        }
    }

    #[test]
    fn no_rates_means_done() {
        let mut rng = RngContract::new(1).stream(Substream::EventTimes, 0);
        let mut clock = EventClock::new(Vec::new(), &mut rng);
        assert!(clock.next_event(&mut rng).is_none());
    }

    #[test]
    fn chooses_the_global_minimum() {
        let mut rng = RngContract::new(2).stream(Substream::EventTimes, 0);
        let slots = (0..5)
            .map(|d| {
                (
                    Slot {
                        kind: EventKind::Neutral,
                        site: d,
                    },
                    1.0 + d as f64,
                )
            })
            .collect();
        let mut clock = EventClock::new(slots, &mut rng);
        let mut counts = [0usize; 5];
        for _ in 0..30000 {
            counts[clock.next_event(&mut rng).unwrap().slot.site] += 1;
        }
        // Proportional to the rates 1..5 (total 15).
        for (d, &c) in counts.iter().enumerate() {
            let expected = 30000.0 * (1.0 + d as f64) / 15.0;
            assert!((c as f64 - expected).abs() < 4.0 * expected.sqrt(), "{counts:?}");
        }
    }
}
