//! Seeded random streams.
//!
//! Every simulator draws from a small number of named substreams derived from
//! one master seed. Event clocks (times, centres, kinds) always come from
//! [`Substream::EventTimes`], so two runs that share a master seed but differ
//! in environmental parameters see the same sequence of events; outcome draws
//! and environment draws live on their own streams.
//!
//! The generator is ChaCha8 with its 64-bit stream selector: each substream
//! is a disjoint keystream of the same key, so substreams never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Named independent substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substream {
    /// Times, centres and kinds of events (shared across scenario variants).
    EventTimes,
    /// Parent choices, individual selection and other per-event outcomes.
    Outcomes,
    /// Environment values.
    Environment,
    /// Gaussian increments of integrators.
    Noise,
    /// Anything else a caller wants kept apart, keyed by a small tag.
    Auxiliary(u16),
}

impl Substream {
    fn code(self) -> u64 {
        match self {
            Substream::EventTimes => 1,
            Substream::Outcomes => 2,
            Substream::Environment => 3,
            Substream::Noise => 4,
            Substream::Auxiliary(tag) => 0x100 + u64::from(tag),
        }
    }
}

/// Master seed plus the rule that turns (substream, replicate) into a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngContract {
    master_seed: u64,
}

impl RngContract {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Generator for `stream` of replicate `replicate`.
    ///
    /// The stream selector packs the substream code into the top 24 bits and
    /// the replicate index into the lower 40, so up to 2^40 replicates have
    /// disjoint streams.
    pub fn stream(&self, stream: Substream, replicate: u64) -> SimRng {
        debug_assert!(replicate < (1 << 40));
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((stream.code() << 40) | (replicate & ((1 << 40) - 1)));
        rng
    }

    /// Contract for a child run of a sweep.
    pub fn child(&self, index: u64) -> Self {
        Self::new(self.master_seed.wrapping_add(index))
    }

    /// The streams a single replicate owns.
    pub fn replicate(&self, replicate: u64) -> ReplicateStreams {
        ReplicateStreams {
            events: self.stream(Substream::EventTimes, replicate),
            outcomes: self.stream(Substream::Outcomes, replicate),
            environment: self.stream(Substream::Environment, replicate),
        }
    }
}

/// The three generators one trajectory consumes.
#[derive(Debug, Clone)]
pub struct ReplicateStreams {
    pub events: SimRng,
    pub outcomes: SimRng,
    pub environment: SimRng,
}
