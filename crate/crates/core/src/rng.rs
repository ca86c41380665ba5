//! Counter-based random streams.
//!
//! All randomness of a batch flows from one master seed. A replication's seed
//! is a pure function of `(master_seed, replication_id)`, and every draw the
//! engine makes is addressed by `(purpose, step, subject)` under that seed, so
//! results never depend on scheduling or on how many draws other parts of the
//! model consumed. Two runs that differ only in a parameter see the same
//! random numbers for every family and step, which makes cell comparisons
//! paired.

use rand::rand_core::{impls, RngCore};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to turn labels such as area ids into stream keys.
pub fn stream_label(name: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in name.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn unit_f64(bits: u64) -> f64 {
    const SCALE: f64 = (1u64 << 53) as f64;
    (bits >> 11) as f64 / SCALE
}

/// Seed derivation for a batch of replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPlan {
    pub master_seed: u64,
}

impl RngPlan {
    pub fn new(master_seed: u64) -> Self {
        RngPlan { master_seed }
    }

    /// Child seed of one replication; independent of every other replication.
    pub fn replication_seed(&self, replication_id: u32) -> u64 {
        let counter = u64::from(replication_id).wrapping_add(1).wrapping_mul(GOLDEN_GAMMA);
        mix64(mix64(self.master_seed) ^ counter)
    }

    /// Root stream for one area within one replication.
    pub fn area_stream(&self, replication_id: u32, area_id: &str) -> Stream {
        Stream::new(self.replication_seed(replication_id)).derive(stream_label(area_id))
    }
}

/// A SplitMix64 stream: a key plus a running counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: mix64(seed ^ 0xD134_2543_DE82_EF95),
            counter: 0,
        }
    }

    /// Child stream identified by `label`; does not advance the parent.
    pub fn derive(&self, label: u64) -> Self {
        Stream {
            key: mix64(self.key ^ mix64(label.wrapping_add(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(GOLDEN_GAMMA);
        mix64(self.key ^ self.counter)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}

/// What an engine draw is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrawKind {
    Attack,
    Addiction,
    DenounceAccess,
    Protection,
    Conviction,
    EmploymentFlip,
    IncomeJitter,
}

impl DrawKind {
    fn tag(self) -> u64 {
        match self {
            DrawKind::Attack => 1,
            DrawKind::Addiction => 2,
            DrawKind::DenounceAccess => 3,
            DrawKind::Protection => 4,
            DrawKind::Conviction => 5,
            DrawKind::EmploymentFlip => 6,
            DrawKind::IncomeJitter => 7,
        }
    }
}

/// Source of the uniform `[0, 1)` draws the engine needs during a run.
///
/// `subject` is a family id for family-level draws and an agent id for
/// agent-level draws.
pub trait DrawSource {
    fn draw(&mut self, kind: DrawKind, step: u32, subject: u32) -> f64;
}

/// Scripted sources for tests and traces.
impl<F> DrawSource for F
where
    F: FnMut(DrawKind, u32, u32) -> f64,
{
    fn draw(&mut self, kind: DrawKind, step: u32, subject: u32) -> f64 {
        self(kind, step, subject)
    }
}

/// Draws addressed by `(kind, step, subject)` under a fixed key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedDraws {
    key: u64,
}

impl KeyedDraws {
    pub fn new(stream: &Stream) -> Self {
        KeyedDraws {
            key: stream.derive(0x6479_6e61_6d69_6373).key(),
        }
    }

    pub fn value(&self, kind: DrawKind, step: u32, subject: u32) -> f64 {
        let address = (kind.tag() << 56) ^ (u64::from(step) << 32) ^ u64::from(subject);
        unit_f64(mix64(mix64(self.key ^ address) ^ GOLDEN_GAMMA))
    }
}

impl DrawSource for KeyedDraws {
    fn draw(&mut self, kind: DrawKind, step: u32, subject: u32) -> f64 {
        self.value(kind, step, subject)
    }
}
