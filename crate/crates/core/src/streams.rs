//! Labelled random streams derived from one root seed.
//!
//! The root seed is expanded into a ChaCha8 key (`seed_from_u64`, PCG32
//! expansion as defined by `rand_core`). Every consumer reads its own ChaCha
//! stream: same key, stream id = the label's fixed index, block counter from
//! zero. Streams are independent and a new label never shifts the output of
//! an existing one.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    AliceBits,
    BobBits,
    SyncBits,
    Detector,
    Eve,
    Drift,
    /// Detector counts in the bias-probe windows.
    Probe,
}

impl StreamLabel {
    pub fn id(self) -> u64 {
        match self {
            StreamLabel::AliceBits => 1,
            StreamLabel::BobBits => 2,
            StreamLabel::SyncBits => 3,
            StreamLabel::Detector => 4,
            StreamLabel::Eve => 5,
            StreamLabel::Drift => 6,
            StreamLabel::Probe => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamLabel::AliceBits => "alice_bits",
            StreamLabel::BobBits => "bob_bits",
            StreamLabel::SyncBits => "sync_bits",
            StreamLabel::Detector => "detector",
            StreamLabel::Eve => "eve",
            StreamLabel::Drift => "drift",
            StreamLabel::Probe => "probe",
        }
    }
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn stream(&self, label: StreamLabel) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(label.id());
        rng
    }
}

/// One RNG per label, owned by a single scenario.
#[derive(Debug, Clone)]
pub struct ScenarioStreams {
    pub alice_bits: ChaCha8Rng,
    pub bob_bits: ChaCha8Rng,
    pub sync_bits: ChaCha8Rng,
    pub detector: ChaCha8Rng,
    pub eve: ChaCha8Rng,
    pub drift: ChaCha8Rng,
    pub probe: ChaCha8Rng,
}

impl ScenarioStreams {
    pub fn new(seed: u64) -> Self {
        let tree = SeedTree::new(seed);
        Self {
            alice_bits: tree.stream(StreamLabel::AliceBits),
            bob_bits: tree.stream(StreamLabel::BobBits),
            sync_bits: tree.stream(StreamLabel::SyncBits),
            detector: tree.stream(StreamLabel::Detector),
            eve: tree.stream(StreamLabel::Eve),
            drift: tree.stream(StreamLabel::Drift),
            probe: tree.stream(StreamLabel::Probe),
        }
    }
}
