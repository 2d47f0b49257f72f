//! Per-generation records and the sinks that receive them.

use serde::{Deserialize, Serialize};

use crate::encoding::Chromosome;
use crate::operators::Population;

/// One played round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    /// Index of each player's chromosome within its population.
    pub chosen: Vec<usize>,
    pub chromosomes: Vec<Chromosome>,
    pub quantities: Vec<f64>,
    pub price: f64,
    pub profits: Vec<f64>,
}

impl GameRecord {
    /// Every player used the same chromosome.
    pub fn is_symmetric(&self) -> bool {
        self.chromosomes.windows(2).all(|w| w[0] == w[1])
    }
}

/// Summary kept for every generation. This is what trace files hold and what
/// the chain and quantity statistics are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Lumped state of the populations after this generation's update.
    pub lumped_state: u32,
    pub games: u32,
    /// Games in which every player used the Nash chromosome.
    pub ne_games: u32,
    /// Mean over this generation's games of the per-player average quantity.
    pub mean_q: f64,
    /// Sum of squared deviations of the per-game average quantity from
    /// `mean_q`.
    pub q_m2: f64,
    /// Each player's mean quantity over this generation's games.
    pub player_means: Vec<f64>,
    pub population_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationTrace {
    pub record: GenerationRecord,
    /// Present when game recording is enabled.
    pub games: Option<Vec<GameRecord>>,
    /// Populations after the update, when snapshots are enabled.
    pub snapshot: Option<Vec<Population>>,
}

/// Receives generation traces as a run progresses.
pub trait TraceSink {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()>;
}

impl TraceSink for Vec<GenerationTrace> {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        self.push(trace.clone());
        Ok(())
    }
}

impl TraceSink for Vec<GenerationRecord> {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        self.push(trace.record.clone());
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn accept(&mut self, _: &GenerationTrace) -> std::io::Result<()> {
        Ok(())
    }
}

impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        self.0.accept(trace)?;
        self.1.accept(trace)
    }
}

impl<S: TraceSink> TraceSink for Option<S> {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        match self {
            Some(sink) => sink.accept(trace),
            None => Ok(()),
        }
    }
}

impl<S: TraceSink + ?Sized> TraceSink for &mut S {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        (**self).accept(trace)
    }
}

/// FNV-1a over the chromosome values of all players, in order.
pub fn population_hash(populations: &[Population]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for c in populations.iter().flat_map(|p| &p.members) {
        for byte in c.value().to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

/// Running mean and squared-deviation sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise combination of two disjoint samples.
    pub fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments { count, mean, m2 }
    }
}
