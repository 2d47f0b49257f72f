//! Lumped-state view of the population chain.
//!
//! `S_0` is the Nash state (every chromosome equals the Nash chromosome);
//! `S_i`, `i >= 1`, collects the states whose mean Hamming distance to the
//! Nash chromosome lies in `(i-1, i]`. The chain is observed once per
//! generation, after the population update.

use serde::{Deserialize, Serialize};

use crate::algorithms::{GenerationRecord, InitMode};
use crate::encoding::{hamming_total, Chromosome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LumpedStateId(pub u32);

impl LumpedStateId {
    pub const NASH: LumpedStateId = LumpedStateId(0);

    pub fn is_nash(self) -> bool {
        self == Self::NASH
    }
}

/// `ceil(mean Hamming distance)`, computed on integer totals so the interval
/// boundaries are exact.
pub fn lumped_state_of<P: AsRef<[Chromosome]>>(populations: &[P], nash: &Chromosome) -> Result<LumpedStateId> {
    let (total, count) = hamming_total(populations.iter().flat_map(|p| p.as_ref()), nash)?;
    if count == 0 {
        return Err(Error::config("lumped state of empty populations"));
    }
    Ok(LumpedStateId(total.div_ceil(count) as u32))
}

/// Lumped state of a mean distance: 0 iff `d == 0`, otherwise the `i` with
/// `i - 1 < d <= i`.
pub fn lumped_state_of_distance(d: f64) -> LumpedStateId {
    LumpedStateId(d.max(0.0).ceil() as u32)
}

/// First generation at which the chain sits in `S_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingTime {
    Reached(u64),
    /// Not reached within the run's `horizon` generations.
    Censored { horizon: u64 },
}

impl HittingTime {
    pub fn reached(self) -> Option<u64> {
        match self {
            HittingTime::Reached(g) => Some(g),
            HittingTime::Censored { .. } => None,
        }
    }
}

/// Fraction of post-burn-in generations spent in each of the `bits + 1`
/// lumped states.
pub fn limiting_frequencies(trace: &[GenerationRecord], bits: u32, burn_in: usize) -> Result<Vec<f64>> {
    if burn_in >= trace.len() {
        return Err(Error::Analysis(format!(
            "burn-in of {burn_in} leaves nothing of a {}-generation trace",
            trace.len()
        )));
    }
    let mut counts = vec![0u64; bits as usize + 1];
    for rec in &trace[burn_in..] {
        let slot = counts
            .get_mut(rec.lumped_state as usize)
            .ok_or_else(|| Error::Analysis(format!("lumped state {} beyond {bits}", rec.lumped_state)))?;
        *slot += 1;
    }
    let n = (trace.len() - burn_in) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Generations until the first visit to `S_0`, counted from the first record.
/// Only meaningful for runs started from a fixed (Nash or anti-Nash) state.
pub fn generations_to_ne(trace: &[GenerationRecord], init: &InitMode) -> Result<HittingTime> {
    if !matches!(init, InitMode::AntiNash | InitMode::Nash) {
        return Err(Error::Analysis(format!(
            "hitting time needs an anti_nash or nash start, run used {}",
            init.name()
        )));
    }
    Ok(trace
        .iter()
        .position(|r| r.lumped_state == 0)
        .map(|i| HittingTime::Reached(i as u64))
        .unwrap_or(HittingTime::Censored { horizon: trace.len() as u64 }))
}

/// Gaps between consecutive visits to `S_0`.
pub fn interarrival_times(trace: &[GenerationRecord]) -> Vec<u64> {
    let visits: Vec<usize> = trace.iter().enumerate().filter(|(_, r)| r.lumped_state == 0).map(|(i, _)| i).collect();
    visits.windows(2).map(|w| (w[1] - w[0]) as u64).collect()
}

/// Share of all games in which every player used the Nash chromosome.
pub fn ne_game_fraction(trace: &[GenerationRecord]) -> f64 {
    let (ne, games) = trace
        .iter()
        .fold((0u64, 0u64), |(ne, g), r| (ne + u64::from(r.ne_games), g + u64::from(r.games)));
    if games == 0 {
        0.0
    } else {
        ne as f64 / games as f64
    }
}

/// Chain statistics of a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub freq: Vec<f64>,
    /// `None` when the run did not start from a fixed state.
    pub gen_to_ne: Option<HittingTime>,
    pub interarrival: Vec<u64>,
    pub ne_game_fraction: f64,
    /// NE-game share over the generations from the first `S_0` visit on.
    pub ne_game_fraction_after_hit: Option<f64>,
}

impl ChainStats {
    pub fn from_trace(trace: &[GenerationRecord], bits: u32, init: &InitMode, burn_in: usize) -> Result<Self> {
        let freq = limiting_frequencies(trace, bits, burn_in)?;
        let gen_to_ne = generations_to_ne(trace, init).ok();
        let first = trace.iter().position(|r| r.lumped_state == 0);
        Ok(ChainStats {
            freq,
            gen_to_ne,
            interarrival: interarrival_times(trace),
            ne_game_fraction: ne_game_fraction(trace),
            ne_game_fraction_after_hit: first.map(|i| ne_game_fraction(&trace[i..])),
        })
    }

    pub fn mean_interarrival(&self) -> Option<f64> {
        (!self.interarrival.is_empty())
            .then(|| self.interarrival.iter().sum::<u64>() as f64 / self.interarrival.len() as f64)
    }
}
