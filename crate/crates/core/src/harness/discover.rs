use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::algorithms::{GenerationTrace, Simulation, SimulationParams, TraceOptions, TraceSink};
use crate::encoding::Chromosome;
use crate::error::Result;

/// A quantity every player used in the same game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub chromosome: Chromosome,
    pub quantity: f64,
    /// Games in which all players used it.
    pub games: u64,
    /// Best response when all opponents play `quantity`.
    pub best_response: f64,
    pub confirmed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub params: SimulationParams,
    pub total_games: u64,
    pub symmetric_games: u64,
    /// Tolerance of the best-response check: half a grid step.
    pub tolerance: f64,
    /// Most frequent first.
    pub candidates: Vec<Candidate>,
}

impl DiscoveryReport {
    pub fn confirmed(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.confirmed)
    }
}

#[derive(Default)]
struct SymmetricTally {
    total: u64,
    counts: BTreeMap<Chromosome, u64>,
}

impl TraceSink for SymmetricTally {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        for game in trace.games.iter().flatten() {
            self.total += 1;
            if game.is_symmetric() {
                *self.counts.entry(game.chromosomes[0]).or_default() += 1;
            }
        }
        Ok(())
    }
}

/// Runs the simulation, tallies the games in which all players used the same
/// chromosome, and checks each such quantity against the best response to
/// itself. At most `limit` candidates are checked.
pub fn discover(params: SimulationParams, limit: Option<usize>) -> Result<DiscoveryReport> {
    let mut sim = Simulation::<f64>::new(params.clone(), TraceOptions { record_games: true, snapshots: false })?;
    let mut tally = SymmetricTally::default();
    sim.run(&mut tally)?;

    let mut ranked: Vec<(Chromosome, u64)> = tally.counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(limit.unwrap_or(usize::MAX));

    let codec = sim.codec();
    let model = sim.model();
    let tolerance = 0.5 * codec.step();
    let others = (model.players - 1) as f64;
    let candidates = ranked
        .into_iter()
        .map(|(chromosome, games)| {
            let quantity = codec.decode(&chromosome)?;
            Ok(Candidate {
                chromosome,
                quantity,
                games,
                best_response: model.best_response(others * quantity).quantity,
                confirmed: model.verify_nash_candidate(quantity, tolerance),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscoveryReport {
        params,
        total_games: tally.total,
        symmetric_games: candidates.iter().map(|c| c.games).sum(),
        tolerance,
        candidates,
    })
}
