//! The four learning engines.
//!
//! * `VI` / `VS`: Vriend-style play. Each period every player picks one of its
//!   own chromosomes uniformly at random and the game is played; after
//!   `ga_rate` periods the populations are updated.
//! * `CP` / `CS`: co-evolutionary programming. Each generation the
//!   populations are matched through independent uniform permutations so
//!   every chromosome plays exactly one game, then the populations are
//!   updated.
//!
//! The individual variants (`VI`, `CP`) evolve each player's population on
//! its own; the social variants (`VS`, `CS`) pool all chromosomes, evolve the
//! pool, and hand offspring `iK..(i+1)K` back to player `i`.
//!
//! Fitness lives in population slots: a slot holds the profit of the last
//! game played from it and keeps that value through updates until it is
//! played again.
//!
//! Per generation the random draws happen in this order: game play (player
//! picks or matching permutations, player order), then the GA update (player
//! order for individual learning, once for the pool for social learning).

mod oracle;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use oracle::expected_profit_coevol_oracle;
pub use trace::{
    population_hash, GameRecord, GenerationRecord, GenerationTrace, NullSink, TraceSink,
};
pub(crate) use trace::Moments;

use crate::encoding::{Chromosome, QuantityCodec};
use crate::error::{Error, Result};
use crate::market::{MarketModel, ModelSpec};
use crate::markov::lumped_state_of;
use crate::operators::{next_generation, FitnessScheme, GaParams, Owner, Population};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    /// Vriend, individual learning.
    VI,
    /// Vriend, social learning.
    VS,
    /// Co-evolutionary programming, individual learning.
    CP,
    /// Co-evolutionary programming, social learning.
    CS,
}

impl AlgorithmKind {
    pub fn is_social(self) -> bool {
        matches!(self, AlgorithmKind::VS | AlgorithmKind::CS)
    }

    pub fn is_vriend(self) -> bool {
        matches!(self, AlgorithmKind::VI | AlgorithmKind::VS)
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "VI" => Ok(AlgorithmKind::VI),
            "VS" => Ok(AlgorithmKind::VS),
            "CP" => Ok(AlgorithmKind::CP),
            "CS" => Ok(AlgorithmKind::CS),
            _ => Err(Error::config(format!("unknown algorithm `{s}` (expected VI, VS, CP or CS)"))),
        }
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Every bit a fair coin.
    #[default]
    Random,
    AntiNash,
    Nash,
    /// One list of bitstrings per player.
    Explicit(Vec<Vec<Chromosome>>),
}

impl InitMode {
    pub fn name(&self) -> &'static str {
        match self {
            InitMode::Random => "random",
            InitMode::AntiNash => "anti_nash",
            InitMode::Nash => "nash",
            InitMode::Explicit(_) => "explicit",
        }
    }
}

pub const DEFAULT_GA_RATE: u32 = 50;

/// Full configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    pub model: ModelSpec,
    pub kind: AlgorithmKind,
    /// Chromosomes per player.
    pub pop_size: usize,
    /// Chromosome length.
    pub bits: u32,
    pub p_mut: f64,
    pub p_cross: f64,
    /// Periods per generation for VI/VS.
    pub ga_rate: u32,
    pub generations: u64,
    pub seed: u64,
    pub init: InitMode,
    #[serde(default)]
    pub fitness: FitnessScheme,
}

impl SimulationParams {
    pub fn new(model: impl Into<ModelSpec>, kind: AlgorithmKind) -> Self {
        SimulationParams {
            model: model.into(),
            kind,
            pop_size: 40,
            bits: 20,
            p_mut: 0.001,
            p_cross: 1.0,
            ga_rate: DEFAULT_GA_RATE,
            generations: 1000,
            seed: 0,
            init: InitMode::Random,
            fitness: FitnessScheme::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 || !self.pop_size.is_multiple_of(2) {
            return Err(Error::config(format!("population size must be even and >= 2, got {}", self.pop_size)));
        }
        if self.bits < 2 || !self.bits.is_multiple_of(2) || self.bits > crate::encoding::MAX_BITS {
            return Err(Error::config(format!(
                "chromosome length must be even and in 2..=64, got {}",
                self.bits
            )));
        }
        if self.generations == 0 {
            return Err(Error::config("at least one generation is required"));
        }
        if self.kind.is_vriend() && self.ga_rate == 0 {
            return Err(Error::config("GA rate must be positive"));
        }
        self.fitness.validate()?;
        GaParams { p_cross: self.p_cross, p_mut: self.p_mut }.validate()
    }

    /// Games played in every generation.
    pub fn games_per_generation(&self) -> usize {
        if self.kind.is_vriend() {
            self.ga_rate as usize
        } else {
            self.pop_size
        }
    }
}

/// What is kept besides the per-generation summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub record_games: bool,
    pub snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct SimulationState<T> {
    pub populations: Vec<Population>,
    /// Latest realised profit per population slot, `None` until the slot is
    /// first played. A slot keeps its value across updates until it is
    /// played again.
    pub profits: Vec<Vec<Option<T>>>,
    pub period: u64,
    pub generation: u64,
}

impl<T: Real> SimulationState<T> {
    fn from_populations(populations: Vec<Population>) -> Self {
        let profits = populations.iter().map(|p| vec![None; p.len()]).collect();
        SimulationState { populations, profits, period: 0, generation: 0 }
    }
}

/// One seeded run of one learning algorithm.
#[derive(Debug, Clone)]
pub struct Simulation<T: Real> {
    params: SimulationParams,
    options: TraceOptions,
    model: MarketModel<T>,
    codec: QuantityCodec<T>,
    q_hat: T,
    nash: Chromosome,
    ga: GaParams,
    state: SimulationState<T>,
    rng: ChaCha8Rng,
}

/// Accumulates the quantity summary of one generation.
struct GenerationTally {
    games: u32,
    ne_games: u32,
    per_game: Moments,
    player_sums: Vec<f64>,
    records: Option<Vec<GameRecord>>,
}

impl GenerationTally {
    fn new(players: usize, keep_games: bool) -> Self {
        GenerationTally {
            games: 0,
            ne_games: 0,
            per_game: Moments::default(),
            player_sums: vec![0.0; players],
            records: keep_games.then(Vec::new),
        }
    }
}

impl<T: Real> Simulation<T> {
    pub fn new(params: SimulationParams, options: TraceOptions) -> Result<Self> {
        params.validate()?;
        let model: MarketModel<T> = params.model.build()?;
        let q_hat = model.symmetric_nash(T::lit(1e-12).max(T::epsilon()))?.q_hat;
        let codec = QuantityCodec::for_nash(params.bits, q_hat)?;
        let nash = codec.nash_chromosome()?;
        let ga = GaParams { p_cross: params.p_cross, p_mut: params.p_mut };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let populations = init_populations(&params, model.players, &codec, &mut rng)?;
        Ok(Simulation {
            state: SimulationState::from_populations(populations),
            params,
            options,
            model,
            codec,
            q_hat,
            nash,
            ga,
            rng,
        })
    }

    pub fn params(&self) -> &SimulationParams {
        &self.params
    }

    pub fn model(&self) -> &MarketModel<T> {
        &self.model
    }

    pub fn codec(&self) -> &QuantityCodec<T> {
        &self.codec
    }

    pub fn q_hat(&self) -> T {
        self.q_hat
    }

    pub fn nash_chromosome(&self) -> Chromosome {
        self.nash
    }

    pub fn state(&self) -> &SimulationState<T> {
        &self.state
    }

    pub fn players(&self) -> usize {
        self.model.players
    }

    fn play(&mut self, chosen: &[usize], tally: &mut GenerationTally) -> Result<()> {
        let chromosomes: Vec<Chromosome> =
            chosen.iter().enumerate().map(|(i, &j)| self.state.populations[i].members[j]).collect();
        let quantities: Vec<T> = chromosomes.iter().map(|c| self.codec.decode_value(c.value())).collect();
        let outcome = self.model.play_game(&quantities)?;
        for (i, &j) in chosen.iter().enumerate() {
            self.state.profits[i][j] = Some(outcome.profits[i]);
        }

        let players = quantities.len() as f64;
        let qs: Vec<f64> = quantities.iter().map(|q| q.as_f64()).collect();
        tally.per_game.push(qs.iter().sum::<f64>() / players);
        for (sum, q) in tally.player_sums.iter_mut().zip(&qs) {
            *sum += q;
        }
        tally.games += 1;
        if chromosomes.iter().all(|c| *c == self.nash) {
            tally.ne_games += 1;
        }
        if let Some(records) = tally.records.as_mut() {
            records.push(GameRecord {
                chosen: chosen.to_vec(),
                chromosomes,
                quantities: qs,
                price: outcome.price.as_f64(),
                profits: outcome.profits.iter().map(|p| p.as_f64()).collect(),
            });
        }
        Ok(())
    }

    /// One Vriend period: each player picks one of its own chromosomes
    /// uniformly and the game is played.
    pub fn vriend_period(&mut self) -> Result<GameRecord> {
        let mut tally = GenerationTally::new(self.players(), true);
        self.vriend_period_into(&mut tally)?;
        self.state.period += 1;
        Ok(tally.records.unwrap().pop().unwrap())
    }

    fn vriend_period_into(&mut self, tally: &mut GenerationTally) -> Result<()> {
        let k = self.params.pop_size;
        let chosen: Vec<usize> = (0..self.players()).map(|_| self.rng.random_range(0..k)).collect();
        self.play(&chosen, tally)
    }

    /// Plays the `K` matched games of one co-evolutionary generation and
    /// returns their records. Each chromosome plays exactly once.
    pub fn coevol_matchups(&mut self) -> Result<Vec<GameRecord>> {
        let mut tally = GenerationTally::new(self.players(), true);
        self.coevol_matchups_into(&mut tally)?;
        Ok(tally.records.unwrap())
    }

    fn coevol_matchups_into(&mut self, tally: &mut GenerationTally) -> Result<()> {
        let k = self.params.pop_size;
        let perms: Vec<Vec<usize>> = (0..self.players())
            .map(|_| {
                let mut perm: Vec<usize> = (0..k).collect();
                shuffle(&mut perm, &mut self.rng);
                perm
            })
            .collect();
        for j in 0..k {
            let chosen: Vec<usize> = perms.iter().map(|p| p[j]).collect();
            self.play(&chosen, tally)?;
        }
        Ok(())
    }

    /// Profits used for selection. Slots never played so far take the mean
    /// of the recorded ones in the same group.
    fn selection_profits(&self, players: &[usize]) -> Vec<T> {
        let recorded = players.iter().flat_map(|&i| self.state.profits[i].iter().flatten());
        let (sum, count) = recorded.fold((T::zero(), 0usize), |(s, c), &p| (s + p, c + 1));
        let fill = if count == 0 { T::zero() } else { sum / T::from_usize(count).unwrap() };
        players.iter().flat_map(|&i| self.state.profits[i].iter().map(move |p| p.unwrap_or(fill))).collect()
    }

    /// The GA step shared by all four algorithms.
    pub fn update_populations(&mut self) -> Result<()> {
        let n = self.players();
        let k = self.params.pop_size;
        if self.params.kind.is_social() {
            let all: Vec<usize> = (0..n).collect();
            let fitness = self.params.fitness.apply(&self.selection_profits(&all));
            let pooled = Population {
                members: self.state.populations.iter().flat_map(|p| p.members.iter().copied()).collect(),
                owner: Owner::Pooled,
            };
            let offspring = next_generation(&pooled, &fitness, &self.ga, &mut self.rng)?;
            for (i, chunk) in offspring.members.chunks(k).enumerate() {
                self.state.populations[i].members.copy_from_slice(chunk);
            }
        } else {
            for i in 0..n {
                let fitness = self.params.fitness.apply(&self.selection_profits(&[i]));
                let next = next_generation(&self.state.populations[i], &fitness, &self.ga, &mut self.rng)?;
                self.state.populations[i] = next;
            }
        }
        Ok(())
    }

    /// Runs one generation: its games, then the population update.
    pub fn step(&mut self) -> Result<GenerationTrace> {
        let mut tally = GenerationTally::new(self.players(), self.options.record_games);
        if self.params.kind.is_vriend() {
            for _ in 0..self.params.ga_rate {
                self.vriend_period_into(&mut tally)?;
                self.state.period += 1;
            }
        } else {
            self.coevol_matchups_into(&mut tally)?;
            self.state.period += self.params.pop_size as u64;
        }
        self.update_populations()?;

        let lumped = lumped_state_of(&self.state.populations, &self.nash)?;
        let games = f64::from(tally.games);
        let record = GenerationRecord {
            generation: self.state.generation,
            lumped_state: lumped.0,
            games: tally.games,
            ne_games: tally.ne_games,
            mean_q: tally.per_game.mean,
            q_m2: tally.per_game.m2,
            player_means: tally.player_sums.iter().map(|s| s / games).collect(),
            population_hash: population_hash(&self.state.populations),
        };
        self.state.generation += 1;
        Ok(GenerationTrace {
            record,
            games: tally.records,
            snapshot: self.options.snapshots.then(|| self.state.populations.clone()),
        })
    }

    /// Runs the remaining generations, handing each trace to `sink`.
    pub fn run<S: TraceSink + ?Sized>(&mut self, sink: &mut S) -> Result<()> {
        while self.state.generation < self.params.generations {
            let trace = self.step()?;
            sink.accept(&trace)
                .map_err(|source| Error::Sink { generation: trace.record.generation, source })?;
        }
        Ok(())
    }
}

/// Fisher-Yates, drawing `i` from `0..=j` for `j = len-1` down to 1.
fn shuffle<R: Rng + ?Sized>(xs: &mut [usize], rng: &mut R) {
    for j in (1..xs.len()).rev() {
        let i = rng.random_range(0..=j);
        xs.swap(i, j);
    }
}

fn init_populations<T: Real, R: Rng + ?Sized>(
    params: &SimulationParams,
    players: usize,
    codec: &QuantityCodec<T>,
    rng: &mut R,
) -> Result<Vec<Population>> {
    let (k, bits) = (params.pop_size, params.bits);
    let filled = |c: Chromosome| -> Vec<Population> {
        (0..players).map(|i| Population { members: vec![c; k], owner: Owner::Player(i) }).collect()
    };
    match &params.init {
        InitMode::Nash => Ok(filled(codec.nash_chromosome()?)),
        InitMode::AntiNash => Ok(filled(codec.anti_nash_chromosome()?)),
        InitMode::Random => {
            let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
            (0..players)
                .map(|i| {
                    let members = (0..k)
                        .map(|_| Chromosome::new(rng.random::<u64>() & mask, bits))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Population { members, owner: Owner::Player(i) })
                })
                .collect()
        }
        InitMode::Explicit(pops) => {
            if pops.len() != players || pops.iter().any(|p| p.len() != k || p.iter().any(|c| c.len() != bits)) {
                return Err(Error::config(format!(
                    "explicit initial populations must be {players} x {k} chromosomes of {bits} bits"
                )));
            }
            Ok(pops
                .iter()
                .enumerate()
                .map(|(i, p)| Population { members: p.clone(), owner: Owner::Player(i) })
                .collect())
        }
    }
}

/// Builds and runs a simulation, streaming its generations to `sink`.
pub fn run_simulation<T: Real, S: TraceSink + ?Sized>(
    params: SimulationParams,
    options: TraceOptions,
    sink: &mut S,
) -> Result<Simulation<T>> {
    let mut sim = Simulation::new(params, options)?;
    sim.run(sink)?;
    Ok(sim)
}

#[cfg(test)]
mod tests;
