use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};

use crate::algorithms::{AlgorithmKind, InitMode, SimulationParams, DEFAULT_GA_RATE};
use crate::error::{Error, Result};
use crate::market::ModelSpec;
use crate::operators::FitnessScheme;
use crate::scalar::Real;
use crate::stats::DEFAULT_ALPHA;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "COURNOT_OUT";
/// Used when neither the config nor the environment names a directory.
pub const FALLBACK_OUTPUT_DIR: &str = "cournot-out";
pub const DEFAULT_SEEDS: u64 = 30;

/// Chromosome length used when the config leaves it out.
pub fn default_bits(players: usize) -> u32 {
    if players <= 4 {
        20
    } else {
        8
    }
}

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` at grid point `grid_index`:
/// `splitmix64(splitmix64(base_seed ^ splitmix64(grid_index)) ^ replicate)`.
pub fn mix_seed(base_seed: u64, grid_index: usize, replicate: u64) -> u64 {
    splitmix64(splitmix64(base_seed ^ splitmix64(grid_index as u64)) ^ replicate)
}

fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Grid<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match Grid::deserialize(de)? {
        Grid::One(x) => vec![x],
        Grid::Many(v) => v,
    })
}

fn default_pop() -> Vec<usize> {
    vec![40]
}
fn default_p_mut() -> Vec<f64> {
    vec![0.001]
}
fn default_generations() -> Vec<u64> {
    vec![1000]
}
fn default_ga_rate() -> Vec<u32> {
    vec![DEFAULT_GA_RATE]
}
fn default_p_cross() -> f64 {
    1.0
}
fn default_seeds() -> u64 {
    DEFAULT_SEEDS
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// A batch of runs: every combination of the grid fields, `seeds` replicates
/// each. Grid fields take a single value or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub algorithm: AlgorithmKind,
    #[serde(default = "default_pop", deserialize_with = "one_or_many")]
    pub pop: Vec<usize>,
    #[serde(default = "default_p_mut", deserialize_with = "one_or_many")]
    pub p_mut: Vec<f64>,
    #[serde(default = "default_generations", deserialize_with = "one_or_many")]
    pub generations: Vec<u64>,
    #[serde(default = "default_ga_rate", deserialize_with = "one_or_many")]
    pub ga_rate: Vec<u32>,
    /// Defaults to 20 for up to four players, 8 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    #[serde(default = "default_p_cross")]
    pub p_cross: f64,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub record_games: bool,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub verbosity: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub init: InitMode,
    #[serde(default)]
    pub fitness: FitnessScheme,
}

/// One cell of the parameter grid. `params.seed` is left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub params: SimulationParams,
}

impl ExperimentConfig {
    pub fn new(model: impl Into<ModelSpec>, algorithm: AlgorithmKind) -> Self {
        ExperimentConfig {
            model: model.into(),
            algorithm,
            pop: default_pop(),
            p_mut: default_p_mut(),
            generations: default_generations(),
            ga_rate: default_ga_rate(),
            bits: None,
            p_cross: 1.0,
            seeds: DEFAULT_SEEDS,
            base_seed: 0,
            burn_in: 0,
            record_games: false,
            alpha: DEFAULT_ALPHA,
            verbosity: 0,
            threads: None,
            output_dir: None,
            init: InitMode::Random,
            fitness: FitnessScheme::default(),
        }
    }

    /// Parses and validates. Errors name the offending line.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        config.validate_fields().map_err(|(field, msg)| match key_line(src, field) {
            Some(line) => Error::Config(format!("line {line}: `{field}`: {msg}")),
            None => Error::Config(format!("`{field}`: {msg}")),
        })?;
        config.grid()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_fields().map_err(|(field, msg)| Error::Config(format!("`{field}`: {msg}")))?;
        self.grid().map(|_| ())
    }

    fn validate_fields(&self) -> std::result::Result<(), (&'static str, String)> {
        fn nonempty<T>(field: &'static str, v: &[T]) -> std::result::Result<(), (&'static str, String)> {
            if v.is_empty() {
                Err((field, "needs at least one value".into()))
            } else {
                Ok(())
            }
        }
        nonempty("pop", &self.pop)?;
        nonempty("p_mut", &self.p_mut)?;
        nonempty("generations", &self.generations)?;
        nonempty("ga_rate", &self.ga_rate)?;
        if let Some(&k) = self.pop.iter().find(|&&k| k < 2 || k % 2 != 0) {
            return Err(("pop", format!("population size must be even and >= 2, got {k}")));
        }
        if let Some(&p) = self.p_mut.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(("p_mut", format!("probability outside [0, 1]: {p}")));
        }
        if self.generations.contains(&0) {
            return Err(("generations", "at least one generation is required".into()));
        }
        if self.algorithm.is_vriend() && self.ga_rate.contains(&0) {
            return Err(("ga_rate", "GA rate must be positive".into()));
        }
        if let Some(b) = self.bits {
            if b < 2 || b % 2 != 0 || b > crate::encoding::MAX_BITS {
                return Err(("bits", format!("chromosome length must be even and in 2..=64, got {b}")));
            }
        }
        if self.p_cross != 1.0 {
            return Err(("p_cross", format!("crossover probability is fixed at 1, got {}", self.p_cross)));
        }
        if self.seeds == 0 {
            return Err(("seeds", "at least one seed is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(("alpha", format!("significance level outside (0, 1): {}", self.alpha)));
        }
        if self.threads == Some(0) {
            return Err(("threads", "thread count must be positive".into()));
        }
        if let Some(&t) = self.generations.iter().find(|&&t| self.burn_in as u64 >= t) {
            return Err(("burn_in", format!("burn-in {} leaves nothing of a {t}-generation run", self.burn_in)));
        }
        self.fitness.validate().map_err(|e| ("fitness", e.to_string()))?;
        self.model.build::<f64>().map_err(|e| ("model", e.to_string()))?;
        Ok(())
    }

    pub fn players(&self) -> Result<usize> {
        Ok(self.model.build::<f64>()?.players)
    }

    pub fn bits_or_default(&self) -> Result<u32> {
        Ok(match self.bits {
            Some(b) => b,
            None => default_bits(self.players()?),
        })
    }

    /// Grid cells in nesting order pop, p_mut, generations, ga_rate (last
    /// varies fastest). For CP/CS the GA rate has no effect and only its
    /// first value is used.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let bits = self.bits_or_default()?;
        let ga_rates: &[u32] = if self.algorithm.is_vriend() { &self.ga_rate } else { &self.ga_rate[..1] };
        let mut out = Vec::new();
        for &pop_size in &self.pop {
            for &p_mut in &self.p_mut {
                for &generations in &self.generations {
                    for &ga_rate in ga_rates {
                        let params = SimulationParams {
                            model: self.model.clone(),
                            kind: self.algorithm,
                            pop_size,
                            bits,
                            p_mut,
                            p_cross: self.p_cross,
                            ga_rate,
                            generations,
                            seed: 0,
                            init: self.init.clone(),
                            fitness: self.fitness,
                        };
                        params.validate()?;
                        out.push(GridPoint { index: out.len(), params });
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn run_params(&self, point: &GridPoint, replicate: u64) -> SimulationParams {
        SimulationParams { seed: mix_seed(self.base_seed, point.index, replicate), ..point.params.clone() }
    }

    /// Config value, then the environment, then [`FALLBACK_OUTPUT_DIR`].
    pub fn resolve_output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(default_output_dir)
    }
}

pub fn default_output_dir() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR))
}

/// 1-based line of `key = ...` or a `[key]` table header.
fn key_line(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|line| {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix(key) {
            rest.trim_start().starts_with('=')
        } else {
            t.strip_prefix('[').and_then(|r| r.strip_prefix(key)).is_some_and(|r| r.trim_start().starts_with(']'))
        }
    })
    .map(|i| i + 1)
}

/// Equilibrium quantity of the configured model, for labelling.
pub(crate) fn q_nash<T: Real>(spec: &ModelSpec) -> Result<T> {
    let model = spec.build::<T>()?;
    Ok(model.symmetric_nash(T::lit(1e-12).max(T::epsilon()))?.q_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
model = "poly4"
algorithm = "VS"
pop = [20, 40]
p_mut = 0.00025
generations = 500
seeds = 3
base_seed = 7
init = "anti_nash"
"#;

    #[test]
    fn parses_scalars_and_lists() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.pop, vec![20, 40]);
        assert_eq!(c.p_mut, vec![0.00025]);
        assert_eq!(c.init, InitMode::AntiNash);
        assert_eq!(c.bits_or_default().unwrap(), 20);
        let grid = c.grid().unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[1].params.pop_size, 40);
    }

    #[test]
    fn sweep_expands_to_product() {
        let mut c = ExperimentConfig::new("poly4", AlgorithmKind::CS);
        c.p_mut = vec![0.001, 0.0005];
        c.pop = vec![20, 40];
        c.ga_rate = vec![10, 50];
        // co-evolution ignores the GA rate
        assert_eq!(c.grid().unwrap().len(), 4);
        c.algorithm = AlgorithmKind::VS;
        assert_eq!(c.grid().unwrap().len(), 8);
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        c.fitness = FitnessScheme::MinShift;
        c.output_dir = Some("out/x".into());
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, c);

        let mut custom = ExperimentConfig::new(
            ModelSpec::Custom { kind: crate::market::DemandKind::Linear, a: 256.0, b: 1.0, x: 56.0, y: 0.0, players: 4 },
            AlgorithmKind::CP,
        );
        custom.init = InitMode::Explicit(vec![vec!["0101".parse().unwrap(); 2]; 4]);
        custom.bits = Some(4);
        custom.pop = vec![2];
        let text = custom.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), custom);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = SAMPLE.replace("pop = [20, 40]", "pop = [20, 41]");
        let msg = ExperimentConfig::from_toml_str(&bad).unwrap_err().to_string();
        assert!(msg.contains("line 4"), "{msg}");

        let syntax = SAMPLE.replace("seeds = 3", "seeds = = 3");
        let msg = ExperimentConfig::from_toml_str(&syntax).unwrap_err().to_string();
        assert!(msg.contains("line 7"), "{msg}");

        let unknown = format!("{SAMPLE}colour = 3\n");
        assert!(ExperimentConfig::from_toml_str(&unknown).unwrap_err().to_string().contains("colour"));

        let bad_model = SAMPLE.replace("\"poly4\"", "\"poly5\"");
        let msg = ExperimentConfig::from_toml_str(&bad_model).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for g in 0..10 {
            for r in 0..100 {
                assert!(seen.insert(mix_seed(42, g, r)));
            }
        }
        assert_eq!(mix_seed(42, 3, 5), mix_seed(42, 3, 5));
        assert_ne!(mix_seed(42, 0, 0), mix_seed(43, 0, 0));
    }

    #[test]
    fn bits_default_by_player_count() {
        assert_eq!(ExperimentConfig::new("linear20", AlgorithmKind::VS).bits_or_default().unwrap(), 8);
        assert_eq!(ExperimentConfig::new("radical4", AlgorithmKind::VS).bits_or_default().unwrap(), 20);
    }
}
