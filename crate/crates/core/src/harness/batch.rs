use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{q_nash, ExperimentConfig, GridPoint};
use super::io::{
    meta_path_for, read_json, read_trace_csv, write_json, write_jsonl, GamesCsvSink, RunMeta, TraceCsvSink,
    GAMES_SUFFIX, TRACE_SUFFIX,
};
use crate::algorithms::{run_simulation, GenerationRecord, SimulationParams, TraceOptions};
use crate::error::{Error, Result};
use crate::markov::ChainStats;
use crate::stats::{batch_verdicts, quantity_stats, RunQuantityStats, VerdictTable};

/// Generator used by every run, recorded in report headers.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

/// Statistics of one finished run; one line of `stats.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub grid_index: usize,
    pub replicate: u64,
    pub seed: u64,
    pub chain: ChainStats,
    pub quantities: RunQuantityStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub grid_index: usize,
    pub replicate: u64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub runs: usize,
    /// Runs whose hitting time is defined and finite.
    pub reached: usize,
    pub censored: usize,
    /// `censored / (reached + censored)`; absent for random starts.
    pub censoring_rate: Option<f64>,
    pub mean_gen_to_ne: Option<f64>,
    pub median_gen_to_ne: Option<f64>,
    /// Lumped-state frequencies over all post-burn-in generations of all runs.
    pub pooled_freq: Vec<f64>,
    /// Mean of all `S_0` return gaps of all runs.
    pub mean_interarrival: Option<f64>,
    pub mean_ne_game_fraction: f64,
    /// Over the runs that visited `S_0`.
    pub mean_ne_game_fraction_after_hit: Option<f64>,
    pub mean_grand_q: f64,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn median(xs: &[f64]) -> Option<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

impl Aggregates {
    /// `weights[i]` is the number of post-burn-in generations behind run
    /// `i`'s frequencies.
    pub fn from_runs(runs: &[RunRecord], weights: &[f64]) -> Aggregates {
        let hits: Vec<f64> =
            runs.iter().filter_map(|r| r.chain.gen_to_ne.and_then(|h| h.reached())).map(|g| g as f64).collect();
        let defined = runs.iter().filter(|r| r.chain.gen_to_ne.is_some()).count();
        let censored = defined - hits.len();
        let states = runs.iter().map(|r| r.chain.freq.len()).max().unwrap_or(0);
        let total_weight: f64 = weights.iter().sum();
        let pooled_freq = (0..states)
            .map(|s| {
                let mass: f64 =
                    runs.iter().zip(weights).map(|(r, w)| w * r.chain.freq.get(s).copied().unwrap_or(0.0)).sum();
                if total_weight > 0.0 {
                    mass / total_weight
                } else {
                    0.0
                }
            })
            .collect();
        Aggregates {
            runs: runs.len(),
            reached: hits.len(),
            censored,
            censoring_rate: (defined > 0).then(|| censored as f64 / defined as f64),
            mean_gen_to_ne: mean(hits.iter().copied()),
            median_gen_to_ne: median(&hits),
            pooled_freq,
            mean_interarrival: mean(runs.iter().flat_map(|r| r.chain.interarrival.iter().map(|&g| g as f64))),
            mean_ne_game_fraction: mean(runs.iter().map(|r| r.chain.ne_game_fraction)).unwrap_or(0.0),
            mean_ne_game_fraction_after_hit: mean(runs.iter().filter_map(|r| r.chain.ne_game_fraction_after_hit)),
            mean_grand_q: mean(runs.iter().map(|r| r.quantities.grand_mean_q)).unwrap_or(f64::NAN),
        }
    }
}

/// Everything known about one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub rng: String,
    pub grid_index: usize,
    /// Parameters shared by the runs; `seed` is zero.
    pub params: SimulationParams,
    pub base_seed: u64,
    pub burn_in: usize,
    pub alpha: f64,
    pub q_nash: f64,
    pub aggregates: Aggregates,
    /// Absent when fewer than two runs finished.
    pub verdicts: Option<VerdictTable>,
    pub failures: Vec<RunFailure>,
    pub runs: Vec<RunRecord>,
}

impl BatchReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        grid_index: usize,
        params: SimulationParams,
        base_seed: u64,
        burn_in: usize,
        alpha: f64,
        q_nash: f64,
        runs: Vec<RunRecord>,
        failures: Vec<RunFailure>,
    ) -> BatchReport {
        let weight = params.generations.saturating_sub(burn_in as u64) as f64;
        let aggregates = Aggregates::from_runs(&runs, &vec![weight; runs.len()]);
        let keyed: Vec<((), RunQuantityStats)> = runs.iter().map(|r| ((), r.quantities.clone())).collect();
        let verdicts = if keyed.len() >= 2 { batch_verdicts(&keyed, q_nash, alpha).ok() } else { None };
        BatchReport {
            rng: RNG_NAME.into(),
            grid_index,
            params,
            base_seed,
            burn_in,
            alpha,
            q_nash,
            aggregates,
            verdicts,
            failures,
            runs,
        }
    }
}

pub fn grid_dir(root: &Path, grid_index: usize) -> PathBuf {
    root.join(format!("g{grid_index:03}"))
}

pub fn run_stem(replicate: u64) -> String {
    format!("run{replicate:04}")
}

/// Runs one replicate, writing its trace files under `dir` when given.
pub fn run_one(
    config: &ExperimentConfig,
    point: &GridPoint,
    replicate: u64,
    dir: Option<&Path>,
) -> Result<RunRecord> {
    let params = config.run_params(point, replicate);
    let players = config.players()?;
    let options = TraceOptions { record_games: config.record_games && dir.is_some(), snapshots: false };
    let stem = run_stem(replicate);
    let files = match dir {
        Some(d) => {
            let trace = TraceCsvSink::create(&d.join(format!("{stem}{TRACE_SUFFIX}")), players)?;
            let games = if options.record_games {
                Some(GamesCsvSink::create(&d.join(format!("{stem}{GAMES_SUFFIX}")), players)?)
            } else {
                None
            };
            Some((trace, games))
        }
        None => None,
    };
    let mut sink = (Vec::<GenerationRecord>::with_capacity(params.generations as usize), files);
    let sim = run_simulation::<f64, _>(params.clone(), options, &mut sink)?;
    let (records, files) = sink;
    if let (Some((trace, games)), Some(d)) = (files, dir) {
        trace.finish()?;
        if let Some(g) = games {
            g.finish()?;
        }
        let meta = RunMeta {
            grid_index: point.index,
            replicate,
            base_seed: config.base_seed,
            players,
            q_nash: sim.q_hat(),
            q_max: *sim.codec().q_max(),
            rng: RNG_NAME.into(),
            params: params.clone(),
        };
        write_json(&d.join(format!("{stem}{}", super::io::META_SUFFIX)), &meta)?;
    }
    Ok(RunRecord {
        grid_index: point.index,
        replicate,
        seed: params.seed,
        chain: ChainStats::from_trace(&records, params.bits, &params.init, config.burn_in)?,
        quantities: quantity_stats(&records, players)?,
    })
}

fn with_pool<R: Send>(threads: Option<usize>, job: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
        None => Ok(job()),
    }
}

/// Executes every (grid point, replicate) pair, in parallel across runs,
/// and returns one report per grid point. With `out` set, traces, per-run
/// stats and reports are written there. Failed runs are recorded and the
/// batch carries on.
pub fn run_batch(config: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<BatchReport>> {
    config.validate()?;
    let grid = config.grid()?;
    if let Some(root) = out {
        std::fs::create_dir_all(root)?;
        std::fs::write(root.join("config.toml"), config.to_toml_string()?)?;
        for p in &grid {
            std::fs::create_dir_all(grid_dir(root, p.index))?;
        }
    }
    let jobs: Vec<(&GridPoint, u64)> = grid.iter().flat_map(|p| (0..config.seeds).map(move |r| (p, r))).collect();
    let results: Vec<std::result::Result<RunRecord, RunFailure>> = with_pool(config.threads, || {
        jobs.par_iter()
            .map(|&(point, rep)| {
                let dir = out.map(|root| grid_dir(root, point.index));
                let result = run_one(config, point, rep, dir.as_deref());
                if config.verbosity > 0 {
                    eprintln!("grid {} run {rep}: {}", point.index, if result.is_ok() { "done" } else { "failed" });
                }
                result.map_err(|e| RunFailure {
                    grid_index: point.index,
                    replicate: rep,
                    seed: config.run_params(point, rep).seed,
                    error: e.to_string(),
                })
            })
            .collect()
    })?;

    let mut by_grid: BTreeMap<usize, (Vec<RunRecord>, Vec<RunFailure>)> = BTreeMap::new();
    for r in results {
        match r {
            Ok(rec) => by_grid.entry(rec.grid_index).or_default().0.push(rec),
            Err(f) => by_grid.entry(f.grid_index).or_default().1.push(f),
        }
    }
    let mut reports = Vec::with_capacity(grid.len());
    for point in &grid {
        let (runs, failures) = by_grid.remove(&point.index).unwrap_or_default();
        let report = BatchReport::assemble(
            point.index,
            point.params.clone(),
            config.base_seed,
            config.burn_in,
            config.alpha,
            q_nash::<f64>(&config.model)?,
            runs,
            failures,
        );
        if let Some(root) = out {
            let dir = grid_dir(root, point.index);
            write_jsonl(&dir.join("stats.jsonl"), &report.runs)?;
            write_json(&dir.join("report.json"), &report)?;
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Trace files under `path` (a file, or a directory searched recursively).
pub fn find_traces(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if path.is_file() {
        out.push(path.to_path_buf());
    } else {
        let mut stack = vec![path.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.to_string_lossy().ends_with(TRACE_SUFFIX) {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Recomputes reports from trace files and their sidecars, one report per
/// distinct parameter set.
pub fn analyze_traces(paths: &[PathBuf], burn_in: usize, alpha: f64) -> Result<Vec<BatchReport>> {
    if paths.is_empty() {
        return Err(Error::Analysis("no trace files to analyze".into()));
    }
    let mut groups: Vec<(SimulationParams, RunMeta, Vec<RunRecord>)> = Vec::new();
    for path in paths {
        let meta: RunMeta = read_json(&meta_path_for(path))?;
        let records = read_trace_csv(path)?;
        if records.len() as u64 != meta.params.generations {
            return Err(Error::Analysis(format!(
                "{}: {} rows for a {}-generation run",
                path.display(),
                records.len(),
                meta.params.generations
            )));
        }
        let run = RunRecord {
            grid_index: meta.grid_index,
            replicate: meta.replicate,
            seed: meta.params.seed,
            chain: ChainStats::from_trace(&records, meta.params.bits, &meta.params.init, burn_in)?,
            quantities: quantity_stats(&records, meta.players)?,
        };
        let key = SimulationParams { seed: 0, ..meta.params.clone() };
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.2.push(run),
            None => groups.push((key, meta, vec![run])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(params, meta, mut runs)| {
            runs.sort_by_key(|r| r.replicate);
            BatchReport::assemble(meta.grid_index, params, meta.base_seed, burn_in, alpha, meta.q_nash, runs, Vec::new())
        })
        .collect())
}
