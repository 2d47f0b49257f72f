//! Desk-scale re-runs of the published tables, with the reproduced numbers
//! set beside the published ones and judged by loose stochastic bounds.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::batch::{run_batch, Aggregates, BatchReport};
use super::config::{ExperimentConfig, DEFAULT_SEEDS};
use crate::algorithms::AlgorithmKind::{self, CP, CS, VI, VS};
use crate::algorithms::InitMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    /// Per-player mean quantities under individual learning.
    Table1,
    /// Lumped frequencies under individual learning.
    Table2,
    /// Lumped frequencies of a failing and a succeeding social run.
    Table4,
    /// Parameter sets under which social learning reaches the Nash state.
    Table5,
    /// Hitting time, return time and NE games under social learning.
    Table6,
}

impl TableId {
    pub const ALL: [TableId; 5] = [TableId::Table1, TableId::Table2, TableId::Table4, TableId::Table5, TableId::Table6];

    pub fn name(self) -> &'static str {
        match self {
            TableId::Table1 => "table1",
            TableId::Table2 => "table2",
            TableId::Table4 => "table4",
            TableId::Table5 => "table5",
            TableId::Table6 => "table6",
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TableId::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            Error::config(format!("unknown table `{s}` (expected table1, table2, table4, table5 or table6)"))
        })
    }
}

/// One compared quantity. `passed` is `None` for numbers shown only for
/// comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub paper: Option<f64>,
    pub reproduced: Option<f64>,
    pub rule: String,
    pub passed: Option<bool>,
}

impl Check {
    fn info(name: impl Into<String>, paper: Option<f64>, reproduced: Option<f64>) -> Check {
        Check { name: name.into(), paper, reproduced, rule: "reported".into(), passed: None }
    }

    fn judged(
        name: impl Into<String>,
        paper: Option<f64>,
        reproduced: Option<f64>,
        rule: impl Into<String>,
        passed: bool,
    ) -> Check {
        Check { name: name.into(), paper, reproduced, rule: rule.into(), passed: Some(passed) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub label: String,
    pub config: ExperimentConfig,
    pub aggregates: Aggregates,
    pub checks: Vec<Check>,
}

impl RowReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub table: TableId,
    pub seeds: u64,
    pub base_seed: u64,
    pub rows: Vec<RowReport>,
}

impl ReplicationReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(RowReport::passed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOptions {
    pub seeds: u64,
    pub base_seed: u64,
    pub threads: Option<usize>,
    /// Per-row trace directories go under here when set.
    pub output_dir: Option<PathBuf>,
    pub verbosity: u8,
}

impl Default for ReplicateOptions {
    fn default() -> Self {
        ReplicateOptions { seeds: DEFAULT_SEEDS, base_seed: 0, threads: None, output_dir: None, verbosity: 0 }
    }
}

/// A row of the social-learning statistics table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialRow {
    pub model: &'static str,
    pub kind: AlgorithmKind,
    pub pop: usize,
    pub p_mut: f64,
    pub generations: u64,
    pub gen_ne: f64,
    pub return_time: f64,
    /// Percent of all games.
    pub ne_games: f64,
}

#[allow(clippy::too_many_arguments)]
const fn row(
    model: &'static str,
    kind: AlgorithmKind,
    pop: usize,
    p_mut: f64,
    generations: u64,
    gen_ne: f64,
    return_time: f64,
    ne_games: f64,
) -> SocialRow {
    SocialRow { model, kind, pop, p_mut, generations, gen_ne, return_time, ne_games }
}

pub const SOCIAL_ROWS: [SocialRow; 12] = [
    row("linear4", VS, 30, 0.001, 10_000, 3749.12, 3.83, 5.54),
    row("linear4", CS, 40, 0.0005, 10_000, 2601.73, 6.97, 73.82),
    row("linear20", VS, 20, 0.0005, 20_000, 2712.45, 6.83, 88.98),
    row("linear20", CS, 20, 0.0001, 20_000, 2321.32, 6.53, 85.64),
    row("poly4", VS, 40, 0.00025, 10_000, 2483.58, 3.55, 83.70),
    row("poly4", CS, 40, 0.0005, 10_000, 2067.72, 8.77, 60.45),
    row("poly20", VS, 20, 0.0005, 20_000, 2781.24, 9.58, 67.60),
    row("poly20", CS, 20, 0.0005, 50_000, 2297.72, 6.63, 83.94),
    row("radical4", VS, 40, 0.00075, 10_000, 2171.32, 4.41, 81.73),
    row("radical4", CS, 40, 0.0005, 10_000, 2917.92, 5.83, 73.69),
    row("radical20", VS, 20, 0.0005, 20_000, 2136.31, 7.87, 75.34),
    row("radical20", CS, 20, 0.0005, 20_000, 2045.81, 7.07, 79.58),
];

const TABLE1_MEANS: [(AlgorithmKind, [f64; 4]); 2] =
    [(VI, [91.8309, 65.37, 93.9287, 93.9933]), (CP, [77.6752, 97.8773, 93.9287, 93.9933])];

/// Nonzero published frequencies, as `(state, freq)`.
type Published = &'static [(usize, f64)];

const TABLE2_FREQ: [(AlgorithmKind, Published); 2] =
    [(VI, &[(9, 0.8725), (10, 0.0775), (11, 0.05)]), (CP, &[(8, 0.0025), (9, 0.1178), (10, 0.867), (11, 0.0127)])];

const TABLE4_FREQ: [(&str, f64, Published); 2] = [
    ("No NE", 0.001, &[(2, 0.6448), (3, 0.3286), (4, 0.023), (5, 0.0036)]),
    ("NE", 0.0001, &[(0, 0.261), (1, 0.4332), (2, 0.2543), (3, 0.0515)]),
];

pub const REACH_SHARE: f64 = 0.8;
pub const GEN_NE_RANGE: (f64, f64) = (500.0, 8000.0);
pub const MAX_INTERARRIVAL: f64 = 20.0;
pub const MIN_NE_GAMES_AFTER_HIT: f64 = 0.30;
pub const MIN_NEAR_NASH_FREQ: f64 = 0.5;
pub const MIN_PLAYER_SPREAD: f64 = 5.0;
pub const MAX_GRAND_MEAN_GAP: f64 = 10.0;

fn label_kind(kind: AlgorithmKind) -> &'static str {
    if kind.is_vriend() {
        "Vriend"
    } else {
        "Co-evol"
    }
}

impl SocialRow {
    pub fn label(&self) -> String {
        format!("{}/{}/{}/{}/{}", self.model, label_kind(self.kind), self.pop, self.p_mut, self.generations)
    }

    /// Anti-Nash start, burn-in of half the run for the frequencies.
    pub fn config(&self, opts: &ReplicateOptions) -> ExperimentConfig {
        let mut c = base_config(self.model, self.kind, opts);
        c.pop = vec![self.pop];
        c.p_mut = vec![self.p_mut];
        c.generations = vec![self.generations];
        c.init = InitMode::AntiNash;
        c.burn_in = (self.generations / 2) as usize;
        c
    }
}

fn base_config(model: &str, kind: AlgorithmKind, opts: &ReplicateOptions) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(model, kind);
    c.seeds = opts.seeds;
    c.base_seed = opts.base_seed;
    c.threads = opts.threads;
    c.verbosity = opts.verbosity;
    c
}

fn execute(config: &ExperimentConfig, label: &str, opts: &ReplicateOptions) -> Result<BatchReport> {
    let dir = opts.output_dir.as_ref().map(|d| d.join(label.replace(['/', ' '], "_")));
    let mut reports = run_batch(config, dir.as_deref())?;
    let report = reports.pop().ok_or_else(|| Error::Analysis(format!("{label}: empty grid")))?;
    if report.runs.is_empty() {
        return Err(Error::Analysis(format!("{label}: every run failed")));
    }
    Ok(report)
}

fn freq(a: &Aggregates, s: usize) -> f64 {
    a.pooled_freq.get(s).copied().unwrap_or(0.0)
}

/// Individual-learning settings: poly4, pop 50, GA rate 50, p_mut .01.
pub fn individual_config(kind: AlgorithmKind, generations: u64, opts: &ReplicateOptions) -> ExperimentConfig {
    let mut c = base_config("poly4", kind, opts);
    c.pop = vec![50];
    c.p_mut = vec![0.01];
    c.generations = vec![generations];
    c
}

fn table1(opts: &ReplicateOptions) -> Result<Vec<RowReport>> {
    let mut rows = Vec::new();
    for (kind, paper) in TABLE1_MEANS {
        let config = individual_config(kind, 2000, opts);
        let label = format!("poly4/{kind}");
        let r = execute(&config, &label, opts)?;
        let first = &r.runs[0].quantities.per_player_means;
        let mut checks: Vec<Check> = paper
            .iter()
            .enumerate()
            .map(|(i, &p)| Check::info(format!("q_{} (run 0)", i + 1), Some(p), first.get(i).copied()))
            .collect();
        checks.extend(individual_checks(&r));
        rows.push(RowReport { label, config, aggregates: r.aggregates, checks });
    }
    Ok(rows)
}

/// Checks shared by the individual-learning rows.
pub fn individual_checks(r: &BatchReport) -> Vec<Check> {
    let ne_games = r.runs.iter().map(|x| x.chain.ne_game_fraction).fold(0.0, f64::max);
    let spread_ok = r
        .runs
        .iter()
        .filter(|x| {
            let m = &x.quantities.per_player_means;
            let spread = m.iter().copied().fold(f64::MIN, f64::max) - m.iter().copied().fold(f64::MAX, f64::min);
            spread >= MIN_PLAYER_SPREAD
        })
        .count();
    let gap = r.runs.iter().map(|x| (x.quantities.grand_mean_q - r.q_nash).abs()).fold(0.0, f64::max);
    let n = r.runs.len();
    let mut checks = vec![
        Check::judged("max NE-game fraction over runs", Some(0.0), Some(ne_games), "= 0", ne_games == 0.0),
        Check::judged(
            "runs with player spread >= 5",
            None,
            Some(spread_ok as f64),
            format!("= {n}"),
            spread_ok == n,
        ),
        Check::judged(
            "max |grand mean - q_nash|",
            None,
            Some(gap),
            format!("<= {MAX_GRAND_MEAN_GAP}"),
            gap <= MAX_GRAND_MEAN_GAP,
        ),
    ];
    match &r.verdicts {
        Some(v) => {
            checks.push(Check::judged(
                "H0: mean Q = q_nash",
                None,
                Some(v.grand_mean.statistic),
                "accepted",
                v.grand_mean.accepted,
            ));
            let rejected = v.players.iter().filter(|p| !p.accepted).count();
            checks.push(Check::judged(
                "players with H0: q_i = q_nash rejected",
                Some(4.0),
                Some(rejected as f64),
                ">= 1",
                rejected >= 1,
            ));
        }
        None => checks.push(Check::judged("hypothesis tests", None, None, "two or more runs", false)),
    }
    checks
}

fn table2(opts: &ReplicateOptions) -> Result<Vec<RowReport>> {
    let mut rows = Vec::new();
    for (kind, published) in TABLE2_FREQ {
        let config = individual_config(kind, 100_000, opts);
        let label = format!("poly4/{kind}");
        let r = execute(&config, &label, opts)?;
        let a = r.aggregates;
        let s0 = freq(&a, 0);
        let mut checks = vec![Check::judged("freq(s_0)", Some(0.0), Some(s0), "= 0", s0 == 0.0)];
        for (s, f) in a.pooled_freq.iter().enumerate().skip(1) {
            let paper = published.iter().find(|p| p.0 == s).map_or(0.0, |p| p.1);
            if paper > 0.0 || *f > 0.0 {
                checks.push(Check::info(format!("freq(s_{s})"), Some(paper), Some(*f)));
            }
        }
        rows.push(RowReport { label, config, aggregates: a, checks });
    }
    Ok(rows)
}

/// The 20-player polynomial VS setting, pop 20, T 10,000.
pub fn table4_config(p_mut: f64, opts: &ReplicateOptions) -> ExperimentConfig {
    let mut c = base_config("poly20", VS, opts);
    c.pop = vec![20];
    c.p_mut = vec![p_mut];
    c.generations = vec![10_000];
    c
}

/// Shape checks of the failing (`reached == false`) and succeeding rows.
pub fn table4_checks(a: &Aggregates, succeeding: bool) -> Vec<Check> {
    let s0 = freq(a, 0);
    if succeeding {
        return vec![Check::judged("freq(s_0)", Some(0.261), Some(s0), "> 0", s0 > 0.0)];
    }
    let mode = (0..a.pooled_freq.len()).max_by(|&i, &j| freq(a, i).total_cmp(&freq(a, j))).unwrap_or(0);
    let s23 = freq(a, 2) + freq(a, 3);
    vec![
        Check::judged("freq(s_0)", Some(0.0), Some(s0), "= 0", s0 == 0.0),
        Check::judged("modal state", Some(2.0), Some(mode as f64), "in {2, 3}", mode == 2 || mode == 3),
        Check::judged("freq(s_2) + freq(s_3)", Some(0.9734), Some(s23), ">= 0.5", s23 >= 0.5),
    ]
}

fn table4(opts: &ReplicateOptions) -> Result<Vec<RowReport>> {
    let mut rows = Vec::new();
    for (name, p_mut, published) in TABLE4_FREQ {
        let config = table4_config(p_mut, opts);
        let label = format!("poly20/Vriend/{name}");
        let r = execute(&config, &label, opts)?;
        let a = r.aggregates;
        let mut checks = table4_checks(&a, name == "NE");
        for s in 0..a.pooled_freq.len() {
            let paper = published.iter().find(|p| p.0 == s).map_or(0.0, |p| p.1);
            if paper > 0.0 || freq(&a, s) > 0.0 {
                checks.push(Check::info(format!("freq(s_{s})"), Some(paper), Some(freq(&a, s))));
            }
        }
        rows.push(RowReport { label, config, aggregates: a, checks });
    }
    Ok(rows)
}

fn reach_check(a: &Aggregates) -> Check {
    let share = a.reached as f64 / a.runs as f64;
    Check::judged("share of runs reaching s_0", None, Some(share), format!(">= {REACH_SHARE}"), share >= REACH_SHARE)
}

fn table5(opts: &ReplicateOptions) -> Result<Vec<RowReport>> {
    SOCIAL_ROWS
        .iter()
        .map(|row| {
            let config = row.config(opts);
            let label = row.label();
            let a = execute(&config, &label, opts)?.aggregates;
            Ok(RowReport { label, config, checks: vec![reach_check(&a)], aggregates: a })
        })
        .collect()
}

/// Convergence checks of a social row.
pub fn social_checks(row: &SocialRow, a: &Aggregates) -> Vec<Check> {
    let (lo, hi) = GEN_NE_RANGE;
    let median = a.median_gen_to_ne;
    let near = freq(a, 0) + freq(a, 1);
    vec![
        reach_check(a),
        Check::info("mean generations to s_0", Some(row.gen_ne), a.mean_gen_to_ne),
        Check::judged(
            "median generations to s_0",
            Some(row.gen_ne),
            median,
            format!("in [{lo}, {hi}]"),
            median.is_some_and(|m| (lo..=hi).contains(&m)),
        ),
        Check::judged(
            "mean interarrival of s_0",
            Some(row.return_time),
            a.mean_interarrival,
            format!("<= {MAX_INTERARRIVAL}"),
            a.mean_interarrival.is_some_and(|m| m <= MAX_INTERARRIVAL),
        ),
        Check::info("NE games (% of all)", Some(row.ne_games), Some(100.0 * a.mean_ne_game_fraction)),
        Check::judged(
            "NE games after first s_0 (%)",
            Some(row.ne_games),
            a.mean_ne_game_fraction_after_hit.map(|f| 100.0 * f),
            format!(">= {}", 100.0 * MIN_NE_GAMES_AFTER_HIT),
            a.mean_ne_game_fraction_after_hit.is_some_and(|f| f >= MIN_NE_GAMES_AFTER_HIT),
        ),
        Check::judged(
            "freq(s_0) + freq(s_1)",
            Some(0.9),
            Some(near),
            format!(">= {MIN_NEAR_NASH_FREQ}"),
            near >= MIN_NEAR_NASH_FREQ,
        ),
    ]
}

pub fn run_social_row(row: &SocialRow, opts: &ReplicateOptions) -> Result<RowReport> {
    let config = row.config(opts);
    let label = row.label();
    let a = execute(&config, &label, opts)?.aggregates;
    Ok(RowReport { label, config, checks: social_checks(row, &a), aggregates: a })
}

fn table6(opts: &ReplicateOptions) -> Result<Vec<RowReport>> {
    SOCIAL_ROWS.iter().map(|row| run_social_row(row, opts)).collect()
}

pub fn replicate(table: TableId, opts: &ReplicateOptions) -> Result<ReplicationReport> {
    if opts.seeds == 0 {
        return Err(Error::config("seeds must be at least 1"));
    }
    let rows = match table {
        TableId::Table1 => table1(opts)?,
        TableId::Table2 => table2(opts)?,
        TableId::Table4 => table4(opts)?,
        TableId::Table5 => table5(opts)?,
        TableId::Table6 => table6(opts)?,
    };
    Ok(ReplicationReport { table, seeds: opts.seeds, base_seed: opts.base_seed, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_ids_parse() {
        for t in TableId::ALL {
            assert_eq!(t.name().parse::<TableId>().unwrap(), t);
        }
        assert!("table3".parse::<TableId>().is_err());
    }

    #[test]
    fn social_rows_fit_table5_ranges() {
        for r in SOCIAL_ROWS {
            let n: usize = if r.model.ends_with("20") { 20 } else { 4 };
            assert!(r.generations >= 5000);
            if n == 4 {
                assert!((20..=40).contains(&r.pop) && (0.0001..=0.001).contains(&r.p_mut));
            } else {
                assert!(r.pop == 20 && (0.0001..=0.00075).contains(&r.p_mut));
            }
        }
    }

    #[test]
    fn configs_are_valid() {
        let opts = ReplicateOptions::default();
        for r in SOCIAL_ROWS {
            r.config(&opts).validate().unwrap();
        }
        individual_config(VI, 2000, &opts).validate().unwrap();
        table4_config(0.001, &opts).validate().unwrap();
    }

    #[test]
    fn shape_checks() {
        let mut a = Aggregates {
            runs: 1,
            reached: 0,
            censored: 0,
            censoring_rate: None,
            mean_gen_to_ne: None,
            median_gen_to_ne: None,
            pooled_freq: vec![0.0, 0.0, 0.6448, 0.3286, 0.023, 0.0036, 0.0, 0.0, 0.0],
            mean_interarrival: None,
            mean_ne_game_fraction: 0.0,
            mean_ne_game_fraction_after_hit: None,
            mean_grand_q: 20.0,
        };
        assert!(table4_checks(&a, false).iter().all(|c| c.passed == Some(true)));
        assert!(table4_checks(&a, true).iter().any(|c| c.passed == Some(false)));
        a.pooled_freq = vec![0.261, 0.4332, 0.2543, 0.0515, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(table4_checks(&a, true).iter().all(|c| c.passed == Some(true)));
        assert!(table4_checks(&a, false).iter().any(|c| c.passed == Some(false)));
    }
}
