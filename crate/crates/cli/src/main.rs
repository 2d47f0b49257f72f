use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cournot_coevo::harness::{
    analyze_traces, discover, find_traces, replicate, run_batch, write_json, BatchReport, ExperimentConfig,
    ReplicateOptions, ReplicationReport, TableId, OUTPUT_DIR_ENV,
};
use cournot_coevo::market::{DemandKind, DEFAULT_TOL};
use cournot_coevo::{AlgorithmKind, Error, FitnessScheme, InitMode, MarketModel, ModelSpec, QuantityCodec};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_REPLICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "cournot", version, about = "Co-evolutionary GA learning in symmetric Cournot oligopolies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a single parameter set.
    Run(RunArgs),
    /// Run a grid of parameter sets; list-valued fields are swept.
    Sweep(RunArgs),
    /// Solve for the symmetric Nash equilibrium of a market.
    Nash(NashArgs),
    /// Look for Nash equilibria among the quantities all players chose at once.
    Discover(DiscoverArgs),
    /// Re-run a published table at desk scale and compare.
    Replicate(ReplicateArgs),
    /// Recompute reports from existing trace files.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment file; flags below override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Catalogue id (linear4, linear20, poly4, poly20, radical4, radical20).
    #[arg(short, long)]
    model: Option<String>,
    /// VI, VS, CP or CS.
    #[arg(short, long)]
    algorithm: Option<AlgorithmKind>,
    #[arg(long, value_delimiter = ',')]
    pop: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    p_mut: Option<Vec<f64>>,
    #[arg(short = 'T', long, value_delimiter = ',')]
    generations: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    ga_rate: Option<Vec<u32>>,
    /// Chromosome length L (even).
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    p_cross: Option<f64>,
    /// Runs per parameter set.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Generations dropped before estimating state frequencies.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Also write every game to `runNNNN.games.csv`.
    #[arg(long)]
    record_games: bool,
    #[arg(long)]
    alpha: Option<f64>,
    /// random, anti_nash or nash.
    #[arg(long)]
    init: Option<String>,
    /// min_shift or ranked.
    #[arg(long)]
    fitness: Option<String>,
    /// Exponent of the ranked fitness.
    #[arg(long)]
    rank_exponent: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Output directory.
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NashArgs {
    /// Catalogue id; omit to give the market by its parameters.
    model: Option<String>,
    #[arg(long, requires_all = ["a", "b", "x", "y", "players"], conflicts_with = "model")]
    demand: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long)]
    players: Option<usize>,
    /// Chromosome length for the printed Nash chromosome.
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Check at most this many of the most frequent candidates.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReplicateArgs {
    /// table1, table2, table4, table5 or table6.
    table: String,
    #[arg(long, default_value_t = cournot_coevo::harness::DEFAULT_SEEDS)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Keep the traces of every row under this directory.
    #[arg(long)]
    keep_traces: bool,
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace files or directories holding them.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    #[arg(long, default_value_t = cournot_coevo::stats::DEFAULT_ALPHA)]
    alpha: f64,
    /// Write the reports as JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
    Replication,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Unsupported(_) | Error::Model(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Failure::Config(msg.into())
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => {
                let src = std::fs::read_to_string(path)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_toml_str(&src)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
            None => {
                let model = self.model.as_deref().ok_or_else(|| config_error("--model or --config is required"))?;
                let kind = self.algorithm.ok_or_else(|| config_error("--algorithm or --config is required"))?;
                ExperimentConfig::new(model, kind)
            }
        };
        if let Some(m) = &self.model {
            c.model = ModelSpec::from(m.as_str());
        }
        if let Some(k) = self.algorithm {
            c.algorithm = k;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        set!(pop, p_mut, generations, ga_rate, p_cross, seeds, base_seed, burn_in, alpha);
        if self.bits.is_some() {
            c.bits = self.bits;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        c.record_games |= self.record_games;
        if self.verbose {
            c.verbosity = c.verbosity.max(1);
        }
        if let Some(init) = &self.init {
            c.init = match init.as_str() {
                "random" => InitMode::Random,
                "anti_nash" => InitMode::AntiNash,
                "nash" => InitMode::Nash,
                other => return Err(config_error(format!("unknown init `{other}` (random, anti_nash, nash)"))),
            };
        }
        match (self.fitness.as_deref(), self.rank_exponent) {
            (Some("min_shift"), None) => c.fitness = FitnessScheme::MinShift,
            (Some("min_shift"), Some(_)) => return Err(config_error("--rank-exponent needs --fitness ranked")),
            (Some("ranked") | None, Some(exponent)) => c.fitness = FitnessScheme::Ranked { exponent },
            (Some("ranked"), None) => c.fitness = FitnessScheme::default(),
            (Some(other), _) => return Err(config_error(format!("unknown fitness `{other}` (min_shift, ranked)"))),
            (None, None) => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn out_dir(flag: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    flag.unwrap_or_else(|| config.resolve_output_dir())
}

fn opt(x: Option<f64>, prec: usize) -> String {
    x.map_or("-".into(), |v| format!("{v:.prec$}"))
}

fn print_batch(r: &BatchReport) {
    let p = &r.params;
    let a = &r.aggregates;
    println!(
        "grid {:>3}  {} {} pop={} p_mut={} T={} ga_rate={} L={}",
        r.grid_index,
        p.model.label(),
        p.kind,
        p.pop_size,
        p.p_mut,
        p.generations,
        p.ga_rate,
        p.bits
    );
    let near = a.pooled_freq.iter().take(2).sum::<f64>();
    println!(
        "  runs={} failed={} reached={} censored={} gen_to_ne mean={} median={} interarrival={}",
        a.runs,
        r.failures.len(),
        a.reached,
        a.censored,
        opt(a.mean_gen_to_ne, 1),
        opt(a.median_gen_to_ne, 1),
        opt(a.mean_interarrival, 2)
    );
    println!(
        "  ne_games={:.4} after_hit={} freq(s0)={:.4} freq(s0+s1)={:.4} mean_q={:.4} q_nash={:.4}",
        a.mean_ne_game_fraction,
        opt(a.mean_ne_game_fraction_after_hit, 4),
        a.pooled_freq.first().copied().unwrap_or(0.0),
        near,
        a.mean_grand_q,
        r.q_nash
    );
    if let Some(v) = &r.verdicts {
        let rejected: Vec<String> =
            v.players.iter().enumerate().filter(|(_, t)| !t.accepted).map(|(i, _)| (i + 1).to_string()).collect();
        println!(
            "  H0 mean Q = q_nash: {} (stat {:.3}); players rejected: {}",
            if v.grand_mean.accepted { "accepted" } else { "rejected" },
            v.grand_mean.statistic,
            if rejected.is_empty() { "none".into() } else { rejected.join(",") }
        );
    }
    for f in &r.failures {
        eprintln!("  run {} (seed {}) failed: {}", f.replicate, f.seed, f.error);
    }
}

fn cmd_run(args: RunArgs, sweep: bool) -> Result<(), Failure> {
    let config = args.experiment.build()?;
    let points = config.grid()?.len();
    if !sweep && points > 1 {
        return Err(config_error(format!("`run` takes one parameter set, got {points}; use `sweep`")));
    }
    let out = out_dir(args.out, &config);
    let reports = run_batch(&config, Some(&out))?;
    for r in &reports {
        print_batch(r);
    }
    println!("output: {}", out.display());
    if reports.iter().all(|r| r.runs.is_empty()) {
        return Err(Failure::Runtime("every run failed".into()));
    }
    Ok(())
}

fn cmd_nash(args: NashArgs) -> Result<(), Failure> {
    let spec = match (&args.model, &args.demand) {
        (Some(id), _) => ModelSpec::from(id.as_str()),
        (None, Some(kind)) => {
            let kind = match kind.as_str() {
                "linear" => DemandKind::Linear,
                "polynomial" | "poly" => DemandKind::Polynomial,
                "radical" => DemandKind::Radical,
                other => return Err(config_error(format!("unknown demand `{other}`"))),
            };
            ModelSpec::Custom {
                kind,
                a: args.a.unwrap_or_default(),
                b: args.b.unwrap_or_default(),
                x: args.x.unwrap_or_default(),
                y: args.y.unwrap_or_default(),
                players: args.players.unwrap_or_default(),
            }
        }
        (None, None) => return Err(config_error("give a model id or --demand with its parameters")),
    };
    let model: MarketModel = spec.build()?;
    let sol = model.symmetric_nash(DEFAULT_TOL * 1e-4)?;
    let bits = args.bits.unwrap_or_else(|| cournot_coevo::harness::default_bits(model.players));
    let codec = QuantityCodec::for_nash(bits, sol.q_hat)?;
    let chromosome = codec.nash_chromosome()?;
    let checks = model.validate_theorem1();
    if args.json {
        let doc = serde_json::json!({
            "model": spec.label(),
            "players": model.players,
            "q_nash": sol.q_hat,
            "residual": sol.residual,
            "q_max": codec.q_max(),
            "bits": bits,
            "nash_chromosome": chromosome.to_string(),
            "decoded": codec.decode(&chromosome)?,
            "theorem_checks": checks.iter().map(|c| serde_json::json!({
                "name": c.name, "passed": c.passed, "detail": c.detail,
            })).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?);
    } else {
        println!("model        {}", spec.label());
        println!("players      {}", model.players);
        println!("q_nash       {:.6}", sol.q_hat);
        println!("residual     {:.3e}", sol.residual);
        println!("q_max        {:.6}", codec.q_max());
        println!("chromosome   {chromosome} (L={bits}, decodes to {:.6})", codec.decode(&chromosome)?);
    }
    for c in checks.iter().filter(|c| !c.passed) {
        eprintln!("warning: existence condition `{}` fails: {}", c.name, c.detail);
    }
    Ok(())
}

fn cmd_discover(args: DiscoverArgs) -> Result<(), Failure> {
    let config = args.experiment.build()?;
    let grid = config.grid()?;
    if grid.len() != 1 {
        return Err(config_error(format!("`discover` takes one parameter set, got {}", grid.len())));
    }
    let params = config.run_params(&grid[0], 0);
    let report = discover(params, args.top)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?);
    } else {
        println!(
            "{} of {} games had every player on the same quantity; {} distinct quantities",
            report.symmetric_games,
            report.total_games,
            report.candidates.len()
        );
        for c in &report.candidates {
            println!(
                "  {} q={:.6} games={} best_response={:.6} {}",
                c.chromosome,
                c.quantity,
                c.games,
                c.best_response,
                if c.confirmed { "NASH" } else { "-" }
            );
        }
    }
    if report.candidates.is_empty() {
        eprintln!("note: no game was played with identical quantities; nothing to check");
    } else if report.confirmed().next().is_none() {
        eprintln!("note: no candidate passed the best-response check");
    }
    Ok(())
}

fn print_replication(r: &ReplicationReport) {
    println!("{} seeds={} base_seed={}", r.table.name(), r.seeds, r.base_seed);
    for row in &r.rows {
        println!("{}  [{}]", row.label, if row.passed() { "PASS" } else { "FAIL" });
        for c in &row.checks {
            let verdict = match c.passed {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "",
            };
            println!(
                "  {:<40} paper={:>10} ours={:>10}  {:<16} {}",
                c.name,
                opt(c.paper, 4),
                opt(c.reproduced, 4),
                c.rule,
                verdict
            );
        }
    }
}

fn cmd_replicate(args: ReplicateArgs) -> Result<(), Failure> {
    let table: TableId = args.table.parse()?;
    let out = args.out.unwrap_or_else(cournot_coevo::harness::default_output_dir);
    let opts = ReplicateOptions {
        seeds: args.seeds,
        base_seed: args.base_seed,
        threads: args.threads,
        output_dir: args.keep_traces.then(|| out.join(table.name())),
        verbosity: args.verbose.into(),
    };
    let report = replicate(table, &opts)?;
    print_replication(&report);
    std::fs::create_dir_all(&out)?;
    let path = out.join(format!("replicate_{}.json", table.name()));
    write_json(&path, &report)?;
    println!("report: {}", path.display());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Replication)
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let mut traces = Vec::new();
    for p in &args.paths {
        if !p.exists() {
            return Err(config_error(format!("{}: no such file or directory", p.display())));
        }
        traces.extend(find_traces(p)?);
    }
    let reports = analyze_traces(&traces, args.burn_in, args.alpha)?;
    for r in &reports {
        print_batch(r);
    }
    if let Some(path) = args.output.as_deref() {
        write_reports(path, &reports)?;
    }
    Ok(())
}

fn write_reports(path: &Path, reports: &[BatchReport]) -> Result<(), Failure> {
    write_json(path, &reports)?;
    println!("reports: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Sweep(a) => cmd_run(a, true),
        Command::Nash(a) => cmd_nash(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Replicate(a) => cmd_replicate(a),
        Command::Analyze(a) => cmd_analyze(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
        Err(Failure::Replication) => {
            eprintln!("replication check failed");
            ExitCode::from(EXIT_REPLICATION)
        }
    }
}
