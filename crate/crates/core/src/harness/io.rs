//! On-disk formats.
//!
//! Trace files are CSV with one row per generation and the columns
//! `gen, lumped_state, games, ne_games, mean_q, q_m2, q_1 .. q_n, pop_hash`.
//! `pop_hash` is 16 hex digits. Each trace has a `.meta.json` sidecar with
//! the run parameters. Game files (optional) hold one row per game:
//! `gen, game, price, q_1 .. q_n, profit_1 .. profit_n, chrom_1 .. chrom_n`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{GenerationRecord, GenerationTrace, SimulationParams, TraceSink};
use crate::error::{Error, Result};

pub const TRACE_SUFFIX: &str = ".trace.csv";
pub const META_SUFFIX: &str = ".meta.json";
pub const GAMES_SUFFIX: &str = ".games.csv";

pub fn trace_columns(players: usize) -> Vec<String> {
    let mut cols: Vec<String> =
        ["gen", "lumped_state", "games", "ne_games", "mean_q", "q_m2"].iter().map(|s| s.to_string()).collect();
    cols.extend((1..=players).map(|i| format!("q_{i}")));
    cols.push("pop_hash".into());
    cols
}

pub fn games_columns(players: usize) -> Vec<String> {
    let mut cols = vec!["gen".to_string(), "game".into(), "price".into()];
    for prefix in ["q", "profit", "chrom"] {
        cols.extend((1..=players).map(|i| format!("{prefix}_{i}")));
    }
    cols
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// Streams generation rows as CSV.
pub struct TraceCsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> TraceCsvSink<W> {
    pub fn new(inner: W, players: usize) -> std::io::Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(trace_columns(players)).map_err(csv_err)?;
        Ok(TraceCsvSink { writer })
    }
}

impl TraceCsvSink<BufWriter<File>> {
    pub fn create(path: &Path, players: usize) -> std::io::Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), players)
    }
}

impl<W: Write> TraceSink for TraceCsvSink<W> {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        let r = &trace.record;
        let mut row = vec![
            r.generation.to_string(),
            r.lumped_state.to_string(),
            r.games.to_string(),
            r.ne_games.to_string(),
            r.mean_q.to_string(),
            r.q_m2.to_string(),
        ];
        row.extend(r.player_means.iter().map(|q| q.to_string()));
        row.push(format!("{:016x}", r.population_hash));
        self.writer.write_record(&row).map_err(csv_err)
    }
}

impl<W: Write> TraceCsvSink<W> {
    /// Flushes buffered rows, reporting any write error.
    pub fn finish(mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

/// Streams individual games as CSV. Needs game recording switched on.
pub struct GamesCsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl GamesCsvSink<BufWriter<File>> {
    pub fn create(path: &Path, players: usize) -> std::io::Result<Self> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(games_columns(players)).map_err(csv_err)?;
        Ok(GamesCsvSink { writer })
    }
}

impl<W: Write> TraceSink for GamesCsvSink<W> {
    fn accept(&mut self, trace: &GenerationTrace) -> std::io::Result<()> {
        let Some(games) = &trace.games else { return Ok(()) };
        for (j, g) in games.iter().enumerate() {
            let mut row = vec![trace.record.generation.to_string(), j.to_string(), g.price.to_string()];
            row.extend(g.quantities.iter().map(|q| q.to_string()));
            row.extend(g.profits.iter().map(|p| p.to_string()));
            row.extend(g.chromosomes.iter().map(|c| c.to_string()));
            self.writer.write_record(&row).map_err(csv_err)?;
        }
        Ok(())
    }
}

impl<W: Write> GamesCsvSink<W> {
    /// Flushes buffered rows, reporting any write error.
    pub fn finish(mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

/// Sidecar of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub grid_index: usize,
    pub replicate: u64,
    pub base_seed: u64,
    pub players: usize,
    pub q_nash: f64,
    pub q_max: f64,
    pub rng: String,
    pub params: SimulationParams,
}

pub fn meta_path_for(trace: &Path) -> PathBuf {
    let name = trace.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(TRACE_SUFFIX).unwrap_or(&name);
    trace.with_file_name(format!("{stem}{META_SUFFIX}"))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<GenerationRecord>> {
    let bad = |row: usize, what: &str| Error::Analysis(format!("{}: row {row}: {what}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Analysis(format!("{}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| Error::Analysis(format!("{}: {e}", path.display())))?.clone();
    let players = header.len().checked_sub(7).ok_or_else(|| bad(1, "too few columns"))?;
    if header.iter().collect::<Vec<_>>() != trace_columns(players) {
        return Err(bad(1, "unexpected header"));
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(line, &e.to_string()))?;
        let num = |j: usize| -> Result<f64> { row[j].parse().map_err(|_| bad(line, &format!("column {}", header[j].to_owned()))) };
        let int = |j: usize| -> Result<u64> { row[j].parse().map_err(|_| bad(line, &format!("column {}", header[j].to_owned()))) };
        out.push(GenerationRecord {
            generation: int(0)?,
            lumped_state: int(1)? as u32,
            games: int(2)? as u32,
            ne_games: int(3)? as u32,
            mean_q: num(4)?,
            q_m2: num(5)?,
            player_means: (6..6 + players).map(num).collect::<Result<_>>()?,
            population_hash: u64::from_str_radix(&row[6 + players], 16).map_err(|_| bad(line, "column pop_hash"))?,
        });
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Analysis(format!("{}: {e}", path.display())))
}

/// One compact JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        serde_json::to_writer(&mut w, v).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
