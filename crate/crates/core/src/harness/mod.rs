//! Batch experiments, trace files and replication of published tables.

mod batch;
mod config;
mod discover;
mod io;
mod replicate;

pub use batch::{
    analyze_traces, find_traces, grid_dir, median, run_batch, run_one, run_stem, Aggregates, BatchReport,
    RunFailure, RunRecord, RNG_NAME,
};
pub use config::{
    default_bits, default_output_dir, mix_seed, splitmix64, ExperimentConfig, GridPoint, DEFAULT_SEEDS,
    FALLBACK_OUTPUT_DIR, OUTPUT_DIR_ENV,
};
pub use discover::{discover, Candidate, DiscoveryReport};
pub use io::{
    games_columns, meta_path_for, read_json, read_trace_csv, trace_columns, write_json, write_jsonl,
    GamesCsvSink, RunMeta, TraceCsvSink, GAMES_SUFFIX, META_SUFFIX, TRACE_SUFFIX,
};
pub use replicate::{
    individual_checks, individual_config, replicate, run_social_row, social_checks, table4_checks, table4_config,
    Check, ReplicateOptions, ReplicationReport, RowReport, SocialRow, TableId, GEN_NE_RANGE, MAX_GRAND_MEAN_GAP,
    MAX_INTERARRIVAL, MIN_NEAR_NASH_FREQ, MIN_NE_GAMES_AFTER_HIT, MIN_PLAYER_SPREAD, REACH_SHARE, SOCIAL_ROWS,
};
