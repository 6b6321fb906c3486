//! The interaction protocol and everything around it: the Bradley-Terry
//! preference oracle, the per-episode loop, Bayesian-regret experiments over
//! prior draws, run files, and the command-line entry point.
//!
//! Output layout of a run:
//!
//! ```text
//! <output_dir>/meta.json            resolved config, lambda, alpha, K, search space, timing
//! <output_dir>/aggregate.json       mean cumulative regret and its standard error per t
//! <output_dir>/draw_000/episodes.csv
//! <output_dir>/draw_000/trace.jsonl (when trace = true)
//! ```

mod cli;
mod config;
mod episode;
mod experiment;

pub use cli::{cli_dispatch, cover_report};
pub use config::{BaselineMode, RunConfig, TrueEnvMode};
pub use episode::{bt_preference, run_episode, EpisodeLog, EpisodeSetup, Selector};
pub use experiment::{
    aggregate, episodes_csv, load_or_generate_hypotheses, read_cum_regret, report, run_experiment, run_rng,
    Aggregate, DrawResult, Experiment, RunSummary, EPISODES_HEADER,
};
