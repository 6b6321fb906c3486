use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::{RunConfig, TrueEnvMode};
use super::experiment::{load_or_generate_hypotheses, report, run_experiment, run_rng};
use crate::cover::{
    build_value_partition, max_same_cell_gap, tabular_bin_counts, tabular_bin_partition, ValuePartition,
};
use crate::env::{sample_row_index, EnvDocument, TabularEnv};
use crate::posterior::HypothesesDocument;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "rlhf-ids",
    version,
    about = "IDS for preference-based RL on tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a hypothesis set and the first draw's true environment.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report partition statistics of a hypothesis file for both builders.
    Cover {
        hypotheses: PathBuf,
        #[arg(long = "eps", required = true)]
        eps: Vec<f64>,
        /// Probability cap B; defaults to the hypotheses' own.
        #[arg(long)]
        b_cap: Option<f64>,
    },
    /// Run the property suite on small random instances.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate run directories into one regret-vs-t table.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code: 0 success, 1 usage, 2 component error,
/// 3 I/O error.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Gen { config, out } => gen(&config, &out).map(|_| 0),
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let s = run_experiment(&cfg)?;
            println!(
                "wrote {} (K = {}, alpha = {:.4}, lambda = {:.4}, mean cumulative regret at T = {:.4} ± {:.4})",
                s.output_dir.display(),
                s.k,
                s.alpha,
                s.lambda,
                s.aggregate.final_mean_cum_regret,
                s.aggregate.final_se_cum_regret
            );
            Ok(0)
        }
        Command::Cover {
            hypotheses,
            eps,
            b_cap,
        } => {
            let post = HypothesesDocument::load(&hypotheses)?;
            let text = cover_report(post.hypotheses(), &eps, b_cap)?;
            println!("{text}");
            Ok(0)
        }
        Command::Check { seed } => {
            let results = crate::checks::run_all(seed);
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "1..{}", results.len());
            let mut failed = 0;
            for (i, (name, res)) in results.iter().enumerate() {
                match res {
                    Ok(()) => {
                        let _ = writeln!(out, "ok {} - {name}", i + 1);
                    }
                    Err(msg) => {
                        failed += 1;
                        let _ = writeln!(out, "not ok {} - {name}", i + 1);
                        let _ = writeln!(out, "  # {msg}");
                    }
                }
            }
            Ok(if failed == 0 { 0 } else { 2 })
        }
        Command::Report { dirs, out } => {
            let table = report(&dirs)?;
            match out {
                Some(path) => std::fs::write(&path, table).map_err(|e| Error::io(&path, e))?,
                None => print!("{table}"),
            }
            Ok(0)
        }
    }
}

fn gen(config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    cfg.validate()?;
    let post = load_or_generate_hypotheses(&cfg)?;
    let true_index = match cfg.true_env {
        TrueEnvMode::FixedIndex => cfg.true_index.expect("validated"),
        TrueEnvMode::SampleFromPrior => {
            let prior: Vec<f64> = post.prior_log_weights().iter().map(|x| x.exp()).collect();
            sample_row_index(&prior, &mut run_rng(cfg.seed, 1))
        }
    };
    if true_index >= post.len() {
        return Err(Error::Config(format!("true_index {true_index} out of range")));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    HypothesesDocument::save(&post, &out.join("hypotheses.json"))?;
    EnvDocument::save(&post.hypotheses()[true_index], &out.join("true_env.json"))?;
    println!(
        "wrote {} hypotheses to {} (true index {true_index})",
        post.len(),
        out.display()
    );
    Ok(())
}

fn builder_stats(hyps: &[TabularEnv], p: &ValuePartition) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "K": p.num_cells(),
        "K_is_upper_bound": true,
        "delta_P": p.delta_p(),
        "delta_R": p.delta_r(),
        "layer_counts": p.layer_counts(),
        "max_same_cell_value_gap": max_same_cell_gap(hyps, p)?,
    }))
}

/// JSON report of both partition builders at each `eps`.
pub fn cover_report(hyps: &[TabularEnv], eps: &[f64], b_cap: Option<f64>) -> Result<String> {
    let b = b_cap.unwrap_or_else(|| hyps.first().map_or(1.0, TabularEnv::b_cap));
    let mut rows = Vec::new();
    for &e in eps {
        let lg = build_value_partition(hyps, e, b)?;
        let bins = tabular_bin_partition(hyps, e)?;
        let shape = hyps[0].shape();
        let (value_bins, reward_bins) = tabular_bin_counts(shape.horizon, e);
        let h = shape.horizon as f64;
        let mut bins_stats = builder_stats(hyps, &bins)?;
        bins_stats["value_bins"] = value_bins.into();
        bins_stats["reward_bins"] = reward_bins.into();
        bins_stats["log_K_bound"] = (3.0
            * (shape.states * shape.actions * shape.horizon) as f64
            * (6.0 * h * h * (shape.states as f64).sqrt() / e).ln())
        .into();
        rows.push(serde_json::json!({
            "eps": e,
            "B": b,
            "lg_cover": builder_stats(hyps, &lg)?,
            "tabular_bins": bins_stats,
        }));
    }
    Ok(serde_json::to_string_pretty(&rows).expect("report serializes"))
}
