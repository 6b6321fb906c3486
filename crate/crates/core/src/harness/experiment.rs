//! Bayesian-regret experiments: several true-environment draws, each a full
//! episode loop, plus the files they leave behind.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, TrueEnvMode};
use super::episode::{run_episode, EpisodeLog, EpisodeSetup, Selector};
use crate::agents::{alpha_estimate, AgentKind};
use crate::cover::{build_partition, ValuePartition};
use crate::env::{sample_row_index, Policy};
use crate::posterior::{sample_hypothesis_set, HypothesesDocument, HypothesisPosterior, PosteriorSnapshot};
use crate::{Error, Result};

pub const EPISODES_HEADER: &str = "t,policy_id,mi_nats,lambda,regret,cum_regret,mass_on_truth";

/// Seeded generator for stream `stream` of a run: stream 0 generates the
/// hypothesis set, stream `d + 1` drives true-environment draw `d`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hypotheses from the configured file, or generated from stream 0.
pub fn load_or_generate_hypotheses(cfg: &RunConfig) -> Result<HypothesisPosterior> {
    match &cfg.hypotheses_file {
        Some(path) => HypothesesDocument::load(path),
        None => sample_hypothesis_set(&cfg.env, &mut run_rng(cfg.seed, 0)),
    }
}

/// A configured run with everything that is shared across draws resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: RunConfig,
    pub prior: HypothesisPosterior,
    pub partition: ValuePartition,
    pub alpha: f64,
    pub lambda: f64,
    pub pi0: Policy,
}

/// The outcome of one true-environment draw.
#[derive(Debug, Clone)]
pub struct DrawResult {
    pub true_index: usize,
    pub logs: Vec<EpisodeLog>,
    pub snapshots: Vec<PosteriorSnapshot>,
}

impl Experiment {
    pub fn prepare(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let prior = load_or_generate_hypotheses(cfg)?;
        Self::with_hypotheses(cfg, prior)
    }

    pub fn with_hypotheses(cfg: &RunConfig, prior: HypothesisPosterior) -> Result<Self> {
        cfg.validate()?;
        if let Some(i) = cfg.true_index {
            if i >= prior.len() {
                return Err(Error::Config(format!(
                    "true_index {i} out of range for {} hypotheses",
                    prior.len()
                )));
            }
        }
        let b_cap = prior.hypotheses()[0].b_cap();
        let partition = build_partition(cfg.partition, prior.hypotheses(), cfg.epsilon, b_cap)?;
        let alpha = alpha_estimate(&prior);
        let lambda =
            cfg.agent
                .resolve_lambda(alpha, cfg.episodes, prior.shape().horizon, partition.num_cells())?;
        let pi0 = cfg.baseline_policy(prior.shape())?;
        Ok(Experiment {
            cfg: cfg.clone(),
            prior,
            partition,
            alpha,
            lambda,
            pi0,
        })
    }

    /// Plain-text description of the policy search space, for metadata.
    pub fn search_space(&self) -> String {
        let a = &self.cfg.agent;
        match a.kind {
            AgentKind::Ids => format!(
                "optimal policies of the top {} hypotheses by posterior weight, of the posterior-mean \
                 environment, and the uniform policy (duplicates removed); plus per-state mixtures of the \
                 highest-value candidate with each other candidate at weights i/{} for i = 1..{}",
                a.candidate_cap,
                a.mixture_grid - 1,
                a.mixture_grid.saturating_sub(2)
            ),
            AgentKind::ApproxIds => {
                "exact backward induction on the posterior-mean MDP with KL-shaped rewards".into()
            }
            AgentKind::Ts => "optimal policy of one posterior sample".into(),
            AgentKind::Uniform => "uniform policy".into(),
        }
    }

    /// Runs draw `d` with the configured agent.
    pub fn run_draw(&self, d: usize) -> Result<DrawResult> {
        let mut agent = self.cfg.agent.clone();
        self.run_draw_with(d, &mut agent)
    }

    /// Runs draw `d` with an arbitrary selector (e.g. a test oracle).
    pub fn run_draw_with<S: Selector + ?Sized>(&self, d: usize, selector: &mut S) -> Result<DrawResult> {
        let mut rng = run_rng(self.cfg.seed, d as u64 + 1);
        let true_index = match self.cfg.true_env {
            TrueEnvMode::FixedIndex => self.cfg.true_index.expect("validated"),
            TrueEnvMode::SampleFromPrior => {
                let prior: Vec<f64> = self.prior.prior_log_weights().iter().map(|x| x.exp()).collect();
                sample_row_index(&prior, &mut rng)
            }
        };
        let true_env = &self.prior.hypotheses()[true_index];
        let setup = EpisodeSetup {
            partition: &self.partition,
            true_env,
            true_index,
            true_optimal_value: self
                .prior
                .set()
                .optimal(true_index)
                .1
                .get(0, true_env.initial_state()),
            pi0: &self.pi0,
            lambda: self.lambda,
            mi_mode: self.cfg.agent.mi_mode,
            mc_samples: self.cfg.agent.mc_samples,
            include_rewards: self.cfg.agent.include_rewards,
            use_baseline_transitions: self.cfg.use_baseline_transitions,
        };
        let mut post = self.prior.clone();
        let mut logs = Vec::with_capacity(self.cfg.episodes);
        let mut snapshots = Vec::new();
        let mut cum = 0.0;
        for t in 1..=self.cfg.episodes {
            let (log, next, snap) = run_episode(t, &post, &setup, selector, cum, &mut rng)?;
            cum = log.cum_regret;
            post = next;
            logs.push(log);
            if self.cfg.trace {
                snapshots.push(snap);
            }
        }
        Ok(DrawResult {
            true_index,
            logs,
            snapshots,
        })
    }

    /// All draws, in parallel; results come back in draw order.
    pub fn run_all(&self) -> Result<Vec<DrawResult>> {
        (0..self.cfg.num_true_draws)
            .into_par_iter()
            .map(|d| self.run_draw(d))
            .collect()
    }
}

/// Per-`t` mean and standard error of cumulative regret across draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub draws: usize,
    pub mean_cum_regret: Vec<f64>,
    pub se_cum_regret: Vec<f64>,
    pub final_mean_cum_regret: f64,
    pub final_se_cum_regret: f64,
}

/// Mean and standard error (`sd / √n`, 0 for a single series) per index.
pub(crate) fn mean_and_se(series: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let len = series.iter().map(Vec::len).max().unwrap_or(0);
    let mut means = Vec::with_capacity(len);
    let mut ses = Vec::with_capacity(len);
    let mut counts = Vec::with_capacity(len);
    for t in 0..len {
        let xs: Vec<f64> = series.iter().filter_map(|s| s.get(t).copied()).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        means.push(mean);
        ses.push(se);
        counts.push(xs.len());
    }
    (means, ses, counts)
}

pub fn aggregate(draws: &[DrawResult], episodes: usize) -> Aggregate {
    let series: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| d.logs.iter().map(|l| l.cum_regret).collect())
        .collect();
    let (mean, se, _) = mean_and_se(&series);
    Aggregate {
        episodes,
        draws: draws.len(),
        final_mean_cum_regret: mean.last().copied().unwrap_or(0.0),
        final_se_cum_regret: se.last().copied().unwrap_or(0.0),
        mean_cum_regret: mean,
        se_cum_regret: se,
    }
}

/// Serializes episode logs with the stable column contract.
pub fn episodes_csv(logs: &[EpisodeLog]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = EPISODES_HEADER.split(',').collect();
    let csv_err = |e: csv::Error| Error::Config(format!("csv encoding: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for l in logs {
        w.write_record([
            l.t.to_string(),
            l.policy_id.clone(),
            l.mi_nats.to_string(),
            l.lambda.to_string(),
            l.regret.to_string(),
            l.cum_regret.to_string(),
            l.mass_on_truth.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv encoding: {e}")))
}

/// Paths and headline numbers of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub lambda: f64,
    pub alpha: f64,
    pub k: usize,
    pub aggregate: Aggregate,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_draw(dir: &Path, d: usize, draw: &DrawResult) -> Result<()> {
    let sub = dir.join(format!("draw_{d:03}"));
    std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    write_file(&sub.join("episodes.csv"), &episodes_csv(&draw.logs)?)?;
    if !draw.snapshots.is_empty() {
        let path = sub.join("trace.jsonl");
        let mut out = Vec::new();
        for s in &draw.snapshots {
            serde_json::to_writer(&mut out, s).expect("snapshots serialize");
            out.write_all(b"\n").expect("writing to memory");
        }
        write_file(&path, &out)?;
    }
    Ok(())
}

/// Runs every draw and writes `meta.json`, `aggregate.json` and
/// `draw_NNN/episodes.csv` under the configured output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let exp = Experiment::prepare(cfg)?;
    let draws = exp.run_all()?;
    let dir = cfg.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (d, draw) in draws.iter().enumerate() {
        write_draw(&dir, d, draw)?;
    }
    let agg = aggregate(&draws, cfg.episodes);
    let agg_text = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
    write_file(&dir.join("aggregate.json"), (agg_text + "\n").as_bytes())?;

    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "config": cfg,
        "resolved": {
            "lambda": exp.lambda,
            "lambda_mode": cfg.agent.resolved_lambda_mode(),
            "alpha": exp.alpha,
            "K": exp.partition.num_cells(),
            "K_is_upper_bound": true,
            "partition": cfg.partition,
            "delta_P": exp.partition.delta_p(),
            "delta_R": exp.partition.delta_r(),
            "num_hypotheses": exp.prior.len(),
            "baseline": cfg.baseline,
            "search_space": exp.search_space(),
            "true_indices": draws.iter().map(|d| d.true_index).collect::<Vec<_>>(),
        },
        "timing": {
            "wall_clock_seconds": started.elapsed().as_secs_f64(),
            "finished_unix": timestamp,
        },
    });
    let meta_text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(&dir.join("meta.json"), (meta_text + "\n").as_bytes())?;
    Ok(RunSummary {
        output_dir: dir,
        lambda: exp.lambda,
        alpha: exp.alpha,
        k: exp.partition.num_cells(),
        aggregate: agg,
    })
}

/// Reads the `cum_regret` column of an episodes CSV.
pub fn read_cum_regret(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::parse(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "cum_regret")
        .ok_or_else(|| Error::parse(path, "missing cum_regret column"))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(path, e))?;
        let v: f64 = rec[col].parse().map_err(|e| Error::parse(path, e))?;
        out.push(v);
    }
    Ok(out)
}

/// Collects every `draw_*/episodes.csv` series from the given run
/// directories and returns the regret-vs-t table as CSV text.
pub fn report(dirs: &[PathBuf]) -> Result<String> {
    let mut series = Vec::new();
    for dir in dirs {
        let mut subs: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_dir()
                    && p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("draw_"))
            })
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(Error::Config(format!(
                "{} contains no draw_* directories",
                dir.display()
            )));
        }
        for sub in subs {
            series.push(read_cum_regret(&sub.join("episodes.csv"))?);
        }
    }
    let (mean, se, counts) = mean_and_se(&series);
    let mut out = String::from("t,mean_cum_regret,se_cum_regret,series\n");
    for t in 0..mean.len() {
        out.push_str(&format!("{},{},{},{}\n", t + 1, mean[t], se[t], counts[t]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se_by_hand() {
        let (m, s, c) = mean_and_se(&[vec![1.0, 2.0], vec![3.0, 6.0]]);
        assert_eq!(m, vec![2.0, 4.0]);
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!((s[1] - 2.0).abs() < 1e-15);
        assert_eq!(c, vec![2, 2]);
    }

    #[test]
    fn empty_logs_have_header_only() {
        let bytes = episodes_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{EPISODES_HEADER}\n"));
        let agg = aggregate(&[], 0);
        assert_eq!(agg.final_mean_cum_regret, 0.0);
    }
}
