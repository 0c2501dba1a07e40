//! Seeded Monte Carlo driver.
//!
//! Within one run index every method faces the same instance draw, seeded by
//! `(base_seed, K, run)`. Reward streams are independent per method and
//! seeded by `(base_seed, method name, K, n, run)`. Each run owns all of its
//! state, so runs execute in parallel and results are reassembled in run
//! order; the table is a pure function of the configuration unless timing is
//! switched on.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{run_algorithm, Algorithm, AlgorithmParams, Outcome};
use crate::bandit::{BanditInstance, RewardSource};
use crate::error::{Error, Result};
use crate::format::sig;
use crate::instances::{movielens_instance, synthetic_instance, CompletedRatings, SyntheticSpec};
use crate::seed;

pub const CSV_HEADER: &str = "algorithm,K,n,runs,mistakes,mistake_prob,std_err,mean_runtime_ms";

/// Where each run's instance comes from.
#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Fresh perturbed synthetic Gaussian instance; `arms` is overridden per cell.
    Synthetic(SyntheticSpec),
    /// One fixed Gaussian instance; only its own arm count is valid.
    Fixed(BanditInstance),
    /// Movies matched to fresh synthetic targets.
    MovieLens(Arc<CompletedRatings>, SyntheticSpec),
}

/// The instance and the reward backend of one run.
#[derive(Debug, Clone)]
pub struct Environment {
    pub instance: BanditInstance,
    pub source: RewardSource,
}

impl InstanceSource {
    pub fn draw(&self, arms: usize, rng: &mut ChaCha8Rng) -> Result<Environment> {
        match self {
            Self::Synthetic(spec) => {
                let instance = synthetic_instance(&spec.with_arms(arms), rng)?;
                Ok(Environment {
                    source: RewardSource::Gaussian(instance.clone()),
                    instance,
                })
            }
            Self::Fixed(instance) => {
                if instance.num_arms() != arms {
                    return Err(Error::InvalidParameter(format!(
                        "fixed instance has {} arms, cell asks for {arms}",
                        instance.num_arms()
                    )));
                }
                Ok(Environment {
                    instance: instance.clone(),
                    source: RewardSource::Gaussian(instance.clone()),
                })
            }
            Self::MovieLens(completed, spec) => {
                let draw = movielens_instance(completed, &spec.with_arms(arms), rng)?;
                Ok(Environment {
                    instance: draw.instance,
                    source: draw.source,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    /// Runs spread over the rayon pool; sequential when built without it.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub source: InstanceSource,
    pub arms: Vec<usize>,
    pub budgets: Vec<u64>,
    pub runs: u64,
    pub base_seed: u64,
    pub params: AlgorithmParams,
    /// Reuse the run-0 instance for every run of a cell.
    pub fixed_instance: bool,
    /// Record wall-clock time per run.
    pub timing: bool,
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn new(algorithms: Vec<Algorithm>, source: InstanceSource, arms: Vec<usize>, budgets: Vec<u64>) -> Self {
        Self {
            algorithms,
            source,
            arms,
            budgets,
            runs: 5000,
            base_seed: 0,
            params: AlgorithmParams::default(),
            fixed_instance: false,
            timing: false,
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() || self.arms.is_empty() || self.budgets.is_empty() {
            return Err(Error::InvalidParameter("algorithm, K and n lists must be non-empty".into()));
        }
        if let Some(k) = self.arms.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidParameter(format!("K must be at least 2, got {k}")));
        }
        self.params.validate()
    }
}

/// One run of one cell.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run: u64,
    pub instance: BanditInstance,
    pub outcome: Outcome,
    pub runtime_ms: Option<f64>,
}

impl RunRecord {
    pub fn mistake(&self) -> bool {
        self.outcome.identified != self.instance.best_arm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub arms: usize,
    pub budget: u64,
    pub runs: u64,
    pub mistakes: u64,
    pub mistake_prob: f64,
    pub std_err: f64,
    pub mean_runtime_ms: Option<f64>,
    /// Runs in which at least one halving stage fell back to round robin.
    pub degraded_runs: u64,
}

impl SweepRow {
    pub fn from_records(algorithm: Algorithm, arms: usize, budget: u64, records: &[RunRecord]) -> Self {
        let runs = records.len() as u64;
        let mistakes = records.iter().filter(|r| r.mistake()).count() as u64;
        let p = mistakes as f64 / runs as f64;
        let mean_runtime_ms = records
            .iter()
            .map(|r| r.runtime_ms)
            .sum::<Option<f64>>()
            .map(|t| t / runs as f64);
        Self {
            algorithm,
            arms,
            budget,
            runs,
            mistakes,
            mistake_prob: p,
            std_err: binomial_std_err(p, runs),
            mean_runtime_ms,
            degraded_runs: records.iter().filter(|r| r.outcome.degraded_stages > 0).count() as u64,
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.arms,
            self.budget,
            self.runs,
            self.mistakes,
            sig(self.mistake_prob, 10),
            sig(self.std_err, 10),
            self.mean_runtime_ms.map(|t| sig(t, 10)).unwrap_or_default()
        )
    }
}

/// Standard error of a binomial proportion estimate.
pub fn binomial_std_err(p: f64, runs: u64) -> f64 {
    (p * (1.0 - p) / runs as f64).sqrt()
}

/// Standard error of the difference of two independent proportions.
pub fn pooled_std_err(a: &SweepRow, b: &SweepRow) -> f64 {
    (a.std_err.powi(2) + b.std_err.powi(2)).sqrt()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            writeln!(out, "{}", row.csv_line()).expect("writing to a String");
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_csv())?)
    }

    pub fn get(&self, algorithm: Algorithm, arms: usize, budget: u64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.arms == arms && r.budget == budget)
    }
}

/// A sweep that stopped early, with every row completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("sweep stopped after {} rows: {error}", completed.rows.len())]
pub struct SweepFailure {
    pub completed: SweepTable,
    #[source]
    pub error: Error,
}

/// Instance and reward RNGs of one run.
pub fn run_rngs(config: &ExperimentConfig, algorithm: Algorithm, arms: usize, budget: u64, run: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let instance_run = if config.fixed_instance { 0 } else { run };
    let instance = seed::derive(&[config.base_seed, seed::INSTANCE, arms as u64, instance_run]);
    let reward = seed::derive(&[
        config.base_seed,
        seed::REWARD,
        seed::name_hash(algorithm.name()),
        arms as u64,
        budget,
        run,
    ]);
    (ChaCha8Rng::seed_from_u64(instance), ChaCha8Rng::seed_from_u64(reward))
}

fn one_run(config: &ExperimentConfig, algorithm: Algorithm, arms: usize, budget: u64, run: u64) -> Result<RunRecord> {
    let (mut instance_rng, mut reward_rng) = run_rngs(config, algorithm, arms, budget, run);
    let env = config.source.draw(arms, &mut instance_rng)?;
    let start = config.timing.then(Instant::now);
    let outcome = run_algorithm(algorithm, &config.params, &env.instance, &env.source, budget, &mut reward_rng)?;
    Ok(RunRecord {
        run,
        instance: env.instance,
        outcome,
        runtime_ms: start.map(|s| s.elapsed().as_secs_f64() * 1e3),
    })
}

/// Every run of one `(algorithm, K, n)` cell, in run order.
pub fn run_cell_detailed(config: &ExperimentConfig, algorithm: Algorithm, arms: usize, budget: u64) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let attempt = |run: u64| {
        one_run(config, algorithm, arms, budget, run).map_err(|e| Error::Run {
            algorithm: algorithm.name().into(),
            arms,
            budget,
            run,
            source: Box::new(e),
        })
    };
    match config.execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..config.runs).into_par_iter().map(attempt).collect(),
        _ => (0..config.runs).map(attempt).collect(),
    }
}

pub fn run_cell(config: &ExperimentConfig, algorithm: Algorithm, arms: usize, budget: u64) -> Result<SweepRow> {
    let records = run_cell_detailed(config, algorithm, arms, budget)?;
    Ok(SweepRow::from_records(algorithm, arms, budget, &records))
}

/// Cells of the sweep in table order: algorithm name, then K, then n.
pub fn sweep_cells(config: &ExperimentConfig) -> Vec<(Algorithm, usize, u64)> {
    let mut algs = config.algorithms.clone();
    algs.sort_by_key(|a| a.name());
    algs.dedup();
    let mut arms = config.arms.clone();
    arms.sort_unstable();
    arms.dedup();
    let mut budgets = config.budgets.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let mut cells = Vec::with_capacity(algs.len() * arms.len() * budgets.len());
    for &a in &algs {
        for &k in &arms {
            for &n in &budgets {
                cells.push((a, k, n));
            }
        }
    }
    cells
}

pub fn sweep(config: &ExperimentConfig) -> std::result::Result<SweepTable, SweepFailure> {
    sweep_with(config, |_| {})
}

/// Like [`sweep`], calling `progress` after each finished row.
pub fn sweep_with<F: FnMut(&SweepRow)>(config: &ExperimentConfig, mut progress: F) -> std::result::Result<SweepTable, SweepFailure> {
    let mut table = SweepTable::default();
    if let Err(error) = config.validate() {
        return Err(SweepFailure { completed: table, error });
    }
    for (alg, k, n) in sweep_cells(config) {
        match run_cell(config, alg, k, n) {
            Ok(row) => {
                progress(&row);
                table.rows.push(row);
            }
            Err(error) => return Err(SweepFailure { completed: table, error }),
        }
    }
    Ok(table)
}
