//! Sequential halving: `ceil(log2 K)` stages with an equal per-stage budget,
//! each ending with the worse half of the surviving arms eliminated by their
//! stage-only empirical means.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{ArmEstimator, ArmSampler, PullRecord};
use crate::error::{Error, Result};
use crate::rules::PullRule;

/// Mutable state of one stage, as seen by a pull rule.
#[derive(Debug, Clone)]
pub struct StageState {
    /// 1-based stage index.
    pub stage: usize,
    /// Surviving arms in the order rules iterate them.
    pub surviving: Vec<usize>,
    /// Per-stage budget `n_s`.
    pub budget: u64,
    /// 1-based round being decided.
    pub round: u64,
    /// Stage-only estimators, aligned with `surviving`.
    pub estimators: Vec<ArmEstimator>,
}

impl StageState {
    pub fn new(stage: usize, surviving: Vec<usize>, budget: u64) -> Self {
        let estimators = vec![ArmEstimator::new(); surviving.len()];
        Self {
            stage,
            surviving,
            budget,
            round: 1,
            estimators,
        }
    }

    pub fn counts(&self) -> Vec<u64> {
        self.estimators.iter().map(ArmEstimator::count).collect()
    }
}

/// Summary of one finished stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub surviving: Vec<usize>,
    pub pulls: Vec<u64>,
    pub means: Vec<f64>,
    /// The rule fell back to round robin for this stage.
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub identified: usize,
    pub stages: Vec<StageRecord>,
    pub total_pulls: u64,
}

impl RunResult {
    pub fn degraded_stages(&self) -> usize {
        self.stages.iter().filter(|s| s.degraded).count()
    }
}

/// Number of halving stages for `arms` arms.
pub fn num_stages(arms: usize) -> usize {
    assert!(arms >= 1);
    (usize::BITS - (arms - 1).leading_zeros()) as usize
}

/// Keep the `keep` arms with the highest means, sorted by mean descending.
/// Ties go to the lower arm index.
pub fn eliminate(means: &[(usize, f64)], keep: usize) -> Result<Vec<usize>> {
    if keep > means.len() {
        return Err(Error::InvalidKeep {
            keep,
            available: means.len(),
        });
    }
    let mut ranked = means.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked.into_iter().take(keep).map(|(arm, _)| arm).collect())
}

/// `(arm, stage mean)` for every surviving arm; an arm never pulled this
/// stage has no mean and is an error.
pub fn stage_means(state: &StageState) -> Result<Vec<(usize, f64)>> {
    state
        .surviving
        .iter()
        .zip(&state.estimators)
        .map(|(&arm, est)| match est.count() {
            0 => Err(Error::UnpulledArm {
                arm,
                stage: state.stage,
            }),
            _ => Ok((arm, est.mean())),
        })
        .collect()
}

pub fn run<S, R>(budget: u64, rule: &PullRule, source: &S, rng: &mut R) -> Result<RunResult>
where
    S: ArmSampler,
    R: Rng + ?Sized,
{
    run_observed(budget, rule, source, rng, |_| Ok(()))
}

/// Like [`run`], writing one `stage round arm reward` line per pull.
pub fn run_traced<S, R, W>(budget: u64, rule: &PullRule, source: &S, rng: &mut R, trace: &mut W) -> Result<RunResult>
where
    S: ArmSampler,
    R: Rng + ?Sized,
    W: Write,
{
    run_observed(budget, rule, source, rng, |rec| Ok(writeln!(trace, "{rec}")?))
}

fn run_observed<S, R, F>(budget: u64, rule: &PullRule, source: &S, rng: &mut R, mut observe: F) -> Result<RunResult>
where
    S: ArmSampler,
    R: Rng + ?Sized,
    F: FnMut(&PullRecord) -> Result<()>,
{
    let arms = source.num_arms();
    if arms < 2 {
        return Err(Error::InvalidInstance(format!("need at least 2 arms, got {arms}")));
    }
    let stages = num_stages(arms);
    let stage_budget = budget / stages as u64;
    if stage_budget < arms as u64 {
        return Err(Error::BudgetTooSmall(format!(
            "n = {budget} gives {stage_budget} pulls per stage over {stages} stages, fewer than the {arms} arms"
        )));
    }

    let mut surviving: Vec<usize> = (0..arms).collect();
    let mut records = Vec::with_capacity(stages);
    for stage in 1..=stages {
        let degraded = rule.stage_degraded(surviving.len(), stage_budget);
        let mut state = StageState::new(stage, surviving, stage_budget);
        for round in 1..=stage_budget {
            state.round = round;
            let pos = rule.select_position(&state)?;
            let arm = state.surviving[pos];
            let reward = source.sample(arm, rng)?;
            state.estimators[pos].update(reward);
            observe(&PullRecord {
                stage,
                round,
                arm,
                reward,
            })?;
        }

        let means = stage_means(&state)?;
        let mut next = eliminate(&means, state.surviving.len().div_ceil(2))?;
        next.sort_unstable();

        records.push(StageRecord {
            pulls: state.counts(),
            means: means.iter().map(|&(_, m)| m).collect(),
            surviving: state.surviving,
            degraded,
        });
        surviving = next;
    }

    debug_assert_eq!(surviving.len(), 1);
    Ok(RunResult {
        identified: surviving[0],
        stages: records,
        total_pulls: stage_budget * stages as u64,
    })
}
