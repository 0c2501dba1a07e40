//! Per-round arm selection inside a halving stage, plus the allocation and
//! variance-confidence math the rules rely on.
//!
//! All argmax choices break ties toward the earliest position in the
//! surviving list, and an arm that has not been pulled in the current stage
//! outranks every pulled arm. The engine keeps the surviving list in
//! ascending arm order, so with equal variances the variance-aware rules
//! reproduce plain round robin pull for pull.

use serde::{Deserialize, Serialize};

use crate::bandit::ArmEstimator;
use crate::error::{Error, Result};
use crate::halving::StageState;

/// Selection rule plugged into the halving engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PullRule {
    /// Round robin over the surviving arms.
    Sh,
    /// Greedy on `variance / pulls` with known per-arm variances (indexed by arm).
    ShVar { variances: Vec<f64> },
    /// Forced round robin, then greedy on `variance upper bound / pulls`.
    ShAdaVar { delta: f64 },
}

impl PullRule {
    pub fn shvar(variances: Vec<f64>) -> Result<Self> {
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "known variances must be strictly positive, got {v}"
            )));
        }
        Ok(Self::ShVar { variances })
    }

    pub fn shadavar(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self::ShAdaVar { delta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sh => "sh",
            Self::ShVar { .. } => "shvar",
            Self::ShAdaVar { .. } => "shadavar",
        }
    }

    /// Position (in `state.surviving`) of the arm to pull in the current round.
    pub fn select_position(&self, state: &StageState) -> Result<usize> {
        match self {
            Self::Sh => Ok(sh_position(state)),
            Self::ShVar { variances } => shvar_position(state, variances),
            Self::ShAdaVar { delta } => shadavar_position(state, *delta),
        }
    }

    /// Arm index to pull in the current round.
    pub fn next_arm(&self, state: &StageState) -> Result<usize> {
        Ok(state.surviving[self.select_position(state)?])
    }

    /// True when this stage cannot fit the rule's forced exploration and will
    /// fall back to round robin.
    pub fn stage_degraded(&self, surviving: usize, budget: u64) -> bool {
        match self {
            Self::ShAdaVar { delta } => budget < surviving as u64 * forced_pulls_per_arm(*delta) + 1,
            _ => false,
        }
    }
}

pub fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn sh_position(state: &StageState) -> usize {
    ((state.round - 1) % state.surviving.len() as u64) as usize
}

pub fn sh_next(state: &StageState) -> usize {
    state.surviving[sh_position(state)]
}

/// Index of the largest `weight / pulls` ratio, compared by cross
/// multiplication so that zero pulls rank as +inf without special cases.
fn greedy_ratio_position(weights: impl Iterator<Item = f64>, estimators: &[ArmEstimator]) -> usize {
    let mut best = 0;
    let mut best_weight = f64::NAN;
    for (pos, (w, est)) in weights.zip(estimators).enumerate() {
        if pos == 0 {
            best_weight = w;
            continue;
        }
        let (n_cand, n_best) = (est.count() as f64, estimators[best].count() as f64);
        if w * n_best > best_weight * n_cand {
            best = pos;
            best_weight = w;
        }
    }
    best
}

fn shvar_position(state: &StageState, variances: &[f64]) -> Result<usize> {
    if let Some(&arm) = state.surviving.iter().find(|&&a| a >= variances.len()) {
        return Err(Error::ArmOutOfRange {
            arm,
            arms: variances.len(),
        });
    }
    Ok(greedy_ratio_position(
        state.surviving.iter().map(|&a| variances[a]),
        &state.estimators,
    ))
}

pub fn shvar_next(state: &StageState, variances: &[f64]) -> Result<usize> {
    Ok(state.surviving[shvar_position(state, variances)?])
}

/// Smallest per-arm pull count `c` with `c - 1 > 4 log(1/delta)`, i.e. enough
/// observations for [`variance_ucb`] to be defined.
pub fn forced_pulls_per_arm(delta: f64) -> u64 {
    (4.0 * (1.0 / delta).ln()).floor() as u64 + 2
}

fn shadavar_position(state: &StageState, delta: f64) -> Result<usize> {
    let k = state.surviving.len() as u64;
    let forced = forced_pulls_per_arm(delta);
    if state.budget < k * forced + 1 || state.round <= k * forced {
        return Ok(sh_position(state));
    }
    let bounds = state
        .estimators
        .iter()
        .map(|est| variance_ucb(est, delta).map(|u| u.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(greedy_ratio_position(bounds.into_iter(), &state.estimators))
}

pub fn shadavar_next(state: &StageState, delta: f64) -> Result<usize> {
    check_delta(delta)?;
    Ok(state.surviving[shadavar_position(state, delta)?])
}

/// High-probability upper bound on an arm's reward variance under Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceUpperBound {
    pub value: f64,
    pub pulls: u64,
    pub delta: f64,
}

pub fn variance_ucb(est: &ArmEstimator, delta: f64) -> Result<VarianceUpperBound> {
    check_delta(delta)?;
    let log_term = (1.0 / delta).ln();
    let threshold = 4.0 * log_term;
    let dof = est.count().saturating_sub(1);
    let sample_var = match est.variance() {
        Some(v) if dof as f64 > threshold => v,
        _ => {
            return Err(Error::VarianceBoundUndefined {
                pulls: est.count(),
                threshold,
            })
        }
    };
    Ok(VarianceUpperBound {
        value: sample_var / (1.0 - 2.0 * (log_term / dof as f64).sqrt()),
        pulls: est.count(),
        delta,
    })
}

/// Factors `(lower, upper)` such that, for a Gaussian sample variance with
/// `dof` degrees of freedom, `s^2 / sigma^2` falls below `lower` with
/// probability at most `delta`, and above `upper` with probability at most `delta`.
pub fn chi_square_bounds(dof: u64, delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    if dof == 0 {
        return Err(Error::InvalidParameter("degrees of freedom must be at least 1".into()));
    }
    let ratio = (1.0 / delta).ln() / dof as f64;
    Ok((1.0 - 2.0 * ratio.sqrt(), 1.0 + 2.0 * ratio.sqrt() + 2.0 * ratio))
}

/// Variance-proportional split of a stage budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub lambda: Vec<f64>,
}

pub fn ideal_allocation(variances: &[f64], budget: u64) -> Result<Allocation> {
    if variances.is_empty() || variances.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("variances must be non-empty and positive".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidParameter("stage budget must be at least 1".into()));
    }
    let total: f64 = variances.iter().sum();
    Ok(Allocation {
        lambda: variances.iter().map(|v| v / total * budget as f64).collect(),
    })
}
