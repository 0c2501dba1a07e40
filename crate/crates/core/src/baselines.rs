//! Comparison algorithms: uniform allocation, gap-based exploration with and
//! without variance, and variance-based rejects.
//!
//! The gap-based methods take their complexity constant `H` and reward bound
//! `b` from the true instance, and have their exploration widened so that
//! their error exponents match the halving algorithms' `1 / (4 log2 K)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{ArmEstimator, ArmSampler, BanditInstance};
use crate::error::{Error, Result};

/// Error-exponent constant of gap-based exploration.
pub const GAPE_C: f64 = 1.0 / 144.0;
/// Error-exponent constant of variance-aware gap-based exploration.
pub const GAPEV_C: f64 = 1.0 / 512.0;
/// Confidence width multiplier of variance-based rejects.
pub const VBR_GAMMA: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub identified: usize,
    pub pulls: Vec<u64>,
}

impl BaselineOutcome {
    pub fn total_pulls(&self) -> u64 {
        self.pulls.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Upper bound on the reward magnitude.
    pub b: f64,
    /// Complexity constant.
    pub h: f64,
    /// The method's own error-exponent constant.
    pub c: f64,
    /// Halving error-exponent constant `1 / (4 log2 K)`.
    pub c_prime: f64,
    pub gamma: f64,
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("b", self.b), ("H", self.h), ("c", self.c), ("c'", self.c_prime), ("gamma", self.gamma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Oracle configuration for gap-based exploration.
    pub fn gape(instance: &BanditInstance, budget: u64) -> Self {
        let b = compute_support_bound(instance, budget as f64);
        Self {
            b,
            h: gape_complexity(instance, b),
            c: GAPE_C,
            c_prime: halving_constant(instance.num_arms()),
            gamma: VBR_GAMMA,
        }
    }

    /// Oracle configuration for variance-aware gap-based exploration.
    pub fn gapev(instance: &BanditInstance, budget: u64) -> Self {
        let b = compute_support_bound(instance, budget as f64);
        Self {
            b,
            h: gapev_complexity(instance, b),
            c: GAPEV_C,
            c_prime: halving_constant(instance.num_arms()),
            gamma: VBR_GAMMA,
        }
    }
}

pub fn halving_constant(arms: usize) -> f64 {
    1.0 / (4.0 * (arms as f64).log2())
}

/// High-probability bound on the magnitude of `n` Gaussian rewards:
/// `max_i mu_i + sigma_i sqrt(log n)`.
pub fn compute_support_bound(instance: &BanditInstance, budget: f64) -> f64 {
    let root_log = budget.ln().sqrt();
    instance
        .means()
        .iter()
        .zip(instance.variances())
        .map(|(m, v)| m + v.sqrt() * root_log)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Gaps with the best arm assigned the smallest positive gap.
fn oracle_gaps(instance: &BanditInstance) -> Vec<f64> {
    let mut gaps = instance.gaps();
    gaps[instance.best_arm()] = instance.delta_min();
    gaps
}

/// `sum_i b^2 / gap_i^2`.
pub fn gape_complexity(instance: &BanditInstance, b: f64) -> f64 {
    oracle_gaps(instance).iter().map(|g| b * b / (g * g)).sum()
}

/// `sum_i (sigma_i + sqrt(sigma_i^2 + 16/3 b gap_i))^2 / gap_i^2`.
pub fn gapev_complexity(instance: &BanditInstance, b: f64) -> f64 {
    oracle_gaps(instance)
        .iter()
        .zip(instance.variances())
        .map(|(g, v)| {
            let s = v.sqrt();
            (s + (v + 16.0 / 3.0 * b * g).sqrt()).powi(2) / (g * g)
        })
        .sum()
}

fn argmax_mean(estimators: &[ArmEstimator]) -> usize {
    let mut best = 0;
    for (i, e) in estimators.iter().enumerate().skip(1) {
        if e.mean() > estimators[best].mean() {
            best = i;
        }
    }
    best
}

fn pull<S: ArmSampler, R: Rng + ?Sized>(source: &S, arm: usize, est: &mut [ArmEstimator], rng: &mut R) -> Result<()> {
    est[arm].update(source.sample(arm, rng)?);
    Ok(())
}

fn outcome(identified: usize, est: &[ArmEstimator]) -> BaselineOutcome {
    BaselineOutcome {
        identified,
        pulls: est.iter().map(ArmEstimator::count).collect(),
    }
}

/// Equal pulls for every arm; the `n mod K` leftover is discarded.
pub fn unif_run<S: ArmSampler, R: Rng + ?Sized>(budget: u64, source: &S, rng: &mut R) -> Result<BaselineOutcome> {
    let arms = source.num_arms();
    if budget < arms as u64 {
        return Err(Error::BudgetTooSmall(format!("uniform allocation needs n >= K = {arms}, got {budget}")));
    }
    let mut est = vec![ArmEstimator::new(); arms];
    for _ in 0..budget / arms as u64 {
        for arm in 0..arms {
            pull(source, arm, &mut est, rng)?;
        }
    }
    Ok(outcome(argmax_mean(&est), &est))
}

/// Empirical gaps: distance to the best other arm, so the leader gets its
/// margin over the runner-up.
pub fn empirical_gaps(means: &[f64]) -> Vec<f64> {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut leader = 0;
    for (i, &m) in means.iter().enumerate() {
        if m > first {
            second = first;
            first = m;
            leader = i;
        } else if m > second {
            second = m;
        }
    }
    means
        .iter()
        .enumerate()
        .map(|(i, &m)| if i == leader { first - second } else { first - m })
        .collect()
}

/// Exploration width `b sqrt(a / T)`.
pub fn gape_width(b: f64, a: f64, pulls: u64) -> f64 {
    b * (a / pulls as f64).sqrt()
}

/// Bernstein-style width `sqrt(2 a var / T) + 7 a b / (3 (T - 1))`.
pub fn gapev_width(variance: f64, a: f64, b: f64, pulls: u64) -> f64 {
    let t = pulls as f64;
    (2.0 * a * variance / t).sqrt() + 7.0 * a * b / (3.0 * (t - 1.0))
}

/// Exploration parameter with `H` rescaled to `H c / c'`.
pub fn gape_exploration(config: &BaselineConfig, budget: u64, arms: usize) -> f64 {
    (config.c_prime / config.c) * 4.0 / 9.0 * (budget - arms as u64) as f64 / config.h
}

pub fn gapev_exploration(config: &BaselineConfig, budget: u64, arms: usize) -> f64 {
    (config.c_prime / config.c) * 8.0 / 9.0 * (budget - 2 * arms as u64) as f64 / config.h
}

fn index_run<S, R, W>(budget: u64, source: &S, rng: &mut R, warmup: u64, width: W) -> Result<BaselineOutcome>
where
    S: ArmSampler,
    R: Rng + ?Sized,
    W: Fn(&ArmEstimator) -> f64,
{
    let arms = source.num_arms();
    let mut est = vec![ArmEstimator::new(); arms];
    for _ in 0..warmup {
        for arm in 0..arms {
            pull(source, arm, &mut est, rng)?;
        }
    }
    let mut means: Vec<f64> = est.iter().map(ArmEstimator::mean).collect();
    for _ in warmup * arms as u64..budget {
        let gaps = empirical_gaps(&means);
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for (arm, e) in est.iter().enumerate() {
            let index = -gaps[arm] + width(e);
            if index > best_index {
                best = arm;
                best_index = index;
            }
        }
        pull(source, best, &mut est, rng)?;
        means[best] = est[best].mean();
    }
    Ok(outcome(argmax_mean(&est), &est))
}

pub fn gape_run<S: ArmSampler, R: Rng + ?Sized>(
    budget: u64,
    source: &S,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineOutcome> {
    config.validate()?;
    let arms = source.num_arms();
    if budget < arms as u64 {
        return Err(Error::BudgetTooSmall(format!("GapE needs n >= K = {arms}, got {budget}")));
    }
    let a = gape_exploration(config, budget, arms);
    index_run(budget, source, rng, 1, |e| gape_width(config.b, a, e.count()))
}

pub fn gapev_run<S: ArmSampler, R: Rng + ?Sized>(
    budget: u64,
    source: &S,
    config: &BaselineConfig,
    rng: &mut R,
) -> Result<BaselineOutcome> {
    config.validate()?;
    let arms = source.num_arms();
    if budget < 2 * arms as u64 {
        return Err(Error::BudgetTooSmall(format!("GapE-V needs n >= 2K = {}, got {budget}", 2 * arms)));
    }
    let a = gapev_exploration(config, budget, arms);
    index_run(budget, source, rng, 2, |e| {
        gapev_width(e.variance().unwrap_or(0.0), a, config.b, e.count())
    })
}

/// Per-stage budgets of variance-based rejects: `K - 1` stages following the
/// successive-rejects schedule, each giving at least one pull per active arm,
/// with the last stage absorbing whatever remains.
pub fn vbr_stage_budgets(budget: u64, arms: usize) -> Result<Vec<u64>> {
    let k = arms as u64;
    if arms < 2 || budget < k * (k + 1) / 2 {
        return Err(Error::BudgetTooSmall(format!(
            "variance-based rejects needs n >= K(K+1)/2 = {}, got {budget}",
            k * (k + 1) / 2
        )));
    }
    let log_bar = 0.5 + (2..=arms).map(|i| 1.0 / i as f64).sum::<f64>();
    let cumulative = |stage: u64| -> u64 {
        if stage == 0 {
            0
        } else {
            ((budget - k) as f64 / (log_bar * (k + 1 - stage) as f64)).ceil() as u64
        }
    };
    let active = |stage: u64| k + 1 - stage;
    let mut budgets = Vec::with_capacity(arms - 1);
    let mut remaining = budget;
    for stage in 1..k {
        let reserve: u64 = (stage + 1..k).map(active).sum();
        let stage_budget = if stage == k - 1 {
            remaining
        } else {
            let schedule = active(stage) * (cumulative(stage) - cumulative(stage - 1));
            schedule.max(active(stage)).min(remaining - reserve)
        };
        budgets.push(stage_budget);
        remaining -= stage_budget;
    }
    Ok(budgets)
}

/// Variance-based rejects. Each stage pulls every active arm once, then
/// splits the rest of its budget in proportion to the empirical variances
/// held at the start of the stage (evenly while any is undefined), and
/// finally rejects the arm with the lowest `mean + gamma * sd / sqrt(pulls)`.
pub fn vbr_run<S: ArmSampler, R: Rng + ?Sized>(budget: u64, source: &S, gamma: f64, rng: &mut R) -> Result<BaselineOutcome> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be non-negative, got {gamma}")));
    }
    let arms = source.num_arms();
    let stage_budgets = vbr_stage_budgets(budget, arms)?;
    let mut est = vec![ArmEstimator::new(); arms];
    let mut active: Vec<usize> = (0..arms).collect();

    for stage_budget in stage_budgets {
        // weights frozen at stage start; uniform until every arm has a variance
        let weights: Vec<f64> = match active.iter().map(|&a| est[a].variance()).collect::<Option<Vec<_>>>() {
            Some(v) if v.iter().all(|&x| x > 0.0) => v,
            _ => vec![1.0; active.len()],
        };
        let mut stage_pulls = vec![0u64; arms];
        for step in 0..stage_budget {
            let arm = if (step as usize) < active.len() {
                active[step as usize]
            } else {
                let mut best = 0;
                for pos in 1..active.len() {
                    let (a, b) = (active[pos], active[best]);
                    if weights[pos] * stage_pulls[b] as f64 > weights[best] * stage_pulls[a] as f64 {
                        best = pos;
                    }
                }
                active[best]
            };
            pull(source, arm, &mut est, rng)?;
            stage_pulls[arm] += 1;
        }
        debug_assert!(active.iter().all(|&a| stage_pulls[a] >= 1));

        let upper = |a: usize| {
            let e = &est[a];
            e.mean() + gamma * e.variance().unwrap_or(0.0).sqrt() / (e.count() as f64).sqrt()
        };
        let mut worst = 0;
        for pos in 1..active.len() {
            if upper(active[pos]) <= upper(active[worst]) {
                worst = pos;
            }
        }
        active.remove(worst);
    }
    Ok(outcome(active[0], &est))
}
