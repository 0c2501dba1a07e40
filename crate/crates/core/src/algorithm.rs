//! Uniform entry point over every best-arm identification method.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditInstance, RewardSource};
use crate::baselines::{self, BaselineConfig, GAPEV_C, GAPE_C, VBR_GAMMA};
use crate::error::{Error, Result};
use crate::halving::{self, RunResult};
use crate::rules::PullRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Unif,
    Sh,
    ShVar,
    ShAdaVar,
    GapE,
    GapEV,
    Vbr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Self::Unif,
        Self::Sh,
        Self::ShVar,
        Self::ShAdaVar,
        Self::GapE,
        Self::GapEV,
        Self::Vbr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Unif => "unif",
            Self::Sh => "sh",
            Self::ShVar => "shvar",
            Self::ShAdaVar => "shadavar",
            Self::GapE => "gape",
            Self::GapEV => "gapev",
            Self::Vbr => "vbr",
        }
    }

    /// Smallest budget the method accepts on `arms` arms.
    pub fn min_budget(self, arms: usize) -> u64 {
        let k = arms as u64;
        match self {
            Self::Unif | Self::GapE => k,
            Self::GapEV => 2 * k,
            Self::Sh | Self::ShVar | Self::ShAdaVar => halving::num_stages(arms) as u64 * k,
            Self::Vbr => k * (k + 1) / 2,
        }
    }

    /// Whether the method runs through the halving engine.
    pub fn is_halving(self) -> bool {
        matches!(self, Self::Sh | Self::ShVar | Self::ShAdaVar)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                let known: Vec<_> = Self::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidParameter(format!("unknown algorithm `{s}` (known: {})", known.join(", ")))
            })
    }
}

/// Tunables shared by all methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    /// Confidence level of the adaptive variance bound.
    pub delta: f64,
    /// Confidence width multiplier of variance-based rejects.
    pub gamma: f64,
    pub gape_c: f64,
    pub gapev_c: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            gamma: VBR_GAMMA,
            gape_c: GAPE_C,
            gapev_c: GAPEV_C,
        }
    }
}

impl AlgorithmParams {
    pub fn validate(&self) -> Result<()> {
        crate::rules::check_delta(self.delta)?;
        for (name, v) in [("gamma", self.gamma), ("gape_c", self.gape_c), ("gapev_c", self.gapev_c)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// What one run of one method produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub identified: usize,
    /// Total pulls per arm.
    pub pulls: Vec<u64>,
    /// Halving stages that fell back to round robin.
    pub degraded_stages: usize,
    /// Stage-by-stage detail for halving methods.
    pub run: Option<RunResult>,
}

fn halving_pulls(arms: usize, run: &RunResult) -> Vec<u64> {
    let mut pulls = vec![0; arms];
    for stage in &run.stages {
        for (&arm, &n) in stage.surviving.iter().zip(&stage.pulls) {
            pulls[arm] += n;
        }
    }
    pulls
}

/// Runs `algorithm` once. `instance` supplies whatever the method is allowed
/// to know (true variances for SHVar, `H` and `b` for the gap-based methods);
/// rewards come from `source`.
pub fn run_algorithm<R: Rng + ?Sized>(
    algorithm: Algorithm,
    params: &AlgorithmParams,
    instance: &BanditInstance,
    source: &RewardSource,
    budget: u64,
    rng: &mut R,
) -> Result<Outcome> {
    let from_halving = |rule: PullRule, rng: &mut R| -> Result<Outcome> {
        let run = halving::run(budget, &rule, source, rng)?;
        Ok(Outcome {
            identified: run.identified,
            pulls: halving_pulls(instance.num_arms(), &run),
            degraded_stages: run.degraded_stages(),
            run: Some(run),
        })
    };
    let from_baseline = |out: baselines::BaselineOutcome| Outcome {
        identified: out.identified,
        pulls: out.pulls,
        degraded_stages: 0,
        run: None,
    };
    match algorithm {
        Algorithm::Sh => from_halving(PullRule::Sh, rng),
        Algorithm::ShVar => from_halving(PullRule::shvar(instance.variances().to_vec())?, rng),
        Algorithm::ShAdaVar => from_halving(PullRule::shadavar(params.delta)?, rng),
        Algorithm::Unif => baselines::unif_run(budget, source, rng).map(from_baseline),
        Algorithm::GapE => {
            let cfg = BaselineConfig {
                c: params.gape_c,
                ..BaselineConfig::gape(instance, budget)
            };
            baselines::gape_run(budget, source, &cfg, rng).map(from_baseline)
        }
        Algorithm::GapEV => {
            let cfg = BaselineConfig {
                c: params.gapev_c,
                ..BaselineConfig::gapev(instance, budget)
            };
            baselines::gapev_run(budget, source, &cfg, rng).map(from_baseline)
        }
        Algorithm::Vbr => baselines::vbr_run(budget, source, params.gamma, rng).map(from_baseline),
    }
}
