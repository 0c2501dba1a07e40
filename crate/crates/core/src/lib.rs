//! Fixed-budget best-arm identification for bandits with heterogeneous
//! reward variances.
//!
//! The core is a sequential halving engine with pluggable per-round pull
//! rules: round robin, greedy allocation with known variances, and greedy
//! allocation with variance upper confidence bounds. Around it sit comparison
//! baselines, closed-form error bounds, instance generators and a seeded
//! Monte Carlo harness.
//!
//! ```
//! use bai_core::{halving, BanditInstance, PullRule, RewardSource};
//! use rand::SeedableRng;
//!
//! let inst = BanditInstance::new(vec![1.0, 0.5, 0.4, 0.0], vec![1.0, 0.1, 0.1, 0.1])?;
//! let rule = PullRule::shvar(inst.variances().to_vec())?;
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let run = halving::run(800, &rule, &RewardSource::Gaussian(inst), &mut rng)?;
//! assert_eq!(run.stages.len(), 2);
//! # Ok::<(), bai_core::Error>(())
//! ```

// `!(x > 0.0)` is the NaN-rejecting form used for parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithm;
pub mod bandit;
pub mod baselines;
pub mod error;
pub mod format;
pub mod halving;
pub mod harness;
pub mod instances;
pub mod rules;
pub mod seed;
pub mod theory;

pub use algorithm::{run_algorithm, Algorithm, AlgorithmParams, Outcome};
pub use bandit::{ArmEstimator, ArmSampler, BanditInstance, PullRecord, RewardSource};
pub use error::{Error, Result};
pub use halving::{RunResult, StageRecord, StageState};
pub use harness::{ExperimentConfig, InstanceSource, SweepRow, SweepTable};
pub use rules::PullRule;
