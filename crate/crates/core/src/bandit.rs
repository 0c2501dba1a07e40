//! Problem instances, reward sampling and streaming estimators.
//!
//! Arms are 0-indexed and instances need not be sorted by mean: the best arm
//! is located on construction and must be unique.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arm means and reward variances of a stochastic bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    means: Vec<f64>,
    variances: Vec<f64>,
    best: usize,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = variances
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidInstance(format!(
                "variance of arm {i} must be strictly positive and finite, got {v}"
            )));
        }
        Self::build(means, variances)
    }

    /// Skips the positive-variance check. Only degenerate test fixtures use this.
    #[cfg(test)]
    pub(crate) fn new_allow_zero_variance(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Self::build(means, variances)
    }

    fn build(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::InvalidInstance(format!(
                "{} means but {} variances",
                means.len(),
                variances.len()
            )));
        }
        if means.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 arms, got {}",
                means.len()
            )));
        }
        if let Some(i) = means.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidInstance(format!("mean of arm {i} is not finite")));
        }
        let best = unique_argmax(&means).ok_or_else(|| {
            Error::InvalidInstance("the maximum mean is attained by more than one arm".into())
        })?;
        Ok(Self {
            means,
            variances,
            best,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn best_arm(&self) -> usize {
        self.best
    }

    /// Suboptimality gap of every arm; the best arm's gap is 0.
    pub fn gaps(&self) -> Vec<f64> {
        let top = self.means[self.best];
        self.means.iter().map(|m| top - m).collect()
    }

    /// Smallest positive gap, i.e. best mean minus second-best mean.
    pub fn delta_min(&self) -> f64 {
        self.gaps()
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| i != self.best)
            .map(|(_, g)| g)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sigma_max_sq(&self) -> f64 {
        self.variances.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum_variances(&self) -> f64 {
        self.variances.iter().sum()
    }

    /// Order-sensitive 64-bit fingerprint of the exact bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        for x in self.means.iter().chain(&self.variances) {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Text form: `means = ...` and `variances = ...` lines of comma-separated
    /// numbers written with 17 significant digits.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:.16e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "# bandit instance, {} arms\nmeans = {}\nvariances = {}\n",
            self.num_arms(),
            join(&self.means),
            join(&self.variances)
        )
    }

    pub fn parse_text(text: &str, origin: &Path) -> Result<Self> {
        let mut means = None;
        let mut variances = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = values`, got `{line}`")))?;
            let values = value
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("bad number `{}`: {e}", v.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            match key.trim() {
                "means" => means = Some(values),
                "variances" => variances = Some(values),
                other => return Err(parse_err(format!("unknown field `{other}`"))),
            }
        }
        let missing = |field: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: format!("missing `{field}`"),
        };
        Self::new(
            means.ok_or_else(|| missing("means"))?,
            variances.ok_or_else(|| missing("variances"))?,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse_text(&fs::read_to_string(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn unique_argmax(xs: &[f64]) -> Option<usize> {
    let mut best = 0;
    let mut tied = false;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
            tied = false;
        } else if x == xs[best] {
            tied = true;
        }
    }
    (!tied).then_some(best)
}

/// Anything that can produce a reward for an arm.
pub trait ArmSampler {
    fn num_arms(&self) -> usize;

    fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64>;
}

/// Reward backend: Gaussian arms or per-arm pools of recorded rewards.
#[derive(Debug, Clone)]
pub enum RewardSource {
    Gaussian(BanditInstance),
    /// Each pull returns a uniformly chosen element of the arm's pool.
    Tabular(Vec<Arc<[f64]>>),
}

impl RewardSource {
    pub fn tabular(pools: Vec<Arc<[f64]>>) -> Result<Self> {
        if pools.len() < 2 {
            return Err(Error::InvalidInstance(format!(
                "need at least 2 arms, got {}",
                pools.len()
            )));
        }
        if let Some(i) = pools.iter().position(|p| p.is_empty()) {
            return Err(Error::InvalidInstance(format!("pool of arm {i} is empty")));
        }
        Ok(Self::Tabular(pools))
    }

    /// The instance this source realizes. For pools this is the empirical mean
    /// and population variance of each pool.
    pub fn effective_instance(&self) -> Result<BanditInstance> {
        match self {
            Self::Gaussian(inst) => Ok(inst.clone()),
            Self::Tabular(pools) => {
                let (means, variances) = pools
                    .iter()
                    .map(|p| {
                        let est = p.iter().fold(ArmEstimator::new(), |mut e, &y| {
                            e.update(y);
                            e
                        });
                        (est.mean(), est.sum_sq_dev() / est.count() as f64)
                    })
                    .unzip();
                BanditInstance::new(means, variances)
            }
        }
    }
}

impl ArmSampler for RewardSource {
    fn num_arms(&self) -> usize {
        match self {
            Self::Gaussian(inst) => inst.num_arms(),
            Self::Tabular(pools) => pools.len(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, arm: usize, rng: &mut R) -> Result<f64> {
        let arms = self.num_arms();
        if arm >= arms {
            return Err(Error::ArmOutOfRange { arm, arms });
        }
        Ok(match self {
            Self::Gaussian(inst) => {
                let z: f64 = rng.sample(StandardNormal);
                inst.means[arm] + inst.variances[arm].sqrt() * z
            }
            Self::Tabular(pools) => {
                let pool = &pools[arm];
                pool[rng.random_range(0..pool.len())]
            }
        })
    }
}

/// Streaming mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimator {
    count: u64,
    mean: f64,
    sum_sq_dev: f64,
}

impl ArmEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, y: f64) {
        self.count += 1;
        let delta = y - self.mean;
        self.mean += delta / self.count as f64;
        self.sum_sq_dev += delta * (y - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sum_sq_dev(&self) -> f64 {
        self.sum_sq_dev
    }

    /// Unbiased sample variance; `None` below two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.sum_sq_dev / (self.count - 1) as f64)
    }

    /// Estimator of the concatenation of both observation sequences.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * nb / n,
            sum_sq_dev: self.sum_sq_dev + other.sum_sq_dev + delta * delta * na * nb / n,
        }
    }
}

/// One pull inside the halving engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullRecord {
    pub stage: usize,
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
}

impl fmt::Display for PullRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {:e}", self.stage, self.round, self.arm, self.reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn observe(xs: &[f64]) -> ArmEstimator {
        let mut est = ArmEstimator::new();
        xs.iter().for_each(|&x| est.update(x));
        est
    }

    #[test]
    fn zero_variance_gaussian_returns_mean() {
        let inst = BanditInstance::new_allow_zero_variance(vec![5.0, 0.0], vec![0.0, 1.0]).unwrap();
        let src = RewardSource::Gaussian(inst);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((src.sample(0, &mut rng).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_pool() {
        let src = RewardSource::tabular(vec![Arc::from(vec![3.0]), Arc::from(vec![1.0, 2.0])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(src.sample(0, &mut rng).unwrap(), 3.0);
    }

    #[test]
    fn out_of_range_arm() {
        let src = RewardSource::Gaussian(BanditInstance::new(vec![1.0, 0.0], vec![1.0, 1.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            src.sample(2, &mut rng),
            Err(Error::ArmOutOfRange { arm: 2, arms: 2 })
        ));
    }

    #[test]
    fn standard_normal_moments() {
        let src = RewardSource::Gaussian(BanditInstance::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut est = ArmEstimator::new();
        for _ in 0..100_000 {
            est.update(src.sample(0, &mut rng).unwrap());
        }
        assert!(est.mean().abs() < 0.02, "mean {}", est.mean());
        assert!((est.variance().unwrap() - 1.0).abs() < 0.05);
    }

    #[test]
    fn tabular_mean_converges() {
        let pool: Vec<f64> = (1..=5).map(f64::from).collect();
        let src = RewardSource::tabular(vec![Arc::from(pool.clone()), Arc::from(vec![0.0, 1.0])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let sum: f64 = (0..draws).map(|_| src.sample(0, &mut rng).unwrap()).sum();
        // pool mean 3, population variance 2
        let band = 3.0 * (2.0f64 / draws as f64).sqrt();
        assert!((sum / draws as f64 - 3.0).abs() < band);
        let inst = src.effective_instance().unwrap();
        assert_eq!(inst.means()[0], 3.0);
        assert!((inst.variances()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(RewardSource::tabular(vec![Arc::from(vec![1.0]), Arc::from(Vec::<f64>::new())]).is_err());
    }

    #[test]
    fn estimator_examples() {
        let est = observe(&[4.0]);
        assert_eq!((est.count(), est.mean(), est.sum_sq_dev()), (1, 4.0, 0.0));
        assert_eq!(est.variance(), None);

        let est = observe(&[1.0, 3.0]);
        assert_eq!(est.mean(), 2.0);
        assert_eq!(est.variance(), Some(2.0));

        let est = observe(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((est.mean() - 5.0).abs() < 1e-15);
        assert!((est.variance().unwrap() - 32.0 / 7.0).abs() < 1e-14);

        let empty = ArmEstimator::new();
        assert_eq!((empty.count(), empty.mean(), empty.sum_sq_dev()), (0, 0.0, 0.0));
    }

    #[test]
    fn gap_examples() {
        let inst = BanditInstance::new(vec![1.0, 0.5, 0.2], vec![1.0; 3]).unwrap();
        assert_eq!(inst.gaps(), vec![0.0, 0.5, 0.8]);
        assert_eq!(inst.delta_min(), 0.5);

        let inst = BanditInstance::new(vec![0.0, 1.0], vec![1.0; 2]).unwrap();
        assert_eq!(inst.best_arm(), 1);
        assert_eq!(inst.gaps(), vec![1.0, 0.0]);

        let k = 4.0f64;
        let means: Vec<f64> = (1..=4).map(|i| 1.0 - ((i as f64 - 1.0) / k).sqrt()).collect();
        let gaps = BanditInstance::new(means, vec![1.0; 4]).unwrap().gaps();
        let expected = [0.0, 0.5, 0.5f64.sqrt(), 0.75f64.sqrt()];
        for (g, e) in gaps.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn validation_failures() {
        assert!(BanditInstance::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(BanditInstance::new(vec![1.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(BanditInstance::new(vec![1.0], vec![1.0]).is_err());
        assert!(BanditInstance::new(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(BanditInstance::new(vec![1.0, 0.0], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let inst = BanditInstance::new(
            vec![0.1 + 0.2, -1.0 / 3.0, 1e-300, 7.0],
            vec![std::f64::consts::PI, 1e-4, 123456.789, 2.0f64.sqrt()],
        )
        .unwrap();
        let back = BanditInstance::parse_text(&inst.to_text(), Path::new("mem")).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn parse_reports_line() {
        let err = BanditInstance::parse_text("means = 1, 0\nvariances = 1, x\n", Path::new("f")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn streaming_matches_batch(xs in prop::collection::vec(-1e3f64..1e3, 2..200)) {
            let est = observe(&xs);
            let (mean, var) = batch(&xs);
            prop_assert!((est.mean() - mean).abs() <= 1e-12 * mean.abs().max(1.0));
            prop_assert!((est.variance().unwrap() - var).abs() <= 1e-12 * var.max(1e-300) + 1e-12);
        }

        #[test]
        fn merge_equals_concatenation(
            a in prop::collection::vec(-100f64..100.0, 0..50),
            b in prop::collection::vec(-100f64..100.0, 0..50),
        ) {
            let merged = observe(&a).merge(&observe(&b));
            let whole = observe(&[a.clone(), b.clone()].concat());
            prop_assert_eq!(merged.count(), whole.count());
            prop_assert!((merged.mean() - whole.mean()).abs() < 1e-10);
            prop_assert!((merged.sum_sq_dev() - whole.sum_sq_dev()).abs() < 1e-8 * whole.sum_sq_dev().max(1.0));
        }
    }
}
