use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::bandit::BanditInstance;
use crate::error::{Error, Result};

/// Floor applied to perturbed variances.
pub const MIN_VARIANCE: f64 = 1e-4;
/// Draws attempted before giving up on a unique best arm.
pub const RESAMPLE_LIMIT: usize = 100;

/// Recipe for the synthetic Gaussian bandit: means `1 - sqrt((i - 1) / K)`,
/// variance `slope * mu^2 + intercept` on even (1-based) arms and a constant on
/// odd arms, then additive Gaussian mean noise and multiplicative uniform
/// variance noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub arms: usize,
    pub perturb_mean_sd: f64,
    pub perturb_var_low: f64,
    pub perturb_var_high: f64,
    pub even_arm_var_slope: f64,
    pub even_arm_var_intercept: f64,
    pub odd_arm_var: f64,
}

impl SyntheticSpec {
    pub fn new(arms: usize) -> Self {
        Self {
            arms,
            perturb_mean_sd: 0.05,
            perturb_var_low: 0.5,
            perturb_var_high: 1.5,
            even_arm_var_slope: 0.9,
            even_arm_var_intercept: 0.1,
            odd_arm_var: 0.1,
        }
    }

    /// Same recipe with both perturbations switched off.
    pub fn unperturbed(arms: usize) -> Self {
        Self {
            perturb_mean_sd: 0.0,
            perturb_var_low: 1.0,
            perturb_var_high: 1.0,
            ..Self::new(arms)
        }
    }

    pub fn with_arms(self, arms: usize) -> Self {
        Self { arms, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 arms, got {}", self.arms)));
        }
        if !(self.perturb_mean_sd >= 0.0) {
            return Err(Error::InvalidParameter("mean perturbation sd must be >= 0".into()));
        }
        if !(self.perturb_var_low > 0.0 && self.perturb_var_low <= self.perturb_var_high) {
            return Err(Error::InvalidParameter(
                "variance perturbation range must satisfy 0 < low <= high".into(),
            ));
        }
        Ok(())
    }

    fn base(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.arms as f64;
        (1..=self.arms)
            .map(|i| {
                let mu = 1.0 - ((i - 1) as f64 / k).sqrt();
                let var = if i % 2 == 0 {
                    self.even_arm_var_slope * mu * mu + self.even_arm_var_intercept
                } else {
                    self.odd_arm_var
                };
                (mu, var)
            })
            .unzip()
    }
}

/// Perturbed means and variances, without the unique-best check.
pub fn synthetic_targets<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let (mut means, mut variances) = spec.base();
    if spec.perturb_mean_sd > 0.0 {
        let noise = Normal::new(0.0, spec.perturb_mean_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        means.iter_mut().for_each(|m| *m += noise.sample(rng));
    }
    if spec.perturb_var_low < spec.perturb_var_high {
        let scale = Uniform::new(spec.perturb_var_low, spec.perturb_var_high)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        variances.iter_mut().for_each(|v| *v *= scale.sample(rng));
    } else {
        variances.iter_mut().for_each(|v| *v *= spec.perturb_var_low);
    }
    variances.iter_mut().for_each(|v| *v = v.max(MIN_VARIANCE));
    Ok((means, variances))
}

pub fn synthetic_instance<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<BanditInstance> {
    for _ in 0..RESAMPLE_LIMIT {
        let (means, variances) = synthetic_targets(spec, rng)?;
        match BanditInstance::new(means, variances) {
            Ok(inst) => return Ok(inst),
            Err(Error::InvalidInstance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResampleLimit(RESAMPLE_LIMIT))
}
