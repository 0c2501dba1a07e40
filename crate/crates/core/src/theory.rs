//! Closed-form complexity measures and mistake-probability bounds.
//!
//! `log` is natural and `log2` is base 2 everywhere, including the `K log K`
//! offset of the max-variance bounds. Bounds are returned as computed, never
//! clamped to 1; [`Bound::vacuous`] marks values that carry no information.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bandit::BanditInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    fn new(value: f64) -> Self {
        Self {
            value,
            vacuous: !(value < 1.0),
        }
    }
}

/// `max_{i >= 2} i / gap_(i)^2` over arms ranked by decreasing mean.
pub fn h2(instance: &BanditInstance) -> f64 {
    let mut means = instance.means().to_vec();
    means.sort_by(|a, b| b.total_cmp(a));
    let top = means[0];
    means
        .iter()
        .enumerate()
        .skip(1)
        .map(|(rank0, m)| (rank0 + 1) as f64 / (top - m).powi(2))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn log2k(arms: usize) -> f64 {
    (arms as f64).log2()
}

/// Round-robin sequential halving bound.
pub fn sh_bound(budget: f64, arms: usize, h2: f64) -> Bound {
    let l = log2k(arms);
    Bound::new(3.0 * l * (-budget / (8.0 * h2 * l)).exp())
}

/// Known-variance bound driven by the total variance.
pub fn shvar_bound(budget: f64, instance: &BanditInstance) -> Bound {
    let l = log2k(instance.num_arms());
    let dmin = instance.delta_min();
    Bound::new(2.0 * l * (-budget * dmin * dmin / (4.0 * l * instance.sum_variances())).exp())
}

/// Exponent (without sign) shared by the max-variance bounds, before the
/// adaptive factor.
fn max_variance_exponent(budget: f64, instance: &BanditInstance) -> f64 {
    let k = instance.num_arms() as f64;
    let dmin = instance.delta_min();
    (budget - k * k.ln()) * dmin * dmin / (4.0 * instance.sigma_max_sq() * k * log2k(instance.num_arms()))
}

/// Known-variance bound driven by the largest variance. Vacuous when
/// `n <= K log K`.
pub fn shvar2_bound(budget: f64, instance: &BanditInstance) -> Bound {
    let k = instance.num_arms() as f64;
    let l = log2k(instance.num_arms());
    let mut b = Bound::new(2.0 * l * (-max_variance_exponent(budget, instance)).exp());
    b.vacuous |= budget <= k * k.ln();
    b
}

/// `(1 - 2 sqrt(r)) / (1 + 2 sqrt(r) + 2 r)` with `r = log_term / dof`.
/// Non-positive when the concentration is too weak to say anything.
pub fn alpha_factor(log_term: f64, dof: f64) -> f64 {
    if !(dof > 0.0) {
        return f64::NEG_INFINITY;
    }
    let r = log_term / dof;
    (1.0 - 2.0 * r.sqrt()) / (1.0 + 2.0 * r.sqrt() + 2.0 * r)
}

/// Adaptive-variance factor with the union bound over `K n` events folded in.
pub fn shadavar_alpha(budget: f64, arms: usize, delta: f64) -> f64 {
    let k = arms as f64;
    alpha_factor((k * budget / delta).ln(), budget / k - 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBound {
    pub bound: Bound,
    pub alpha: f64,
    /// `n >= K log2 K (4 log(K n / delta) + 1)`.
    pub budget_condition_met: bool,
    /// `delta < 1 / (K n)`.
    pub delta_condition_met: bool,
}

/// Unknown-variance bound: the max-variance exponent scaled by alpha.
pub fn shadavar_bound(budget: f64, instance: &BanditInstance, delta: f64) -> AdaptiveBound {
    let arms = instance.num_arms();
    let k = arms as f64;
    let l = log2k(arms);
    let alpha = shadavar_alpha(budget, arms, delta);
    let mut bound = Bound::new(2.0 * l * (-alpha * max_variance_exponent(budget, instance)).exp());
    bound.vacuous |= alpha <= 0.0 || budget <= k * k.ln();
    AdaptiveBound {
        bound,
        alpha,
        budget_condition_met: budget >= k * l * (4.0 * (k * budget / delta).ln() + 1.0),
        delta_condition_met: delta < 1.0 / (k * budget),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PullMode {
    Known,
    Adaptive,
}

/// Guaranteed pulls of an arm in a stage of `surviving` arms and `stage_budget`
/// pulls. The adaptive form holds with high probability only.
pub fn pull_lower_bound(
    surviving: usize,
    stage_budget: f64,
    sigma_sq: f64,
    sigma_max_sq: f64,
    mode: PullMode,
    delta: f64,
) -> f64 {
    let per_arm = stage_budget / surviving as f64;
    let known = sigma_sq / sigma_max_sq * (per_arm - 1.0);
    match mode {
        PullMode::Known => known,
        PullMode::Adaptive => known * alpha_factor((1.0 / delta).ln(), per_arm - 2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub arms: usize,
    pub budget: f64,
    pub h2: f64,
    pub delta_min: f64,
    pub sigma_max_sq: f64,
    pub sum_var: f64,
    /// Union-bounded confidence used by the adaptive bound, `delta / (K n)`.
    pub theory_delta: f64,
    pub alpha: f64,
    pub budget_condition_met: bool,
    pub bounds: BTreeMap<String, Bound>,
}

/// All bounds for one instance and budget. `delta` is the per-event confidence
/// the adaptive algorithm runs with.
pub fn report(instance: &BanditInstance, budget: f64, delta: f64) -> TheoryReport {
    let arms = instance.num_arms();
    let h2 = h2(instance);
    let theory_delta = delta / (arms as f64 * budget);
    let ada = shadavar_bound(budget, instance, theory_delta);
    let bounds = BTreeMap::from([
        ("sh".to_string(), sh_bound(budget, arms, h2)),
        ("shvar".to_string(), shvar_bound(budget, instance)),
        ("shvar_max_variance".to_string(), shvar2_bound(budget, instance)),
        ("shadavar".to_string(), ada.bound),
    ]);
    TheoryReport {
        arms,
        budget,
        h2,
        delta_min: instance.delta_min(),
        sigma_max_sq: instance.sigma_max_sq(),
        sum_var: instance.sum_variances(),
        theory_delta,
        alpha: ada.alpha,
        budget_condition_met: ada.budget_condition_met,
        bounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn inst(means: Vec<f64>, vars: Vec<f64>) -> BanditInstance {
        BanditInstance::new(means, vars).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn h2_examples() {
        // ties among suboptimal arms are allowed
        assert!((h2(&inst(vec![1.0, 0.5, 0.5], vec![1.0; 3])) - 12.0).abs() < 1e-12);
        assert!((h2(&inst(vec![1.0, 0.0], vec![1.0; 2])) - 2.0).abs() < 1e-12);
        for k in [4usize, 16, 64] {
            let kf = k as f64;
            let means: Vec<f64> = (1..=k).map(|i| 1.0 - ((i as f64 - 1.0) / kf).sqrt()).collect();
            // i K / (i - 1) peaks at i = 2
            assert!(rel(h2(&inst(means, vec![1.0; k])), 2.0 * kf) < 1e-12);
        }
    }

    #[test]
    fn h2_is_order_free() {
        let a = h2(&inst(vec![1.0, 0.7, 0.2, 0.9], vec![1.0; 4]));
        let b = h2(&inst(vec![0.2, 0.9, 1.0, 0.7], vec![1.0; 4]));
        assert_eq!(a, b);
    }

    #[test]
    fn sh_bound_examples() {
        let (k, h) = (8usize, 5.0);
        let n = 8.0 * h * 3.0;
        assert!(rel(sh_bound(n, k, h).value, 9.0 / E) < 1e-14);
        assert!(sh_bound(1e12, k, h).value < 1e-300);
        let b = sh_bound(1e4, 64, 128.0);
        assert!(rel(b.value, 18.0 * (-1e4f64 / 6144.0).exp()) < 1e-14);
        assert!((b.value - 3.54).abs() < 0.01);
        assert!(b.vacuous);
    }

    #[test]
    fn shvar_bound_examples() {
        let two = inst(vec![1.0, 0.0], vec![1.0, 1.0]);
        assert!(rel(shvar_bound(32.0, &two).value, 2.0 * (-4.0f64).exp()) < 1e-14);

        let k = 8;
        let quarter = inst((0..k).map(|i| -(i as f64)).collect(), vec![0.25; k]);
        let n = 500.0;
        let expected = 2.0 * 3.0 * (-n * 1.0 / (k as f64 * 3.0)).exp();
        assert!(rel(shvar_bound(n, &quarter).value, expected) < 1e-13);

        let base = inst(vec![1.0, 0.6, 0.1], vec![0.5, 1.0, 2.0]);
        let doubled = inst(vec![1.0, 0.6, 0.1], vec![1.0, 2.0, 4.0]);
        assert!(rel(shvar_bound(400.0, &doubled).value, shvar_bound(200.0, &base).value) < 1e-14);
    }

    #[test]
    fn shvar2_bound_examples() {
        let two = inst(vec![1.0, 0.0], vec![1.0, 0.5]);
        let n = 16.0 + 2.0 * 2f64.ln();
        assert!(rel(shvar2_bound(n, &two).value, 2.0 * (-2.0f64).exp()) < 1e-13);

        let four = inst(vec![1.0, 0.5, 0.2, 0.0], vec![0.7; 4]);
        let n = 1e6;
        let thm1 = n * 0.25 / (4.0 * 2.0 * four.sum_variances());
        let thm2 = max_variance_exponent(n, &four);
        assert!((thm2 / thm1 - 1.0).abs() < 1e-4);

        let small = shvar2_bound(4.0 * 4f64.ln(), &four);
        assert!(small.vacuous && small.value >= 2.0 * 2.0);
    }

    #[test]
    fn alpha_examples() {
        assert!(rel(alpha_factor(1.0, 16.0), 0.5 / 1.625) < 1e-15);
        assert!((alpha_factor(1.0, 16.0) - 0.30769).abs() < 1e-5);
        // log(K n / delta) = 1 with n / K - 2 = 16: K = 2, n = 36, delta = K n / e
        assert!(rel(shadavar_alpha(36.0, 2, 72.0 / E), 0.5 / 1.625) < 1e-14);
        assert!(shadavar_alpha(1e15, 4, 0.05) > 0.999);
        let mut prev = f64::NEG_INFINITY;
        for n in (1..200).map(|i| 1000.0 * i as f64) {
            let a = shadavar_alpha(n, 8, 0.05);
            assert!(a > prev);
            assert!(a < 1.0);
            prev = a;
        }
    }

    #[test]
    fn shadavar_bound_examples() {
        let i4 = inst(vec![1.0, 0.5, 0.3, 0.0], vec![1.0, 0.5, 0.2, 0.9]);
        let n = 1e5;
        let delta = 1.0 / (4.0 * n);
        let got = shadavar_bound(n, &i4, delta);
        // independent evaluation, written out longhand
        let log_term = (4.0 * n / delta).ln();
        let d = n / 4.0 - 2.0;
        let alpha = (1.0 - 2.0 * (log_term / d).sqrt()) / (1.0 + 2.0 * (log_term / d).sqrt() + 2.0 * log_term / d);
        let expo = alpha * (n - 4.0 * 4.0f64.ln()) * 0.25 / (4.0 * 1.0 * 4.0 * 2.0);
        assert!(rel(got.bound.value, 4.0 * (-expo).exp()) < 1e-12);
        assert!(!got.delta_condition_met);

        // alpha -> 1 recovers the max-variance bound
        let big = 1e14;
        let ada = shadavar_bound(big, &i4, 1.0 / (8.0 * big));
        let kv = shvar2_bound(big, &i4);
        assert!((ada.alpha - 1.0).abs() < 1e-4);
        assert!(ada.bound.value <= kv.value * 1.0 + 1e-300);

        let tiny = shadavar_bound(20.0, &i4, 1e-3);
        assert!(tiny.alpha <= 0.0 && tiny.bound.vacuous);
        assert!(!tiny.budget_condition_met);
    }

    #[test]
    fn pull_lower_bound_examples() {
        assert!((pull_lower_bound(4, 40.0, 1.0, 1.0, PullMode::Known, 0.05) - 9.0).abs() < 1e-15);
        assert!((pull_lower_bound(4, 36.0, 0.25, 1.0, PullMode::Known, 0.05) - 2.0).abs() < 1e-15);
        let known = pull_lower_bound(4, 4e9, 0.5, 1.0, PullMode::Known, 0.05);
        let adaptive = pull_lower_bound(4, 4e9, 0.5, 1.0, PullMode::Adaptive, 0.05);
        assert!(adaptive < known && adaptive / known > 0.999);
    }

    #[test]
    fn bounds_monotone() {
        let a = inst(vec![1.0, 0.8, 0.5, 0.1], vec![0.3, 0.6, 0.2, 0.4]);
        let b = inst(vec![1.0, 0.8, 0.5, 0.1], vec![0.3, 0.9, 0.2, 0.4]);
        let mut last = [f64::INFINITY; 3];
        let mut last_ada = f64::INFINITY;
        for n in (1..100).map(|i| 50.0 * i as f64) {
            let cur = [sh_bound(n, 4, h2(&a)).value, shvar_bound(n, &a).value, shvar2_bound(n, &a).value];
            for (c, l) in cur.iter().zip(last) {
                assert!(*c <= l);
            }
            last = cur;
            // larger variance never helps
            assert!(shvar_bound(n, &b).value >= cur[1]);
            assert!(shvar2_bound(n, &b).value >= cur[2]);

            // the adaptive bound is only informative once alpha > 0
            let ada = shadavar_bound(n, &a, 1e-3);
            if ada.alpha > 0.0 && n > 4.0 * 4f64.ln() {
                assert!(ada.bound.value <= last_ada);
                assert!(shadavar_bound(n, &b, 1e-3).bound.value >= ada.bound.value);
                last_ada = ada.bound.value;
            }
        }
        assert!(last_ada < f64::INFINITY);
    }

    #[test]
    fn report_flags() {
        let r = report(&inst(vec![1.0, 0.0], vec![1.0, 1.0]), 32.0, 0.05);
        assert!(rel(r.bounds["shvar"].value, 2.0 * (-4.0f64).exp()) < 1e-14);
        assert!(!r.bounds["shvar"].vacuous);
        assert!(r.bounds["sh"].value >= 0.0);
        assert_eq!(r.theory_delta, 0.05 / 64.0);
    }
}
