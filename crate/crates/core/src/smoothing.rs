//! Label-smoothing mathematics: smoothed targets, the smoothed
//! cross-entropy loss with analytic gradients, logit-distance vectors, and
//! a numerical verifier for the logit-distance/KL sandwich.
//!
//! Losses here are in nats (natural log); the entropy *metric* elsewhere is
//! in bits. All softmax/log-sum-exp evaluations subtract the max logit
//! first, so logits up to +/-500 stay finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing rate and class count for loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Mixing weight toward the uniform distribution, in [0, 1].
    pub beta: f64,
    /// Class count, >= 2.
    pub k: usize,
}

impl SmoothingConfig {
    pub fn new(beta: f64, k: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!("beta {beta} outside [0,1]")));
        }
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need k >= 2 classes, got {k}")));
        }
        Ok(Self { beta, k })
    }
}

/// A vector of finite pre-softmax scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector {
    logits: Vec<f64>,
}

impl LogitVector {
    pub fn new(logits: Vec<f64>) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need K >= 2 logits, got {}",
                logits.len()
            )));
        }
        if let Some(bad) = logits.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite logit {bad}")));
        }
        Ok(Self { logits })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.logits
    }

    pub fn k(&self) -> usize {
        self.logits.len()
    }

    fn max(&self) -> f64 {
        self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn mean(&self) -> f64 {
        self.logits.iter().sum::<f64>() / self.logits.len() as f64
    }

    /// `ln sum_k exp(l_k)` with max subtraction.
    pub fn log_sum_exp(&self) -> f64 {
        let max = self.max();
        max + self.logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }

    /// Softmax probabilities (max-subtracted).
    pub fn softmax(&self) -> Vec<f64> {
        let max = self.max();
        let exp: Vec<f64> = self.logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }
}

/// Loss, smoothed targets, and the gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedLossResult {
    /// Cross-entropy against the smoothed targets, in nats.
    pub loss: f64,
    /// `(1 - beta) * one_hot(label) + beta / K`; sums to 1.
    pub targets: Vec<f64>,
    /// `softmax(logits) - targets`; sums to 0 within 1e-12.
    pub grad: Vec<f64>,
}

/// The smoothed target vector `(1 - beta) * one_hot(label) + beta / K`.
pub fn smooth_targets(label: usize, cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    if label >= cfg.k {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for k = {}",
            cfg.k
        )));
    }
    let uniform = cfg.beta / cfg.k as f64;
    let mut targets = vec![uniform; cfg.k];
    targets[label] += 1.0 - cfg.beta;
    Ok(targets)
}

/// Smoothed cross-entropy loss and gradient for one example.
///
/// `loss = -sum_k target_k ln softmax(logits)_k`, evaluated as
/// `lse(logits) - sum_k target_k * logits_k` so nothing overflows.
/// With `beta = 0` this is exactly the plain cross-entropy.
pub fn ls_loss(logits: &LogitVector, label: usize, cfg: &SmoothingConfig) -> Result<SmoothedLossResult> {
    if logits.k() != cfg.k {
        return Err(Error::InvalidArgument(format!(
            "logit count {} does not match k = {}",
            logits.k(),
            cfg.k
        )));
    }
    let targets = smooth_targets(label, cfg)?;
    let lse = logits.log_sum_exp();
    let weighted: f64 = targets
        .iter()
        .zip(logits.as_slice())
        .map(|(t, l)| t * l)
        .sum();
    let loss = lse - weighted;
    let grad: Vec<f64> = logits
        .softmax()
        .iter()
        .zip(&targets)
        .map(|(p, t)| p - t)
        .collect();
    Ok(SmoothedLossResult { loss, targets, grad })
}

/// The logit distance vector `d_k = max_i l_i - l_k`.
///
/// Every entry is >= 0 and the minimum is exactly 0; adding a scalar to all
/// logits leaves it unchanged.
pub fn logit_distance(logits: &LogitVector) -> Vec<f64> {
    let max = logits.max();
    logits.as_slice().iter().map(|l| max - l).collect()
}

/// Exact KL divergence from the uniform distribution to `softmax(logits)`,
/// in nats: `sum_k (1/K) ln((1/K) / softmax_k) = lse - mean(l) - ln K`.
pub fn kl_uniform(logits: &LogitVector) -> f64 {
    let k = logits.k() as f64;
    logits.log_sum_exp() - logits.mean() - k.ln()
}

/// The verified sandwich around the mean logit distance.
///
/// The log-sum-exp property `max(l) <= lse(l) <= max(l) + ln K` pins the
/// mean logit distance between the uniform-KL penalty and that penalty plus
/// `ln K`:
///
/// ```text
/// KL[u || softmax(l)]  <=  mean(d(l))  <=  KL[u || softmax(l)] + ln K
/// ```
///
/// equality on the left at uniform logits and on the right as one logit
/// dominates. Both slacks are the two sides of the LSE inequality, so a
/// negative slack beyond tolerance can only mean an implementation bug.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundWitness {
    /// `KL[u || softmax(logits)]`.
    pub lower: f64,
    /// `mean(d(logits))`.
    pub mid: f64,
    /// `KL[u || softmax(logits)] + ln K`.
    pub upper: f64,
    /// `mid - lower`; must be >= -tolerance.
    pub slack_low: f64,
    /// `upper - mid`; must be >= -tolerance.
    pub slack_high: f64,
}

/// Tolerance below which a slack counts as a violation.
pub const BOUND_TOLERANCE: f64 = 1e-9;

impl BoundWitness {
    pub fn holds(&self) -> bool {
        self.slack_low >= -BOUND_TOLERANCE && self.slack_high >= -BOUND_TOLERANCE
    }
}

/// Evaluates the logit-distance sandwich for one logit vector.
pub fn check_bounds(logits: &LogitVector) -> BoundWitness {
    let kl = kl_uniform(logits);
    let mid = logit_distance(logits).iter().sum::<f64>() / logits.k() as f64;
    let upper = kl + (logits.k() as f64).ln();
    BoundWitness {
        lower: kl,
        mid,
        upper,
        slack_low: mid - kl,
        slack_high: upper - mid,
    }
}

/// Summary of a randomized bound sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSweep {
    pub samples: usize,
    pub violations: usize,
    /// Smallest `slack_low` seen.
    pub worst_slack_low: f64,
    /// Smallest `slack_high` seen.
    pub worst_slack_high: f64,
}

/// Checks the sandwich on `samples` random logit vectors.
///
/// Sample `i` draws from substream `i` of `seed` (see [`crate::rng`]):
/// first `K` uniform in `k_range`, then `K` logits uniform in
/// `logit_range`. Runs data-parallel when the `parallel` feature is on;
/// results are identical either way.
pub fn bound_sweep(
    samples: usize,
    k_range: (usize, usize),
    logit_range: (f64, f64),
    seed: u64,
) -> Result<BoundSweep> {
    let (k_lo, k_hi) = k_range;
    if k_lo < 2 || k_hi < k_lo {
        return Err(Error::InvalidArgument(format!(
            "bad class-count range {k_lo}:{k_hi}"
        )));
    }
    if !(logit_range.0 < logit_range.1) {
        return Err(Error::InvalidArgument(format!(
            "bad logit range {}:{}",
            logit_range.0, logit_range.1
        )));
    }
    let witness_for = |i: usize| -> BoundWitness {
        let mut rng = crate::rng::SplitMix64::new(crate::rng::fold_in(seed, i as u64));
        let k = k_lo + rng.next_index(k_hi - k_lo + 1);
        let logits: Vec<f64> = (0..k)
            .map(|_| rng.next_range(logit_range.0, logit_range.1))
            .collect();
        check_bounds(&LogitVector::new(logits).expect("generated logits are finite"))
    };
    let witnesses: Vec<BoundWitness> = crate::par::map_indices(samples, witness_for);
    let mut sweep = BoundSweep {
        samples,
        violations: 0,
        worst_slack_low: f64::INFINITY,
        worst_slack_high: f64::INFINITY,
    };
    for w in &witnesses {
        if !w.holds() {
            sweep.violations += 1;
        }
        sweep.worst_slack_low = sweep.worst_slack_low.min(w.slack_low);
        sweep.worst_slack_high = sweep.worst_slack_high.min(w.slack_high);
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    fn cfg(beta: f64, k: usize) -> SmoothingConfig {
        SmoothingConfig::new(beta, k).unwrap()
    }

    #[test]
    fn targets_recover_one_hot_and_uniform() {
        assert_eq!(smooth_targets(0, &cfg(0.0, 3)).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(smooth_targets(0, &cfg(1.0, 4)).unwrap(), vec![0.25; 4]);
        let t = smooth_targets(0, &cfg(0.1, 2)).unwrap();
        assert!((t[0] - 0.95).abs() < 1e-15);
        assert!((t[1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn loss_hand_example() {
        // Logits giving probs [0.75, 0.25]: [ln 3, 0].
        let logits = lv(&[3.0f64.ln(), 0.0]);
        let p = logits.softmax();
        assert!((p[0] - 0.75).abs() < 1e-15);
        let res = ls_loss(&logits, 0, &cfg(0.1, 2)).unwrap();
        let expected = -0.95 * 0.75f64.ln() - 0.05 * 0.25f64.ln();
        assert!((res.loss - expected).abs() < 1e-12, "{} vs {}", res.loss, expected);
        assert!((expected - 0.342_612_686_885_186_4).abs() < 1e-12);
    }

    #[test]
    fn uniform_logits_beta_one_fixed_point() {
        for k in [2usize, 4, 7] {
            let logits = lv(&vec![1.3; k]);
            let res = ls_loss(&logits, 0, &cfg(1.0, k)).unwrap();
            assert!((res.loss - (k as f64).ln()).abs() < 1e-12);
            for g in &res.grad {
                assert!(g.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_zero_is_plain_cross_entropy() {
        let logits = lv(&[0.3, -1.2, 2.0]);
        let res = ls_loss(&logits, 2, &cfg(0.0, 3)).unwrap();
        let ce = logits.log_sum_exp() - logits.as_slice()[2];
        assert_eq!(res.loss, ce);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let logits = lv(&[500.0, -500.0, 250.0]);
        let res = ls_loss(&logits, 1, &cfg(0.1, 3)).unwrap();
        assert!(res.loss.is_finite());
        assert!(res.grad.iter().all(|g| g.is_finite()));
        assert!(check_bounds(&logits).holds());
    }

    #[test]
    fn logit_distance_examples() {
        assert_eq!(logit_distance(&lv(&[2.0, 0.0, 1.0])), vec![0.0, 2.0, 1.0]);
        assert_eq!(logit_distance(&lv(&[3.3, 3.3, 3.3])), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn kl_uniform_examples() {
        assert!(kl_uniform(&lv(&[0.7, 0.7, 0.7])).abs() < 1e-15);
        // K=2, probs [0.8, 0.2]: 0.5 ln(0.5/0.8) + 0.5 ln(0.5/0.2).
        let kl = kl_uniform(&lv(&[4.0f64.ln(), 0.0]));
        let expected = 0.5 * (0.5f64 / 0.8).ln() + 0.5 * (0.5f64 / 0.2).ln();
        assert!((kl - expected).abs() < 1e-12);
        assert!((expected - 0.223_143_551_314_209_7).abs() < 1e-12);
    }

    #[test]
    fn bounds_equality_cases() {
        // Uniform logits: mid == lower == 0, upper == ln K.
        let w = check_bounds(&lv(&[2.0, 2.0, 2.0, 2.0]));
        assert!(w.lower.abs() < 1e-12);
        assert!(w.mid.abs() < 1e-12);
        assert!((w.upper - 4.0f64.ln()).abs() < 1e-12);
        assert!(w.holds());

        // One dominant logit: mid approaches the upper bound.
        let w = check_bounds(&lv(&[50.0, 0.0, 0.0, 0.0]));
        assert!(w.holds());
        assert!(w.slack_high < 1e-12, "slack_high {}", w.slack_high);
        assert!((w.mid - 37.5).abs() < 1e-12);
    }

    #[test]
    fn bound_sweep_runs_clean() {
        let sweep = bound_sweep(5_000, (2, 20), (-10.0, 10.0), 1).unwrap();
        assert_eq!(sweep.violations, 0);
        assert!(sweep.worst_slack_low >= -BOUND_TOLERANCE);
        assert!(sweep.worst_slack_high >= -BOUND_TOLERANCE);
    }

    #[test]
    fn bound_sweep_deterministic() {
        let a = bound_sweep(2_000, (2, 20), (-10.0, 10.0), 9).unwrap();
        let b = bound_sweep(2_000, (2, 20), (-10.0, 10.0), 9).unwrap();
        assert_eq!(a.worst_slack_low.to_bits(), b.worst_slack_low.to_bits());
        assert_eq!(a.worst_slack_high.to_bits(), b.worst_slack_high.to_bits());
    }

    proptest! {
        #[test]
        fn grad_sums_to_zero_and_targets_to_one(
            logits in proptest::collection::vec(-30.0f64..30.0, 2..10),
            beta in 0.0f64..=1.0,
            label_seed in 0usize..100,
        ) {
            let k = logits.len();
            let label = label_seed % k;
            let res = ls_loss(&lv(&logits), label, &cfg(beta, k)).unwrap();
            prop_assert!((res.targets.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(res.grad.iter().sum::<f64>().abs() < 1e-12);
        }

        #[test]
        fn loss_affine_in_beta(
            logits in proptest::collection::vec(-30.0f64..30.0, 2..8),
            label_seed in 0usize..100,
        ) {
            let k = logits.len();
            let label = label_seed % k;
            let logits = lv(&logits);
            let l0 = ls_loss(&logits, label, &cfg(0.0, k)).unwrap().loss;
            let l1 = ls_loss(&logits, label, &cfg(1.0, k)).unwrap().loss;
            for beta in [0.1, 0.25, 0.5, 0.9] {
                let lb = ls_loss(&logits, label, &cfg(beta, k)).unwrap().loss;
                prop_assert!((lb - ((1.0 - beta) * l0 + beta * l1)).abs() < 1e-10);
            }
        }

        #[test]
        fn shift_invariance(
            logits in proptest::collection::vec(-20.0f64..20.0, 2..8),
            shift in -50.0f64..50.0,
        ) {
            let base = lv(&logits);
            let shifted = lv(&logits.iter().map(|l| l + shift).collect::<Vec<_>>());
            let d0 = logit_distance(&base);
            let d1 = logit_distance(&shifted);
            for (a, b) in d0.iter().zip(&d1) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((kl_uniform(&base) - kl_uniform(&shifted)).abs() < 1e-9);
        }

        #[test]
        fn distance_nonnegative_min_zero(
            logits in proptest::collection::vec(-20.0f64..20.0, 2..10),
        ) {
            let d = logit_distance(&lv(&logits));
            prop_assert!(d.iter().all(|&v| v >= 0.0));
            prop_assert!(d.iter().cloned().fold(f64::INFINITY, f64::min) == 0.0);
        }

        #[test]
        fn kl_uniform_nonnegative(
            logits in proptest::collection::vec(-20.0f64..20.0, 2..10),
        ) {
            prop_assert!(kl_uniform(&lv(&logits)) >= -1e-12);
        }

        #[test]
        fn sandwich_holds(
            logits in proptest::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            prop_assert!(check_bounds(&lv(&logits)).holds());
        }
    }

    /// Increasing beta pushes the minimizing softmax toward higher entropy:
    /// along a 1-D logit family the optimum under smoothing has strictly
    /// larger entropy for larger beta.
    #[test]
    fn smoothing_raises_optimal_entropy() {
        // Family logits(t) = [t, 0]; minimize smoothed loss for label 0 by
        // scanning t, then compare entropies of the optima.
        let optimum = |beta: f64| -> f64 {
            let cfg = cfg(beta, 2);
            let mut best = (f64::INFINITY, 0.0);
            let mut t = -1.0;
            while t <= 12.0 {
                let loss = ls_loss(&lv(&[t, 0.0]), 0, &cfg).unwrap().loss;
                if loss < best.0 {
                    best = (loss, t);
                }
                t += 0.01;
            }
            let p = lv(&[best.1, 0.0]).softmax();
            -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
        };
        let e0 = optimum(0.05);
        let e1 = optimum(0.2);
        let e2 = optimum(0.5);
        assert!(e0 < e1 && e1 < e2, "{e0} {e1} {e2}");
    }

    /// Central finite differences agree with the analytic gradient.
    #[test]
    fn grad_matches_finite_differences() {
        let mut rng = crate::rng::SplitMix64::new(11);
        for _ in 0..50 {
            let k = 2 + rng.next_index(6);
            let logits: Vec<f64> = (0..k).map(|_| rng.next_range(-5.0, 5.0)).collect();
            let beta = rng.next_f64();
            let label = rng.next_index(k);
            let cfg = cfg(beta, k);
            let res = ls_loss(&lv(&logits), label, &cfg).unwrap();
            let h = 1e-5;
            for i in 0..k {
                let mut plus = logits.clone();
                plus[i] += h;
                let mut minus = logits.clone();
                minus[i] -= h;
                let fd = (ls_loss(&lv(&plus), label, &cfg).unwrap().loss
                    - ls_loss(&lv(&minus), label, &cfg).unwrap().loss)
                    / (2.0 * h);
                let denom = res.grad[i].abs().max(1e-8);
                assert!(
                    ((res.grad[i] - fd) / denom).abs() < 1e-5 || (res.grad[i] - fd).abs() < 1e-9,
                    "coord {i}: analytic {} vs fd {fd}",
                    res.grad[i]
                );
            }
        }
    }
}
