//! Exact binomial confidence bounds and tests.

use crate::special::gamma::ln_gamma;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

/// A count of successes out of a number of trials, with the confidence level
/// `1 - α` at which bounds are reported.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub confidence_level: f64,
}

impl BinomialEstimate {
    pub fn new(successes: u64, trials: u64, confidence_level: f64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::domain(
                "BinomialEstimate::new",
                "trials must be positive",
            ));
        }
        if successes > trials {
            return Err(Error::domain(
                "BinomialEstimate::new",
                format!("{successes} successes exceed {trials} trials"),
            ));
        }
        if !(confidence_level > 0.0 && confidence_level < 1.0) {
            return Err(Error::domain(
                "BinomialEstimate::new",
                format!("confidence level {confidence_level} is not in (0, 1)"),
            ));
        }
        Ok(Self {
            successes,
            trials,
            confidence_level,
        })
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.confidence_level
    }

    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// One-sided Clopper–Pearson lower confidence bound on the success probability.
///
/// # Algorithm
///
/// The bound is the `α` quantile of `Beta(k, n - k + 1)`, found by bisection on
/// the regularized incomplete beta function (itself a Lentz continued
/// fraction). The all-success case has the closed form `α^{1/n}`.
pub fn clopper_pearson_lower(est: &BinomialEstimate) -> f64 {
    let k = est.successes;
    let n = est.trials;
    let alpha = est.alpha();
    if k == 0 {
        return 0.0;
    }
    if k == n {
        return alpha.powf(1.0 / n as f64);
    }
    let a = k as f64;
    let b = (n - k + 1) as f64;
    let (mut lo, mut hi) = (0.0f64, est.frequency());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = beta_reg(a, b, mid);
        if f < alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // lo always satisfies I_lo(a, b) < α, so it never overstates the bound
    lo
}

/// One-sided Clopper–Pearson upper confidence bound on the success probability.
pub fn clopper_pearson_upper(est: &BinomialEstimate) -> f64 {
    let flipped = BinomialEstimate {
        successes: est.trials - est.successes,
        ..*est
    };
    1.0 - clopper_pearson_lower(&flipped)
}

fn ln_binom_pmf(k: u64, n: u64, ln_p: f64, ln_q: f64) -> f64 {
    let (kf, nf) = (k as f64, n as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let mut v = ln_choose;
    if k > 0 {
        v += kf * ln_p;
    }
    if k < n {
        v += (nf - kf) * ln_q;
    }
    v
}

/// Exact two-sided binomial test p-value for `H0: p = p0`.
///
/// Sums the probabilities of all outcomes that are no more likely than the
/// observed one, with a small relative slack for rounding.
pub fn binomial_two_sided_pvalue(successes: u64, trials: u64, p0: f64) -> Result<f64> {
    if successes > trials {
        return Err(Error::domain(
            "binomial_two_sided_pvalue",
            format!("{successes} successes exceed {trials} trials"),
        ));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::domain(
            "binomial_two_sided_pvalue",
            format!("p0 = {p0}"),
        ));
    }
    if trials == 0 {
        return Ok(1.0);
    }
    if p0 == 0.0 || p0 == 1.0 {
        let expected = if p0 == 0.0 { 0 } else { trials };
        return Ok(if successes == expected { 1.0 } else { 0.0 });
    }
    let (ln_p, ln_q) = (p0.ln(), (-p0).ln_1p());
    let threshold = ln_binom_pmf(successes, trials, ln_p, ln_q) + 1e-7f64.ln_1p();
    let mut total = 0.0;
    for i in 0..=trials {
        let lp = ln_binom_pmf(i, trials, ln_p, ln_q);
        if lp <= threshold {
            total += lp.exp();
        }
    }
    Ok(total.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn est(k: u64, n: u64, level: f64) -> BinomialEstimate {
        BinomialEstimate::new(k, n, level).unwrap()
    }

    /// P(X >= k) for X ~ Bin(n, p), by direct pmf summation.
    fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
        let (lp, lq) = (p.ln(), (-p).ln_1p());
        (k..=n).map(|i| ln_binom_pmf(i, n, lp, lq).exp()).sum()
    }

    #[test]
    fn zero_successes_gives_zero() {
        assert_eq!(clopper_pearson_lower(&est(0, 50, 0.99)), 0.0);
    }

    #[test]
    fn all_successes_closed_form() {
        let v = clopper_pearson_lower(&est(100, 100, 0.999));
        assert!((v - 0.001f64.powf(0.01)).abs() < 1e-14);
        assert!((v - 0.93325).abs() < 1e-5);
    }

    #[test]
    fn large_count_bound_matches_tail_bisection() {
        let e = est(99_990, 100_000, 0.999);
        let v = clopper_pearson_lower(&e);
        assert!(v > 0.998 && v < 0.9999, "{v}");
        // the exact bound p solves P(X >= k; p) = α
        let (mut lo, mut hi) = (0.998, 0.9999);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if upper_tail(99_990, 100_000, mid) < 0.001 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((v - lo).abs() < 1e-9, "{v} vs {lo}");
    }

    #[test]
    fn lower_bound_below_frequency() {
        for k in [1, 5, 37, 99] {
            let e = est(k, 100, 0.95);
            assert!(clopper_pearson_lower(&e) <= e.frequency());
            assert!(clopper_pearson_upper(&e) >= e.frequency());
        }
    }

    #[test]
    fn coverage_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[0.2, 0.6, 0.93] {
            let reps = 10_000;
            let n = 60;
            let mut covered = 0;
            for _ in 0..reps {
                let k = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
                if clopper_pearson_lower(&est(k, n, 0.95)) <= p {
                    covered += 1;
                }
            }
            let cov = covered as f64 / reps as f64;
            assert!(cov >= 0.94, "p={p}: coverage {cov}");
        }
    }

    #[test]
    fn pvalue_examples() {
        assert!((binomial_two_sided_pvalue(5, 10, 0.5).unwrap() - 1.0).abs() < 1e-12);
        let v = binomial_two_sided_pvalue(10, 10, 0.5).unwrap();
        assert!((v - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn pvalue_matches_pmf_summation() {
        // independent oracle: integer binomial coefficients in u128
        fn choose(n: u128, k: u128) -> u128 {
            let k = k.min(n - k);
            (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
        }
        let n = 100u128;
        let half = 0.5f64.powi(100);
        let obs = choose(n, 90);
        let oracle: f64 = (0..=n)
            .filter(|&i| choose(n, i) <= obs)
            .map(|i| choose(n, i) as f64 * half)
            .sum();
        let v = binomial_two_sided_pvalue(90, 100, 0.5).unwrap();
        assert!((v - oracle).abs() <= 1e-12 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn invalid_estimates_rejected() {
        assert!(BinomialEstimate::new(3, 2, 0.9).is_err());
        assert!(BinomialEstimate::new(1, 0, 0.9).is_err());
        assert!(BinomialEstimate::new(1, 2, 1.0).is_err());
        assert!(binomial_two_sided_pvalue(3, 2, 0.5).is_err());
    }
}
