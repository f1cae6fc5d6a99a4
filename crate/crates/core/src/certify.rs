//! Certified radius for a semi-elastic σ(x).
//!
//! At distance `R` an adversary may use any `σ₁` in
//! `[σ₀ e^{-rR}, σ₀ e^{rR}]`. The worst-case probabilities are monotone in
//! `σ₁` on either side of `σ₀`, so only the two extremes need checking. Near
//! `R = 0` those extremes approach `σ₀` and the noncentral chi-squared
//! arguments blow up; clamps `σ_t < 1 < σ_T` replace them by more extreme
//! (hence still sound) ratios.

use crate::error::{Error, Result};
use crate::sigma::SigmaField;
use crate::smoothing::{
    cohen_radius, estimate_pa, BaseClassifier, CertificationResult, Diagnostics, Method,
    SmoothingConfig,
};
use crate::special::{EvalPath, NumericsPolicy};
use crate::worst_case::{xi_with, AdversaryPair, XiEvaluation};

/// Dimension anchors for the default clamp offset.
const LOW_DIM_ANCHOR: (f64, f64) = (784.0, 0.9988);
const HIGH_DIM_ANCHOR: (f64, f64) = (3072.0, 0.9993);
const CLAMP_FLOOR: f64 = 0.5;

/// The lower clamp `σ_t(p_B)` as a ratio to `σ₀`; the upper clamp is its
/// reciprocal.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ClampFn {
    /// `offset(N) + 0.001 log₁₀(p_B)`, with `offset` log-linear in `N`
    /// between 0.9988 at `N = 784` and 0.9993 at `N = 3072`, constant outside.
    Interpolated,
    /// `offset + 0.001 log₁₀(p_B)` with a fixed offset.
    Offset { offset: f64 },
    /// A constant ratio.
    Fixed { lower: f64 },
    /// Raw envelopes; only usable where the numerics hold up.
    Disabled,
}

impl Default for ClampFn {
    fn default() -> Self {
        Self::Interpolated
    }
}

pub fn interpolated_offset(dof: u32) -> f64 {
    let (n0, v0) = LOW_DIM_ANCHOR;
    let (n1, v1) = HIGH_DIM_ANCHOR;
    let n = dof as f64;
    if n <= n0 {
        v0
    } else if n >= n1 {
        v1
    } else {
        let t = (n.ln() - n0.ln()) / (n1.ln() - n0.ln());
        v0 + t * (v1 - v0)
    }
}

impl ClampFn {
    /// `σ_t / σ₀`, or `None` when clamping is off.
    pub fn lower_ratio(&self, dof: u32, p_b: f64) -> Option<f64> {
        let raw = match *self {
            Self::Interpolated => interpolated_offset(dof) + 0.001 * p_b.log10(),
            Self::Offset { offset } => offset + 0.001 * p_b.log10(),
            Self::Fixed { lower } => lower,
            Self::Disabled => return None,
        };
        Some(raw.clamp(CLAMP_FLOOR, 1.0 - 1e-12))
    }

    /// `σ_T / σ₀ = σ₀ / σ_t`.
    pub fn upper_ratio(&self, dof: u32, p_b: f64) -> Option<f64> {
        self.lower_ratio(dof, p_b).map(|t| 1.0 / t)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Fixed { lower } if !(lower > 0.0 && lower < 1.0) => Err(Error::Config(format!(
                "fixed clamp ratio {lower} must lie in (0, 1)"
            ))),
            Self::Offset { offset } if !(offset > 0.0 && offset <= 1.0) => Err(Error::Config(
                format!("clamp offset {offset} must lie in (0, 1]"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RadiusSearchConfig {
    pub num_steps: usize,
    /// Upper end of the grid as a multiple of the constant-σ₀ radius.
    pub max_radius_factor: f64,
    pub clamp: ClampFn,
    pub policy: NumericsPolicy,
}

impl Default for RadiusSearchConfig {
    fn default() -> Self {
        Self {
            num_steps: 2000,
            max_radius_factor: 1.0,
            clamp: ClampFn::Interpolated,
            policy: NumericsPolicy::strict(),
        }
    }
}

impl RadiusSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_steps == 0 {
            return Err(Error::Config("num_steps must be positive".into()));
        }
        if !(self.max_radius_factor > 0.0 && self.max_radius_factor.is_finite()) {
            return Err(Error::Config(format!(
                "max_radius_factor = {} must be positive",
                self.max_radius_factor
            )));
        }
        self.clamp.validate()
    }
}

/// Largest index `i ≤ last` with `certifiable(i)`, assuming the predicate is
/// true up to some frontier and false after it. Probes `0, 1, 4, 9, …` and
/// bisects the bracketing interval. `None` if index 0 already fails.
pub fn stride_search(last: usize, mut certifiable: impl FnMut(usize) -> bool) -> Option<usize> {
    if !certifiable(0) {
        return None;
    }
    let mut good = 0usize;
    let mut j = 1usize;
    let bad = loop {
        let i = (j * j).min(last);
        if i == good {
            return Some(good);
        }
        if !certifiable(i) {
            break i;
        }
        good = i;
        if i == last {
            return Some(last);
        }
        j += 1;
    };
    let (mut lo, mut hi) = (good, bad);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if certifiable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// The result of one radius computation.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusOutcome {
    pub radius: f64,
    pub diagnostics: Diagnostics,
}

/// Problem data for the grid evaluator.
struct Evaluator<'a> {
    sigma0: f64,
    rate: f64,
    dof: u32,
    p_a: f64,
    p_b: f64,
    search: &'a RadiusSearchConfig,
    diag: Diagnostics,
}

/// Roundoff allowance below the decision boundary. At the constant-σ radius
/// the worst case sits on 1/2 to within about 1e-11.
pub const CERT_MARGIN: f64 = 1e-9;

impl Evaluator<'_> {
    fn xi_at(&mut self, log_ratio: f64, distance: f64, p_b: f64) -> Result<Option<XiEvaluation>> {
        let pair = AdversaryPair::from_log_ratio(
            self.sigma0,
            log_ratio,
            distance,
            self.dof,
            self.p_a,
            p_b,
        )?;
        self.diag.evaluations += 1;
        match xi_with(&pair, &self.search.policy) {
            Ok(v) if v.value.is_finite() => {
                if v.underflow {
                    self.diag.underflows += 1;
                }
                if v.path == EvalPath::NormalApproximation {
                    self.diag.unstable_points += 1;
                    return Ok(None);
                }
                Ok(Some(v))
            }
            Ok(_) => Ok(None),
            Err(e) if e.is_numerical() => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Worst-case `P₁(B)` plus worst-case `1 - P₁(A)` at the given σ₁ ratio.
    /// In complement mode the two terms coincide and the test is `ξ < 1/2`.
    /// Sums within [`CERT_MARGIN`] of 1 count as failures.
    fn fails_at(&mut self, log_ratio: f64, distance: f64) -> Result<bool> {
        let complement = 1.0 - self.p_a;
        let b = match self.xi_at(log_ratio, distance, self.p_b)? {
            Some(v) => v.value,
            None => return Ok(true),
        };
        let a = if (self.p_b - complement).abs() <= 1e-15 * complement.max(1e-300) {
            b
        } else {
            match self.xi_at(log_ratio, distance, complement)? {
                Some(v) => v.value,
                None => return Ok(true),
            }
        };
        Ok(a + b >= 1.0 - CERT_MARGIN)
    }

    fn certifiable(&mut self, distance: f64) -> Result<bool> {
        let env = self.rate * distance;
        let (lower, upper) = match (
            self.search.clamp.lower_ratio(self.dof, self.p_b),
            self.search.clamp.upper_ratio(self.dof, self.p_b),
        ) {
            (Some(t), Some(big_t)) => {
                let lt = t.ln();
                let lower = if lt < -env {
                    self.diag.lower_clamp_hits += 1;
                    lt
                } else {
                    -env
                };
                let ut = big_t.ln();
                let upper = if ut > env {
                    self.diag.upper_clamp_hits += 1;
                    ut
                } else {
                    env
                };
                (lower, upper)
            }
            _ => (-env, env),
        };
        if lower == 0.0 || upper == 0.0 {
            // no spread at all: the half-space case
            return Ok(!self.fails_at(0.0, distance)?);
        }
        if self.fails_at(lower, distance)? {
            return Ok(false);
        }
        Ok(!self.fails_at(upper, distance)?)
    }
}

/// Largest grid radius whose both envelope extremes keep the worst-case
/// runner-up below the top class.
///
/// The grid is `num_steps + 1` equally spaced points on
/// `[0, max_radius_factor · cohen_radius]`. `rate = 0` short-circuits to the
/// constant-σ radius. Grid points whose evaluation leaves the exact series
/// path or fails numerically count as not certified.
pub fn idrs_certified_radius(
    sigma0: f64,
    rate: f64,
    dof: u32,
    p_a_lower: f64,
    p_b_upper: f64,
    search: &RadiusSearchConfig,
) -> Result<RadiusOutcome> {
    search.validate()?;
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::domain(
            "idrs_certified_radius",
            format!("sigma0 = {sigma0}"),
        ));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::domain(
            "idrs_certified_radius",
            format!("rate = {rate}"),
        ));
    }
    if dof == 0 {
        return Err(Error::domain(
            "idrs_certified_radius",
            "dof must be positive",
        ));
    }
    if !(p_a_lower > 0.0 && p_a_lower < 1.0 && p_b_upper > 0.0 && p_b_upper < 1.0) {
        return Err(Error::domain(
            "idrs_certified_radius",
            format!("pA = {p_a_lower}, pB = {p_b_upper}"),
        ));
    }
    let mut diag = Diagnostics {
        grid_steps: search.num_steps,
        ..Diagnostics::default()
    };
    let cohen = cohen_radius(p_a_lower, p_b_upper, sigma0)?;
    if p_a_lower <= p_b_upper || cohen == 0.0 {
        return Ok(RadiusOutcome {
            radius: 0.0,
            diagnostics: diag,
        });
    }
    if rate == 0.0 {
        diag.notes.push("rate 0: constant-sigma radius".into());
        return Ok(RadiusOutcome {
            radius: cohen,
            diagnostics: diag,
        });
    }
    let top = search.max_radius_factor * cohen;
    let n = search.num_steps as f64;
    // the last grid point is exactly `top`
    let grid = |i: usize| top * (i as f64 / n);
    let mut ev = Evaluator {
        sigma0,
        rate,
        dof,
        p_a: p_a_lower,
        p_b: p_b_upper,
        search,
        diag,
    };
    let mut failure = None;
    let found = stride_search(search.num_steps, |i| {
        if failure.is_some() {
            return false;
        }
        match ev.certifiable(grid(i)) {
            Ok(ok) => ok,
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let mut diag = ev.diag;
    let radius = match found {
        Some(i) => grid(i),
        None => {
            diag.notes.push("not certifiable at distance 0".into());
            0.0
        }
    };
    Ok(RadiusOutcome {
        radius,
        diagnostics: diag,
    })
}

/// Full pipeline: `σ₀ = σ(x₀)`, estimate `p_A`, then the radius for the
/// field's rate.
pub fn certify_point<F: BaseClassifier + ?Sized>(
    f: &F,
    field: &SigmaField,
    x0: &[f64],
    cfg: &SmoothingConfig,
    search: &RadiusSearchConfig,
) -> Result<CertificationResult> {
    let sigma0 = field.sigma_at(x0)?;
    let est = estimate_pa(f, sigma0, x0, cfg)?;
    let (predicted, radius, diagnostics) = if est.certifiable(cfg.pb_mode) {
        let out = idrs_certified_radius(
            sigma0,
            field.rate(),
            x0.len() as u32,
            est.p_a_lower,
            est.p_b_upper,
            search,
        )?;
        (Some(est.top_class), out.radius, out.diagnostics)
    } else {
        (None, 0.0, Diagnostics::default())
    };
    Ok(CertificationResult {
        predicted,
        p_a_lower: est.p_a_lower,
        p_b_upper: est.p_b_upper,
        sigma0,
        radius,
        method: Method::Idrs,
        diagnostics,
    })
}

/// Outcome of scanning ξ at the clamp ratios over a range of distances.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct StabilityReport {
    pub dof: u32,
    pub p_a: f64,
    pub lower_ratio: f64,
    pub points: usize,
    pub non_finite: usize,
    pub non_monotone: usize,
    pub off_series: usize,
}

impl StabilityReport {
    pub fn is_clean(&self) -> bool {
        self.non_finite == 0 && self.non_monotone == 0 && self.off_series == 0
    }
}

/// Evaluates `ξ_>` and `ξ_<` at the clamp ratios for `points` distances up to
/// `max_distance` and flags NaNs, decreases, and approximation fallbacks.
pub fn stability_scan(
    dof: u32,
    p_a: f64,
    clamp: &ClampFn,
    sigma0: f64,
    max_distance: f64,
    points: usize,
) -> Result<StabilityReport> {
    let p_b = 1.0 - p_a;
    let t = clamp
        .lower_ratio(dof, p_b)
        .ok_or_else(|| Error::Config("stability scan needs an active clamp".into()))?;
    let policy = NumericsPolicy::default();
    let mut report = StabilityReport {
        dof,
        p_a,
        lower_ratio: t,
        points,
        ..StabilityReport::default()
    };
    for lr in [t.ln(), -t.ln()] {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..points {
            let d = max_distance * i as f64 / (points.max(2) - 1) as f64;
            let pair = AdversaryPair::from_log_ratio(sigma0, lr, d, dof, p_a, p_b)?;
            match xi_with(&pair, &policy) {
                Ok(v) if v.value.is_finite() => {
                    if v.path == EvalPath::NormalApproximation {
                        report.off_series += 1;
                    }
                    if v.value < prev - 1e-9 {
                        report.non_monotone += 1;
                    }
                    prev = prev.max(v.value);
                }
                _ => report.non_finite += 1,
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{normal_cdf, normal_quantile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stride_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let last = rng.random_range(0..3000usize);
            let frontier: i64 = rng.random_range(-1..=last as i64);
            let mut calls = 0;
            let got = stride_search(last, |i| {
                calls += 1;
                (i as i64) <= frontier
            });
            let want = (0..=last).rev().find(|&i| (i as i64) <= frontier);
            assert_eq!(got, want, "last {last} frontier {frontier}");
            let bound = ((last as f64).sqrt() + (last as f64 + 1.0).log2() + 3.0) as usize;
            assert!(calls <= bound, "{calls} > {bound}");
        }
    }

    #[test]
    fn stride_edges() {
        assert_eq!(stride_search(100, |i| i == 0), Some(0));
        assert_eq!(stride_search(100, |_| true), Some(100));
        assert_eq!(stride_search(100, |_| false), None);
        assert_eq!(stride_search(0, |_| true), Some(0));
    }

    #[test]
    fn clamp_values() {
        let c = ClampFn::Interpolated;
        assert!((c.lower_ratio(3072, 1e-3).unwrap() - 0.9963).abs() < 1e-12);
        assert!((c.lower_ratio(784, 1e-2).unwrap() - 0.9968).abs() < 1e-12);
        assert!((c.lower_ratio(2, 1e-2).unwrap() - 0.9968).abs() < 1e-12);
        let mid = interpolated_offset(1550);
        assert!(mid > 0.9988 && mid < 0.9993);
        let t = c.lower_ratio(100, 0.01).unwrap();
        assert!((c.upper_ratio(100, 0.01).unwrap() * t - 1.0).abs() < 1e-15);
        assert_eq!(ClampFn::Disabled.lower_ratio(3, 0.1), None);
    }

    #[test]
    fn rate_zero_is_cohen() {
        let s = RadiusSearchConfig::default();
        let out = idrs_certified_radius(0.5, 0.0, 3072, 0.999, 0.001, &s).unwrap();
        assert_eq!(out.radius, cohen_radius(0.999, 0.001, 0.5).unwrap());
    }

    #[test]
    fn example_at_dim_3072() {
        let s = RadiusSearchConfig::default();
        let out = idrs_certified_radius(0.5, 0.01, 3072, 0.999, 0.001, &s).unwrap();
        let cohen = 0.25 * (normal_quantile(0.999).unwrap() - normal_quantile(0.001).unwrap());
        assert!((cohen - 1.545).abs() < 1e-3);
        assert!(out.radius > 0.0 && out.radius < cohen, "{}", out.radius);
    }

    #[test]
    fn below_half_is_zero() {
        let s = RadiusSearchConfig::default();
        let out = idrs_certified_radius(1.0, 0.1, 2, 0.4, 0.6, &s).unwrap();
        assert_eq!(out.radius, 0.0);
    }

    #[test]
    fn hopeless_rate_is_zero() {
        let s = RadiusSearchConfig {
            clamp: ClampFn::Disabled,
            ..RadiusSearchConfig::default()
        };
        let q = crate::dimension::ThresholdQuery::new(3072, 0.9).unwrap();
        let t = crate::dimension::theoretical_threshold(&q).unwrap();
        // first nonzero grid point already sits below the hopeless ratio
        let step = cohen_radius(0.9, 0.1, 1.0).unwrap() / s.num_steps as f64;
        let rate = -t.ln() / step * 1.01;
        let out = idrs_certified_radius(1.0, rate, 3072, 0.9, 0.1, &s).unwrap();
        assert_eq!(out.radius, 0.0);
    }

    #[test]
    fn dominance_and_rate_monotonicity() {
        let s = RadiusSearchConfig {
            num_steps: 400,
            ..RadiusSearchConfig::default()
        };
        for &(n, p) in &[(2u32, 0.9), (10, 0.99), (100, 0.999)] {
            let cohen = cohen_radius(p, 1.0 - p, 1.0).unwrap();
            let mut prev = f64::INFINITY;
            for &r in &[0.0, 0.001, 0.01, 0.05, 0.1, 0.3] {
                let out = idrs_certified_radius(1.0, r, n, p, 1.0 - p, &s).unwrap();
                assert!(out.radius <= cohen);
                assert!(out.radius <= prev, "N {n} p {p} r {r}");
                prev = out.radius;
            }
        }
    }

    #[test]
    fn clamp_never_helps() {
        for &r in &[0.05, 0.2, 1.0] {
            let on = idrs_certified_radius(1.0, r, 5, 0.99, 0.01, &RadiusSearchConfig::default())
                .unwrap()
                .radius;
            let off = idrs_certified_radius(
                1.0,
                r,
                5,
                0.99,
                0.01,
                &RadiusSearchConfig {
                    clamp: ClampFn::Disabled,
                    ..RadiusSearchConfig::default()
                },
            )
            .unwrap()
            .radius;
            assert!(on <= off, "r {r}: {on} > {off}");
        }
    }

    #[test]
    fn grid_refinement() {
        let coarse = RadiusSearchConfig {
            num_steps: 200,
            ..RadiusSearchConfig::default()
        };
        let fine = RadiusSearchConfig {
            num_steps: 400,
            ..coarse
        };
        let cohen = cohen_radius(0.99, 0.01, 1.0).unwrap();
        let a = idrs_certified_radius(1.0, 0.1, 3, 0.99, 0.01, &coarse)
            .unwrap()
            .radius;
        let b = idrs_certified_radius(1.0, 0.1, 3, 0.99, 0.01, &fine)
            .unwrap()
            .radius;
        assert!((a - b).abs() <= cohen / 200.0 + 1e-12, "{a} {b}");
    }

    #[test]
    fn separate_pb_matches_cohen_for_constant_sigma() {
        // the certification test reduces to the constant-σ radius as rate → 0
        let s = RadiusSearchConfig {
            clamp: ClampFn::Disabled,
            num_steps: 4000,
            ..RadiusSearchConfig::default()
        };
        let (pa, pb) = (0.7, 0.1);
        let cohen = cohen_radius(pa, pb, 1.0).unwrap();
        let out = idrs_certified_radius(1.0, 1e-3, 2, pa, pb, &s).unwrap();
        assert!(
            out.radius < cohen && out.radius > 0.97 * cohen,
            "{} {cohen}",
            out.radius
        );
        // half-space identity for the combined test
        let a = cohen - 1e-9;
        let lhs = normal_cdf(normal_quantile(pb).unwrap() + a)
            + normal_cdf(normal_quantile(1.0 - pa).unwrap() + a);
        assert!(lhs < 1.0);
    }

    #[test]
    fn scan_is_clean_at_dim_3072() {
        let rep = stability_scan(3072, 0.99, &ClampFn::Interpolated, 0.5, 1.5, 60).unwrap();
        assert!(rep.is_clean(), "{rep:?}");
    }
}
