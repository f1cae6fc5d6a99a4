//! Noncentral chi-squared distribution.
//!
//! The CDF is evaluated as a Poisson mixture of central chi-squared
//! distribution functions,
//!
//! ```text
//! F(x; N, λ) = Σ_k  Pois(k; λ/2) · P(N/2 + k, x/2)
//! ```
//!
//! where `P` is the regularized lower incomplete gamma function. Summation
//! starts at the modal Poisson index and walks outward in both directions,
//! using the recurrences `P(a+1, y) = P(a, y) - g(a, y)` and
//! `Q(a+1, y) = Q(a, y) + g(a, y)` with `g(a, y) = yᵃ e⁻ʸ / Γ(a+1)`, so only one
//! incomplete gamma evaluation is needed per call. The lower and upper tails
//! are summed separately, each in the direction where its recurrence only adds
//! terms, which keeps both tails accurate in relative terms.
//!
//! The central distribution is the `λ = 0` case of the same code path.

use crate::error::{Error, Result};
use crate::special::gamma::{ln_gamma_term, regularized_gamma};
use crate::special::normal::normal_cdf;

/// Relative truncation tolerance of the Poisson mixture.
pub const SERIES_TOLERANCE: f64 = 1e-12;
/// Default ceiling on `λ + N` above which the series is not used.
pub const DEFAULT_STABILITY_CEILING: f64 = 1e8;
const MAX_SERIES_TERMS: usize = 20_000_000;

/// Which evaluation route produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPath {
    PoissonSeries,
    /// Sankaran's cube-root normal approximation, used past the stability ceiling.
    NormalApproximation,
}

/// What to do when `λ + N` exceeds the stability ceiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeyondCeiling {
    Approximate,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NumericsPolicy {
    pub stability_ceiling: f64,
    pub beyond_ceiling: BeyondCeiling,
}

impl Default for NumericsPolicy {
    fn default() -> Self {
        Self {
            stability_ceiling: DEFAULT_STABILITY_CEILING,
            beyond_ceiling: BeyondCeiling::Approximate,
        }
    }
}

impl NumericsPolicy {
    /// Refuses to leave the series path.
    pub fn strict() -> Self {
        Self {
            beyond_ceiling: BeyondCeiling::Fail,
            ..Self::default()
        }
    }
}

/// A probability together with the route that produced it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub path: EvalPath,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tail {
    Lower,
    Upper,
}

/// Noncentral chi-squared distribution with `dof` degrees of freedom and
/// noncentrality `λ` (the squared norm of the mean offset).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NcChiSq {
    dof: u32,
    noncentrality: f64,
}

impl NcChiSq {
    pub fn new(dof: u32, noncentrality: f64) -> Result<Self> {
        if dof == 0 {
            return Err(Error::domain("NcChiSq::new", "dof must be at least 1"));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(Error::domain(
                "NcChiSq::new",
                format!("noncentrality {noncentrality} must be finite and non-negative"),
            ));
        }
        Ok(Self { dof, noncentrality })
    }

    pub fn central(dof: u32) -> Result<Self> {
        Self::new(dof, 0.0)
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        self.dof as f64 + self.noncentrality
    }

    pub fn variance(&self) -> f64 {
        2.0 * (self.dof as f64 + 2.0 * self.noncentrality)
    }

    fn beyond_ceiling(&self, policy: &NumericsPolicy) -> bool {
        self.dof as f64 + self.noncentrality > policy.stability_ceiling
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.cdf_with(x, &NumericsPolicy::default())?.value)
    }

    /// Survival function `1 - F(x)`, summed directly so that it keeps relative
    /// precision when close to zero.
    pub fn sf(&self, x: f64) -> Result<f64> {
        Ok(self.sf_with(x, &NumericsPolicy::default())?.value)
    }

    pub fn cdf_with(&self, x: f64, policy: &NumericsPolicy) -> Result<Evaluation> {
        self.tail_with(x, Tail::Lower, policy)
            .map(|(value, _, path)| Evaluation { value, path })
    }

    pub fn sf_with(&self, x: f64, policy: &NumericsPolicy) -> Result<Evaluation> {
        self.tail_with(x, Tail::Upper, policy)
            .map(|(value, _, path)| Evaluation { value, path })
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self
            .tail_with(x, Tail::Lower, &NumericsPolicy::default())?
            .1)
    }

    /// Inverse of the CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.quantile_with(p, &NumericsPolicy::default())?.value)
    }

    /// Inverse of the survival function: the `x` with `1 - F(x) = q`.
    pub fn upper_quantile(&self, q: f64) -> Result<f64> {
        Ok(self
            .upper_quantile_with(q, &NumericsPolicy::default())?
            .value)
    }

    pub fn quantile_with(&self, p: f64, policy: &NumericsPolicy) -> Result<Evaluation> {
        check_open_unit("ncchsq_quantile", p)?;
        if p <= 0.5 {
            self.invert(p, Tail::Lower, policy)
        } else {
            self.invert(1.0 - p, Tail::Upper, policy)
        }
    }

    pub fn upper_quantile_with(&self, q: f64, policy: &NumericsPolicy) -> Result<Evaluation> {
        check_open_unit("ncchsq_upper_quantile", q)?;
        if q <= 0.5 {
            self.invert(q, Tail::Upper, policy)
        } else {
            self.invert(1.0 - q, Tail::Lower, policy)
        }
    }

    /// Returns `(tail probability, density, path)`.
    fn tail_with(
        &self,
        x: f64,
        tail: Tail,
        policy: &NumericsPolicy,
    ) -> Result<(f64, f64, EvalPath)> {
        if x.is_nan() {
            return Err(Error::domain("ncchsq_cdf", "argument is NaN"));
        }
        if x <= 0.0 {
            let v = match tail {
                Tail::Lower => 0.0,
                Tail::Upper => 1.0,
            };
            return Ok((v, 0.0, EvalPath::PoissonSeries));
        }
        if x == f64::INFINITY {
            let v = match tail {
                Tail::Lower => 1.0,
                Tail::Upper => 0.0,
            };
            return Ok((v, 0.0, EvalPath::PoissonSeries));
        }
        if self.beyond_ceiling(policy) {
            return match policy.beyond_ceiling {
                BeyondCeiling::Fail => Err(Error::unstable(
                    "ncchsq_cdf",
                    format!(
                        "dof + noncentrality = {} exceeds the stability ceiling {}",
                        self.dof as f64 + self.noncentrality,
                        policy.stability_ceiling
                    ),
                )),
                BeyondCeiling::Approximate => {
                    let (lower, dens) = self.sankaran(x);
                    let v = match tail {
                        Tail::Lower => lower,
                        Tail::Upper => 1.0 - lower,
                    };
                    Ok((v, dens, EvalPath::NormalApproximation))
                }
            };
        }
        let (v, d) = self.series(x, tail)?;
        Ok((v, d, EvalPath::PoissonSeries))
    }

    fn series(&self, x: f64, tail: Tail) -> Result<(f64, f64)> {
        let y = 0.5 * x;
        let a0 = 0.5 * self.dof as f64;
        let mu = 0.5 * self.noncentrality;
        let k0 = mu.floor();

        let w0 = if mu == 0.0 {
            1.0
        } else {
            ln_gamma_term(k0, mu).exp()
        };
        let a_mode = a0 + k0;
        let (p0, q0) = regularized_gamma(a_mode, y).ok_or_else(|| {
            Error::unstable(
                "ncchsq_cdf",
                format!("incomplete gamma failed at a = {a_mode}, y = {y}"),
            )
        })?;
        let t0 = match tail {
            Tail::Lower => p0,
            Tail::Upper => q0,
        };
        // g(a, y) = P(a, y) - P(a + 1, y)
        let g0 = ln_gamma_term(a_mode, y).exp();

        let mut sum = w0 * t0;
        // central density with N + 2k degrees of freedom equals g(a0 + k - 1, y) / 2
        let mut dens = w0 * g0 * a_mode / (2.0 * y);
        let mut terms = 1usize;

        // forward: k = k0 + 1, k0 + 2, ...
        if mu > 0.0 {
            let (mut w, mut t, mut g, mut k) = (w0, t0, g0, k0);
            loop {
                t = match tail {
                    Tail::Lower => (t - g).max(0.0),
                    Tail::Upper => (t + g).min(1.0),
                };
                k += 1.0;
                w *= mu / k;
                g *= y / (a0 + k);
                sum += w * t;
                dens += w * g * (a0 + k) / (2.0 * y);
                terms += 1;
                if w == 0.0 {
                    break;
                }
                let ratio = mu / (k + 1.0);
                if ratio < 1.0 {
                    let weight_tail = w * ratio / (1.0 - ratio);
                    let bound = match tail {
                        Tail::Lower => t * weight_tail,
                        Tail::Upper => weight_tail,
                    };
                    if bound <= 0.5 * SERIES_TOLERANCE * sum || bound < f64::MIN_POSITIVE {
                        break;
                    }
                }
                if terms > MAX_SERIES_TERMS {
                    return Err(Error::unstable(
                        "ncchsq_cdf",
                        "Poisson series did not converge",
                    ));
                }
            }
        }

        // backward: k = k0 - 1, ..., 0
        {
            let (mut w, mut t, mut g, mut k) = (w0, t0, g0, k0);
            while k >= 1.0 {
                // g(a0 + k - 1) from g(a0 + k)
                g *= (a0 + k) / y;
                t = match tail {
                    Tail::Lower => (t + g).min(1.0),
                    Tail::Upper => (t - g).max(0.0),
                };
                w *= k / mu;
                k -= 1.0;
                sum += w * t;
                dens += w * g * (a0 + k) / (2.0 * y);
                terms += 1;
                if w == 0.0 || !g.is_finite() {
                    break;
                }
                let ratio = k / mu;
                if ratio < 1.0 {
                    let weight_tail = w * ratio / (1.0 - ratio);
                    let bound = match tail {
                        Tail::Lower => weight_tail,
                        Tail::Upper => t * weight_tail,
                    };
                    if bound <= 0.5 * SERIES_TOLERANCE * sum || bound < f64::MIN_POSITIVE {
                        break;
                    }
                }
                if terms > MAX_SERIES_TERMS {
                    return Err(Error::unstable(
                        "ncchsq_cdf",
                        "Poisson series did not converge",
                    ));
                }
            }
        }

        if !sum.is_finite() {
            return Err(Error::unstable(
                "ncchsq_cdf",
                format!("non-finite sum at x = {x}"),
            ));
        }
        Ok((sum.clamp(0.0, 1.0), dens.max(0.0)))
    }

    /// Sankaran (1963) approximation; returns `(cdf, density)`.
    fn sankaran(&self, x: f64) -> (f64, f64) {
        let n = self.dof as f64;
        let l = self.noncentrality;
        let s1 = n + l;
        let s2 = n + 2.0 * l;
        let s3 = n + 3.0 * l;
        let h = 1.0 - 2.0 / 3.0 * s1 * s3 / (s2 * s2);
        let p = s2 / (s1 * s1);
        let m = (h - 1.0) * (1.0 - 3.0 * h);
        let centre = 1.0 + h * p * (h - 1.0 - 0.5 * (2.0 - h) * m * p);
        let scale = h * (2.0 * p).sqrt() * (1.0 + 0.5 * m * p);
        let u = (x / s1).powf(h);
        let z = (u - centre) / scale;
        let dz_dx = h * u / (x * scale);
        (normal_cdf(z), crate::special::normal::normal_pdf(z) * dz_dx)
    }

    fn invert(&self, target: f64, tail: Tail, policy: &NumericsPolicy) -> Result<Evaluation> {
        // g(x) is increasing for the lower tail, decreasing for the upper tail
        let eval = |x: f64| -> Result<(f64, f64, EvalPath)> { self.tail_with(x, tail, policy) };
        let below = |v: f64| match tail {
            Tail::Lower => v < target,
            Tail::Upper => v > target,
        };

        let mean = self.mean();
        let sd = self.variance().sqrt();
        let mut k = 4.0;
        let mut lo = (mean - k * sd).max(0.0);
        while lo > 0.0 && !below(eval(lo)?.0) {
            k *= 2.0;
            lo = (mean - k * sd).max(0.0);
        }
        k = 4.0;
        let mut hi = mean + k * sd;
        while below(eval(hi)?.0) {
            k *= 2.0;
            hi = mean + k * sd;
            if !hi.is_finite() || k > 1e12 {
                return Err(Error::unstable(
                    "ncchsq_quantile",
                    "could not bracket the quantile",
                ));
            }
        }

        let mut path = EvalPath::PoissonSeries;
        for _ in 0..400 {
            if hi - lo <= 1e-10 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let (v, _, p) = eval(mid)?;
            path = p;
            if below(v) {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        let mid = 0.5 * (lo + hi);
        let (v, d, p) = eval(mid)?;
        path = worse(path, p);
        let mut best = mid;
        if d > 0.0 {
            let resid = v - target;
            let step = match tail {
                Tail::Lower => resid / d,
                Tail::Upper => -resid / d,
            };
            let cand = mid - step;
            if cand.is_finite() && cand > 0.0 {
                let (vc, _, pc) = eval(cand)?;
                if (vc - target).abs() < resid.abs() {
                    best = cand;
                    path = worse(path, pc);
                }
            }
        }
        Ok(Evaluation { value: best, path })
    }

    /// Pushes a mixture that hit the ceiling back to the caller's attention.
    pub fn is_beyond_ceiling(&self, policy: &NumericsPolicy) -> bool {
        self.beyond_ceiling(policy)
    }
}

fn worse(a: EvalPath, b: EvalPath) -> EvalPath {
    if a == EvalPath::NormalApproximation || b == EvalPath::NormalApproximation {
        EvalPath::NormalApproximation
    } else {
        EvalPath::PoissonSeries
    }
}

fn check_open_unit(func: &'static str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(
            func,
            format!("probability {p} is not in (0, 1)"),
        ))
    }
}

/// CDF of the noncentral chi-squared distribution, `χ²_N(λ, x)`.
pub fn ncchsq_cdf(dist: &NcChiSq, x: f64) -> Result<f64> {
    dist.cdf(x)
}

/// Quantile function `χ²_{N,qf}(λ, p)`.
pub fn ncchsq_quantile(dist: &NcChiSq, p: f64) -> Result<f64> {
    dist.quantile(p)
}

/// Chernoff bound `(z e^{1-z})^{N/2}` on the central chi-squared distribution:
/// an upper bound on `F(zN)` for `z < 1` and on `1 - F(zN)` for `z > 1`.
pub fn chernoff_central_bound(dof: u32, z: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::domain(
            "chernoff_central_bound",
            "dof must be positive",
        ));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::domain(
            "chernoff_central_bound",
            format!("z = {z} must be positive"),
        ));
    }
    if z == 1.0 {
        return Err(Error::domain(
            "chernoff_central_bound",
            "z = 1 gives a trivial bound",
        ));
    }
    Ok((0.5 * dof as f64 * (z.ln() + 1.0 - z)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal::normal_cdf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn one_dof_central_matches_normal_interval() {
        let d = NcChiSq::central(1).unwrap();
        let oracle = 2.0 * normal_cdf(1.0) - 1.0;
        assert!((d.cdf(1.0).unwrap() - oracle).abs() < 1e-14);
        assert!((d.cdf(1.0).unwrap() - 0.682689).abs() < 1e-6);
    }

    #[test]
    fn cdf_limits() {
        for n in [1, 7, 300] {
            let d = NcChiSq::new(n, 3.0).unwrap();
            assert_eq!(d.cdf(0.0).unwrap(), 0.0);
            assert_eq!(d.cdf(f64::INFINITY).unwrap(), 1.0);
            assert!((d.cdf(1e7).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dof_central_is_exponential() {
        let d = NcChiSq::central(2).unwrap();
        for &x in &[0.01, 0.5, 2.0, 9.0, 40.0] {
            let exact = -(-x / 2.0f64).exp_m1();
            assert!(rel_close(d.cdf(x).unwrap(), exact, 1e-13), "x={x}");
            assert!(
                rel_close(d.sf(x).unwrap(), (-x / 2.0f64).exp(), 1e-12),
                "x={x}"
            );
        }
        let q = d.quantile(1.0 - (-1.0f64).exp()).unwrap();
        assert!((q - 2.0).abs() < 1e-8);
    }

    #[test]
    fn matches_monte_carlo() {
        // P(|Z + z|^2 <= 3) with |z|^2 = 2.5 in four dimensions.
        let d = NcChiSq::new(4, 2.5).unwrap();
        let exact = d.cdf(3.0).unwrap();
        let offset = 2.5f64.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 2_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let mut s = 0.0;
            for j in 0..4 {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = if j == 0 { z + offset } else { z };
                s += v * v;
            }
            if s <= 3.0 {
                hits += 1;
            }
        }
        let phat = hits as f64 / n as f64;
        let se = (phat * (1.0 - phat) / n as f64).sqrt();
        assert!(
            (phat - exact).abs() < 3.0 * se,
            "mc {phat} exact {exact} se {se}"
        );
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for &(n, l, x) in &[
            (1, 0.0, 0.3),
            (10, 5.0, 12.0),
            (3072, 0.0, 3000.0),
            (200, 40_000.0, 41_000.0),
            (3, 1e6, 1e6 + 500.0),
        ] {
            let d = NcChiSq::new(n, l).unwrap();
            let s = d.cdf(x).unwrap() + d.sf(x).unwrap();
            assert!((s - 1.0).abs() < 2e-12, "{n} {l} {x}: {s}");
        }
    }

    #[test]
    fn large_noncentrality_reference_values() {
        // arbitrary-precision Poisson sums
        let d = NcChiSq::new(200, 40_000.0).unwrap();
        assert!((d.cdf(41_000.0).unwrap() - 0.976_711_738_482_270_9).abs() < 2e-12);
        let d = NcChiSq::new(3, 1e6).unwrap();
        assert!((d.cdf(1e6 + 500.0).unwrap() - 0.598_307_574_140_321_2).abs() < 2e-12);
    }

    #[test]
    fn quantile_round_trip() {
        let d = NcChiSq::new(10, 5.0).unwrap();
        let q = d.quantile(0.9).unwrap();
        assert!((d.cdf(q).unwrap() - 0.9).abs() < 1e-8);
    }

    #[test]
    fn upper_quantile_small_tail() {
        let d = NcChiSq::new(50, 30.0).unwrap();
        let q = d.upper_quantile(1e-9).unwrap();
        assert!(rel_close(d.sf(q).unwrap(), 1e-9, 1e-6));
    }

    #[test]
    fn quantile_rejects_bad_probability() {
        let d = NcChiSq::central(3).unwrap();
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn noncentral_median_bounds() {
        for &(n, c) in &[(1u32, 0.5), (5, 3.0), (100, 20.0), (3072, 1.0)] {
            let med = NcChiSq::new(n, c).unwrap().quantile(0.5).unwrap();
            let central_med = NcChiSq::central(n).unwrap().quantile(0.5).unwrap();
            assert!(med >= n as f64 - 1.0 + c, "{n} {c}");
            assert!(med <= central_med + c + 1e-9, "{n} {c}");
        }
    }

    #[test]
    fn ceiling_policy() {
        let d = NcChiSq::new(10, 2e8).unwrap();
        let strict = d.cdf_with(2e8, &NumericsPolicy::strict());
        assert!(matches!(strict, Err(Error::UnstableRegime { .. })));
        let approx = d.cdf_with(2e8 + 10.0, &NumericsPolicy::default()).unwrap();
        assert_eq!(approx.path, EvalPath::NormalApproximation);
        assert!(approx.value > 0.4 && approx.value < 0.6);
    }

    #[test]
    fn sankaran_agrees_with_series_near_the_ceiling() {
        let d = NcChiSq::new(20, 1e6).unwrap();
        let tight = NumericsPolicy {
            stability_ceiling: 1e3,
            beyond_ceiling: BeyondCeiling::Approximate,
        };
        for dx in [-3000.0, 0.0, 2500.0] {
            let x = 1e6 + 20.0 + dx;
            let s = d.cdf(x).unwrap();
            let a = d.cdf_with(x, &tight).unwrap().value;
            assert!((s - a).abs() < 1e-4, "{x}: {s} vs {a}");
        }
    }

    #[test]
    fn chernoff_examples() {
        let b = chernoff_central_bound(100, 0.5).unwrap();
        assert!(rel_close(b, (0.5 * 0.5f64.exp()).powi(50), 1e-12));
        assert!(b > 6.3e-5 && b < 6.5e-5);
        assert!(NcChiSq::central(100).unwrap().cdf(50.0).unwrap() <= b);

        let b2 = chernoff_central_bound(2, 2.0).unwrap();
        assert!((b2 - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert!(NcChiSq::central(2).unwrap().sf(4.0).unwrap() <= b2);

        assert!(chernoff_central_bound(5, 1.0).is_err());
        let near = chernoff_central_bound(40, 1.0 - 1e-9).unwrap();
        assert!((near - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pdf_matches_finite_difference() {
        let d = NcChiSq::new(6, 7.5).unwrap();
        for &x in &[2.0, 10.0, 25.0] {
            let h = 1e-5;
            let fd = (d.cdf(x + h).unwrap() - d.cdf(x - h).unwrap()) / (2.0 * h);
            assert!(rel_close(d.pdf(x).unwrap(), fd, 1e-6));
        }
    }
}
