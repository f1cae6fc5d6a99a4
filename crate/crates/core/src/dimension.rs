//! Curse-of-dimensionality bounds on the ratio `t = σ₁/σ₀`.
//!
//! For `σ₀ > σ₁` an adversary with ratio `t` is uncertifiable at every
//! distance once `ln t² + 1 - t² < 2 ln(1 - p_A) / N`. The threshold solving
//! this with equality, and the exact point where `ξ_>(0)` crosses one half,
//! both tend to 1 as `N` grows.

use crate::error::{Error, Result};
use crate::special::NcChiSq;

const T_LO: f64 = 1e-6;
const T_HI: f64 = 1.0 - 1e-9;
const T_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdQuery {
    pub dof: u32,
    pub p_a: f64,
}

impl ThresholdQuery {
    pub fn new(dof: u32, p_a: f64) -> Result<Self> {
        if dof == 0 {
            return Err(Error::domain("ThresholdQuery", "dof must be positive"));
        }
        if !(p_a > 0.5 && p_a < 1.0) {
            return Err(Error::domain(
                "ThresholdQuery",
                format!("pA = {p_a} is not in (0.5, 1)"),
            ));
        }
        Ok(Self { dof, p_a })
    }

    /// `2 ln(1 - p_A) / N`, the right-hand side of both conditions.
    fn budget(&self) -> f64 {
        2.0 * (-self.p_a).ln_1p() / self.dof as f64
    }
}

/// `ln u + 1 - u` evaluated without cancellation near `u = 1`.
fn log_gap(u: f64) -> f64 {
    let d = u - 1.0;
    d.ln_1p() - d
}

/// True when every adversary with `σ₁/σ₀ = ratio < 1` is uncertifiable.
pub fn is_hopeless_greater(ratio: f64, query: &ThresholdQuery) -> bool {
    log_gap(ratio * ratio) < query.budget()
}

/// True when every adversary with `σ₁/σ₀ = ratio > 1` is uncertifiable.
pub fn is_hopeless_less(ratio: f64, query: &ThresholdQuery) -> bool {
    let n = query.dof as f64;
    log_gap(ratio * ratio * (n - 1.0) / n) < query.budget()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CorollaryBound {
    /// Ratios below this value are hopeless.
    Ratio(f64),
    /// `4 · (-ln(1 - p_A)) ≥ N`: the bound gives no information, every
    /// ratio below one is in the hopeless regime of the simpler bound.
    AlwaysHopeless,
}

impl CorollaryBound {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            CorollaryBound::Ratio(r) => Some(*r),
            CorollaryBound::AlwaysHopeless => None,
        }
    }
}

/// `√(1 - 2√(-ln(1 - p_A)/N))`.
pub fn corollary_bound(query: &ThresholdQuery) -> CorollaryBound {
    let l = -(-query.p_a).ln_1p();
    let n = query.dof as f64;
    if 4.0 * l >= n {
        return CorollaryBound::AlwaysHopeless;
    }
    CorollaryBound::Ratio((1.0 - 2.0 * (l / n).sqrt()).sqrt())
}

/// Bisection for the crossing of a monotone predicate: `below(lo)` must hold
/// and `below(hi)` must fail.
fn bisect(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut below: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest `t < 1` satisfying the `σ₀ > σ₁` condition with equality.
pub fn theoretical_threshold(query: &ThresholdQuery) -> Result<f64> {
    let below = |t: f64| is_hopeless_greater(t, query);
    if !below(T_LO) || below(T_HI) {
        return Err(Error::NotBracketed {
            func: "theoretical_threshold",
            f_lo: log_gap(T_LO * T_LO) - query.budget(),
            f_hi: log_gap(T_HI * T_HI) - query.budget(),
        });
    }
    bisect(T_LO, T_HI, T_TOL, |t| Ok(below(t)))
}

/// Smallest `t > 1` from which the `σ₀ < σ₁` condition holds.
pub fn theoretical_threshold_less(query: &ThresholdQuery) -> Result<f64> {
    if query.dof < 2 {
        return Err(Error::domain("theoretical_threshold_less", "needs N >= 2"));
    }
    let feasible = |t: f64| !is_hopeless_less(t, query);
    let mut hi = 2.0;
    while feasible(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NotBracketed {
                func: "theoretical_threshold_less",
                f_lo: 1.0,
                f_hi: hi,
            });
        }
    }
    bisect(1.0, hi, T_TOL, |t| Ok(feasible(t)))
}

/// `ξ_>(0)` at ratio `t` with `p_B = 1 - p_A`: `χ²_N(χ²_{N,qf}(p_B) / t²)`.
pub fn xi_greater_at_zero(t: f64, query: &ThresholdQuery) -> Result<f64> {
    let chi = NcChiSq::central(query.dof)?;
    let q = chi.quantile(1.0 - query.p_a)?;
    chi.cdf(q / (t * t))
}

/// `ξ_<(0)` at ratio `t > 1`: `1 - χ²_N(χ²_{N,qf}(p_A) / t²)`.
pub fn xi_less_at_zero(t: f64, query: &ThresholdQuery) -> Result<f64> {
    let chi = NcChiSq::central(query.dof)?;
    let q = chi.upper_quantile(1.0 - query.p_a)?;
    chi.sf(q / (t * t))
}

/// The ratio `t < 1` at which `ξ_>(0)` equals one half.
pub fn practical_threshold(query: &ThresholdQuery) -> Result<f64> {
    let chi = NcChiSq::central(query.dof)?;
    let q = chi.quantile(1.0 - query.p_a)?;
    let f = |t: f64| -> Result<f64> { Ok(chi.cdf(q / (t * t))? - 0.5) };
    let (f_lo, f_hi) = (f(T_LO)?, f(T_HI)?);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::NotBracketed {
            func: "practical_threshold",
            f_lo,
            f_hi,
        });
    }
    bisect(T_LO, T_HI, T_TOL, |t| Ok(f(t)? > 0.0))
}

/// The ratio `t > 1` at which `ξ_<(0)` equals one half.
pub fn practical_threshold_less(query: &ThresholdQuery) -> Result<f64> {
    let chi = NcChiSq::central(query.dof)?;
    let q = chi.upper_quantile(1.0 - query.p_a)?;
    let f = |t: f64| -> Result<f64> { Ok(chi.sf(q / (t * t))? - 0.5) };
    let mut hi = 2.0;
    while f(hi)? < 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NotBracketed {
                func: "practical_threshold_less",
                f_lo: f(1.0)?,
                f_hi: f(hi)?,
            });
        }
    }
    bisect(1.0, hi, T_TOL, |t| Ok(f(t)? < 0.0))
}

/// Asymptotic bound on `|σ(x₀)/σ(x₁) - 1|` for two typical samples, when the
/// target certified radius is `c√N` and sample distances are `spread · √N`:
/// `spread · √(-ln p_B) / (c √N)`.
pub fn max_ratio_variation_scaling(
    dims: &[u32],
    p_b: f64,
    c: f64,
    spread: f64,
) -> Result<Vec<f64>> {
    if dims.is_empty() {
        return Err(Error::domain(
            "max_ratio_variation_scaling",
            "no dimensions given",
        ));
    }
    if !(p_b > 0.0 && p_b <= 1.0) || !(c > 0.0) || !(spread > 0.0) {
        return Err(Error::domain(
            "max_ratio_variation_scaling",
            format!("pB = {p_b}, c = {c}, spread = {spread}"),
        ));
    }
    let k = spread * (-p_b.ln()).sqrt() / c;
    dims.iter()
        .map(|&n| {
            if n == 0 {
                Err(Error::domain("max_ratio_variation_scaling", "dimension 0"))
            } else {
                Ok(k / (n as f64).sqrt())
            }
        })
        .collect()
}
