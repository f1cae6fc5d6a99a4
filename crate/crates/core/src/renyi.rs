//! Certified radius through Rényi divergences between isotropic Gaussians
//! with different variances.
//!
//! If `D_α(N(x₁, σ₁²I) ‖ N(x₀, σ₀²I))` stays below the budget
//! `-ln(1 - 2M₁(p_A, p_B) + 2M_{1-α}(p_A, p_B))` for some admissible `α`, the
//! two smoothed distributions share their top class. The divergence has a
//! distance-free part that grows linearly in `N`, which is why this route
//! collapses in high dimension.

use crate::error::{Error, Result};

/// Divergences at `|α - 1|` below this are not evaluated.
pub const ALPHA_ONE_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AlphaGrid {
    pub points: usize,
    pub min_alpha: f64,
    pub max_alpha: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            points: 512,
            min_alpha: 1e-3,
            max_alpha: 1e3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RenyiQuery {
    pub sigma0: f64,
    pub sigma1: f64,
    pub dof: u32,
    pub p_a: f64,
    pub p_b: f64,
    pub alpha_grid: AlphaGrid,
}

impl RenyiQuery {
    pub fn new(sigma0: f64, sigma1: f64, dof: u32, p_a: f64, p_b: f64) -> Result<Self> {
        let q = Self {
            sigma0,
            sigma1,
            dof,
            p_a,
            p_b,
            alpha_grid: AlphaGrid::default(),
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 > 0.0
            && self.sigma1 > 0.0
            && self.sigma0.is_finite()
            && self.sigma1.is_finite())
        {
            return Err(Error::domain(
                "RenyiQuery",
                format!("sigma0 = {}, sigma1 = {}", self.sigma0, self.sigma1),
            ));
        }
        if self.dof == 0 {
            return Err(Error::domain("RenyiQuery", "dof must be positive"));
        }
        if !(self.p_b > 0.0
            && self.p_a >= self.p_b
            && self.p_a < 1.0
            && self.p_a + self.p_b <= 1.0 + 1e-12)
        {
            return Err(Error::domain(
                "RenyiQuery",
                format!(
                    "need 0 < pB <= pA < 1, pA + pB <= 1; got {}, {}",
                    self.p_a, self.p_b
                ),
            ));
        }
        let g = &self.alpha_grid;
        if g.points < 2 || !(g.min_alpha > 0.0 && g.max_alpha > g.min_alpha) {
            return Err(Error::Config(format!("invalid alpha grid {g:?}")));
        }
        Ok(())
    }

    /// Supremum of the admissible `α` set; infinite when `σ₀ ≥ σ₁`.
    pub fn alpha_limit(&self) -> f64 {
        let (s0, s1) = (self.sigma0 * self.sigma0, self.sigma1 * self.sigma1);
        if s0 >= s1 {
            f64::INFINITY
        } else {
            s1 / (s1 - s0)
        }
    }

    pub fn is_admissible(&self, alpha: f64) -> bool {
        alpha > 0.0 && (alpha - 1.0).abs() >= ALPHA_ONE_GUARD && alpha < self.alpha_limit()
    }

    /// `σ_α² / σ₁² = 1 + α (σ₀²/σ₁² - 1)`.
    fn mix_ratio(&self, alpha: f64) -> f64 {
        let v = (self.sigma0 / self.sigma1).powi(2) - 1.0;
        1.0 + alpha * v
    }

    /// Distance-free part of the divergence, per dimension.
    fn log_part_per_dim(&self, alpha: f64) -> f64 {
        let v = (self.sigma0 / self.sigma1).powi(2) - 1.0;
        let ln_mix = 0.5 * (alpha * v).ln_1p();
        let ln_ratio = (self.sigma0 / self.sigma1).ln();
        (ln_mix - alpha * ln_ratio) / (1.0 - alpha)
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if self.is_admissible(alpha) {
            Ok(())
        } else {
            Err(Error::domain(
                "renyi",
                format!(
                    "alpha = {alpha} outside the admissible set (0, {}) \\ {{1}}",
                    self.alpha_limit()
                ),
            ))
        }
    }
}

/// `D_α(N(x₁, σ₁²I) ‖ N(x₀, σ₀²I))` for `‖x₁ - x₀‖ = distance`.
pub fn renyi_divergence_isotropic(q: &RenyiQuery, alpha: f64, distance: f64) -> Result<f64> {
    q.check_alpha(alpha)?;
    if !(distance >= 0.0) {
        return Err(Error::domain(
            "renyi_divergence_isotropic",
            format!("distance {distance}"),
        ));
    }
    let s1 = q.sigma1 * q.sigma1;
    let shift = alpha * distance * distance / (2.0 * s1 * q.mix_ratio(alpha));
    Ok((shift + q.dof as f64 * q.log_part_per_dim(alpha)).max(0.0))
}

/// `-ln(1 - 2M₁(p_A, p_B) + 2M_{1-α}(p_A, p_B))`.
pub fn li_condition_rhs(p_a: f64, p_b: f64, alpha: f64) -> Result<f64> {
    if !(p_b > 0.0 && p_a >= p_b && p_a + p_b <= 1.0 + 1e-12) {
        return Err(Error::domain(
            "li_condition_rhs",
            format!("pA = {p_a}, pB = {p_b}"),
        ));
    }
    if !(alpha > 0.0) || (alpha - 1.0).abs() < ALPHA_ONE_GUARD {
        return Err(Error::domain(
            "li_condition_rhs",
            format!("alpha = {alpha}"),
        ));
    }
    if p_a == p_b {
        return Ok(0.0);
    }
    let e = 1.0 - alpha;
    let (la, lb) = (e * p_a.ln(), e * p_b.ln());
    let hi = la.max(lb);
    let ln_mean = hi + ((la - hi).exp() + (lb - hi).exp()).ln() - std::f64::consts::LN_2;
    let m_alpha = (ln_mean / e).exp();
    let inner = 1.0 - (p_a + p_b) + 2.0 * m_alpha;
    Ok((-inner.ln()).max(0.0))
}

/// Squared radius bound at a fixed `α`; negative means no certificate there.
pub fn radius_squared_at(q: &RenyiQuery, alpha: f64) -> Result<f64> {
    q.check_alpha(alpha)?;
    let budget = li_condition_rhs(q.p_a, q.p_b, alpha)?;
    let s1 = q.sigma1 * q.sigma1;
    let scale = 2.0 * s1 * q.mix_ratio(alpha) / alpha;
    Ok(scale * (budget - q.dof as f64 * q.log_part_per_dim(alpha)))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct RenyiRadius {
    pub radius: f64,
    pub best_alpha: f64,
}

/// `sup_α` of the squared radius bound, by a log-spaced grid and golden-section
/// refinement around the best grid point. Floored at zero.
pub fn renyi_certified_radius(q: &RenyiQuery) -> Result<RenyiRadius> {
    q.validate()?;
    let g = q.alpha_grid;
    let limit = q.alpha_limit();
    let top = if limit.is_finite() {
        g.max_alpha.min(limit * (1.0 - 1e-9))
    } else {
        g.max_alpha
    };
    let bottom = g.min_alpha.min(0.5 * top);
    let (lb, lt) = (bottom.ln(), top.ln());
    let grid: Vec<f64> = (0..g.points)
        .map(|i| (lb + (lt - lb) * i as f64 / (g.points - 1) as f64).exp())
        .filter(|&a| q.is_admissible(a))
        .collect();
    let objective = |a: f64| radius_squared_at(q, a).unwrap_or(f64::NEG_INFINITY);
    let mut best = (f64::NEG_INFINITY, f64::NAN, 0usize);
    for (i, &a) in grid.iter().enumerate() {
        let v = objective(a);
        if v > best.0 {
            best = (v, a, i);
        }
    }
    if best.1.is_nan() {
        return Ok(RenyiRadius {
            radius: 0.0,
            best_alpha: f64::NAN,
        });
    }
    // refine in ln α between the neighbours, keeping clear of α = 1
    let i = best.2;
    let mut lo = grid[i.saturating_sub(1)].ln();
    let mut hi = grid[(i + 1).min(grid.len() - 1)].ln();
    if grid[i] < 1.0 && hi.exp() > 1.0 - ALPHA_ONE_GUARD {
        hi = (1.0 - 2.0 * ALPHA_ONE_GUARD).ln();
    }
    if grid[i] > 1.0 && lo.exp() < 1.0 + ALPHA_ONE_GUARD {
        lo = (1.0 + 2.0 * ALPHA_ONE_GUARD).ln();
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |t: f64| objective(t.exp());
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let (v, alpha) = if fc.max(fd) > best.0 {
        if fc > fd {
            (fc, c.exp())
        } else {
            (fd, d.exp())
        }
    } else {
        (best.0, best.1)
    };
    Ok(RenyiRadius {
        radius: v.max(0.0).sqrt(),
        best_alpha: alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s0: f64, s1: f64, n: u32, pa: f64) -> RenyiQuery {
        RenyiQuery::new(s0, s1, n, pa, 1.0 - pa).unwrap()
    }

    /// One-dimensional divergence by numerical integration of
    /// `p₁^α p₀^{1-α}`, summed over dimensions.
    fn divergence_by_quadrature(s0: f64, s1: f64, shift: &[f64], alpha: f64) -> f64 {
        let log_pdf = |x: f64, m: f64, s: f64| {
            -(x - m) * (x - m) / (2.0 * s * s) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
        };
        shift
            .iter()
            .map(|&m| {
                let (a, b, n) = (-40.0, 40.0, 200_000);
                let h = (b - a) / n as f64;
                let mut acc = 0.0;
                for i in 0..=n {
                    let x = a + i as f64 * h;
                    let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                    acc +=
                        w * (alpha * log_pdf(x, m, s1) + (1.0 - alpha) * log_pdf(x, 0.0, s0)).exp();
                }
                (acc * h).ln() / (alpha - 1.0)
            })
            .sum()
    }

    #[test]
    fn divergence_trivial_cases() {
        let same = q(1.0, 1.0, 10, 0.9);
        assert_eq!(renyi_divergence_isotropic(&same, 2.0, 0.0).unwrap(), 0.0);
        let d = renyi_divergence_isotropic(&q(0.7, 0.7, 5, 0.9), 3.0, 1.3).unwrap();
        assert!((d - 3.0 * 1.69 / (2.0 * 0.49)).abs() < 1e-12);
    }

    #[test]
    fn divergence_matches_quadrature() {
        for &(s0, s1, alpha) in &[
            (1.0, 0.8, 2.0),
            (1.0, 0.8, 0.5),
            (0.8, 1.0, 2.5),
            (0.5, 0.6, 0.3),
        ] {
            let shift = [0.3, -0.4, 0.0];
            let d = (shift.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let got = renyi_divergence_isotropic(&q(s0, s1, 3, 0.9), alpha, d).unwrap();
            let want = divergence_by_quadrature(s0, s1, &shift, alpha);
            assert!((got - want).abs() < 1e-8 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn divergence_at_dim_3072_is_per_dimension_sum() {
        let big = renyi_divergence_isotropic(&q(1.0, 0.8, 3072, 0.9), 2.0, 0.0).unwrap();
        let one = divergence_by_quadrature(1.0, 0.8, &[0.0], 2.0);
        assert!((big - 3072.0 * one).abs() < 1e-6 * big);
        assert!(big > 100.0);
    }

    #[test]
    fn inadmissible_alpha_rejected() {
        let up = q(0.8, 1.0, 3, 0.9);
        let limit = up.alpha_limit();
        assert!((limit - 1.0 / 0.36).abs() < 1e-12);
        assert!(renyi_divergence_isotropic(&up, limit, 0.0).is_err());
        assert!(renyi_divergence_isotropic(&up, limit + 1.0, 0.0).is_err());
        assert!(renyi_divergence_isotropic(&up, 1.0, 0.0).is_err());
        assert!(renyi_divergence_isotropic(&q(1.0, 0.8, 3, 0.9), 50.0, 0.0).is_ok());
    }

    #[test]
    fn li_budget() {
        assert!(li_condition_rhs(0.3, 0.3, 2.0).unwrap().abs() < 1e-15);
        // α = 2: M_{-1} is the harmonic mean
        let (a, b) = (0.99f64, 0.01f64);
        let harmonic = 2.0 * a * b / (a + b);
        let want = -(1.0 - (a + b) + 2.0 * harmonic).ln();
        assert!((li_condition_rhs(a, b, 2.0).unwrap() - want).abs() < 1e-14);
        let lo = li_condition_rhs(a, b, 1.0 - 1e-4).unwrap();
        let hi = li_condition_rhs(a, b, 1.0 + 1e-4).unwrap();
        assert!((lo - hi).abs() < 1e-3, "{lo} {hi}");
    }

    #[test]
    fn collapse_with_dimension() {
        let r2 = renyi_certified_radius(&q(1.0, 0.8, 2, 0.99))
            .unwrap()
            .radius;
        assert!(r2 > 0.0);
        let mut prev = r2;
        for n in [3u32, 5, 10, 20, 50, 100, 200, 1000, 3072] {
            let r = renyi_certified_radius(&q(1.0, 0.8, n, 0.99))
                .unwrap()
                .radius;
            assert!(r <= prev + 1e-12, "N {n}");
            prev = r;
            if n >= 100 {
                assert_eq!(r, 0.0, "N {n}");
            }
        }
    }

    #[test]
    fn equal_sigmas_monotone_in_pa() {
        let mut prev = 0.0;
        for pa in [0.6, 0.7, 0.8, 0.9, 0.99, 0.999] {
            let r = renyi_certified_radius(&q(1.0, 1.0, 50, pa)).unwrap().radius;
            assert!(r > prev);
            prev = r;
        }
        assert_eq!(
            renyi_certified_radius(&RenyiQuery::new(1.0, 1.0, 3, 0.4, 0.4).unwrap())
                .unwrap()
                .radius,
            0.0
        );
    }
}
