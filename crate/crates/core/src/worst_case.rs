//! Worst-case class-B regions for two isotropic Gaussians with different
//! variances, and the adversary probabilities `ξ_>(a)` and `ξ_<(a)`.
//!
//! For `P₀ = N(x₀, σ₀² I)` and `P₁ = N(x₁, σ₁² I)` the most damaging region of
//! `P₀`-mass `p_B` is a likelihood-ratio level set `{p₀ ≤ r · p₁}`. When
//! `σ₀ > σ₁` that set is a ball; when `σ₀ < σ₁` it is the complement of a ball.
//! Both masses are noncentral chi-squared probabilities.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist2};
use crate::special::{normal_cdf, normal_quantile, EvalPath, NcChiSq, NumericsPolicy};

/// Probabilities below this are flushed to zero and flagged.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    Ball,
    ComplementOfBall,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstCaseBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub orientation: Orientation,
}

impl WorstCaseBall {
    pub fn contains(&self, x: &[f64]) -> bool {
        let inside = dist2(x, &self.center) <= self.radius * self.radius;
        match self.orientation {
            Orientation::Ball => inside,
            Orientation::ComplementOfBall => !inside,
        }
    }
}

/// The two standard deviations, the distance between `x₀` and `x₁`, and the
/// class probability bounds at `x₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversaryPair {
    pub sigma0: f64,
    pub sigma1: f64,
    pub distance: f64,
    pub dof: u32,
    pub p_a: f64,
    pub p_b: f64,
    log_ratio: f64,
}

impl AdversaryPair {
    /// Pair with `p_B = 1 - p_A`.
    pub fn new(sigma0: f64, sigma1: f64, distance: f64, dof: u32, p_a: f64) -> Result<Self> {
        Self::with_p_b(sigma0, sigma1, distance, dof, p_a, 1.0 - p_a)
    }

    pub fn with_p_b(
        sigma0: f64,
        sigma1: f64,
        distance: f64,
        dof: u32,
        p_a: f64,
        p_b: f64,
    ) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite() && sigma1 > 0.0 && sigma1.is_finite()) {
            return Err(Error::domain(
                "AdversaryPair",
                format!("standard deviations must be positive, got {sigma0}, {sigma1}"),
            ));
        }
        let log_ratio = ((sigma1 - sigma0) / sigma0).ln_1p();
        Self::build(sigma0, sigma1, log_ratio, distance, dof, p_a, p_b)
    }

    /// Pair with `σ₁ = σ₀ · exp(log_ratio)`. Keeping the log ratio lets the
    /// variance gap `σ₀² - σ₁²` be formed without cancellation.
    pub fn from_log_ratio(
        sigma0: f64,
        log_ratio: f64,
        distance: f64,
        dof: u32,
        p_a: f64,
        p_b: f64,
    ) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma0.is_finite() && log_ratio.is_finite()) {
            return Err(Error::domain(
                "AdversaryPair",
                format!("invalid sigma0 {sigma0} or log ratio {log_ratio}"),
            ));
        }
        Self::build(
            sigma0,
            sigma0 * log_ratio.exp(),
            log_ratio,
            distance,
            dof,
            p_a,
            p_b,
        )
    }

    fn build(
        sigma0: f64,
        sigma1: f64,
        log_ratio: f64,
        distance: f64,
        dof: u32,
        p_a: f64,
        p_b: f64,
    ) -> Result<Self> {
        if !(distance >= 0.0 && distance.is_finite()) {
            return Err(Error::domain(
                "AdversaryPair",
                format!("distance {distance}"),
            ));
        }
        if dof == 0 {
            return Err(Error::domain("AdversaryPair", "dof must be positive"));
        }
        if !(p_a > 0.0 && p_a < 1.0 && p_b > 0.0 && p_b < 1.0) {
            return Err(Error::domain(
                "AdversaryPair",
                format!("probabilities must lie in (0, 1), got pA = {p_a}, pB = {p_b}"),
            ));
        }
        if p_a + p_b > 1.0 + 1e-12 {
            return Err(Error::domain(
                "AdversaryPair",
                format!("pA + pB = {} exceeds 1", p_a + p_b),
            ));
        }
        Ok(Self {
            sigma0,
            sigma1,
            distance,
            dof,
            p_a,
            p_b,
            log_ratio,
        })
    }

    /// `ln(σ₁/σ₀)`.
    pub fn log_ratio(&self) -> f64 {
        self.log_ratio
    }

    /// `σ₀² - σ₁²`.
    pub fn variance_gap(&self) -> f64 {
        -self.sigma0 * self.sigma0 * (2.0 * self.log_ratio).exp_m1()
    }
}

/// A ξ value together with how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiEvaluation {
    pub value: f64,
    pub underflow: bool,
    pub path: EvalPath,
}

impl XiEvaluation {
    fn new(raw: f64, path: EvalPath) -> Self {
        if raw < UNDERFLOW_FLOOR {
            Self {
                value: 0.0,
                underflow: true,
                path,
            }
        } else {
            Self {
                value: raw,
                underflow: false,
                path,
            }
        }
    }
}

/// The level set `{x : p₀(x) ≤ r · p₁(x)}` for `P₀ = N(x₀, σ₀²)`, `P₁ = N(x₁, σ₁²)`.
pub fn worst_case_ball(
    x0: &[f64],
    x1: &[f64],
    sigma0: f64,
    sigma1: f64,
    likelihood_level: f64,
) -> Result<WorstCaseBall> {
    check_dim(x0.len(), x1.len())?;
    if x0.is_empty() {
        return Err(Error::DegenerateGeometry("zero-dimensional input".into()));
    }
    if !(sigma0 > 0.0 && sigma1 > 0.0) {
        return Err(Error::domain(
            "worst_case_ball",
            "standard deviations must be positive",
        ));
    }
    if !(likelihood_level > 0.0 && likelihood_level.is_finite()) {
        return Err(Error::domain(
            "worst_case_ball",
            format!("likelihood level {likelihood_level} must be positive"),
        ));
    }
    if sigma0 == sigma1 {
        return Err(Error::DegenerateGeometry(
            "equal standard deviations give a half-space, not a ball".into(),
        ));
    }
    let n = x0.len() as f64;
    let a2 = dist2(x0, x1);
    let (s0, s1) = (sigma0 * sigma0, sigma1 * sigma1);
    let ln_r = likelihood_level.ln();
    let prod = s0 * s1;

    let (shift, r2, orientation) = if sigma0 > sigma1 {
        let gap = (sigma0 - sigma1) * (sigma0 + sigma1);
        let r2 = prod * a2 / (gap * gap)
            + 2.0 * n * prod / gap * (sigma0 / sigma1).ln()
            + 2.0 * prod / gap * ln_r;
        (s0 / gap, r2, Orientation::Ball)
    } else {
        let gap = (sigma1 - sigma0) * (sigma1 + sigma0);
        let r2 = prod * a2 / (gap * gap) + 2.0 * n * prod / gap * (sigma1 / sigma0).ln()
            - 2.0 * prod / gap * ln_r;
        (-s0 / gap, r2, Orientation::ComplementOfBall)
    };
    let center = x0
        .iter()
        .zip(x1)
        .map(|(a, b)| a + shift * (b - a))
        .collect();
    Ok(WorstCaseBall {
        center,
        radius: r2.max(0.0).sqrt(),
        orientation,
    })
}

/// Mass of `ball` under `N(mean, σ² I)`.
pub fn ball_probability_exact(mean: &[f64], sigma: f64, ball: &WorstCaseBall) -> Result<f64> {
    check_dim(ball.center.len(), mean.len())?;
    if !(sigma > 0.0) {
        return Err(Error::domain(
            "ball_probability_exact",
            "sigma must be positive",
        ));
    }
    let s2 = sigma * sigma;
    let dist = NcChiSq::new(mean.len() as u32, dist2(mean, &ball.center) / s2)?;
    let x = ball.radius * ball.radius / s2;
    match ball.orientation {
        Orientation::Ball => dist.cdf(x),
        Orientation::ComplementOfBall => dist.sf(x),
    }
}

/// `ξ_>(a)`: worst-case class-B probability at the adversary when `σ₀ > σ₁`.
pub fn xi_greater(pair: &AdversaryPair) -> Result<f64> {
    Ok(xi_greater_with(pair, &NumericsPolicy::default())?.value)
}

pub fn xi_greater_with(pair: &AdversaryPair, policy: &NumericsPolicy) -> Result<XiEvaluation> {
    if !(pair.log_ratio < 0.0) {
        return Err(Error::WrongBranch(format!(
            "xi_greater needs sigma0 > sigma1, got {} and {}",
            pair.sigma0, pair.sigma1
        )));
    }
    let gap = pair.variance_gap();
    let a2 = pair.distance * pair.distance;
    let s0 = pair.sigma0 * pair.sigma0;
    let s1 = pair.sigma1 * pair.sigma1;
    let lambda0 = s0 * a2 / (gap * gap);
    let lambda1 = s1 * a2 / (gap * gap);
    let q = NcChiSq::new(pair.dof, lambda0)?.quantile_with(pair.p_b, policy)?;
    let x = (-2.0 * pair.log_ratio).exp() * q.value;
    let v = NcChiSq::new(pair.dof, lambda1)?.cdf_with(x, policy)?;
    Ok(XiEvaluation::new(v.value, worse(q.path, v.path)))
}

/// `ξ_<(a)`: worst-case class-B probability at the adversary when `σ₀ < σ₁`.
pub fn xi_less(pair: &AdversaryPair) -> Result<f64> {
    Ok(xi_less_with(pair, &NumericsPolicy::default())?.value)
}

pub fn xi_less_with(pair: &AdversaryPair, policy: &NumericsPolicy) -> Result<XiEvaluation> {
    if !(pair.log_ratio > 0.0) {
        return Err(Error::WrongBranch(format!(
            "xi_less needs sigma0 < sigma1, got {} and {}",
            pair.sigma0, pair.sigma1
        )));
    }
    let gap = -pair.variance_gap();
    let a2 = pair.distance * pair.distance;
    let s0 = pair.sigma0 * pair.sigma0;
    let s1 = pair.sigma1 * pair.sigma1;
    let lambda0 = s0 * a2 / (gap * gap);
    let lambda1 = s1 * a2 / (gap * gap);
    // the ball has P₀-mass 1 - p_B
    let q = NcChiSq::new(pair.dof, lambda0)?.upper_quantile_with(pair.p_b, policy)?;
    let x = (-2.0 * pair.log_ratio).exp() * q.value;
    let v = NcChiSq::new(pair.dof, lambda1)?.sf_with(x, policy)?;
    Ok(XiEvaluation::new(v.value, worse(q.path, v.path)))
}

/// Worst-case class-B probability for equal standard deviations: the
/// half-space bound `Φ(Φ⁻¹(p_B) + a/σ)`.
pub fn xi_half_space(pair: &AdversaryPair) -> Result<f64> {
    Ok(normal_cdf(
        normal_quantile(pair.p_b)? + pair.distance / pair.sigma0,
    ))
}

/// Dispatches on the ordering of `σ₀` and `σ₁`.
pub fn xi_with(pair: &AdversaryPair, policy: &NumericsPolicy) -> Result<XiEvaluation> {
    if pair.log_ratio < 0.0 {
        xi_greater_with(pair, policy)
    } else if pair.log_ratio > 0.0 {
        xi_less_with(pair, policy)
    } else {
        Ok(XiEvaluation::new(
            xi_half_space(pair)?,
            EvalPath::PoissonSeries,
        ))
    }
}

pub fn xi(pair: &AdversaryPair) -> Result<f64> {
    Ok(xi_with(pair, &NumericsPolicy::default())?.value)
}

fn worse(a: EvalPath, b: EvalPath) -> EvalPath {
    if a == EvalPath::NormalApproximation || b == EvalPath::NormalApproximation {
        EvalPath::NormalApproximation
    } else {
        EvalPath::PoissonSeries
    }
}

/// Exact class-1 probability of the indicator of `B(center, radius)` under
/// `N(x, σ² I)`. Values below [`UNDERFLOW_FLOOR`] are returned as zero.
pub fn smoothed_ball_indicator_exact(
    x: &[f64],
    sigma: f64,
    center: &[f64],
    radius: f64,
) -> Result<f64> {
    check_dim(center.len(), x.len())?;
    if !(sigma > 0.0) || !(radius >= 0.0) {
        return Err(Error::domain(
            "smoothed_ball_indicator_exact",
            format!("sigma = {sigma}, radius = {radius}"),
        ));
    }
    let s2 = sigma * sigma;
    let v = NcChiSq::new(x.len() as u32, dist2(x, center) / s2)?.cdf(radius * radius / s2)?;
    Ok(if v < UNDERFLOW_FLOOR { 0.0 } else { v })
}
