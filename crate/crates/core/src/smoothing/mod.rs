//! Monte-Carlo smoothed classifier: sampling, prediction with abstention,
//! confidence bounds on the top-class probability and the constant-σ radius.

pub mod classifier;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::check_dim;
use crate::special::{
    binomial_two_sided_pvalue, clopper_pearson_lower, clopper_pearson_upper, normal_cdf,
    normal_quantile, BinomialEstimate,
};

pub use classifier::{
    argmax_first, Augmentation, BallIndicator, BaseClassifier, ConstantClass, KnnVote,
    LinearHalfSpace, TinyMlp, TrainConfig,
};

/// How the runner-up probability bound is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PbMode {
    /// `p̄_B = 1 - p_A`.
    #[default]
    Complement,
    /// Separate Clopper–Pearson bounds on the top class and the runner-up,
    /// each at level `α/2`.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    pub n0: u64,
    pub n: u64,
    pub alpha: f64,
    pub mc_batch: u64,
    pub seed: u64,
    pub pb_mode: PbMode,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            n0: 100,
            n: 100_000,
            alpha: 0.001,
            mc_batch: 1000,
            seed: 0,
            pb_mode: PbMode::Complement,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n == 0 || self.mc_batch == 0 {
            return Err(Error::Config("n0, n and mc_batch must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!(
                "alpha = {} must lie in (0, 0.5)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Sampling phases; each gets its own family of random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Selection = 0,
    Estimation = 1,
    Prediction = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A key identifying the input point, derived from its coordinates.
pub fn point_key(x: &[f64]) -> u64 {
    x.iter()
        .fold(0x243f_6a88_85a3_08d3, |h, v| splitmix64(h ^ v.to_bits()))
}

/// Counts of base-classifier outputs over `num` noisy copies `x + σ ε`.
///
/// Draws are split into batches of `mc_batch`; batch `b` uses its own ChaCha
/// stream keyed by `(seed, point, phase, b)`, so the counts do not depend on
/// how batches are scheduled across threads.
pub fn sample_counts<F: BaseClassifier + ?Sized>(
    f: &F,
    x: &[f64],
    sigma: f64,
    num: u64,
    phase: Phase,
    cfg: &SmoothingConfig,
) -> Result<Vec<u64>> {
    check_dim(f.dim(), x.len())?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sample_counts", format!("sigma = {sigma}")));
    }
    let classes = f.num_classes();
    let key = splitmix64(cfg.seed ^ splitmix64(point_key(x)));
    let batches = num.div_ceil(cfg.mc_batch);
    let counts = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            rng.set_stream(((phase as u64) << 48) | b);
            let size = cfg.mc_batch.min(num - b * cfg.mc_batch);
            let mut local = vec![0u64; classes];
            let mut buf = vec![0.0; x.len()];
            for _ in 0..size {
                for (slot, &xi) in buf.iter_mut().zip(x) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *slot = xi + sigma * z;
                }
                local[f.classify(&buf)] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; classes],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts)
}

/// Indices of the largest and second-largest counts (first index wins ties).
fn top_two(counts: &[u64]) -> (usize, usize) {
    let a = argmax_first(counts);
    let mut b = if a == 0 { 1.min(counts.len() - 1) } else { 0 };
    for (i, &c) in counts.iter().enumerate() {
        if i != a && (c > counts[b] || b == a) {
            b = i;
        }
    }
    (a, b)
}

/// Smoothed prediction with abstention: the top class is returned only if the
/// two-sided binomial test on the top two counts rejects `p = 1/2` at `α`.
pub fn predict<F: BaseClassifier + ?Sized>(
    f: &F,
    sigma0: f64,
    x0: &[f64],
    cfg: &SmoothingConfig,
) -> Result<Option<usize>> {
    cfg.validate()?;
    let counts = sample_counts(f, x0, sigma0, cfg.n, Phase::Prediction, cfg)?;
    if counts.len() < 2 {
        return Ok(Some(0));
    }
    let (a, b) = top_two(&counts);
    let p = binomial_two_sided_pvalue(counts[a], counts[a] + counts[b], 0.5)?;
    Ok((p <= cfg.alpha).then_some(a))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PaEstimate {
    pub top_class: usize,
    pub runner_up: usize,
    pub selection_counts: Vec<u64>,
    pub counts: Vec<u64>,
    pub p_a_lower: f64,
    pub p_b_upper: f64,
}

impl PaEstimate {
    /// Whether the estimate supports a prediction at all.
    pub fn certifiable(&self, mode: PbMode) -> bool {
        match mode {
            PbMode::Complement => self.p_a_lower > 0.5,
            PbMode::Estimated => self.p_a_lower > self.p_b_upper,
        }
    }
}

/// Selects the top class from `n0` draws and bounds its probability from `n`
/// fresh draws.
pub fn estimate_pa<F: BaseClassifier + ?Sized>(
    f: &F,
    sigma0: f64,
    x0: &[f64],
    cfg: &SmoothingConfig,
) -> Result<PaEstimate> {
    cfg.validate()?;
    let selection = sample_counts(f, x0, sigma0, cfg.n0, Phase::Selection, cfg)?;
    let (top, runner_up) = if selection.len() < 2 {
        (0, 0)
    } else {
        top_two(&selection)
    };
    let counts = sample_counts(f, x0, sigma0, cfg.n, Phase::Estimation, cfg)?;
    let (p_a_lower, p_b_upper) = match cfg.pb_mode {
        PbMode::Complement => {
            let est = BinomialEstimate::new(counts[top], cfg.n, 1.0 - cfg.alpha)?;
            let lo = clopper_pearson_lower(&est);
            (lo, 1.0 - lo)
        }
        PbMode::Estimated => {
            let level = 1.0 - cfg.alpha / 2.0;
            let lo = clopper_pearson_lower(&BinomialEstimate::new(counts[top], cfg.n, level)?);
            let nb = if runner_up == top {
                0
            } else {
                counts[runner_up]
            };
            let hi = clopper_pearson_upper(&BinomialEstimate::new(nb, cfg.n, level)?);
            (lo, hi)
        }
    };
    Ok(PaEstimate {
        top_class: top,
        runner_up,
        selection_counts: selection,
        counts,
        p_a_lower,
        p_b_upper,
    })
}

/// `max(0, σ/2 · (Φ⁻¹(p_A) - Φ⁻¹(p_B)))`.
pub fn cohen_radius(p_a_lower: f64, p_b_upper: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::domain("cohen_radius", format!("sigma = {sigma}")));
    }
    if p_a_lower <= p_b_upper {
        return Ok(0.0);
    }
    let r = 0.5 * sigma * (normal_quantile(p_a_lower)? - normal_quantile(p_b_upper)?);
    Ok(r.max(0.0))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    CohenConstant,
    Idrs,
    Renyi,
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Diagnostics {
    /// Grid points where the lower clamp replaced the envelope.
    pub lower_clamp_hits: usize,
    /// Grid points where the upper clamp replaced the envelope.
    pub upper_clamp_hits: usize,
    /// Grid points treated as uncertified because the numerics were unstable.
    pub unstable_points: usize,
    pub underflows: usize,
    pub grid_steps: usize,
    pub evaluations: usize,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CertificationResult {
    /// `None` means abstain.
    pub predicted: Option<usize>,
    pub p_a_lower: f64,
    pub p_b_upper: f64,
    pub sigma0: f64,
    pub radius: f64,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl CertificationResult {
    pub fn abstained(&self) -> bool {
        self.predicted.is_none()
    }
}

/// Constant-σ certification: estimate, then the Gaussian radius.
pub fn certify_constant<F: BaseClassifier + ?Sized>(
    f: &F,
    sigma: f64,
    x0: &[f64],
    cfg: &SmoothingConfig,
) -> Result<CertificationResult> {
    let est = estimate_pa(f, sigma, x0, cfg)?;
    let (predicted, radius) = if est.certifiable(cfg.pb_mode) {
        (
            Some(est.top_class),
            cohen_radius(est.p_a_lower, est.p_b_upper, sigma)?,
        )
    } else {
        (None, 0.0)
    };
    Ok(CertificationResult {
        predicted,
        p_a_lower: est.p_a_lower,
        p_b_upper: est.p_b_upper,
        sigma0: sigma,
        radius,
        method: Method::CohenConstant,
        diagnostics: Diagnostics::default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TruncationPoint {
    pub distance: f64,
    pub p_a: f64,
    pub p_a_lower: f64,
    pub radius: f64,
    /// `Φ⁻¹(p_A_lower) / Φ⁻¹(p_A)`: the fraction of the exact radius recovered.
    pub certified_fraction: f64,
}

/// Certified radius against a linear boundary at each distance, assuming the
/// Monte-Carlo count equals its expectation `round(n p_A)` with
/// `p_A = Φ(d/σ)`. The curve is capped at `σ Φ⁻¹(α^{1/n})`.
pub fn linear_truncation_curve(
    sigma: f64,
    distances: &[f64],
    cfg: &SmoothingConfig,
) -> Result<Vec<TruncationPoint>> {
    cfg.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::domain(
            "linear_truncation_curve",
            format!("sigma = {sigma}"),
        ));
    }
    distances
        .iter()
        .map(|&d| {
            let p_a = normal_cdf(d / sigma);
            let k = ((cfg.n as f64) * p_a).round().clamp(0.0, cfg.n as f64) as u64;
            let lo = clopper_pearson_lower(&BinomialEstimate::new(k, cfg.n, 1.0 - cfg.alpha)?);
            let radius = if lo > 0.5 {
                sigma * normal_quantile(lo)?
            } else {
                0.0
            };
            let exact = d / sigma;
            let certified_fraction = if exact > 0.0 && lo > 0.5 {
                normal_quantile(lo)? / exact
            } else {
                0.0
            };
            Ok(TruncationPoint {
                distance: d,
                p_a,
                p_a_lower: lo,
                radius,
                certified_fraction,
            })
        })
        .collect()
}

/// The truncation ceiling `σ Φ⁻¹(α^{1/n})`.
pub fn truncation_ceiling(sigma: f64, n: u64, alpha: f64) -> Result<f64> {
    Ok(sigma * normal_quantile(alpha.powf(1.0 / n as f64))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worst_case::smoothed_ball_indicator_exact;

    fn cfg(n: u64, seed: u64) -> SmoothingConfig {
        SmoothingConfig {
            n0: 100,
            n,
            alpha: 0.001,
            mc_batch: 1000,
            seed,
            pb_mode: PbMode::Complement,
        }
    }

    #[test]
    fn deep_inside_ball_never_abstains() {
        let f = BallIndicator {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert_eq!(
            predict(&f, 1e-3, &[0.0, 0.0], &cfg(1000, 1)).unwrap(),
            Some(1)
        );
    }

    #[test]
    fn constant_classifier() {
        let f = ConstantClass {
            dim: 3,
            class: 2,
            num_classes: 4,
        };
        assert_eq!(predict(&f, 0.5, &[0.0; 3], &cfg(200, 1)).unwrap(), Some(2));
        let est = estimate_pa(&f, 0.5, &[0.0; 3], &cfg(500, 2)).unwrap();
        assert_eq!(est.top_class, 2);
        assert!((est.p_a_lower - 0.001f64.powf(1.0 / 500.0)).abs() < 1e-15);
    }

    #[test]
    fn coin_flip_boundary_usually_abstains() {
        let f = LinearHalfSpace {
            normal: vec![1.0],
            offset: 0.0,
        };
        let c = SmoothingConfig {
            alpha: 0.05,
            ..cfg(200, 0)
        };
        let mut answered = 0;
        for seed in 0..1000 {
            if predict(&f, 1.0, &[0.0], &SmoothingConfig { seed, ..c.clone() })
                .unwrap()
                .is_some()
            {
                answered += 1;
            }
        }
        // rejection rate ≤ α up to binomial noise over 1000 runs
        assert!((answered as f64) / 1000.0 <= 0.05 + 0.02, "{answered}");
    }

    #[test]
    fn deterministic_counts() {
        let f = BallIndicator {
            center: vec![0.0, 0.0, 0.0],
            radius: 1.0,
        };
        let c = cfg(10_000, 7);
        let a = sample_counts(&f, &[0.4, 0.0, 0.1], 0.6, c.n, Phase::Estimation, &c).unwrap();
        let b = sample_counts(&f, &[0.4, 0.0, 0.1], 0.6, c.n, Phase::Estimation, &c).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let s = single
            .install(|| sample_counts(&f, &[0.4, 0.0, 0.1], 0.6, c.n, Phase::Estimation, &c))
            .unwrap();
        assert_eq!(a, s);
    }

    #[test]
    fn frequencies_match_exact_oracle() {
        let f = BallIndicator {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let c = cfg(100_000, 3);
        let x = [0.7, -0.2];
        let counts = sample_counts(&f, &x, 0.5, c.n, Phase::Estimation, &c).unwrap();
        let p = smoothed_ball_indicator_exact(&x, 0.5, &f.center, 1.0).unwrap();
        let freq = counts[1] as f64 / c.n as f64;
        let se = (p * (1.0 - p) / c.n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
    }

    #[test]
    fn estimated_mode_bounds_can_leave_slack() {
        // three equally likely wedges around the origin, point slightly inside wedge 0
        struct Wedges;
        impl BaseClassifier for Wedges {
            fn dim(&self) -> usize {
                2
            }
            fn num_classes(&self) -> usize {
                3
            }
            fn classify(&self, x: &[f64]) -> usize {
                let a = x[1].atan2(x[0]) + std::f64::consts::PI;
                ((a / (2.0 * std::f64::consts::PI / 3.0)) as usize).min(2)
            }
        }
        let c = SmoothingConfig {
            pb_mode: PbMode::Estimated,
            ..cfg(20_000, 4)
        };
        let est = estimate_pa(&Wedges, 1.0, &[-0.5, -0.3], &c).unwrap();
        assert!(est.p_a_lower + est.p_b_upper < 1.0);
    }

    #[test]
    fn cohen_radius_examples() {
        assert_eq!(cohen_radius(0.5, 0.5, 1.0).unwrap(), 0.0);
        let r = cohen_radius(normal_cdf(1.0), normal_cdf(-1.0), 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert_eq!(cohen_radius(0.3, 0.6, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn truncation_curve_plateau() {
        let c = cfg(100_000, 0);
        let ceiling = truncation_ceiling(1.0, c.n, c.alpha).unwrap();
        assert!(ceiling > 3.7 && ceiling < 4.0, "{ceiling}");
        let pts = linear_truncation_curve(1.0, &[0.0, 1.0, 5.0, 6.0, 8.0], &c).unwrap();
        assert_eq!(pts[0].radius, 0.0);
        for p in &pts[2..] {
            assert!((p.radius - ceiling).abs() < 1e-12);
        }
        let scaled = linear_truncation_curve(2.0, &[16.0], &c).unwrap();
        assert!((scaled[0].radius - 2.0 * ceiling).abs() < 1e-12);
    }

    #[test]
    fn top_two_ordering() {
        assert_eq!(top_two(&[5, 9, 9, 1]), (1, 2));
        assert_eq!(top_two(&[7, 0]), (0, 1));
        assert_eq!(top_two(&[0, 0, 3]), (2, 0));
    }
}
