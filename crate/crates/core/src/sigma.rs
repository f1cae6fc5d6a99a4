//! The input-dependent smoothing level
//!
//! ```text
//! σ(x) = σ_b · exp(r · (mean_{x_i ∈ N_k(x)} ‖x - x_i‖ - m))
//! ```
//!
//! where `N_k(x)` are the `k` nearest reference points. The mean kNN distance
//! is 1-Lipschitz, so `log σ` is `r`-Lipschitz: `σ` is `r`-semi-elastic.
//! An optional cap `min(σ(x), cap)` preserves that property.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist, dist2};

/// Whether a reference point coinciding with the query counts as its own neighbor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Neighborhood {
    /// Every reference point is a candidate, including one at distance zero.
    #[default]
    IncludeSelf,
    /// The lowest-index reference point at distance exactly zero is skipped.
    /// This breaks continuity at the reference points.
    ExcludeCoincident,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    MinDist,
    MeanDist,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaField {
    dim: usize,
    points: Vec<f64>,
    sigma_b: f64,
    rate: f64,
    k: usize,
    m: f64,
    sigma_cap: Option<f64>,
    neighborhood: Neighborhood,
}

impl SigmaField {
    pub fn new(
        reference_points: &[Vec<f64>],
        sigma_b: f64,
        rate: f64,
        k: usize,
        m: f64,
        sigma_cap: Option<f64>,
    ) -> Result<Self> {
        let dim = reference_points
            .first()
            .map(Vec::len)
            .ok_or(Error::EmptyDataset)?;
        let mut points = Vec::with_capacity(dim * reference_points.len());
        for p in reference_points {
            check_dim(dim, p.len())?;
            points.extend_from_slice(p);
        }
        if k == 0 || k > reference_points.len() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={}",
                reference_points.len()
            )));
        }
        if !(sigma_b > 0.0 && sigma_b.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_b = {sigma_b} must be positive"
            )));
        }
        if !(rate >= 0.0 && rate.is_finite()) || !m.is_finite() {
            return Err(Error::Config(format!("rate = {rate}, m = {m}")));
        }
        if let Some(c) = sigma_cap {
            if !(c > 0.0) {
                return Err(Error::Config(format!("sigma cap {c} must be positive")));
            }
        }
        Ok(Self {
            dim,
            points,
            sigma_b,
            rate,
            k,
            m,
            sigma_cap,
            neighborhood: Neighborhood::IncludeSelf,
        })
    }

    /// A field equal to `sigma` everywhere.
    pub fn constant(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma = {sigma} must be positive")));
        }
        Ok(Self {
            dim,
            points: Vec::new(),
            sigma_b: sigma,
            rate: 0.0,
            k: 0,
            m: 0.0,
            sigma_cap: None,
            neighborhood: Neighborhood::IncludeSelf,
        })
    }

    pub fn with_neighborhood(mut self, neighborhood: Neighborhood) -> Self {
        self.neighborhood = neighborhood;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn sigma_b(&self) -> f64 {
        self.sigma_b
    }
    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn sigma_cap(&self) -> Option<f64> {
        self.sigma_cap
    }
    pub fn neighborhood(&self) -> Neighborhood {
        self.neighborhood
    }
    pub fn num_reference_points(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.points.len() / self.dim
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` nearest reference points as `(index, distance)`, closest first,
    /// ties broken by index.
    pub fn nearest_neighbors(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        check_dim(self.dim, x.len())?;
        let n = self.num_reference_points();
        if self.k == 0 || self.k > n {
            return Err(Error::Config(format!(
                "k = {} exceeds {n} reference points",
                self.k
            )));
        }
        let mut d: Vec<(f64, usize)> = (0..n).map(|i| (dist2(x, self.point(i)), i)).collect();
        if self.neighborhood == Neighborhood::ExcludeCoincident {
            if let Some(pos) = d.iter().position(|&(v, _)| v == 0.0) {
                d.remove(pos);
            }
            if self.k > d.len() {
                return Err(Error::Config("not enough neighbors after exclusion".into()));
            }
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_unstable_by(cmp);
        Ok(d.into_iter().map(|(v, i)| (i, v.sqrt())).collect())
    }

    /// Mean Euclidean distance from `x` to its `k` nearest reference points.
    pub fn mean_knn_distance(&self, x: &[f64]) -> Result<f64> {
        let nn = self.nearest_neighbors(x)?;
        Ok(nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64)
    }

    /// `log σ(x)`.
    pub fn log_sigma_at(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut v = self.sigma_b.ln();
        if self.rate > 0.0 {
            v += self.rate * (self.mean_knn_distance(x)? - self.m);
        }
        if let Some(cap) = self.sigma_cap {
            v = v.min(cap.ln());
        }
        Ok(v)
    }

    pub fn sigma_at(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        if self.rate == 0.0 {
            return Ok(match self.sigma_cap {
                Some(cap) => self.sigma_b.min(cap),
                None => self.sigma_b,
            });
        }
        let mut s = self.sigma_b * (self.rate * (self.mean_knn_distance(x)? - self.m)).exp();
        if let Some(cap) = self.sigma_cap {
            s = s.min(cap);
        }
        Ok(s)
    }
}

pub fn sigma_at(field: &SigmaField, x: &[f64]) -> Result<f64> {
    field.sigma_at(x)
}

pub fn mean_knn_distance(field: &SigmaField, x: &[f64]) -> Result<f64> {
    field.mean_knn_distance(x)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SemiElasticityReport {
    pub pairs_checked: usize,
    pub max_observed_rate: f64,
    /// Indices of pairs whose observed rate exceeds `r + 1e-12`.
    pub violations: Vec<usize>,
}

/// Largest observed `|log σ(x₀) - log σ(x₁)| / ‖x₀ - x₁‖` over `pairs`.
pub fn verify_semi_elasticity(
    field: &SigmaField,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<SemiElasticityReport> {
    if pairs.is_empty() {
        return Err(Error::Config("no pairs to check".into()));
    }
    let mut max_rate: f64 = 0.0;
    let mut violations = Vec::new();
    for (i, (a, b)) in pairs.iter().enumerate() {
        let d = dist(a, b);
        if d == 0.0 {
            continue;
        }
        let rate = (field.log_sigma_at(a)? - field.log_sigma_at(b)?).abs() / d;
        if rate > field.rate + 1e-12 {
            violations.push(i);
        }
        max_rate = max_rate.max(rate);
    }
    Ok(SemiElasticityReport {
        pairs_checked: pairs.len(),
        max_observed_rate: max_rate,
        violations,
    })
}

/// Normalization `m`: the minimum or mean over the reference set of the
/// leave-self-out mean kNN distance.
pub fn calibrate_m(reference_points: &[Vec<f64>], k: usize, mode: CalibrationMode) -> Result<f64> {
    let n = reference_points.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k >= n {
        return Err(Error::Config(format!(
            "calibration needs 1 <= k < {n}, got {k}"
        )));
    }
    let dim = reference_points[0].len();
    for p in reference_points {
        check_dim(dim, p.len())?;
    }
    let mut acc = match mode {
        CalibrationMode::MinDist => f64::INFINITY,
        CalibrationMode::MeanDist => 0.0,
    };
    let mut buf = Vec::with_capacity(n - 1);
    for (i, p) in reference_points.iter().enumerate() {
        buf.clear();
        buf.extend(
            reference_points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| dist2(p, q)),
        );
        buf.select_nth_unstable_by(k - 1, f64::total_cmp);
        let mean = buf[..k].iter().map(|v| v.sqrt()).sum::<f64>() / k as f64;
        match mode {
            CalibrationMode::MinDist => acc = acc.min(mean),
            CalibrationMode::MeanDist => acc += mean / n as f64,
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn zero_rate_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 30, 3);
        let f = SigmaField::new(&pts, 0.7, 0.0, 5, 1.0, None).unwrap();
        for p in random_points(&mut rng, 10, 3) {
            assert_eq!(f.sigma_at(&p).unwrap(), 0.7);
        }
    }

    #[test]
    fn normalized_point_gets_base_sigma() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = 0.5;
        let f = SigmaField::new(&pts, 0.3, 2.0, 2, m, None).unwrap();
        assert_eq!(f.mean_knn_distance(&[0.0]).unwrap(), 0.5);
        assert!((f.sigma_at(&[0.0]).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn duplicated_points_give_zero_distance() {
        let pts = vec![vec![1.0, 1.0]; 4];
        let f = SigmaField::new(&pts, 1.0, 1.0, 3, 0.0, None).unwrap();
        assert_eq!(f.mean_knn_distance(&[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn cluster_gets_smaller_sigma_than_isolated_point() {
        let mut pts: Vec<Vec<f64>> = (0..20).map(|i| vec![0.01 * i as f64, 0.0]).collect();
        pts.push(vec![10.0, 10.0]);
        let f = SigmaField::new(&pts, 0.5, 0.3, 5, 0.0, None).unwrap();
        assert!(f.sigma_at(&pts[3]).unwrap() < f.sigma_at(&pts[20]).unwrap());
    }

    #[test]
    fn knn_matches_sort_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(&mut rng, 200, 5);
        let f = SigmaField::new(&pts, 1.0, 0.1, 7, 0.0, None).unwrap();
        for x in random_points(&mut rng, 20, 5) {
            let mut all: Vec<f64> = pts.iter().map(|p| dist(p, &x)).collect();
            all.sort_by(f64::total_cmp);
            let oracle = all[..7].iter().sum::<f64>() / 7.0;
            assert!((f.mean_knn_distance(&x).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_broken_by_index() {
        let pts = vec![vec![1.0], vec![-1.0], vec![1.0], vec![3.0]];
        let f = SigmaField::new(&pts, 1.0, 0.1, 2, 0.0, None).unwrap();
        let nn = f.nearest_neighbors(&[0.0]).unwrap();
        assert_eq!(nn.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn exclusion_skips_coincident_point() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        let f = SigmaField::new(&pts, 1.0, 0.1, 1, 0.0, None)
            .unwrap()
            .with_neighborhood(Neighborhood::ExcludeCoincident);
        assert_eq!(f.mean_knn_distance(&[0.0]).unwrap(), 1.0);
        assert_eq!(f.mean_knn_distance(&[0.5]).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch_and_bad_k() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let f = SigmaField::new(&pts, 1.0, 0.1, 2, 0.0, None).unwrap();
        assert!(matches!(
            f.sigma_at(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(SigmaField::new(&pts, 1.0, 0.1, 3, 0.0, None).is_err());
    }

    #[test]
    fn semi_elasticity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = random_points(&mut rng, 60, 4);
        for cap in [None, Some(0.9)] {
            let f = SigmaField::new(&pts, 0.5, 0.8, 6, 1.0, cap).unwrap();
            let pairs: Vec<_> = (0..2000)
                .map(|_| {
                    let a: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
                    let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
                    (a, b)
                })
                .collect();
            let rep = verify_semi_elasticity(&f, &pairs).unwrap();
            assert!(rep.violations.is_empty());
            assert!(rep.max_observed_rate <= 0.8 + 1e-12);
            assert!(rep.max_observed_rate > 0.1);
        }
    }

    #[test]
    fn semi_elasticity_across_a_neighbor_switch() {
        // one neighbor, refs at -1 and +1: the neighbor set flips at 0
        let pts = vec![vec![-1.0], vec![1.0]];
        let f = SigmaField::new(&pts, 1.0, 0.5, 1, 0.0, None).unwrap();
        let pair = vec![(vec![-0.3], vec![0.2])];
        let rep = verify_semi_elasticity(&f, &pair).unwrap();
        assert!(rep.violations.is_empty());
        assert!(rep.max_observed_rate <= 0.5);
    }

    #[test]
    fn zero_rate_reports_zero() {
        let f = SigmaField::constant(2, 0.4).unwrap();
        let rep = verify_semi_elasticity(&f, &[(vec![0.0, 0.0], vec![1.0, 2.0])]).unwrap();
        assert_eq!(rep.max_observed_rate, 0.0);
    }

    #[test]
    fn calibration_modes() {
        let same = vec![vec![2.0, 2.0]; 5];
        assert_eq!(
            calibrate_m(&same, 2, CalibrationMode::MinDist).unwrap(),
            0.0
        );
        assert_eq!(
            calibrate_m(&same, 2, CalibrationMode::MeanDist).unwrap(),
            0.0
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = random_points(&mut rng, 20, 2);
        pts.extend(
            random_points(&mut rng, 20, 2)
                .into_iter()
                .map(|p| vec![p[0] + 10.0, p[1] * 0.1]),
        );
        let lo = calibrate_m(&pts, 3, CalibrationMode::MinDist).unwrap();
        let hi = calibrate_m(&pts, 3, CalibrationMode::MeanDist).unwrap();
        assert!(lo <= hi && lo > 0.0);
        assert!(calibrate_m(&pts, 40, CalibrationMode::MinDist).is_err());
    }

    #[test]
    fn calibration_uses_leave_self_out() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        // leave-self-out 1-NN distances: 1, 1, 2
        assert_eq!(calibrate_m(&pts, 1, CalibrationMode::MinDist).unwrap(), 1.0);
        assert!(
            (calibrate_m(&pts, 1, CalibrationMode::MeanDist).unwrap() - 4.0 / 3.0).abs() < 1e-15
        );
    }

    #[test]
    fn continuity_along_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts = random_points(&mut rng, 40, 3);
        let f = SigmaField::new(&pts, 0.5, 0.6, 4, 1.0, None).unwrap();
        let (a, b) = (vec![-2.0, 0.0, 1.0], vec![2.0, 1.0, -1.0]);
        let jump = |steps: usize| {
            let mut prev = f.sigma_at(&a).unwrap();
            let mut worst: f64 = 0.0;
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                let p: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + t * (v - u)).collect();
                let cur = f.sigma_at(&p).unwrap();
                worst = worst.max((cur - prev).abs());
                prev = cur;
            }
            worst
        };
        assert!(jump(4000) < jump(400));
        assert!(jump(4000) < 1e-3);
    }
}
