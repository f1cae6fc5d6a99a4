use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use idrs::datasets::{load_dataset, save_dataset, Dataset};
use idrs::renyi::{renyi_certified_radius, RenyiQuery};
use idrs::smoothing::{certify_constant, BallIndicator, SmoothingConfig};
use idrs::special::{chernoff_central_bound, NcChiSq};
use idrs::worst_case::{xi, AdversaryPair};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ncchsq_quantile_round_trip(dof in 1u32..=4000, log_lambda in -3.0f64..6.0, p in 1e-6f64..(1.0 - 1e-6)) {
        let d = NcChiSq::new(dof, 10f64.powf(log_lambda))?;
        let x = d.quantile(p)?;
        prop_assert!((d.cdf(x)? - p).abs() <= 1e-8, "x = {x}");
    }

    #[test]
    fn ncchsq_cdf_nonincreasing_in_lambda(dof in 1u32..=2000, l1 in 0.0f64..500.0, dl in 0.0f64..500.0, scale in 0.05f64..3.0) {
        let x = scale * (dof as f64 + l1);
        let lo = NcChiSq::new(dof, l1)?.cdf(x)?;
        let hi = NcChiSq::new(dof, l1 + dl)?.cdf(x)?;
        prop_assert!(hi <= lo + 1e-12);
    }

    #[test]
    fn chernoff_dominates_central_tails(dof in 1u32..=3000, z in 0.01f64..5.0) {
        prop_assume!((z - 1.0).abs() > 1e-6);
        let d = NcChiSq::central(dof)?;
        let bound = chernoff_central_bound(dof, z)?;
        let tail = if z < 1.0 { d.cdf(z * dof as f64)? } else { d.sf(z * dof as f64)? };
        prop_assert!(tail <= bound * (1.0 + 1e-10), "{tail} > {bound}");
    }

    #[test]
    fn renyi_radius_nonincreasing_in_dimension(sigma1 in 0.6f64..0.99, p_a in 0.6f64..0.9999, n in 1u32..200) {
        let at = |n| -> idrs::Result<f64> {
            Ok(renyi_certified_radius(&RenyiQuery::new(1.0, sigma1, n, p_a, 1.0 - p_a)?)?.radius)
        };
        prop_assert!(at(n + 1)? <= at(n)? + 1e-9);
    }

    #[test]
    fn dataset_csv_round_trip(rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0usize..4), 1..40)) {
        let (points, labels): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let data = Dataset::new(points, labels)?;
        let file = tempfile::NamedTempFile::new().unwrap();
        save_dataset(file.path(), &data)?;
        prop_assert_eq!(load_dataset(file.path())?, data);
    }
}

#[test]
fn central_median_sandwich() {
    for n in 1..=4000u32 {
        let m = NcChiSq::central(n).unwrap().quantile(0.5).unwrap();
        assert!(n as f64 - 1.0 <= m && m < n as f64, "N = {n}: median {m}");
    }
}

#[test]
fn abstains_exactly_when_lower_bound_is_at_most_half() {
    let f = BallIndicator {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let cfg = SmoothingConfig {
        n: 2000,
        ..SmoothingConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let x = [rng.random_range(0.0..2.0), 0.0];
        let r = certify_constant(&f, rng.random_range(0.2..1.0), &x, &cfg).unwrap();
        assert_eq!(r.abstained(), r.p_a_lower <= 0.5, "{r:?}");
        assert_eq!(r.abstained(), r.radius == 0.0 && r.predicted.is_none());
    }
}

/// Regions built from unions of random balls, scaled by Monte Carlo until
/// their `P₀` mass is at most `p_B`, never beat the worst-case ball under `P₁`
/// by more than three standard errors.
#[test]
fn no_region_beats_the_worst_case_ball() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 20_000;
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let dim = rng.random_range(1..=3usize);
        let sigma1 = rng.random_range(0.5..0.95);
        let a = rng.random_range(0.0..2.0);
        let p_b = rng.random_range(0.02..0.4);
        let balls: Vec<(Vec<f64>, f64)> = (0..rng.random_range(1..=3))
            .map(|_| {
                let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..3.0)).collect();
                (c, rng.random_range(0.2..1.5))
            })
            .collect();
        let sample = |mean: f64, sigma: f64, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..draws)
                .map(|_| {
                    (0..dim)
                        .map(|k| {
                            let z: f64 = StandardNormal.sample(rng);
                            if k == 0 {
                                mean + sigma * z
                            } else {
                                sigma * z
                            }
                        })
                        .collect()
                })
                .collect()
        };
        let inside = |x: &[f64], s: f64| {
            balls.iter().any(|(c, r)| {
                x.iter().zip(c).map(|(u, v)| (u - v).powi(2)).sum::<f64>() <= (s * r).powi(2)
            })
        };
        let mass = |pts: &[Vec<f64>], s: f64| {
            pts.iter().filter(|x| inside(x, s)).count() as f64 / draws as f64
        };
        let p0 = sample(0.0, 1.0, &mut rng);
        let (mut lo, mut hi) = (0.0, 1.0);
        while mass(&p0, hi) <= p_b && hi < 1e3 {
            hi *= 2.0;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if mass(&p0, mid) <= p_b {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p1 = mass(&sample(a, sigma1, &mut rng), lo);
        let bound =
            xi(&AdversaryPair::new(1.0, sigma1, a, dim as u32, 1.0 - p_b).unwrap()).unwrap();
        let se = (bound * (1.0 - bound) / draws as f64)
            .sqrt()
            .max(1.0 / draws as f64);
        worst = worst.max((p1 - bound) / se);
        assert!(
            p1 <= bound + 3.0 * se,
            "region mass {p1} exceeds ξ = {bound}"
        );
    }
    eprintln!("largest excess in standard errors: {worst:.3}");
}
