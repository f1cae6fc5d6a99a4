//! Monte Carlo certification of single points with constant σ and with a
//! σ field, for a ball-shaped base classifier.

use idrs::certify::{certify_point, idrs_certified_radius, RadiusSearchConfig};
use idrs::sigma::SigmaField;
use idrs::smoothing::{certify_constant, BallIndicator, SmoothingConfig};

fn main() -> idrs::Result<()> {
    let f = BallIndicator {
        center: vec![0.0, 0.0],
        radius: 3.0,
    };
    let cfg = SmoothingConfig {
        n: 20_000,
        ..SmoothingConfig::default()
    };
    let search = RadiusSearchConfig::default();
    let reference: Vec<Vec<f64>> = (0..50)
        .map(|i| {
            let t = i as f64 * 0.7;
            vec![2.0 * t.cos(), 2.0 * t.sin()]
        })
        .collect();
    let field = SigmaField::new(&reference, 0.3, 0.1, 5, 0.5, Some(1.5))?;
    for x in [[0.0, 0.0], [1.5, 0.0], [2.8, 0.0], [6.0, 0.0]] {
        let c = certify_constant(&f, 0.3, &x, &cfg)?;
        let v = certify_point(&f, &field, &x, &cfg, &search)?;
        println!(
            "{x:?}: constant {:?} r={:.3} | field σ₀={:.3} {:?} r={:.3}",
            c.predicted, c.radius, v.sigma0, v.predicted, v.radius
        );
    }

    // radius as a function of the rate, for fixed pA
    for rate in [0.0, 0.05, 0.2, 0.5] {
        let out = idrs_certified_radius(0.5, rate, 784, 0.999, 0.001, &search)?;
        println!("N=784 rate {rate}: radius {:.4}", out.radius);
    }
    Ok(())
}
