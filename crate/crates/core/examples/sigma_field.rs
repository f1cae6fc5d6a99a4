//! A k-NN variance field on generated data and an empirical check of its
//! semi-elasticity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idrs::config::FieldConfig;
use idrs::datasets::{generate_sector, SectorDatasetSpec};
use idrs::sigma::verify_semi_elasticity;

fn main() -> idrs::Result<()> {
    let data = generate_sector(&SectorDatasetSpec::default())?;
    let field = FieldConfig::default().build(&data)?;
    println!(
        "m = {:.4}, σ_b = {}, r = {}",
        field.m(),
        field.sigma_b(),
        field.rate()
    );
    for x in [[0.0, 0.0], [1.0, 1.0], [3.0, -2.0], [10.0, 10.0]] {
        println!("σ({x:?}) = {:.4}", field.sigma_at(&x)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..2000)
        .map(|_| {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-4.0..4.0)).collect();
            let b: Vec<f64> = a.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
            (a, b)
        })
        .collect();
    let rep = verify_semi_elasticity(&field, &pairs)?;
    println!(
        "{} pairs: max log-ratio rate {:.4} (bound {}), {} violations",
        rep.pairs_checked,
        rep.max_observed_rate,
        field.rate(),
        rep.violations.len()
    );
    Ok(())
}
