//! The fixed-σ₁ Rényi certificate, which vanishes as the dimension grows.

use idrs::renyi::{renyi_certified_radius, RenyiQuery};

fn main() -> idrs::Result<()> {
    for n in [1, 2, 5, 10, 20, 50, 100, 1000] {
        let r = renyi_certified_radius(&RenyiQuery::new(1.0, 0.8, n, 0.99, 0.01)?)?;
        println!(
            "N = {n:5}: radius {:.5}  (α = {:.3})",
            r.radius, r.best_alpha
        );
    }
    Ok(())
}
