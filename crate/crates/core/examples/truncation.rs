//! The waterfall: certified radius against distance to a linear boundary
//! levels off at `σ Φ⁻¹(α^{1/n})`.

use idrs::experiments::{linspace, truncation_table};
use idrs::smoothing::{truncation_ceiling, SmoothingConfig};

fn main() -> idrs::Result<()> {
    let cfg = SmoothingConfig::default();
    println!("ceiling {:.4}", truncation_ceiling(1.0, cfg.n, cfg.alpha)?);
    for row in truncation_table(1.0, &linspace(0.0, 6.0, 13), &cfg)? {
        println!(
            "distance {:.1}: pA {:.6}  radius {:.4}",
            row.distance, row.p_a, row.radius
        );
    }
    Ok(())
}
