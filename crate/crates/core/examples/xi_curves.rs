//! Worst-case class-B probability at an adversary `a` away, for a smaller
//! and a larger σ at the adversary, next to the constant-σ half-space value.

use idrs::experiments::{linspace, xi_curve};
use idrs::special::NumericsPolicy;

fn main() -> idrs::Result<()> {
    let grid = linspace(0.0, 2.0, 9);
    for sigma1 in [0.95, 1.05] {
        println!("σ₀ = 1, σ₁ = {sigma1}, N = 100, pA = 0.99");
        for row in xi_curve(1.0, sigma1, 100, 0.99, &grid, &NumericsPolicy::default())? {
            println!(
                "  a = {:.2}: ξ = {:.5}  half-space {:.5}",
                row.distance, row.xi, row.half_space
            );
        }
    }
    Ok(())
}
