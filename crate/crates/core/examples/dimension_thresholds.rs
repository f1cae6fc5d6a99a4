//! How close to 1 the ratio σ₁/σ₀ must stay as the dimension grows.

use idrs::dimension::{
    corollary_bound, practical_threshold, theoretical_threshold, ThresholdQuery,
};

fn main() -> idrs::Result<()> {
    println!(
        "{:>7} {:>8} {:>12} {:>10} {:>10}",
        "N", "pA", "theoretical", "practical", "corollary"
    );
    for n in [10, 100, 784, 3072, 196_608] {
        for p in [0.9, 0.999] {
            let q = ThresholdQuery::new(n, p)?;
            let cor = corollary_bound(&q)
                .ratio()
                .map_or("-".to_string(), |c| format!("{c:.4}"));
            println!(
                "{n:7} {p:8} {:12.4} {:10.4} {cor:>10}",
                theoretical_threshold(&q)?,
                practical_threshold(&q)?
            );
        }
    }
    Ok(())
}
