//! Exact binomial confidence bounds as used for the lower bound on `p_A`.

use idrs::special::{
    binomial_two_sided_pvalue, clopper_pearson_lower, clopper_pearson_upper, BinomialEstimate,
};

fn main() -> idrs::Result<()> {
    for (k, n) in [(0, 100), (50, 100), (990, 1000), (100_000, 100_000)] {
        let est = BinomialEstimate::new(k, n, 0.999)?;
        println!(
            "{k:6}/{n:6}: [{:.6}, {:.6}]",
            clopper_pearson_lower(&est),
            clopper_pearson_upper(&est)
        );
    }
    println!(
        "two-sided p-value of 60/100 against 1/2: {:.4}",
        binomial_two_sided_pvalue(60, 100, 0.5)?
    );
    Ok(())
}
