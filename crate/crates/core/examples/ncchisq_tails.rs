//! Noncentral chi-squared CDF, tail and quantile, including the regime where
//! the strict policy refuses to approximate.

use idrs::special::{chernoff_central_bound, NcChiSq, NumericsPolicy};

fn main() -> idrs::Result<()> {
    for (dof, lambda) in [(2, 0.0), (10, 5.0), (784, 100.0), (3072, 4000.0)] {
        let d = NcChiSq::new(dof, lambda)?;
        let median = d.quantile(0.5)?;
        println!(
            "N={dof:5} λ={lambda:7}: mean {:9.2}  median {median:9.3}  cdf(mean) {:.6}  sf(2·mean) {:.3e}",
            d.mean(),
            d.cdf(d.mean())?,
            d.sf(2.0 * d.mean())?
        );
    }

    // a central tail and its Chernoff bound
    let d = NcChiSq::central(100)?;
    println!(
        "P(χ²₁₀₀ > 200) = {:.3e} ≤ {:.3e}",
        d.sf(200.0)?,
        chernoff_central_bound(100, 2.0)?
    );

    let huge = NcChiSq::new(10, 1e9)?;
    match huge.cdf_with(1e9, &NumericsPolicy::strict()) {
        Ok(v) => println!("λ=1e9: {:.6} via {:?}", v.value, v.path),
        Err(e) => println!("λ=1e9 under the strict policy: {e}"),
    }
    let v = huge.cdf_with(1e9, &NumericsPolicy::default())?;
    println!(
        "λ=1e9 with the default policy: {:.6} via {:?}",
        v.value, v.path
    );
    Ok(())
}
