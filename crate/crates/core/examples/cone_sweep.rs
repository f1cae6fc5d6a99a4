//! Constant σ against IDRS on the cone dataset across dimensions.
//!
//! `cargo run --release --example cone_sweep -- [n] [seeds]`

use idrs::config::RunConfig;
use idrs::experiments::cone_sweep;

fn main() -> idrs::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = RunConfig::default();
    cfg.smoothing.n = n;
    let settings = [
        (2, 0.5, 0.4, 0.2),
        (6, 0.5, 0.4, 0.1),
        (18, 1.0, 0.8, 0.05),
        (60, 1.0, 0.8, 0.03),
    ];
    for row in cone_sweep(&cfg, &settings, &(0..seeds).collect::<Vec<_>>())? {
        println!(
            "N={:3}: constant σ={} clean {:.3} | σ_b={} r={} clean {:.3} (mean σ {:.3})",
            row.dim,
            row.constant_sigma,
            row.constant_clean,
            row.sigma_b,
            row.rate,
            row.idrs_clean,
            row.idrs_mean_sigma
        );
    }
    Ok(())
}
