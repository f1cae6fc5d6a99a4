//! Constant-σ against IDRS on the two-dimensional cone dataset.
//!
//! `cargo run --release --example toy_comparison -- [n] [seeds]`

use idrs::config::RunConfig;
use idrs::experiments::run_toy;

fn main() -> idrs::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let n: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seeds: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut cfg = RunConfig::default();
    cfg.smoothing.n = n;
    let seeds: Vec<u64> = (0..seeds).collect();
    let t = std::time::Instant::now();
    let rep = run_toy(&cfg, &seeds)?;
    println!("constant ceiling {:.3}", rep.constant_ceiling);
    for s in &rep.seeds {
        println!(
            "seed {}: base {:.3}  constant clean {:.3}  idrs clean {:.3}  mean sigma {:.3}",
            s.seed,
            s.base_test_accuracy,
            s.constant.clean_accuracy,
            s.idrs.clean_accuracy,
            s.idrs.mean_sigma0
        );
    }
    println!(
        "mean clean: constant {:.4}  idrs {:.4}",
        rep.mean_constant_clean, rep.mean_idrs_clean
    );
    let c = rep.constant_ceiling;
    for r in [0.5, 1.0, 0.95 * c, 1.05 * c, 1.25 * c, 1.5 * c] {
        println!(
            "radius {r:.3}: constant {:.3}  idrs {:.3}",
            rep.mean_certified_accuracy(r, false),
            rep.mean_certified_accuracy(r, true)
        );
    }
    eprintln!("elapsed {:?}", t.elapsed());
    Ok(())
}
