//! Letting each point pick its own σ breaks the certificate; a semi-elastic
//! σ(x) does not.

use idrs::certify::RadiusSearchConfig;
use idrs::experiments::counterexample_report;

fn main() -> idrs::Result<()> {
    let rep = counterexample_report(
        100_000,
        0.001,
        &[0.02, 0.05, 0.1],
        &RadiusSearchConfig::default(),
    )?;
    let checks = std::iter::once(&rep.naive)
        .chain(&rep.idrs)
        .chain(std::iter::once(&rep.center));
    for c in checks {
        println!(
            "{:22} σ₀ {:9.3}  class {}  radius {:9.3}  probes {:5}  {}",
            c.label,
            c.sigma0,
            c.predicted,
            c.radius,
            c.probes,
            match &c.violation {
                Some(v) => format!("BROKEN at {:?} (class {})", v.point, v.predicted),
                None => "holds".into(),
            }
        );
    }
    Ok(())
}
