//! A base classifier `1(‖x‖ ≤ 1)` in the plane, certified far away at
//! `x₀ = (50, 0)`. Letting every point pick the σ that maximizes its own
//! radius gives `x₀` a certificate that swallows the unit ball, where the
//! smoothed prediction is the other class. A semi-elastic σ(x) certified with
//! its envelopes never does.

use serde::Serialize;

use crate::certify::{idrs_certified_radius, RadiusSearchConfig};
use crate::error::Result;
use crate::smoothing::cohen_radius;
use crate::worst_case::smoothed_ball_indicator_exact;

const CENTER: [f64; 2] = [0.0, 0.0];
const BALL_RADIUS: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Probe {
    pub point: [f64; 2],
    pub sigma: f64,
    pub predicted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub label: String,
    pub x0: [f64; 2],
    pub sigma0: f64,
    pub predicted: usize,
    pub p_a: f64,
    pub radius: f64,
    pub probes: usize,
    /// First probe inside the radius whose smoothed prediction differs.
    pub violation: Option<Probe>,
}

impl CertificateCheck {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub schema_version: u32,
    /// Largest `p_A` the certificate may use, `α^{1/n}` for `n` draws.
    pub p_a_cap: f64,
    pub naive: CertificateCheck,
    pub idrs: Vec<CertificateCheck>,
    pub center: CertificateCheck,
}

/// Exact smoothed class and top-class probability at `x` with noise `σ`.
fn smoothed(x: [f64; 2], sigma: f64) -> Result<(usize, f64)> {
    let p1 = smoothed_ball_indicator_exact(&x, sigma, &CENTER, BALL_RADIUS)?;
    Ok(if p1 > 0.5 { (1, p1) } else { (0, 1.0 - p1) })
}

/// The per-point choice: starting from `grid[start]`, climb to the
/// neighbouring σ while the constant-σ radius grows (a local maximizer, as a
/// gradient method would find).
fn naive_sigma(x: [f64; 2], grid: &[f64], start: usize, cap: f64) -> Result<f64> {
    let radius = |i: usize| -> Result<f64> {
        let (_, p) = smoothed(x, grid[i])?;
        let p = p.min(cap);
        cohen_radius(p, 1.0 - p, grid[i])
    };
    let mut i = start;
    let mut here = radius(i)?;
    loop {
        let up = if i + 1 < grid.len() {
            radius(i + 1)?
        } else {
            f64::NEG_INFINITY
        };
        let down = if i > 0 {
            radius(i - 1)?
        } else {
            f64::NEG_INFINITY
        };
        if up > here && up >= down {
            i += 1;
            here = up;
        } else if down > here {
            i -= 1;
            here = down;
        } else {
            return Ok(grid[i]);
        }
    }
}

/// Probes the ball region, then rays toward the ball center and in a ring of
/// directions, at distances up to `radius`.
fn sweep(
    x0: [f64; 2],
    radius: f64,
    predicted: usize,
    sigma_at: &dyn Fn([f64; 2]) -> Result<f64>,
) -> Result<(usize, Option<Probe>)> {
    let toward = {
        let n = (x0[0] * x0[0] + x0[1] * x0[1]).sqrt();
        if n > 0.0 {
            [-x0[0] / n, -x0[1] / n]
        } else {
            [1.0, 0.0]
        }
    };
    let mut dirs = vec![toward];
    for k in 0..16 {
        let a = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
        dirs.push([a.cos(), a.sin()]);
    }
    let mut count = 0;
    let probe = |p: [f64; 2]| -> Result<Option<Probe>> {
        let s = sigma_at(p)?;
        let (c, _) = smoothed(p, s)?;
        Ok((c != predicted).then_some(Probe {
            point: p,
            sigma: s,
            predicted: c,
        }))
    };
    // a 9x9 patch over the ball, whose points the rays may step over,
    // innermost first
    let mut patch: Vec<(i32, i32)> = (-4..=4)
        .flat_map(|i| (-4..=4).map(move |j| (i, j)))
        .collect();
    patch.sort_by_key(|&(i, j)| i * i + j * j);
    for (i, j) in patch {
        let p = [CENTER[0] + 0.25 * i as f64, CENTER[1] + 0.25 * j as f64];
        if ((p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2)).sqrt() > radius {
            continue;
        }
        count += 1;
        if let Some(v) = probe(p)? {
            return Ok((count, Some(v)));
        }
    }
    for d in dirs {
        for i in 0..=400 {
            let t = radius * i as f64 / 400.0;
            count += 1;
            if let Some(v) = probe([x0[0] + t * d[0], x0[1] + t * d[1]])? {
                return Ok((count, Some(v)));
            }
        }
    }
    Ok((count, None))
}

/// σ field `σ_b exp(r (‖x‖ - m))` around the ball, capped.
fn radial_field(sigma_b: f64, rate: f64, cap: f64) -> impl Fn([f64; 2]) -> Result<f64> {
    move |x| Ok((sigma_b * (rate * (x[0] * x[0] + x[1] * x[1]).sqrt()).exp()).min(cap))
}

fn idrs_check(
    label: String,
    x0: [f64; 2],
    sigma_at: &dyn Fn([f64; 2]) -> Result<f64>,
    rate: f64,
    p_a_cap: f64,
    search: &RadiusSearchConfig,
) -> Result<CertificateCheck> {
    let sigma0 = sigma_at(x0)?;
    let (predicted, p) = smoothed(x0, sigma0)?;
    let p_a = p.min(p_a_cap);
    let radius = if p_a > 0.5 {
        idrs_certified_radius(sigma0, rate, 2, p_a, 1.0 - p_a, search)?.radius
    } else {
        0.0
    };
    let (probes, violation) = sweep(x0, radius, predicted, sigma_at)?;
    Ok(CertificateCheck {
        label,
        x0,
        sigma0,
        predicted,
        p_a,
        radius,
        probes,
        violation,
    })
}

/// Builds the report for `x₀ = (50, 0)`, the given IDRS rates, and the
/// degenerate `x₀` at the ball center.
pub fn counterexample_report(
    n: u64,
    alpha: f64,
    rates: &[f64],
    search: &RadiusSearchConfig,
) -> Result<CounterexampleReport> {
    let p_a_cap = alpha.powf(1.0 / n as f64);
    let x0 = [50.0, 0.0];
    // multiplicative grid from 0.25 / 1.15^10 up to about 1000, starting at 0.25
    let grid: Vec<f64> = (-10..=60).map(|i| 0.25 * 1.15f64.powi(i)).collect();
    let naive_at = |x: [f64; 2]| naive_sigma(x, &grid, 10, p_a_cap);
    let s0 = naive_at(x0)?;
    let (c0, p0) = smoothed(x0, s0)?;
    let p_a = p0.min(p_a_cap);
    let radius = cohen_radius(p_a, 1.0 - p_a, s0)?;
    let (probes, violation) = sweep(x0, radius, c0, &naive_at)?;
    let naive = CertificateCheck {
        label: "naive per-point sigma".into(),
        x0,
        sigma0: s0,
        predicted: c0,
        p_a,
        radius,
        probes,
        violation,
    };

    let sigma_b = 0.25;
    let mut idrs = Vec::with_capacity(rates.len());
    for &r in rates {
        let field = radial_field(sigma_b, r, 1e3);
        idrs.push(idrs_check(
            format!("idrs r={r}"),
            x0,
            &field,
            r,
            p_a_cap,
            search,
        )?);
    }
    let field = radial_field(sigma_b, 0.1, 1e3);
    let center = idrs_check(
        "idrs at ball center".into(),
        CENTER,
        &field,
        0.1,
        p_a_cap,
        search,
    )?;
    Ok(CounterexampleReport {
        schema_version: crate::config::SCHEMA_VERSION,
        p_a_cap,
        naive,
        idrs,
        center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_fails_idrs_holds() {
        let rep = counterexample_report(
            100_000,
            0.001,
            &[0.02, 0.05, 0.1],
            &RadiusSearchConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.naive.predicted, 0);
        assert!(rep.naive.radius > 50.0, "{}", rep.naive.radius);
        let v = rep
            .naive
            .violation
            .expect("naive certificate must be broken");
        assert_eq!(v.predicted, 1);
        for c in &rep.idrs {
            assert!(c.is_valid(), "{c:?}");
            assert_eq!(c.predicted, 0);
        }
        assert_eq!(rep.center.predicted, 1);
        assert!(
            rep.center.radius > 0.0 && rep.center.radius < 1.0,
            "{}",
            rep.center.radius
        );
        assert!(rep.center.is_valid());
    }
}
