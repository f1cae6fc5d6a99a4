//! The Neyman–Pearson region between two isotropic Gaussians and its mass.

use idrs::worst_case::{ball_probability_exact, worst_case_ball, xi, AdversaryPair};

fn main() -> idrs::Result<()> {
    let x0 = [0.0, 0.0, 0.0];
    let x1 = [0.5, 0.0, 0.0];
    let ball = worst_case_ball(&x0, &x1, 1.0, 0.8, 1.0)?;
    println!(
        "level 1 region: {:?} centred at {:?}, radius {:.4}",
        ball.orientation, ball.center, ball.radius
    );
    println!(
        "mass under P₀ {:.4}, under P₁ {:.4}",
        ball_probability_exact(&x0, 1.0, &ball)?,
        ball_probability_exact(&x1, 0.8, &ball)?
    );
    let pair = AdversaryPair::new(1.0, 0.8, 0.5, 3, 0.9)?;
    println!("ξ for pA = 0.9: {:.5}", xi(&pair)?);
    Ok(())
}
