//! Even/odd split of operators on a Z2-graded space.
//!
//!     cargo run --example graded_algebra

use susygate::fock::{even_part, odd_part, tau, GradedSpace};
use susygate::matrix::OperatorExt;
use susygate::random::{gaussian_matrix, rng};

fn main() -> susygate::Result<()> {
    let g = GradedSpace::new(2, 3);
    let mut r = rng(0);
    let x = gaussian_matrix(5, 5, &mut r);
    let y = gaussian_matrix(5, 5, &mut r);
    let (e, o) = (even_part(&x, &g)?, odd_part(&x, &g)?);
    println!("theta = {}", g.theta().map(|z| z.re));
    println!("|X_even| = {:.4}, |X_odd| = {:.4}, |X| = {:.4}", e.frobenius(), o.frobenius(), x.frobenius());
    println!("tau(tau X) - X:          {:.1e}", (tau(&tau(&x, &g)?, &g)? - &x).frobenius());
    println!("tau(XY) - tau(X)tau(Y):  {:.1e}", (tau(&(&x * &y), &g)? - tau(&x, &g)? * tau(&y, &g)?).frobenius());
    println!("even * odd is odd:       {:.1e}", (even_part(&(&e * &o), &g)?).frobenius());
    Ok(())
}
