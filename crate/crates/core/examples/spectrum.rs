//! Exact and perturbative levels of the anharmonic oscillator.
//!
//!     cargo run --example spectrum

use susygate::spectrum::{anharmonic_spectrum, perturbative_energies};

fn main() -> susygate::Result<()> {
    let (c1, c2) = (0.02, 0.01);
    let exact = anharmonic_spectrum(c1, c2, 6, None)?;
    let pt = perturbative_energies(c1, c2, 5, exact.cutoff_raw)?;
    println!("H0 = (P^2+Q^2)/2 + {c1} Q^3 + {c2} Q^4, cutoff {}", exact.cutoff_raw);
    println!("{:>3} {:>14} {:>14} {:>10}", "n", "exact", "second order", "diff");
    for (n, (e, p)) in exact.kept_energies().iter().zip(&pt).enumerate() {
        println!("{n:>3} {e:>14.10} {p:>14.10} {:>10.2e}", e - p);
    }

    let finer = anharmonic_spectrum(c1, c2, 6, Some(exact.cutoff_raw * 3 / 2))?;
    let drift = exact.kept_energies().iter().zip(finer.kept_energies()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("largest level shift when the cutoff grows by half: {drift:.1e}");
    Ok(())
}
