//! Partner Hamiltonians and the Witten index for a few superpotentials.
//!
//!     cargo run --example susy_index

use susygate::susy_toy::{susy_pair, witten_index, DEFAULT_ZERO_TOL};

fn main() -> susygate::Result<()> {
    for (label, w) in [("q^2/2", vec![0.0, 0.0, 0.5]), ("q^3/3", vec![0.0, 0.0, 0.0, 1.0 / 3.0]), ("q^4/4", vec![0.0, 0.0, 0.0, 0.0, 0.25])] {
        let pair = susy_pair(&w, 128)?;
        let rep = witten_index(&pair, DEFAULT_ZERO_TOL)?;
        let (plus, minus) = pair.positive_levels(DEFAULT_ZERO_TOL, 4);
        println!("W = {label}: index {} ({:?}), lowest energy {:.4}", rep.index, rep.phase, rep.vacuum_energy);
        println!("  H+ {:?}", plus.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>());
        println!("  H- {:?}", minus.iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>());
    }
    Ok(())
}
