//! Decay of ||e^{-itH} P_ac f||_q / ||f||_p: log-log exponents against -(1/4)(1/p - 1/q)
//! and membership of (1/p, 1/q) in the admissible quadrangle.

use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{sample_potential, PotentialSpec};
use bischrodinger::propagator_multiplier::{decay_scan, in_region, DecayConfig};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(400.0, 4096)?;
    let cfg = DecayConfig { centers: vec![0.0, 20.0, 60.0], ..DecayConfig::default() };
    for (name, spec) in [("free", PotentialSpec::Zero), ("bump", PotentialSpec::bump(0.5, 1.5))] {
        let v = sample_potential(&spec, &g)?;
        let r = decay_scan(&v, &[(1.0, 0.0), (0.75, 0.25), (0.5, 0.5)], &cfg)?;
        for row in &r.rows {
            println!(
                "{name:<5} (1/p, 1/q) = ({}, {}): {:+.4} +- {:.4}, predicted {:+.4}",
                row.inv_p, row.inv_q, row.exponent, row.stderr, row.predicted
            );
        }
        println!("{name:<5} fit window {} of {} times", r.window, r.times.len());
    }
    for (x, y) in [(0.5, 0.5), (0.75, 0.25), (1.0, 0.0), (1.0, 1.0)] {
        println!("({x}, {y}) in region: {}", in_region(x, y)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
