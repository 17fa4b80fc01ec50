//! L^p bounds for a wave operator: a lower bound from a probe family and the Schur
//! upper bound of the absolute kernel, unweighted and with an even power weight.

use bischrodinger::grid::{make_grid, WeightSpec};
use bischrodinger::potentials::{sample_potential, PotentialSpec};
use bischrodinger::wave_ops::{lp_norm_probe, stationary_wave_op, QuadConfig};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(32.0, 256)?;
    let v = sample_potential(&PotentialSpec::bump(0.5, 1.5), &g)?;
    let w = stationary_wave_op(&v, &QuadConfig::default())?;
    for (p, weight) in
        [(1.0, WeightSpec::Unit), (2.0, WeightSpec::Unit), (4.0, WeightSpec::Unit), (2.0, WeightSpec::Power { a: 0.5 })]
    {
        let r = lp_norm_probe(&w.w, &g, p, &weight, 18, 1)?;
        println!(
            "p = {p} {weight:?}: {:.4} <= ||W|| <= {:.4} (worst {})",
            r.lower_bound, r.upper_bound, r.worst_member
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
