//! Potentials: compact bumps, engineered zero-energy resonances, a zero eigenvalue with
//! <x>^-4 decay, and the sech potential with an eigenvalue embedded at 1.

use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{
    checks, resonance_builder, sample_potential, zero_eigen_builder, PotentialSpec, Profile,
};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(20.0, 512)?;
    let specs = [
        PotentialSpec::bump(1.0, 2.0),
        resonance_builder(1.0, 1.0, Profile::default())?,
        resonance_builder(0.0, 1.0, Profile::default())?,
        zero_eigen_builder(2.0)?,
        PotentialSpec::Embedded,
    ];
    for spec in &specs {
        let v = sample_potential(spec, &g)?;
        let r = checks(&v);
        println!(
            "{:<17} max|V| {:>9.3} even {} repulsive {} decay {:?}",
            r.name, r.max_abs, r.even, r.repulsive, r.decay
        );
    }
    // the embedded potential in closed form: 20 sech^2 - 24 sech^4
    let e = PotentialSpec::Embedded.eval(0.0)?;
    println!("V_embedded(0) = {e}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
