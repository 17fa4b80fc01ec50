//! Zero-energy classification two ways: shooting through the connection matrix and the
//! blow-up exponent of ||M(lambda)^-1|| as lambda -> 0.

use bischrodinger::birman_schwinger::concordance_exponent;
use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{resonance_builder, sample_potential, PotentialSpec, Profile};
use bischrodinger::spectral::{classify_zero_energy, ZeroClass};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(10.0, 512)?;
    let specs = [
        ("free", PotentialSpec::Zero),
        ("bump", PotentialSpec::bump(1.0, 2.0)),
        ("first kind", resonance_builder(1.0, 1.0, Profile::default())?),
        ("second kind", resonance_builder(0.0, 1.0, Profile::default())?),
    ];
    for (name, spec) in specs {
        let v = sample_potential(&spec, &g)?;
        let c = classify_zero_energy(&v)?;
        let e = concordance_exponent(&v)?;
        println!(
            "{name:<12} shooting {:?}, exponent {:+.3} -> {:?} (expected {})",
            c.class,
            e.exponent,
            ZeroClass::from_exponent(e.exponent),
            c.class.expected_exponent()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
