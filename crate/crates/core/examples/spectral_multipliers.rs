//! f(H) two ways: directly on the eigenpairs of the periodic H, and as
//! sum f(lambda_j) P_j + W f(d^4) W*, compared on a band-limited packet family.

use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{sample_potential, PotentialSpec};
use bischrodinger::propagator_multiplier::{completeness_defect, spectral_multiplier, MultiplierSpec};
use bischrodinger::spectral::{build_hamiltonian, eigendecompose, Boundary, SpectralOptions};
use bischrodinger::wave_ops::{stationary_wave_op, QuadConfig, WavePacketFamily};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(32.0, 256)?;
    let v = sample_potential(&PotentialSpec::bump(-2.0, 1.5), &g)?;
    let sd = eigendecompose(&build_hamiltonian(&v, Boundary::Periodic)?, SpectralOptions::default())?;
    let w = stationary_wave_op(&v, &QuadConfig::default())?;
    for k in sd.point_indices() {
        println!("bound state {:.5}", sd.eigenvalues[k]);
    }
    let fam =
        WavePacketFamily { centers: vec![-4.0, 0.0, 4.0], wavenumbers: vec![0.0, 0.8, 1.5], sigma: 3.0 }.matrix(&g);
    for f in [
        MultiplierSpec::constant(1.0),
        MultiplierSpec::heat(),
        MultiplierSpec::bump(1.0, 0.5),
        MultiplierSpec::negative_part(),
    ] {
        let (c, _, _) = spectral_multiplier(&sd, &w, &f, &fam)?;
        println!("{:<11} route distance {:.3e}, |f(H) F - F| / |F| = {:.3}", c.name, c.distance, c.eigen_vs_input);
    }
    println!("sum P_j + W W* - I: {:.3e}", completeness_defect(&sd, &w));
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
