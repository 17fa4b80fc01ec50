//! Calderon-Zygmund pieces: the chi+- split of K1, K2 and the g kernels, the truncated
//! Hilbert transform on an indicator, and L^1 outputs on atoms with BMO outputs on L^inf.

use bischrodinger::grid::make_grid;
use bischrodinger::wave_ops::{atom_bmo_suite, cz_apply, decomposition_defect, CZKernelSpec, CZKind};
use num_complex::Complex64;

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(12.0, 200)?;
    let one = Complex64::new(1.0, 0.0);
    for spec in [
        CZKernelSpec::new(CZKind::K1 { plus: true })?,
        CZKernelSpec::new(CZKind::K2 { plus: false })?,
        CZKernelSpec::g(1, true, one, Complex64::new(0.3, 0.2))?,
        CZKernelSpec::g(4, false, one, Complex64::new(-0.5, 1.0))?,
    ] {
        println!("{:?}: split defect {:.1e}", spec.kind, decomposition_defect(&spec, &g, 11)?);
    }

    // int_{-1}^{1} dy / (5 - y) = ln(6 / 4)
    let gi = make_grid(9.0, 370)?;
    let ind = gi.sample_real(|x| {
        if x.abs() < 1.0 {
            1.0
        } else if x.abs() == 1.0 {
            0.5
        } else {
            0.0
        }
    });
    let out = cz_apply(&CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 2.0 })?, &ind)?;
    let k = gi.x().iter().position(|x| (x - 5.0).abs() < 1e-9).expect("node at 5");
    println!("truncated Hilbert at 5: {:.6} (ln 1.5 = {:.6})", out.values[k].re, 1.5f64.ln());

    let ga = make_grid(40.0, 800)?;
    let h = CZKernelSpec::new(CZKind::TruncatedHilbert { eps: 0.3 })?;
    let r = atom_bmo_suite(&h.matrix(&ga), &ga, 30, (2.0, 10.0), 5)?;
    println!("atoms: max ||H a||_1 {:.3}, envelope slope {:+.3}; max BMO {:.3}", r.max_l1, r.envelope_slope, r.max_bmo);
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
