//! Free resolvent of d^4 - lambda^4, its jump across the spectrum, the F_{alpha,beta}
//! expansion, Taylor splits, and the free Fourier propagator.

use bischrodinger::free_ops::{
    f_alpha_beta, free_propagator, free_resolvent_kernel, resolvent_entry, resolvent_jump_entry, taylor_split, FKind,
    Sign, SpectralParam,
};
use bischrodinger::grid::make_grid;
use num_complex::Complex64;

pub fn run() -> bischrodinger::Result<()> {
    let plus = SpectralParam::new(0.8, Sign::Plus)?;
    let minus = SpectralParam::new(0.8, Sign::Minus)?;
    for r in [0.0, 1.0, 4.0] {
        let jump = resolvent_entry(plus, r) - resolvent_entry(minus, r);
        println!(
            "r = {r}: R+ {:.5} jump {:.5} closed form {:.5}",
            resolvent_entry(plus, r),
            jump,
            resolvent_jump_entry(0.8, r)
        );
    }

    let g = make_grid(5.0, 64)?;
    let k = free_resolvent_kernel(plus, &g);
    println!("kernel symmetric: {}", k.is_symmetric(0.0));

    let v = f_alpha_beta(0.9, 1.3, -0.4, 2, 1)?;
    println!("F_21: direct {:.6} expansion {:.6}", v.direct, v.expansion);

    let t = taylor_split(1.1, 0.6, 0.3, 3, FKind::TildePlus)?;
    println!("Taylor order 3: |reconstruct - direct| = {:.1e}", (t.reconstruct() - t.direct()).norm());

    let g = make_grid(40.0, 1024)?;
    let f = g.sample(|x| Complex64::from_polar((-x * x / 32.0).exp(), x));
    let u = free_propagator(5.0, &f);
    println!("|e^-5i d^4 f|_2 = {:.6} (|f|_2 = {:.6}), edge mass {:.1e}", u.u.l2(), f.l2(), u.boundary_mass);
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
