//! M(lambda) = U + v R0 v, its inverse, the orthogonal projections Q_alpha and the fitted
//! low-energy expansion of M^-1 for a regular bump.

use bischrodinger::birman_schwinger::{
    build_m, build_projections, cancellation_exponent, default_powers, fit_inverse_expansion, m_inverse,
    resolvent_identity_defect, VUFactorization,
};
use bischrodinger::free_ops::Sign;
use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{sample_potential, PotentialSpec};
use bischrodinger::quad::geomspace;
use bischrodinger::spectral::ZeroClass;

pub fn run() -> bischrodinger::Result<()> {
    let v = sample_potential(&PotentialSpec::bump(1.0, 2.0), &make_grid(10.0, 256)?)?;
    let vu = VUFactorization::new(&v)?;
    let m = build_m(&vu, 0.5, Sign::Plus)?;
    println!("M(0.5) is {}x{}, self-adjoint {}", m.m.nrows(), m.m.ncols(), m.is_self_adjoint(1e-8));
    let inv = m_inverse(&vu, 0.05, Sign::Plus)?;
    println!("M(0.05)^-1: residual {:.1e}, condition {:.1e}, Woodbury {}", inv.residual, inv.cond, inv.woodbury);

    let ps = build_projections(&vu)?;
    println!("projection defect {:.1e}, rank Q2^0 {}, rank Q3 {}", ps.projection_defect(), ps.rank_q2_0, ps.rank_q3);

    let lams = geomspace(1e-3, 1e-1, 6);
    for a in 1..=3 {
        println!("cancellation alpha = {a}: exponent {:+.3}", cancellation_exponent(&v, a, &lams)?.exponent);
    }

    let fit = fit_inverse_expansion(&vu, &geomspace(1e-3, 1e-1, 12), &default_powers(ZeroClass::Regular))?;
    let r = fit.report(&vu, &ps, ZeroClass::Regular);
    println!("expansion residual {:.1e}", r.max_residual);
    if let Some((re, im)) = r.ptilde_measured {
        let (ere, eim) = r.ptilde_expected;
        println!("<v, B3 v> = {re:.5} {im:+.5}i, expected {ere:.5} {eim:+.5}i");
    }

    let f = v.grid.sample_real(|x| (-x * x).exp());
    println!("(H - 1) R_V+ f = f up to {:.2e}", resolvent_identity_defect(&v, 1.0, &f, true)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
