//! Sampled functions on a symmetric grid: weighted L^p, weak L^1, BMO, A_p and atoms.

use bischrodinger::grid::{ap_characteristic, bmo_norm, lp_norm, make_atom, make_grid, weak_l1, WeightSpec};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(10.0, 1000)?;
    let gauss = g.sample_real(|x| (-x * x).exp());
    // int e^{-x^2} = sqrt(pi)
    println!(
        "||e^-x^2||_1 = {:.6} (sqrt pi = {:.6})",
        lp_norm(&gauss, 1.0, &WeightSpec::Unit),
        std::f64::consts::PI.sqrt()
    );
    println!("||e^-x^2||_2 with <x>^1 = {:.6}", lp_norm(&gauss, 2.0, &WeightSpec::Japanese { a: 1.0 }));

    let inv = g.sample_real(|x| 1.0 / x.abs().max(g.h));
    println!("weak L1 of 1/|x| = {:.4} (2 on the line)", weak_l1(&inv, &WeightSpec::Unit));

    let log = g.sample_real(|x| x.abs().max(g.h).ln());
    println!("BMO of log|x| = {:.4}", bmo_norm(&log));

    let wg = make_grid(1.0, 512)?;
    for (name, w) in [
        ("unit", WeightSpec::Unit),
        ("|x|^0.5", WeightSpec::Power { a: 0.5 }),
        ("|x|^-2", WeightSpec::Power { a: -2.0 }),
    ] {
        let r = ap_characteristic(&w, 2.0, &wg)?;
        println!("[{name}]_A2 = {:.4} growth slope {:.3} divergent {}", r.value, r.growth_slope, r.divergent);
    }

    let a = make_atom(&g, -1.0, 2.5, 3)?;
    println!("atom valid {} mean {:.1e}", a.is_valid(&g), a.values.iter().sum::<f64>() * g.h);
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
