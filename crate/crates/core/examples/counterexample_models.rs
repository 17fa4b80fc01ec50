//! The two model kernels: g1+ grows like 2 log(R + 1) on indicators f_R while the odd
//! K1^0 model stays bounded.

use bischrodinger::grid::make_grid;
use bischrodinger::wave_ops::counterexample_sweep;

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(80.0, 4096)?;
    let r = counterexample_sweep(&[5.0, 10.0, 20.0, 40.0], &g, (1e4, 1e8), None)?;
    for (a, b) in r.model_a.iter().zip(&r.model_b) {
        println!(
            "R = {:>4}: g1+ {:.4} vs {:.4} (rel {:.1e}); K1^0 sup {:.4}",
            a.r, a.value, a.expected, a.rel_err, b.1
        );
    }
    println!("tail slope against ln R' {:.3}; K1^0 sup slope {:+.3}", r.tail_slope, r.model_b_slope);
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
