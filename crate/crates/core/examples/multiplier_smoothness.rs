//! Hormander (sup over dilations of ||eta f(delta .)||_{H^s}) and Mikhlin
//! (sup |lambda^k f^(k)|) checks, each at two resolutions.

use bischrodinger::propagator_multiplier::{hormander_mikhlin_check, MultiplierSpec};

pub fn run() -> bischrodinger::Result<()> {
    for f in [
        MultiplierSpec::constant(1.0),
        MultiplierSpec::heat(),
        MultiplierSpec::imaginary_power(1.0),
        MultiplierSpec::jump(1.0),
    ] {
        let r = hormander_mikhlin_check(&f, 1.0)?;
        println!(
            "{:<10} M = {:.4} (refined {:.4}) Mikhlin {:.3?} (refined {:.3?}) pass {}",
            r.name, r.hormander_m, r.hormander_m_refined, r.mikhlin, r.mikhlin_refined, r.pass
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
