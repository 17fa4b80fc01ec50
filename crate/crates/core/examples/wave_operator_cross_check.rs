//! Wave operators for a regular bump: the stationary lambda-integral against the
//! Cesaro-averaged e^{itH} e^{-it d^4}, with isometry and intertwining checks, then a
//! save/load round trip through the binary container.

use bischrodinger::grid::make_grid;
use bischrodinger::potentials::{sample_potential, PotentialSpec};
use bischrodinger::wave_ops::{
    read_bundle, wave_cross_check, write_bundle, QuadConfig, TimeSchedule, WavePacketFamily,
};

pub fn run() -> bischrodinger::Result<()> {
    let g = make_grid(64.0, 512)?;
    let v = sample_potential(&PotentialSpec::bump(0.5, 1.5), &g)?;
    let (c, w) = wave_cross_check(&v, &QuadConfig::default(), &WavePacketFamily::default(), &TimeSchedule::default())?;
    println!("stationary vs time-dependent {:.3e}", c.stationary_vs_time);
    println!("isometry {:.3e} / {:.3e}, intertwining {:.3e}", c.isometry_stationary, c.isometry_time, c.intertwining);
    let t = &c.schedule.times;
    println!(
        "||W - I|| / ||I|| = {:.3e}, {} times in [{:.2}, {:.2}]",
        c.identity_distance,
        t.len(),
        t[0],
        t[t.len() - 1]
    );

    let dir = std::env::temp_dir().join(format!("bischrodinger-wave-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let stem = dir.join("w");
    write_bundle(&w, &stem)?;
    let back = read_bundle(&stem)?;
    println!("container round trip exact: {}", back.w == w.w);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
