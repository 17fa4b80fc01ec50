//! Selected acceptance criteria through the library, with a deliberately corrupted
//! kernel sign to show how a broken identity is reported.

use bischrodinger::acceptance::{Suite, SuiteOptions};

pub fn run() -> bischrodinger::Result<()> {
    let suite = Suite::new(SuiteOptions { seed: 7, corrupt_kernel_sign: false });
    let report = suite.run_all(&[1, 3, 8], |c| println!("{}", c.line()))?;
    println!("all pass: {}", report.pass);

    let broken = Suite::new(SuiteOptions { seed: 7, corrupt_kernel_sign: true });
    println!("{}", broken.run(1)?.line());
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
