//! A command driven from a TOML config with a flag override, as the CLI does it.

use bischrodinger::cli::{execute, resolve_config, Cli};
use clap::Parser;

pub fn run() -> bischrodinger::Result<()> {
    let dir = std::env::temp_dir().join(format!("bischrodinger-config-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        r#"
seed = 3

[grid]
half_width = 10.0
n = 512

[potential]
kind = "resonance_built"
c = 1.0
d = 1.0
"#,
    )?;
    let out = dir.join("out");
    let cli = Cli::parse_from([
        "bischrodinger",
        "classify",
        "--config",
        path.to_str().expect("utf-8 path"),
        "--out",
        out.to_str().expect("utf-8 path"),
        "--n",
        "1024",
    ]);
    let cfg = resolve_config(&cli)?;
    println!("grid n from flag: {}, config hash {}", cfg.grid.n, &cfg.hash()[..16]);
    let (outcome, report) = execute(&cli.command, &cfg)?;
    for line in outcome.summary {
        println!("{line}");
    }
    println!("report {} ({} bytes)", report.display(), std::fs::metadata(&report)?.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> bischrodinger::Result<()> {
    run()
}
