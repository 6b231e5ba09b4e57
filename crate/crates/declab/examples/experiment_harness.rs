//! Programmatic use of the experiment harness: run a preset, write the CSV
//! and SVG artifacts, and print the plain-text report.

use declab::harness::{emit_report, run_experiment, ExperimentConfig};

fn main() -> declab::Result<()> {
    let out = std::env::temp_dir().join("declab-example");

    let mut cfg = ExperimentConfig::new("fig3-linreg-n300")?;
    cfg.trials = 3;
    cfg.master_seed = 1;
    cfg.out_dir = Some(out.clone());
    cfg.emit_svg = true;

    let tab = run_experiment(&cfg)?;
    println!("rows: {}", tab.rows.len());
    println!("artifacts in {}", out.display());

    println!("\n{}", emit_report(std::slice::from_ref(&tab))?);
    Ok(())
}
