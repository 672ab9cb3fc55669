//! Coverage of the central square as the panel grows from 16x16 to 64x64.
//!
//! cargo run --release --example element_sweep

use xlris::codebook::solve_pair;
use xlris::config::RunConfig;
use xlris::geometry::{build_layout, PanelSpec};
use xlris::solver::SolverSettings;

fn main() -> xlris::Result<()> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;
    let (k, region) = cfg.region("center")?;
    let settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);
    let base = &cfg.panels[0];

    print!("elements  mean SE");
    for t in &cfg.thresholds {
        print!("  P(<{t})");
    }
    println!();
    for side in [16, 24, 32, 48, 64] {
        let panel = PanelSpec::new(base.center, side, side, base.spacing)?;
        let layout = build_layout(&[panel], &cfg.bs)?;
        let (_, solution) = solve_pair(&cfg.scenario, &layout, &cfg.bs, region, 1, k, &settings)?;
        let last = solution.trace.epochs.last().expect("at least one epoch");
        print!("{:>8}  {:>7.4}", side * side, last.mean_se);
        for o in &last.outage {
            print!("  {o:>6.4}");
        }
        println!();
    }
    Ok(())
}
