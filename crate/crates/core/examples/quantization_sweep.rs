//! Final mean SE and outage against phase-shifter resolution.
//!
//! cargo run --release --example quantization_sweep

use xlris::codebook::solve_pair;
use xlris::config::RunConfig;
use xlris::geometry::build_layout;
use xlris::solver::{Quantization, SolverSettings};

fn main() -> xlris::Result<()> {
    let mut cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;
    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let (k, region) = cfg.region("center")?;
    let region = region.clone();

    let mut reference = None;
    println!("resolution  mean SE  vs continuous  P(<{})", cfg.thresholds[0]);
    for q in [Quantization::Continuous, Quantization::Bits(4), Quantization::Bits(3), Quantization::Bits(2), Quantization::Bits(1)] {
        cfg.scenario.quantization = q;
        let settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);
        let (_, solution) = solve_pair(&cfg.scenario, &layout, &cfg.bs, &region, 1, k, &settings)?;
        let last = solution.trace.epochs.last().expect("at least one epoch");
        let base = *reference.get_or_insert(last.mean_se);
        println!(
            "{:>10}  {:>7.4}  {:>+12.2}%  {:>6.4}",
            q.to_string(),
            last.mean_se,
            100.0 * (last.mean_se / base - 1.0),
            last.outage[0]
        );
    }
    Ok(())
}
