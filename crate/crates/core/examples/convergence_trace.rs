//! Per-epoch mean SE and outage of an AWBCD solve on the desk scenario.
//!
//! cargo run --release --example convergence_trace [-- OUT_DIR]

use std::path::PathBuf;

use xlris::channel::effective_coeffs;
use xlris::codebook::pair_seed;
use xlris::config::RunConfig;
use xlris::geometry::{build_layout, sample_region};
use xlris::solver::{solve, PhaseProfile, SolverSettings};

fn main() -> xlris::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlris::Error::io(&out, e))?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;
    let (k, region) = cfg.region("center")?;

    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let samples = sample_region(region, cfg.scenario.w_initial)?;
    let coeffs = effective_coeffs(&layout, &cfg.bs, 0, &samples, &cfg.scenario)?;
    let settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);
    let initial = PhaseProfile::random(layout.len(), cfg.scenario.quantization, pair_seed(cfg.scenario.rng_seed, 1, k));
    let solution = solve(&coeffs, &settings, initial)?;

    println!("{} elements, {} sample points", layout.len(), samples.len());
    print!("epoch  mean SE");
    for t in &cfg.thresholds {
        print!("  P(<{t})");
    }
    println!("  changed  drift");
    for e in &solution.trace.epochs {
        print!("{:>5}  {:>7.4}", e.epoch, e.mean_se);
        for o in &e.outage {
            print!("  {o:>6.4}");
        }
        println!("  {:>7}  {:.1e}", e.changed, e.residual_drift);
    }

    let path = out.join("convergence_trace.csv");
    std::fs::write(&path, solution.trace.to_csv()).map_err(|e| xlris::Error::io(&path, e))?;
    println!("trace written to {}", path.display());
    Ok(())
}
