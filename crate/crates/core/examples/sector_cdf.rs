//! SE distributions over two annular sectors, AWBCD against plain BCD from
//! the same starting point.
//!
//! cargo run --release --example sector_cdf [-- OUT_DIR]

use std::path::PathBuf;

use xlris::channel::effective_coeffs;
use xlris::codebook::pair_seed;
use xlris::config::RunConfig;
use xlris::geometry::{build_layout, sample_region};
use xlris::metrics::{cdf, cdf_csv, mean, outage, region_se};
use xlris::solver::{solve, PhaseProfile, SolverMode, SolverSettings};

fn main() -> xlris::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlris::Error::io(&out, e))?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;
    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let s = &cfg.scenario;

    for id in ["sector_front", "sector_side"] {
        let (k, region) = cfg.region(id)?;
        let samples = sample_region(region, s.w_initial)?;
        let coeffs = effective_coeffs(&layout, &cfg.bs, 0, &samples, s)?;
        let seed = pair_seed(s.rng_seed, 1, k);
        println!("{id}: {} points", samples.len());
        let mut results = Vec::new();
        for mode in [SolverMode::Bcd, SolverMode::Awbcd] {
            let settings = SolverSettings::from_scenario(s, mode);
            let solution = solve(&coeffs, &settings, PhaseProfile::random(layout.len(), s.quantization, seed))?;
            let se = region_se(&coeffs, solution.phases.thetas(), s.tx_power, s.noise_power)?;
            let path = out.join(format!("cdf_{id}_{mode}.csv"));
            std::fs::write(&path, cdf_csv(&cdf(&se)?)).map_err(|e| xlris::Error::io(&path, e))?;
            results.push((mode, se));
        }
        let reference = mean(&results[0].1).min(mean(&results[1].1));
        for (mode, se) in &results {
            print!("  {mode:>5}: mean {:.4}", mean(se));
            for frac in [0.85, 0.9, 0.95] {
                print!("  P(<{:.2}) {:.4}", frac * reference, outage(se, frac * reference));
            }
            println!();
        }
    }
    println!("CDFs written to {}", out.display());
    Ok(())
}
