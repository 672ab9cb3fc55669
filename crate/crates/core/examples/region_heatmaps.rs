//! Room-wide SE heatmaps for codewords designed for differently shaped
//! regions: a square, two disjoint squares, a T and an L.
//!
//! cargo run --release --example region_heatmaps [-- OUT_DIR]

use std::path::PathBuf;

use xlris::codebook::{pair_seed, solve_pair};
use xlris::config::RunConfig;
use xlris::geometry::build_layout;
use xlris::metrics::heatmap;
use xlris::solver::SolverSettings;

fn main() -> xlris::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlris::Error::io(&out, e))?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;
    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);

    for id in ["center", "two_blocks", "tee", "ell"] {
        let (k, region) = cfg.region(id)?;
        let (codeword, solution) = solve_pair(&cfg.scenario, &layout, &cfg.bs, region, 1, k, &settings)?;
        debug_assert_eq!(codeword.seed, pair_seed(cfg.scenario.rng_seed, 1, k));
        let map = heatmap(&layout, &cfg.bs, cfg.bs.codeword(0)?, codeword.phases.thetas(), &cfg.scenario, &cfg.evaluation)?;

        // Mean SE inside versus outside the region shows how well the beam is confined.
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for (p, &se) in map.points.iter().zip(&map.se) {
            if region.shape.contains(p.x, p.y) {
                inside.push(se);
            } else {
                outside.push(se);
            }
        }
        println!(
            "{id:>10}: region mean SE {:.3} (solver {:.3}), rest of room {:.3} bps/Hz",
            xlris::metrics::mean(&inside),
            solution.trace.final_mean_se().unwrap_or(f64::NAN),
            xlris::metrics::mean(&outside)
        );
        for (ext, body) in [("csv", map.to_csv()), ("svg", map.to_svg(4.0))] {
            let path = out.join(format!("heatmap_{id}.{ext}"));
            std::fs::write(&path, body).map_err(|e| xlris::Error::io(&path, e))?;
        }
    }
    println!("heatmaps written to {}", out.display());
    Ok(())
}
