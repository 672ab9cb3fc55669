//! Full-scale run: three 200x200 panels (120 000 elements) and the 20 m room.
//! Solves one region and renders the room heatmap. On a single core the
//! center square takes about 30 s to solve and 5 min to render, with 2 GB of
//! coefficient memory; larger regions need proportionally more.
//!
//! cargo run --release --example full_scale -- [REGION_ID] [OUT_DIR]

use std::path::PathBuf;
use std::time::Instant;

use xlris::codebook::solve_pair;
use xlris::config::RunConfig;
use xlris::geometry::build_layout;
use xlris::metrics::{heatmap, mean};
use xlris::solver::SolverSettings;

fn main() -> xlris::Result<()> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "center".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlris::Error::io(&out, e))?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/room.toml").as_ref())?;
    let (k, region) = cfg.region(&id)?;
    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);

    let start = Instant::now();
    let (codeword, solution) = solve_pair(&cfg.scenario, &layout, &cfg.bs, region, 1, k, &settings)?;
    println!("solved `{id}` over {} elements in {:.1?}", layout.len(), start.elapsed());
    for e in &solution.trace.epochs {
        println!("  epoch {:>2}: mean SE {:.4}, outage {:?}", e.epoch, e.mean_se, e.outage);
    }

    let start = Instant::now();
    let map = heatmap(&layout, &cfg.bs, cfg.bs.codeword(0)?, codeword.phases.thetas(), &cfg.scenario, &cfg.evaluation)?;
    let (inside, outside): (Vec<_>, Vec<_>) = map
        .points
        .iter()
        .zip(&map.se)
        .partition(|(p, _)| region.shape.contains(p.x, p.y));
    let avg = |v: &[(_, &f64)]| mean(&v.iter().map(|(_, &s)| s).collect::<Vec<_>>());
    println!(
        "heatmap in {:.1?}: region mean SE {:.3}, rest of room {:.3} bps/Hz",
        start.elapsed(),
        avg(&inside),
        avg(&outside)
    );
    for (ext, body) in [("csv", map.to_csv()), ("svg", map.to_svg(2.0))] {
        let path = out.join(format!("full_scale_{id}.{ext}"));
        std::fs::write(&path, body).map_err(|e| xlris::Error::io(&path, e))?;
    }
    Ok(())
}
