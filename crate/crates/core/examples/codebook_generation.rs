//! Builds the full desk codebook (every BS beam x every region), saves it,
//! reloads it and re-evaluates each entry from the file alone.
//!
//! cargo run --release --example codebook_generation [-- OUT_DIR]

use std::path::PathBuf;
use std::time::Instant;

use xlris::codebook::{generate_codebook, load_codebook, save_codebook, GenerateOptions};
use xlris::config::RunConfig;
use xlris::solver::Solution;

fn main() -> xlris::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/examples-out".into()));
    std::fs::create_dir_all(&out).map_err(|e| xlris::Error::io(&out, e))?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.toml").as_ref())?;

    let progress = |j: usize, k: usize, s: &Solution| {
        eprintln!("  pair ({j},{k}) done, mean SE {:.3}", s.trace.final_mean_se().unwrap_or(f64::NAN));
    };
    let options = GenerateOptions {
        jobs: 0,
        progress: Some(&progress),
        ..GenerateOptions::default()
    };
    let start = Instant::now();
    let book = generate_codebook(&cfg.scenario, &cfg.panels, &cfg.bs, &cfg.regions, cfg.mode, &options)?;
    println!("{} codewords in {:.1?}", book.codewords.len(), start.elapsed());

    let path = out.join("desk_codebook.json");
    save_codebook(&book, &path)?;
    let loaded = load_codebook(&path)?;
    assert!(loaded.digest_matches(None));

    for cw in &loaded.codewords {
        let report = loaded.evaluate(cw.j, cw.k, &cfg.thresholds)?;
        print!("({},{}) {:>12}: mean SE {:.3}", cw.j, cw.k, report.region, report.mean_se);
        for (t, p) in &report.outage {
            print!("  P(<{t}) {p:.3}");
        }
        println!();
    }
    println!("codebook written to {}", path.display());
    Ok(())
}
