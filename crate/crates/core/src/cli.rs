//! The `xlris` command line.
//!
//! Every subcommand writes its outputs plus a JSON run manifest (command
//! line, config digest, seed, timestamps, output paths). Exit status is 0 on
//! success, 1 on configuration or usage errors and 2 on numerical failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::codebook::{
    generate_codebook, load_codebook, save_codebook, scenario_digest, solve_pair, Codebook,
    GenerateOptions,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_layout, PanelSpec};
use crate::metrics::{cdf, cdf_csv, heatmap, GridSpec};
use crate::solver::{Quantization, SolverMode, SolverSettings};

#[derive(Debug, Parser)]
#[command(name = "xlris", version, about = "Near-field variable-width beam coverage codewords for XL-RIS panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design one codeword for a (BS codeword, region) pair.
    Solve(SolveArgs),
    /// Design codewords for every (BS codeword, region) pair.
    Codebook(CodebookArgs),
    /// Evaluate a stored codeword: region report, CDF and room heatmap.
    Evaluate(EvaluateArgs),
    /// Mean SE and outage against panel size or phase resolution.
    Sweep(SweepArgs),
}

/// Overrides shared by the commands that run the solver.
#[derive(Debug, Args)]
pub struct SolverOverrides {
    /// Solver variant; defaults to the config's `solver.mode`.
    #[arg(long, value_parser = clap::value_parser!(SolverMode))]
    pub mode: Option<SolverMode>,
    /// Base RNG seed; defaults to the config's `scenario.rng_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phase resolution: `continuous` or a bit count.
    #[arg(long, value_parser = clap::value_parser!(Quantization))]
    pub quantization: Option<Quantization>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Outage threshold in bps/Hz; repeatable. Defaults to `solver.thresholds`.
    #[arg(long = "threshold")]
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Region id from the config.
    #[arg(long)]
    pub region: String,
    /// One-based BS codeword index.
    #[arg(long, default_value_t = 1)]
    pub bs_codeword: usize,
    #[command(flatten)]
    pub solver: SolverOverrides,
    /// Codeword file (codebook format, single entry).
    #[arg(long)]
    pub out_codeword: PathBuf,
    /// Per-epoch convergence trace (CSV).
    #[arg(long)]
    pub out_trace: PathBuf,
    #[arg(long)]
    pub out_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CodebookArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub solver: SolverOverrides,
    /// Worker threads for independent pairs; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Stop a pair once the relative epoch-to-epoch mean-SE change is below this.
    #[arg(long)]
    pub early_stop: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Codebook or codeword file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Optional scenario file to check the codebook against; also supplies
    /// the heatmap grid and default thresholds.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Region id; defaults to the only region with a stored codeword.
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub bs_codeword: Option<usize>,
    #[arg(long = "threshold")]
    pub thresholds: Vec<f64>,
    /// Heatmap pitch in metres, overriding the config grid.
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long)]
    pub out_heatmap: PathBuf,
    #[arg(long)]
    pub out_cdf: PathBuf,
    #[arg(long)]
    pub out_report: PathBuf,
    #[arg(long)]
    pub out_svg: Option<PathBuf>,
    #[arg(long)]
    pub out_manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Levels are panel side lengths in elements (rows = cols).
    Elements,
    /// Levels are phase resolutions (`continuous`, `1`, `2`, ...).
    Quantization,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub region: String,
    #[arg(long, default_value_t = 1)]
    pub bs_codeword: usize,
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Comma-separated sweep levels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<String>,
    #[command(flatten)]
    pub solver: SolverOverrides,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_manifest: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config_digest: Option<String>,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<PathBuf>,
    pub tool_version: String,
}

struct Run {
    command: Vec<String>,
    started: String,
    config_digest: Option<String>,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, contents).map_err(|e| Error::io(path, e))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn finish(self, explicit: Option<&Path>) -> Result<()> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let first = self.outputs.first().ok_or_else(|| Error::config("no outputs written"))?;
                let mut name = first.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            }
        };
        let manifest = RunManifest {
            command: self.command,
            config_digest: self.config_digest,
            seed: self.seed,
            started: self.started,
            finished: now(),
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::config(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mut run = Run {
        command: args.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        started: now(),
        config_digest: None,
        seed: None,
        outputs: Vec::new(),
    };
    match execute(cli.command, &mut run) {
        Ok(manifest) => match run.finish(manifest.as_deref()) {
            Ok(()) => 0,
            Err(e) => report(&e),
        },
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn execute(command: Command, run: &mut Run) -> Result<Option<PathBuf>> {
    match command {
        Command::Solve(a) => cmd_solve(&a, run).map(|_| a.out_manifest),
        Command::Codebook(a) => cmd_codebook(&a, run).map(|_| a.out_manifest),
        Command::Evaluate(a) => cmd_evaluate(&a, run).map(|_| a.out_manifest),
        Command::Sweep(a) => cmd_sweep(&a, run).map(|_| a.out_manifest),
    }
}

/// Loads the config and applies command-line overrides.
fn load_config(path: &Path, o: &SolverOverrides, run: &mut Run) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(mode) = o.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = o.seed {
        cfg.scenario.rng_seed = seed;
    }
    if let Some(q) = o.quantization {
        cfg.scenario.quantization = q;
    }
    if let Some(e) = o.max_epochs {
        cfg.scenario.max_epochs = e;
    }
    if !o.thresholds.is_empty() {
        cfg.thresholds = o.thresholds.clone();
    }
    cfg.scenario.validate()?;
    run.config_digest = Some(cfg.digest.clone());
    run.seed = Some(cfg.scenario.rng_seed);
    Ok(cfg)
}

fn check_bs_index(cfg: &RunConfig, j: usize) -> Result<()> {
    if j == 0 || j > cfg.bs.codeword_count() {
        return Err(Error::config(format!(
            "BS codeword {j} out of range (codebook has {})",
            cfg.bs.codeword_count()
        )));
    }
    Ok(())
}

fn outage_table(thresholds: &[f64], outage: &[f64]) -> String {
    let mut out = String::from("threshold_bps_hz  outage\n");
    for (t, p) in thresholds.iter().zip(outage) {
        let _ = writeln!(out, "{t:>16}  {p:.4}");
    }
    out
}

fn cmd_solve(a: &SolveArgs, run: &mut Run) -> Result<()> {
    let cfg = load_config(&a.config, &a.solver, run)?;
    let (k, region) = cfg.region(&a.region)?;
    let j = a.bs_codeword;
    check_bs_index(&cfg, j)?;
    let layout = build_layout(&cfg.panels, &cfg.bs)?;
    let mut settings = SolverSettings::from_scenario(&cfg.scenario, cfg.mode).with_thresholds(&cfg.thresholds);
    settings.early_stop = cfg.early_stop;
    let (codeword, solution) = solve_pair(&cfg.scenario, &layout, &cfg.bs, region, j, k, &settings)
        .map_err(|e| Error::Pair { j, k, source: Box::new(e) })?;

    let book = Codebook {
        scenario_digest: scenario_digest(&cfg.scenario, &cfg.panels, &cfg.bs),
        scenario: cfg.scenario.clone(),
        panels: cfg.panels.clone(),
        regions: cfg.regions.clone(),
        bs: cfg.bs.clone(),
        codewords: vec![codeword],
    };
    book.validate()?;
    run.write(&a.out_codeword, &book.to_json()?)?;
    run.write(&a.out_trace, &solution.trace.to_csv())?;

    let last = solution.trace.epochs.last().expect("solver records at least one epoch");
    println!(
        "{} region `{}` BS codeword {j}: {} elements, {} epochs",
        cfg.mode,
        region.id,
        layout.len(),
        solution.trace.len()
    );
    println!("mean SE = {:.4} bps/Hz", last.mean_se);
    print!("{}", outage_table(&cfg.thresholds, &last.outage));
    Ok(())
}

fn cmd_codebook(a: &CodebookArgs, run: &mut Run) -> Result<()> {
    let cfg = load_config(&a.config, &a.solver, run)?;
    let total = cfg.bs.codeword_count() * cfg.regions.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let progress = |j: usize, k: usize, s: &crate::solver::Solution| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        eprintln!(
            "[{n}/{total}] pair ({j},{k}) region `{}`: mean SE {:.4} bps/Hz after {} epochs",
            cfg.regions[k - 1].id,
            s.trace.final_mean_se().unwrap_or(f64::NAN),
            s.trace.len()
        );
    };
    let options = GenerateOptions {
        jobs: a.jobs,
        early_stop: a.early_stop.or(cfg.early_stop),
        progress: Some(&progress),
    };
    let book = generate_codebook(&cfg.scenario, &cfg.panels, &cfg.bs, &cfg.regions, cfg.mode, &options)?;
    save_codebook(&book, &a.out)?;
    run.outputs.push(a.out.clone());
    println!("wrote {} codewords to {}", book.codewords.len(), a.out.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs, run: &mut Run) -> Result<()> {
    let book = load_codebook(&a.codebook)?;
    let cfg = match &a.config {
        Some(path) => {
            let cfg = RunConfig::load(path)?;
            if cfg.element_count() != book.element_count() {
                return Err(Error::config(format!(
                    "codebook has {} elements per codeword but config {} describes {}",
                    book.element_count(),
                    path.display(),
                    cfg.element_count()
                )));
            }
            let expected = scenario_digest(&cfg.scenario, &cfg.panels, &cfg.bs);
            if !book.digest_matches(Some(&expected)) {
                eprintln!(
                    "warning: codebook scenario digest {} differs from config digest {expected}",
                    book.scenario_digest
                );
            }
            run.config_digest = Some(cfg.digest.clone());
            Some(cfg)
        }
        None => None,
    };
    if !book.digest_matches(None) {
        eprintln!("warning: codebook digest does not match its embedded scenario");
    }
    run.seed = Some(book.scenario.rng_seed);

    let k = match &a.region {
        Some(id) => book
            .region_index(id)
            .ok_or_else(|| Error::config(format!("unknown region id `{id}` in codebook")))?,
        None => {
            let mut ks: Vec<usize> = book.codewords.iter().map(|c| c.k).collect();
            ks.sort_unstable();
            ks.dedup();
            match ks.as_slice() {
                [k] => *k,
                _ => return Err(Error::config("codebook covers several regions; pass --region")),
            }
        }
    };
    let j = match a.bs_codeword {
        Some(j) => j,
        None => {
            let js: Vec<usize> = book.codewords.iter().filter(|c| c.k == k).map(|c| c.j).collect();
            match js.as_slice() {
                [j] => *j,
                _ => return Err(Error::config("codebook has several BS codewords for this region; pass --bs-codeword")),
            }
        }
    };
    let codeword = book
        .get(j, k)
        .ok_or_else(|| Error::config(format!("codebook has no codeword for pair ({j},{k})")))?;

    let thresholds = if !a.thresholds.is_empty() {
        a.thresholds.clone()
    } else if let Some(cfg) = &cfg {
        cfg.thresholds.clone()
    } else {
        vec![16.0]
    };
    let mut grid = cfg.as_ref().map(|c| c.evaluation.clone()).unwrap_or_else(GridSpec::default);
    if let Some(step) = a.grid_step {
        grid.step = step;
    }

    let report = book.evaluate(j, k, &thresholds)?;
    let layout = book.layout()?;
    let map = heatmap(&layout, &book.bs, book.bs.codeword(j - 1)?, codeword.phases.thetas(), &book.scenario, &grid)?;

    run.write(&a.out_report, &report.to_text())?;
    run.write(&a.out_cdf, &cdf_csv(&cdf(&report.se_samples)?))?;
    run.write(&a.out_heatmap, &map.to_csv())?;
    if let Some(svg) = &a.out_svg {
        run.write(svg, &map.to_svg(2.0))?;
    }
    println!("region `{}` pair ({j},{k}): mean SE {:.4} bps/Hz over {} points", report.region, report.mean_se, report.se_samples.len());
    let outage: Vec<f64> = report.outage.iter().map(|&(_, p)| p).collect();
    print!("{}", outage_table(&thresholds, &outage));
    println!("room mean SE {:.4} bps/Hz over {} cells", map.mean(), map.se.len());
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, run: &mut Run) -> Result<()> {
    let cfg = load_config(&a.config, &a.solver, run)?;
    let (k, region) = cfg.region(&a.region)?;
    let j = a.bs_codeword;
    check_bs_index(&cfg, j)?;

    let mut csv = String::from("level,mean_se_bps_hz");
    for t in &cfg.thresholds {
        let _ = write!(csv, ",outage@{t}");
    }
    csv.push('\n');

    for level in &a.levels {
        let level = level.trim();
        let mut scenario = cfg.scenario.clone();
        let mut panels = cfg.panels.clone();
        match a.kind {
            SweepKind::Elements => {
                let side: usize = level
                    .parse()
                    .map_err(|_| Error::config(format!("element sweep level `{level}` is not a side length")))?;
                panels = panels
                    .iter()
                    .map(|p| PanelSpec::new(p.center, side, side, p.spacing))
                    .collect::<Result<_>>()?;
            }
            SweepKind::Quantization => {
                scenario.quantization = level.parse().map_err(Error::Config)?;
            }
        }
        let layout = build_layout(&panels, &cfg.bs)?;
        let mut settings = SolverSettings::from_scenario(&scenario, cfg.mode).with_thresholds(&cfg.thresholds);
        settings.early_stop = cfg.early_stop;
        let (_, solution) = solve_pair(&scenario, &layout, &cfg.bs, region, j, k, &settings)
            .map_err(|e| Error::Pair { j, k, source: Box::new(e) })?;
        let last = solution.trace.epochs.last().expect("solver records at least one epoch");
        let _ = write!(csv, "{level},{}", last.mean_se);
        for o in &last.outage {
            let _ = write!(csv, ",{o}");
        }
        csv.push('\n');
        eprintln!("level {level}: {} elements, mean SE {:.4} bps/Hz", layout.len(), last.mean_se);
    }
    run.write(&a.out, &csv)?;
    println!("wrote {} sweep levels to {}", a.levels.len(), a.out.display());
    Ok(())
}
