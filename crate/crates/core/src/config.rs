//! TOML scenario files.
//!
//! ```toml
//! [scenario]                  # every key optional; defaults shown
//! frequency_hz = 30e9
//! tx_power_dbm = 44.0
//! noise_power_dbm = -105.0
//! g_ris = 8.0
//! g_tx = 1.0
//! g_rx = 1.0
//! radiation_exponent = 3.0
//! quantization = "continuous" # or a bit count, e.g. 3
//! rng_seed = 0
//! w_initial = 100.0
//! max_epochs = 20
//!
//! [[panels]]
//! center = [0.0, 10.0, 3.5]
//! rows = 64
//! cols = 64
//! # spacing_m = 0.005         # default: half a wavelength
//!
//! [bs]                        # optional; default is three antennas at
//! # antennas = [[x, y, z]]    # (-5 ± λ/2, -5, 10), (-5, -5, 10)
//! # dft_beams = 4             # DFT codebook with this many beams, or
//! # codebook = [[[re, im], ...], ...]  # explicit unit-norm beams
//!
//! [solver]
//! mode = "awbcd"
//! thresholds = [16.0]
//! # early_stop = 1e-4
//! sample_step = 0.1           # default region pitch
//! sector_origin_panel = 0     # sectors without an origin use this panel's center
//!
//! [[regions]]
//! id = "center"
//! z = 0.5
//! # step = 0.15
//! shape = { kind = "rectangle", x = [8.5, 11.5], y = [8.5, 11.5] }
//!
//! [evaluation]                # heatmap grid
//! x = [0.0, 20.0]
//! y = [0.0, 20.0]
//! step = 0.1
//! z = 0.5
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::channel::{dbm_to_watts, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{BsArray, PanelSpec, Region, Shape, Vec3};
use crate::metrics::GridSpec;
use crate::solver::{Quantization, SolverMode};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    scenario: ScenarioSection,
    panels: Vec<PanelSection>,
    #[serde(default)]
    bs: BsSection,
    #[serde(default)]
    regions: Vec<RegionSection>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    evaluation: Option<GridSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ScenarioSection {
    frequency_hz: f64,
    tx_power_dbm: f64,
    noise_power_dbm: f64,
    g_ris: f64,
    g_tx: f64,
    g_rx: f64,
    radiation_exponent: f64,
    quantization: Quantization,
    rng_seed: u64,
    w_initial: f64,
    max_epochs: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            frequency_hz: 30e9,
            tx_power_dbm: 44.0,
            noise_power_dbm: -105.0,
            g_ris: 8.0,
            g_tx: 1.0,
            g_rx: 1.0,
            radiation_exponent: 3.0,
            quantization: Quantization::Continuous,
            rng_seed: 0,
            w_initial: 100.0,
            max_epochs: 20,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelSection {
    center: [f64; 3],
    rows: usize,
    cols: usize,
    spacing_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsSection {
    antennas: Option<Vec<[f64; 3]>>,
    dft_beams: Option<usize>,
    codebook: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSection {
    id: String,
    #[serde(default = "default_ue_height")]
    z: f64,
    step: Option<f64>,
    shape: Shape,
}

fn default_ue_height() -> f64 {
    0.5
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolverSection {
    mode: SolverMode,
    thresholds: Vec<f64>,
    early_stop: Option<f64>,
    sample_step: f64,
    sector_origin_panel: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            mode: SolverMode::Awbcd,
            thresholds: vec![16.0],
            early_stop: None,
            sample_step: 0.1,
            sector_origin_panel: 0,
        }
    }
}

/// A fully resolved scenario file.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub panels: Vec<PanelSpec>,
    pub bs: BsArray,
    pub regions: Vec<Region>,
    pub mode: SolverMode,
    pub thresholds: Vec<f64>,
    pub early_stop: Option<f64>,
    pub evaluation: GridSpec,
    /// Hex SHA-256 of the file contents.
    pub digest: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = resolve(file)?;
        cfg.digest = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Ok(cfg)
    }

    /// One-based index and definition of region `id`.
    pub fn region(&self, id: &str) -> Result<(usize, &Region)> {
        self.regions
            .iter()
            .enumerate()
            .find(|(_, r)| r.id == id)
            .map(|(i, r)| (i + 1, r))
            .ok_or_else(|| {
                let known: Vec<&str> = self.regions.iter().map(|r| r.id.as_str()).collect();
                Error::config(format!("unknown region id `{id}` (known: {})", known.join(", ")))
            })
    }

    pub fn element_count(&self) -> usize {
        self.panels.iter().map(PanelSpec::element_count).sum()
    }
}

fn resolve(file: ConfigFile) -> Result<RunConfig> {
    let sc = file.scenario;
    let scenario = ScenarioConfig {
        frequency: sc.frequency_hz,
        tx_power: dbm_to_watts(sc.tx_power_dbm),
        noise_power: dbm_to_watts(sc.noise_power_dbm),
        g_ris: sc.g_ris,
        g_tx: sc.g_tx,
        g_rx: sc.g_rx,
        radiation_exponent: sc.radiation_exponent,
        quantization: sc.quantization,
        rng_seed: sc.rng_seed,
        w_initial: sc.w_initial,
        max_epochs: sc.max_epochs,
    };
    scenario.validate()?;
    let lambda = scenario.wavelength();

    if file.panels.is_empty() {
        return Err(Error::config("at least one [[panels]] entry is required"));
    }
    let panels = file
        .panels
        .iter()
        .map(|p| {
            PanelSpec::new(
                Vec3::from(p.center),
                p.rows,
                p.cols,
                p.spacing_m.unwrap_or(lambda / 2.0),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let bs = resolve_bs(file.bs, lambda)?;

    let solver = file.solver;
    if !(solver.sample_step > 0.0) {
        return Err(Error::config("solver.sample_step must be positive"));
    }
    let origin_panel = panels.get(solver.sector_origin_panel).ok_or_else(|| {
        Error::config(format!(
            "solver.sector_origin_panel {} out of range (have {} panels)",
            solver.sector_origin_panel,
            panels.len()
        ))
    })?;
    let origin = [origin_panel.center.x, origin_panel.center.y];

    let mut regions = Vec::with_capacity(file.regions.len());
    for r in file.regions {
        if regions.iter().any(|existing: &Region| existing.id == r.id) {
            return Err(Error::config(format!("duplicate region id `{}`", r.id)));
        }
        let mut shape = r.shape;
        shape.resolve_origin(origin);
        let region = Region {
            id: r.id,
            shape,
            z: r.z,
            sample_step: r.step.unwrap_or(solver.sample_step),
        };
        region.validate()?;
        regions.push(region);
    }

    let evaluation = file.evaluation.unwrap_or_default();
    evaluation.validate()?;

    Ok(RunConfig {
        scenario,
        panels,
        bs,
        regions,
        mode: solver.mode,
        thresholds: solver.thresholds,
        early_stop: solver.early_stop,
        evaluation,
        digest: String::new(),
    })
}

fn resolve_bs(section: BsSection, lambda: f64) -> Result<BsArray> {
    let default = BsArray::three_antenna_default(lambda);
    let antennas: Vec<Vec3> = match section.antennas {
        Some(list) => list.into_iter().map(Vec3::from).collect(),
        None => default.antenna_positions.clone(),
    };
    match (section.dft_beams, section.codebook) {
        (Some(_), Some(_)) => Err(Error::config("bs: give either dft_beams or codebook, not both")),
        (Some(beams), None) => BsArray::with_dft_codebook(antennas, beams),
        (None, Some(cb)) => {
            let codebook = cb
                .into_iter()
                .map(|beam| beam.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect();
            BsArray::new(antennas, codebook)
        }
        (None, None) => {
            let m = antennas.len();
            let amp = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
            BsArray::new(antennas, vec![vec![amp; m]])
        }
    }
}
