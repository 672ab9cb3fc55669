//! Batch generation of RIS codewords for every (BS codeword, region) pair,
//! and the self-describing JSON codebook format.
//!
//! File layout (UTF-8 JSON, keys in this order):
//!
//! ```text
//! { format_version, scenario_digest, quantization, scenario, panels,
//!   regions, bs_codebook, codewords: [ { j, k, seed, epochs, mode,
//!   levels | phases } ] }
//! ```
//!
//! `j` and `k` are one-based. Discrete codewords store level indices,
//! continuous ones store radians. The embedded scenario, panels, regions and
//! BS codebook are enough to re-evaluate coverage without the original
//! configuration file.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{effective_coeffs, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_layout, sample_region, BsArray, ElementLayout, PanelSpec, Region};
use crate::metrics::{evaluate_region, CoverageReport};
use crate::solver::{solve, PhaseProfile, Quantization, Solution, SolverMode, SolverSettings};

pub const FORMAT_VERSION: u32 = 1;

/// One designed phase profile and how it was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RisCodeword {
    /// One-based BS codeword index.
    pub j: usize,
    /// One-based region index.
    pub k: usize,
    pub seed: u64,
    pub epochs: usize,
    pub mode: SolverMode,
    pub phases: PhaseProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodebookFile", into = "CodebookFile")]
pub struct Codebook {
    pub scenario_digest: String,
    pub scenario: ScenarioConfig,
    pub panels: Vec<PanelSpec>,
    pub regions: Vec<Region>,
    pub bs: BsArray,
    /// Sorted by `(j, k)`.
    pub codewords: Vec<RisCodeword>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookFile {
    format_version: u32,
    scenario_digest: String,
    quantization: Quantization,
    scenario: ScenarioConfig,
    panels: Vec<PanelSpec>,
    regions: Vec<Region>,
    bs_codebook: BsArray,
    codewords: Vec<CodewordRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodewordRecord {
    j: usize,
    k: usize,
    seed: u64,
    epochs: usize,
    mode: SolverMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phases: Option<Vec<f64>>,
}

impl From<Codebook> for CodebookFile {
    fn from(book: Codebook) -> Self {
        CodebookFile {
            format_version: FORMAT_VERSION,
            scenario_digest: book.scenario_digest,
            quantization: book.scenario.quantization,
            scenario: book.scenario,
            panels: book.panels,
            regions: book.regions,
            bs_codebook: book.bs,
            codewords: book
                .codewords
                .into_iter()
                .map(|cw| {
                    let levels = cw.phases.levels();
                    let phases = levels.is_none().then(|| cw.phases.thetas().to_vec());
                    CodewordRecord {
                        j: cw.j,
                        k: cw.k,
                        seed: cw.seed,
                        epochs: cw.epochs,
                        mode: cw.mode,
                        levels,
                        phases,
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<CodebookFile> for Codebook {
    type Error = String;

    fn try_from(file: CodebookFile) -> std::result::Result<Self, Self::Error> {
        if file.format_version != FORMAT_VERSION {
            return Err(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            ));
        }
        if file.quantization != file.scenario.quantization {
            return Err("top-level quantization disagrees with scenario".into());
        }
        let q = file.quantization;
        let codewords = file
            .codewords
            .into_iter()
            .map(|rec| {
                let phases = match (q, rec.levels, rec.phases) {
                    (Quantization::Continuous, None, Some(p)) => PhaseProfile::new(q, &p),
                    (Quantization::Bits(_), Some(l), None) => {
                        PhaseProfile::from_levels(q, &l).map_err(|e| format!("codeword ({}, {}): {e}", rec.j, rec.k))?
                    }
                    _ => {
                        return Err(format!(
                            "codeword ({}, {}) must carry `{}` for quantization {q}",
                            rec.j,
                            rec.k,
                            if q == Quantization::Continuous { "phases" } else { "levels" }
                        ))
                    }
                };
                Ok(RisCodeword {
                    j: rec.j,
                    k: rec.k,
                    seed: rec.seed,
                    epochs: rec.epochs,
                    mode: rec.mode,
                    phases,
                })
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        let book = Codebook {
            scenario_digest: file.scenario_digest,
            scenario: file.scenario,
            panels: file.panels,
            regions: file.regions,
            bs: file.bs_codebook,
            codewords,
        };
        book.validate().map_err(|e| e.to_string())?;
        Ok(book)
    }
}

impl Codebook {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.bs.validate()?;
        let n: usize = self.panels.iter().map(PanelSpec::element_count).sum();
        if self.codewords.is_empty() {
            return Err(Error::config("codebook holds no codewords"));
        }
        let mut seen = BTreeSet::new();
        for cw in &self.codewords {
            if cw.j == 0 || cw.j > self.bs.codeword_count() || cw.k == 0 || cw.k > self.regions.len() {
                return Err(Error::config(format!("codeword index ({}, {}) out of range", cw.j, cw.k)));
            }
            if !seen.insert((cw.j, cw.k)) {
                return Err(Error::config(format!("duplicate codeword ({}, {})", cw.j, cw.k)));
            }
            if cw.phases.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "codeword phase count",
                    expected: n,
                    actual: cw.phases.len(),
                });
            }
            if cw.phases.quantization() != self.scenario.quantization {
                return Err(Error::config("codeword quantization disagrees with scenario"));
            }
        }
        Ok(())
    }

    /// Whether every (BS codeword, region) pair has a codeword. Files
    /// written by `solve` hold a single pair.
    pub fn is_complete(&self) -> bool {
        self.codewords.len() == self.bs.codeword_count() * self.regions.len()
    }

    pub fn element_count(&self) -> usize {
        self.panels.iter().map(PanelSpec::element_count).sum()
    }

    pub fn get(&self, j: usize, k: usize) -> Option<&RisCodeword> {
        self.codewords.iter().find(|cw| cw.j == j && cw.k == k)
    }

    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.id == id).map(|i| i + 1)
    }

    pub fn layout(&self) -> Result<ElementLayout> {
        build_layout(&self.panels, &self.bs)
    }

    /// Whether the embedded digest matches the one recomputed from the
    /// embedded scenario, panels and BS codebook (or from `expected`).
    pub fn digest_matches(&self, expected: Option<&str>) -> bool {
        let reference = match expected {
            Some(d) => d.to_string(),
            None => scenario_digest(&self.scenario, &self.panels, &self.bs),
        };
        reference == self.scenario_digest
    }

    /// Re-evaluates codeword `(j, k)` over its own region using only the
    /// embedded definitions.
    pub fn evaluate(&self, j: usize, k: usize, thresholds: &[f64]) -> Result<CoverageReport> {
        let cw = self
            .get(j, k)
            .ok_or_else(|| Error::config(format!("codebook has no codeword ({j}, {k})")))?;
        let region = &self.regions[k - 1];
        let layout = self.layout()?;
        let samples = sample_region(region, self.scenario.w_initial)?;
        let coeffs = effective_coeffs(&layout, &self.bs, j - 1, &samples, &self.scenario)?;
        evaluate_region(
            &region.id,
            &format!("({j},{k})"),
            &coeffs,
            cw.phases.thetas(),
            thresholds,
            &self.scenario,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::config(format!("serialize codebook: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: if e.line() > 0 {
                format!("line {} column {}: {e}", e.line(), e.column())
            } else {
                e.to_string()
            },
        })
    }
}

/// Hex SHA-256 of the canonical JSON of the physical setup.
pub fn scenario_digest(scenario: &ScenarioConfig, panels: &[PanelSpec], bs: &BsArray) -> String {
    let bytes = serde_json::to_vec(&(scenario, panels, bs)).expect("scenario serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Initialization seed of pair `(j, k)` (one-based):
/// `splitmix64(base ^ splitmix64(j << 32 | k))`. Depends only on the base
/// seed and the pair, so adding pairs leaves existing seeds untouched.
pub fn pair_seed(base: u64, j: usize, k: usize) -> u64 {
    splitmix64(base ^ splitmix64(((j as u64) << 32) | (k as u64 & 0xFFFF_FFFF)))
}

/// Samples region `k`, builds its coefficients under BS codeword `j` (both
/// one-based) and runs the solver from the pair's seeded random start.
pub fn solve_pair(
    scenario: &ScenarioConfig,
    layout: &ElementLayout,
    bs: &BsArray,
    region: &Region,
    j: usize,
    k: usize,
    settings: &SolverSettings,
) -> Result<(RisCodeword, Solution)> {
    let samples = sample_region(region, scenario.w_initial)?;
    let coeffs = effective_coeffs(layout, bs, j - 1, &samples, scenario)?;
    let seed = pair_seed(scenario.rng_seed, j, k);
    let initial = PhaseProfile::random(layout.len(), scenario.quantization, seed);
    let solution = solve(&coeffs, settings, initial)?;
    let codeword = RisCodeword {
        j,
        k,
        seed,
        epochs: solution.trace.len(),
        mode: settings.mode,
        phases: solution.phases.clone(),
    };
    Ok((codeword, solution))
}

/// Called once per finished pair with `(j, k, solution)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize, &Solution) + Sync);

pub struct GenerateOptions<'a> {
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
    pub early_stop: Option<f64>,
    pub progress: Option<Progress<'a>>,
}

impl Default for GenerateOptions<'_> {
    fn default() -> Self {
        GenerateOptions {
            jobs: 1,
            early_stop: None,
            progress: None,
        }
    }
}

/// Solves every (BS codeword, region) pair. Pairs run concurrently on a
/// pool of `options.jobs` threads; the result does not depend on the pool
/// size.
pub fn generate_codebook(
    scenario: &ScenarioConfig,
    panels: &[PanelSpec],
    bs: &BsArray,
    regions: &[Region],
    mode: SolverMode,
    options: &GenerateOptions<'_>,
) -> Result<Codebook> {
    scenario.validate()?;
    bs.validate()?;
    if regions.is_empty() {
        return Err(Error::config("codebook needs at least one region"));
    }
    let layout = build_layout(panels, bs)?;
    let mut settings = SolverSettings::from_scenario(scenario, mode);
    settings.early_stop = options.early_stop;

    let pairs: Vec<(usize, usize)> = (1..=bs.codeword_count())
        .flat_map(|j| (1..=regions.len()).map(move |k| (j, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let mut codewords = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(j, k)| {
                let (cw, solution) = solve_pair(scenario, &layout, bs, &regions[k - 1], j, k, &settings)
                    .map_err(|e| Error::Pair {
                        j,
                        k,
                        source: Box::new(e),
                    })?;
                if let Some(report) = options.progress {
                    report(j, k, &solution);
                }
                Ok(cw)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    codewords.sort_by_key(|cw| (cw.j, cw.k));

    let book = Codebook {
        scenario_digest: scenario_digest(scenario, panels, bs),
        scenario: scenario.clone(),
        panels: panels.to_vec(),
        regions: regions.to_vec(),
        bs: bs.clone(),
        codewords,
    };
    book.validate()?;
    debug_assert!(book.is_complete());
    Ok(book)
}

pub fn save_codebook(book: &Codebook, path: &Path) -> Result<()> {
    fs::write(path, book.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Codebook::from_json(&text, path)
}
