//! Received power, spectral efficiency, outage, CDFs and room heatmaps.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{bs_illumination, EffectiveCoefficients, LinkModel, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{grid_centroids, BsArray, ElementLayout, Vec3};

/// `P^tx |Σ_n c_n e^{jθ_n}|²`.
pub fn received_power<I>(column: I, thetas: &[f64], tx_power: f64) -> f64
where
    I: IntoIterator<Item = Complex64>,
{
    let field: Complex64 = column
        .into_iter()
        .zip(thetas)
        .map(|(c, &t)| c * Complex64::from_polar(1.0, t))
        .sum();
    tx_power * field.norm_sqr()
}

/// `log₂(1 + power / noise)`.
pub fn spectral_efficiency(power: f64, noise: f64) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(Error::config(format!("noise power must be positive, got {noise}")));
    }
    Ok(se_from_ratio(power / noise))
}

#[inline]
pub(crate) fn se_from_ratio(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Arithmetic mean, computed as offsets from the first sample so that
/// identical inputs yield exactly that value.
pub fn mean(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Fraction of samples strictly below `threshold`.
pub fn outage(se: &[f64], threshold: f64) -> f64 {
    if se.is_empty() {
        return f64::NAN;
    }
    se.iter().filter(|&&v| v < threshold).count() as f64 / se.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub region: String,
    pub codeword: String,
    pub mean_se: f64,
    /// `(threshold, outage probability)` pairs in the requested order.
    pub outage: Vec<(f64, f64)>,
    pub se_samples: Vec<f64>,
}

impl CoverageReport {
    pub fn from_se(
        region: impl Into<String>,
        codeword: impl Into<String>,
        se_samples: Vec<f64>,
        thresholds: &[f64],
    ) -> Result<Self> {
        let region = region.into();
        if se_samples.is_empty() {
            return Err(Error::EmptyRegion(region));
        }
        if thresholds.is_empty() {
            return Err(Error::config("at least one outage threshold is required"));
        }
        if se_samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("spectral efficiency in region `{region}`")));
        }
        Ok(CoverageReport {
            mean_se: mean(&se_samples),
            outage: thresholds.iter().map(|&t| (t, outage(&se_samples, t))).collect(),
            region,
            codeword: codeword.into(),
            se_samples,
        })
    }

    pub fn outage_at(&self, threshold: f64) -> Option<f64> {
        self.outage.iter().find(|(t, _)| *t == threshold).map(|&(_, p)| p)
    }

    /// Key-value text report.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "region = {}", self.region);
        let _ = writeln!(out, "codeword = {}", self.codeword);
        let _ = writeln!(out, "points = {}", self.se_samples.len());
        let _ = writeln!(out, "mean_se_bps_hz = {}", self.mean_se);
        for (t, p) in &self.outage {
            let _ = writeln!(out, "outage@{t} = {p}");
        }
        out
    }
}

/// Per-point SE of a phase profile over a coefficient table.
pub fn region_se(coeffs: &EffectiveCoefficients, thetas: &[f64], tx_power: f64, noise: f64) -> Result<Vec<f64>> {
    if thetas.len() != coeffs.elements() {
        return Err(Error::DimensionMismatch {
            what: "phase count",
            expected: coeffs.elements(),
            actual: thetas.len(),
        });
    }
    (0..coeffs.points())
        .map(|u| spectral_efficiency(received_power(coeffs.column(u), thetas, tx_power), noise))
        .collect()
}

/// Coverage of one region by one codeword.
pub fn evaluate_region(
    region: &str,
    codeword: &str,
    coeffs: &EffectiveCoefficients,
    thetas: &[f64],
    thresholds: &[f64],
    scenario: &ScenarioConfig,
) -> Result<CoverageReport> {
    if coeffs.points() == 0 {
        return Err(Error::EmptyRegion(region.to_string()));
    }
    let se = region_se(coeffs, thetas, scenario.tx_power, scenario.noise_power)?;
    CoverageReport::from_se(region, codeword, se, thresholds)
}

/// Empirical CDF: distinct sorted values paired with the fraction of samples
/// at or below them.
pub fn cdf(se: &[f64]) -> Result<Vec<(f64, f64)>> {
    if se.is_empty() {
        return Err(Error::config("CDF of an empty sample set"));
    }
    let mut sorted = se.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / total;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("se_bps_hz,cum_prob\n");
    for (v, p) in cdf {
        let _ = writeln!(out, "{v},{p}");
    }
    out
}

/// Evaluation grid over the UE plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub step: f64,
    pub z: f64,
}

impl Default for GridSpec {
    /// The 20 m x 20 m room floor at UE height 0.5 m, 0.1 m pitch.
    fn default() -> Self {
        GridSpec {
            x: [0.0, 20.0],
            y: [0.0, 20.0],
            step: 0.1,
            z: 0.5,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.x[0] < self.x[1]) || !(self.y[0] < self.y[1]) {
            return Err(Error::config(format!("invalid evaluation grid {self:?}")));
        }
        Ok(())
    }

    /// Cell centroids, x-major then y.
    pub fn points(&self) -> Vec<Vec3> {
        grid_centroids((self.x, self.y), self.step)
            .map(|(x, y)| Vec3::new(x, y, self.z))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub grid: GridSpec,
    pub points: Vec<Vec3>,
    pub se: Vec<f64>,
}

impl Heatmap {
    /// CSV with columns `x_m, y_m, se_bps_hz`, one row per grid cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 40);
        out.push_str("x_m,y_m,se_bps_hz\n");
        for (p, se) in self.points.iter().zip(&self.se) {
            let _ = writeln!(out, "{},{},{}", p.x, p.y, se);
        }
        out
    }

    pub fn mean(&self) -> f64 {
        mean(&self.se)
    }

    /// Grayscale SVG: one square per cell, black at the minimum SE and white
    /// at the maximum, linear in between. +x runs right, +y runs up.
    pub fn to_svg(&self, pixels_per_cell: f64) -> String {
        let step = self.grid.step;
        let (x0, y1) = (self.grid.x[0], self.grid.y[1]);
        let width = (self.grid.x[1] - x0) / step * pixels_per_cell;
        let height = (y1 - self.grid.y[0]) / step * pixels_per_cell;
        let lo = self.se.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.se.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
             viewBox=\"0 0 {width} {height}\" shape-rendering=\"crispEdges\">\n"
        );
        let _ = writeln!(out, "<!-- se range [{lo}, {hi}] bps/Hz mapped to gray 0..255 -->");
        for (p, se) in self.points.iter().zip(&self.se) {
            let gray = (((se - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8;
            let px = ((p.x - step / 2.0 - x0) / step * pixels_per_cell).round();
            let py = ((y1 - p.y - step / 2.0) / step * pixels_per_cell).round();
            let _ = writeln!(
                out,
                "<rect x=\"{px}\" y=\"{py}\" width=\"{pixels_per_cell}\" height=\"{pixels_per_cell}\" \
                 fill=\"#{gray:02x}{gray:02x}{gray:02x}\"/>"
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// SE of a phase profile at every cell of `grid`, with the channel evaluated
/// on demand per cell. Output order follows [`GridSpec::points`] regardless
/// of parallelism.
pub fn heatmap(
    layout: &ElementLayout,
    bs: &BsArray,
    beam: &[Complex64],
    thetas: &[f64],
    scenario: &ScenarioConfig,
    grid: &GridSpec,
) -> Result<Heatmap> {
    grid.validate()?;
    if thetas.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            what: "phase count",
            expected: layout.len(),
            actual: thetas.len(),
        });
    }
    let illumination = bs_illumination(layout, bs, beam, scenario)?;
    let driven: Vec<Complex64> = illumination
        .iter()
        .zip(thetas)
        .map(|(g, &t)| g * Complex64::from_polar(1.0, t))
        .collect();
    let elements: Vec<(Vec3, Vec3)> = layout.sorted_elements().collect();
    let model = LinkModel::new(scenario);
    let points = grid.points();
    let se = points
        .par_iter()
        .map(|ue| {
            let mut field = Complex64::new(0.0, 0.0);
            for ((pos, normal), a) in elements.iter().zip(&driven) {
                field += a * model.ue_link(pos, normal, ue)?;
            }
            spectral_efficiency(scenario.tx_power * field.norm_sqr(), scenario.noise_power)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Heatmap {
        grid: grid.clone(),
        points,
        se,
    })
}
