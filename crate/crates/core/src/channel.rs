//! Cascaded line-of-sight channel: BS → panel element → UE.
//!
//! Each element contributes `c_{n,u} = (Σ_m G_{n,m} C^BS_{m,j}) · h_{n,u}` to
//! the field at sample point `u`. Both link coefficients use the same
//! free-space form `λ √(gains · patterns) / (4π d) · e^{-j2πd/λ}`; the panel
//! pattern is `cos^p` of the elevation from the element's normal (the +X
//! normal towards the room for the UE link, the -X normal for the BS link).

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BsArray, ElementLayout, SamplePointSet, Vec3};
use crate::solver::Quantization;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Physical and solver constants of a scenario. Powers are in watts and
/// gains are linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub frequency: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    pub g_ris: f64,
    pub g_tx: f64,
    pub g_rx: f64,
    pub radiation_exponent: f64,
    pub quantization: Quantization,
    pub rng_seed: u64,
    pub w_initial: f64,
    pub max_epochs: usize,
}

impl Default for ScenarioConfig {
    /// 30 GHz, 44 dBm transmit power, -105 dBm noise, G_RIS = 8, isotropic BS
    /// and UE, cos³ element pattern, initial weight 100, 20 epochs.
    fn default() -> Self {
        ScenarioConfig {
            frequency: 30e9,
            tx_power: dbm_to_watts(44.0),
            noise_power: dbm_to_watts(-105.0),
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

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be positive and finite, got {v}")))
            }
        };
        positive(self.frequency, "frequency")?;
        positive(self.tx_power, "tx_power")?;
        positive(self.noise_power, "noise_power")?;
        positive(self.g_ris, "g_ris")?;
        positive(self.g_tx, "g_tx")?;
        positive(self.g_rx, "g_rx")?;
        positive(self.radiation_exponent, "radiation_exponent")?;
        positive(self.w_initial, "w_initial")?;
        if self.max_epochs == 0 {
            return Err(Error::config("max_epochs must be at least 1"));
        }
        self.quantization.validate()
    }
}

/// Normalized power pattern `cos^exponent(elevation)` on the front
/// half-space, zero behind it.
pub fn radiation_gain(elevation: f64, exponent: f64) -> f64 {
    if (0.0..FRAC_PI_2).contains(&elevation) {
        elevation.cos().powf(exponent).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Amplitude pattern `sqrt(F)` from the elevation cosine.
#[inline]
fn amplitude_pattern(cos_elevation: f64, exponent: f64) -> f64 {
    if cos_elevation > 0.0 {
        cos_elevation.min(1.0).powf(exponent / 2.0)
    } else {
        0.0
    }
}

/// Precomputed per-link constants for the hot loops.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LinkModel {
    wavenumber: f64,
    ue_scale: f64,
    bs_scale: f64,
    exponent: f64,
}

impl LinkModel {
    pub(crate) fn new(scenario: &ScenarioConfig) -> Self {
        let lambda = scenario.wavelength();
        let base = lambda / (4.0 * PI);
        LinkModel {
            wavenumber: 2.0 * PI / lambda,
            // F^rx = F^tx = 1 for the isotropic UE and BS
            ue_scale: base * (scenario.g_ris * scenario.g_rx).sqrt(),
            bs_scale: base * (scenario.g_ris * scenario.g_tx).sqrt(),
            exponent: scenario.radiation_exponent,
        }
    }

    #[inline]
    fn link(&self, scale: f64, element: &Vec3, facing: &Vec3, other: &Vec3) -> Result<Complex64> {
        let v = other - element;
        let d = v.norm();
        if !(d > 0.0) {
            return Err(Error::DegenerateGeometry(format!(
                "element at {:?} coincides with link endpoint",
                element.as_slice()
            )));
        }
        let amp = scale * amplitude_pattern(v.dot(facing) / d, self.exponent) / d;
        Ok(Complex64::from_polar(amp, -self.wavenumber * d))
    }

    #[inline]
    pub(crate) fn ue_link(&self, element: &Vec3, normal: &Vec3, ue: &Vec3) -> Result<Complex64> {
        self.link(self.ue_scale, element, normal, ue)
    }

    #[inline]
    pub(crate) fn bs_link(&self, element: &Vec3, normal: &Vec3, antenna: &Vec3) -> Result<Complex64> {
        self.link(self.bs_scale, element, &-normal, antenna)
    }
}

/// Element → UE coefficient `[h]_n`. `normal` is the element's room-facing
/// normal.
pub fn h_entry(element: &Vec3, normal: &Vec3, ue: &Vec3, scenario: &ScenarioConfig) -> Result<Complex64> {
    LinkModel::new(scenario).ue_link(element, normal, ue)
}

/// BS antenna → element coefficient `[G]_{n,m}`. The element receives on
/// the side opposite `normal`.
pub fn g_entry(
    element: &Vec3,
    normal: &Vec3,
    antenna: &Vec3,
    scenario: &ScenarioConfig,
) -> Result<Complex64> {
    LinkModel::new(scenario).bs_link(element, normal, antenna)
}

/// `Σ_m G_{n,m} w_m` for every element in sweep order.
pub fn bs_illumination(
    layout: &ElementLayout,
    bs: &BsArray,
    beam: &[Complex64],
    scenario: &ScenarioConfig,
) -> Result<Vec<Complex64>> {
    if beam.len() != bs.antenna_count() {
        return Err(Error::DimensionMismatch {
            what: "BS beam length",
            expected: bs.antenna_count(),
            actual: beam.len(),
        });
    }
    let model = LinkModel::new(scenario);
    layout
        .sorted_elements()
        .map(|(pos, normal)| {
            bs.antenna_positions
                .iter()
                .zip(beam)
                .try_fold(Complex64::new(0.0, 0.0), |acc, (ant, w)| {
                    Ok(acc + model.bs_link(&pos, &normal, ant)? * w)
                })
        })
        .collect()
}

/// The per-(element, point) cascade coefficients, element-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveCoefficients {
    elements: usize,
    points: usize,
    values: Vec<Complex64>,
}

impl EffectiveCoefficients {
    /// Builds the table from element-major values (`values[n * points + u]`).
    pub fn from_values(elements: usize, points: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != elements * points {
            return Err(Error::DimensionMismatch {
                what: "coefficient table size",
                expected: elements * points,
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite(format!(
                "coefficient for element {}, point {}",
                bad / points.max(1),
                bad % points.max(1)
            )));
        }
        Ok(EffectiveCoefficients {
            elements,
            points,
            values,
        })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Coefficients of element `n` at every sample point.
    pub fn row(&self, n: usize) -> &[Complex64] {
        &self.values[n * self.points..(n + 1) * self.points]
    }

    pub fn get(&self, n: usize, u: usize) -> Complex64 {
        self.values[n * self.points + u]
    }

    /// `Ψ_{n,u} = |c_{n,u}|`.
    pub fn amplitude(&self, n: usize, u: usize) -> f64 {
        self.get(n, u).norm()
    }

    /// `ψ_{n,u} = ∠c_{n,u}` in `[0, 2π)`.
    pub fn phase(&self, n: usize, u: usize) -> f64 {
        wrap_phase(self.get(n, u).arg())
    }

    /// Coefficients of every element at sample point `u`, in sweep order.
    pub fn column(&self, u: usize) -> impl ExactSizeIterator<Item = Complex64> + '_ {
        (0..self.elements).map(move |n| self.values[n * self.points + u])
    }
}

pub(crate) fn wrap_phase(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Cascade coefficients for an arbitrary BS beam vector.
pub fn effective_coeffs_for_beam(
    layout: &ElementLayout,
    bs: &BsArray,
    beam: &[Complex64],
    samples: &SamplePointSet,
    scenario: &ScenarioConfig,
) -> Result<EffectiveCoefficients> {
    let illumination = bs_illumination(layout, bs, beam, scenario)?;
    let model = LinkModel::new(scenario);
    let points = samples.len();
    let rows: Vec<Vec<Complex64>> = (0..layout.len())
        .into_par_iter()
        .map(|n| {
            let (pos, normal) = layout.sorted_element(n);
            samples
                .points
                .iter()
                .map(|ue| Ok(illumination[n] * model.ue_link(&pos, &normal, ue)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let values = rows.into_iter().flatten().collect();
    EffectiveCoefficients::from_values(layout.len(), points, values)
}

/// Cascade coefficients under BS codeword `j` (zero-based).
pub fn effective_coeffs(
    layout: &ElementLayout,
    bs: &BsArray,
    j: usize,
    samples: &SamplePointSet,
    scenario: &ScenarioConfig,
) -> Result<EffectiveCoefficients> {
    let beam = bs.codeword(j)?;
    effective_coeffs_for_beam(layout, bs, beam, samples, scenario)
}
