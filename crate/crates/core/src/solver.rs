//! BCD / AWBCD coordinate-descent phase solver.
//!
//! Each element phase `θ_n` is updated in closed form with every other phase
//! held fixed. Writing the field at point `u` as
//!
//! ```text
//! S_u = Υ e^{jυ} + Ψ e^{j(ψ + θ_n)}
//! ```
//!
//! (the residual of all other elements plus element `n`'s own term), the
//! weighted log-SE objective is approximated by the single sinusoid
//!
//! ```text
//! Σ_u a_u cos(θ_n + ψ_u − υ_u) = U cos θ_n − D sin θ_n,
//! a_u = w_u Ψ_u Υ_u / (Ψ_u² + Υ_u²),
//! D = Σ_u a_u sin(ψ_u − υ_u),   U = Σ_u a_u cos(ψ_u − υ_u).
//! ```
//!
//! Its peak sits at `θ* = atan2(−D, U) = π/2 − χ` with `χ = atan2(U, −D)`.
//! For `D < 0` this is `π/2 − arctan(−U/D)`, and for `D > 0` it is
//! `3π/2 − arctan(−U/D)` modulo 2π, so the two-argument arctangent covers
//! both sign branches of the classic form and is also defined at `D = 0`.
//! Since the surrogate is a single sinusoid, the nearest quantization level
//! to `θ*` on the circle is its maximizer over the level set.
//!
//! In the inner loop `a_u e^{j(ψ_u − υ_u)}` is evaluated without
//! trigonometry as `w_u c_{n,u} conj(r_u) / (|c_{n,u}|² + |r_u|²)`, where
//! `r_u = S_u − c_{n,u} e^{jθ_n}` is the residual; `U` and `D` are its real
//! and imaginary parts.
//!
//! The element response is taken as `e^{+jθ_n}`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{wrap_phase, EffectiveCoefficients, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics;

/// Largest supported phase resolution in bits.
pub const MAX_BITS: u8 = 16;

/// Below this magnitude for both `D` and `U` a coordinate carries no
/// information and is left unchanged.
pub const NO_INFORMATION: f64 = 1e-300;

/// The phase set `Q`: the full circle or `2^q` uniform levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "QuantizationRepr", into = "QuantizationRepr")]
pub enum Quantization {
    Continuous,
    Bits(u8),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QuantizationRepr {
    Bits(u8),
    Name(String),
}

impl TryFrom<QuantizationRepr> for Quantization {
    type Error = String;

    fn try_from(value: QuantizationRepr) -> std::result::Result<Self, Self::Error> {
        match value {
            QuantizationRepr::Bits(q) => Ok(Quantization::Bits(q)),
            QuantizationRepr::Name(s) => s.parse(),
        }
    }
}

impl From<Quantization> for QuantizationRepr {
    fn from(value: Quantization) -> Self {
        match value {
            Quantization::Continuous => QuantizationRepr::Name("continuous".into()),
            Quantization::Bits(q) => QuantizationRepr::Bits(q),
        }
    }
}

impl FromStr for Quantization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("continuous") || s.eq_ignore_ascii_case("cont") {
            return Ok(Quantization::Continuous);
        }
        let digits = s.strip_prefix('q').unwrap_or(s);
        digits
            .parse::<u8>()
            .map(Quantization::Bits)
            .map_err(|_| format!("invalid quantization `{s}` (expected `continuous` or a bit count)"))
    }
}

impl fmt::Display for Quantization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantization::Continuous => f.write_str("continuous"),
            Quantization::Bits(q) => write!(f, "{q}"),
        }
    }
}

impl Quantization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Quantization::Bits(q) if q == 0 || q > MAX_BITS => Err(Error::config(format!(
                "quantization must be 1..={MAX_BITS} bits or continuous, got {q}"
            ))),
            _ => Ok(()),
        }
    }

    /// Number of levels `2^q`, or `None` when continuous.
    pub fn level_count(&self) -> Option<u32> {
        match *self {
            Quantization::Continuous => None,
            Quantization::Bits(q) => Some(1u32 << q),
        }
    }

    fn step(levels: u32) -> f64 {
        TAU / levels as f64
    }

    /// Angle of level `k`: `k · 2π / 2^q`.
    pub fn level_angle(&self, level: u32) -> f64 {
        match self.level_count() {
            Some(l) => level as f64 * Self::step(l),
            None => 0.0,
        }
    }

    /// Level nearest to `angle` in circular distance; ties go to the smaller
    /// level index.
    pub fn nearest_level(&self, angle: f64) -> Option<u32> {
        let levels = self.level_count()?;
        let step = Self::step(levels);
        let a = wrap_phase(angle);
        let below = ((a / step).floor() as u32).min(levels - 1);
        let above = (below + 1) % levels;
        let d_below = a - below as f64 * step;
        let d_above = (below + 1) as f64 * step - a;
        Some(if d_below < d_above {
            below
        } else if d_above < d_below {
            above
        } else {
            below.min(above)
        })
    }
}

/// Projects `angle` onto `Q`: nearest level for discrete sets, `angle mod 2π`
/// for the continuous one.
pub fn quantize(angle: f64, q: Quantization) -> f64 {
    match q.nearest_level(angle) {
        Some(level) => q.level_angle(level),
        None => wrap_phase(angle),
    }
}

/// Element phases over a fixed quantization set.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseProfile {
    quantization: Quantization,
    thetas: Vec<f64>,
}

impl PhaseProfile {
    /// Projects arbitrary angles onto `Q`.
    pub fn new(quantization: Quantization, angles: &[f64]) -> Self {
        PhaseProfile {
            quantization,
            thetas: angles.iter().map(|&a| quantize(a, quantization)).collect(),
        }
    }

    pub fn from_levels(quantization: Quantization, levels: &[u32]) -> Result<Self> {
        let count = quantization
            .level_count()
            .ok_or_else(|| Error::config("levels given for a continuous phase set"))?;
        if let Some(&bad) = levels.iter().find(|&&l| l >= count) {
            return Err(Error::config(format!("phase level {bad} outside 0..{count}")));
        }
        Ok(PhaseProfile {
            quantization,
            thetas: levels.iter().map(|&l| quantization.level_angle(l)).collect(),
        })
    }

    /// Phases drawn uniformly from `Q` with a ChaCha8 stream seeded by `seed`.
    pub fn random(elements: usize, quantization: Quantization, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thetas = match quantization.level_count() {
            Some(levels) => (0..elements)
                .map(|_| quantization.level_angle(rng.random_range(0..levels)))
                .collect(),
            None => (0..elements).map(|_| rng.random::<f64>() * TAU).collect(),
        };
        PhaseProfile {
            quantization,
            thetas,
        }
    }

    pub fn quantization(&self) -> Quantization {
        self.quantization
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Level indices, or `None` for continuous profiles.
    pub fn levels(&self) -> Option<Vec<u32>> {
        self.quantization.level_count()?;
        Some(
            self.thetas
                .iter()
                .map(|&t| self.quantization.nearest_level(t).unwrap_or(0))
                .collect(),
        )
    }

    fn set(&mut self, n: usize, theta: f64) {
        self.thetas[n] = theta;
    }
}

fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// Running field sums `S_u = Σ_n c_{n,u} e^{jθ_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualState {
    sums: Vec<Complex64>,
}

impl ResidualState {
    pub fn new(coeffs: &EffectiveCoefficients, phases: &PhaseProfile) -> Self {
        ResidualState {
            sums: full_sums(coeffs, phases.thetas()),
        }
    }

    pub fn sums(&self) -> &[Complex64] {
        &self.sums
    }

    /// Largest relative deviation of the maintained sums from a fresh
    /// recomputation.
    pub fn drift(&self, coeffs: &EffectiveCoefficients, phases: &PhaseProfile) -> f64 {
        relative_drift(&self.sums, &full_sums(coeffs, phases.thetas()))
    }

    /// Replaces the sums with a fresh recomputation; returns the drift that
    /// had accumulated.
    pub fn refresh(&mut self, coeffs: &EffectiveCoefficients, phases: &PhaseProfile) -> f64 {
        let fresh = full_sums(coeffs, phases.thetas());
        let drift = relative_drift(&self.sums, &fresh);
        self.sums = fresh;
        drift
    }
}

fn full_sums(coeffs: &EffectiveCoefficients, thetas: &[f64]) -> Vec<Complex64> {
    let mut sums = vec![Complex64::new(0.0, 0.0); coeffs.points()];
    for (n, &theta) in thetas.iter().enumerate().take(coeffs.elements()) {
        let rot = cis(theta);
        for (s, c) in sums.iter_mut().zip(coeffs.row(n)) {
            *s += c * rot;
        }
    }
    sums
}

fn relative_drift(maintained: &[Complex64], fresh: &[Complex64]) -> f64 {
    maintained
        .iter()
        .zip(fresh)
        .map(|(m, f)| {
            let diff = (m - f).norm();
            if diff == 0.0 {
                0.0
            } else {
                diff / f.norm().max(f64::MIN_POSITIVE)
            }
        })
        .fold(0.0, f64::max)
}

/// `(Υ_{n,u}, υ_{n,u})` for every sample point: modulus and phase (in
/// `[0, 2π)`) of the field without element `n`. A zero residual reports
/// phase 0.
pub fn residual(
    state: &ResidualState,
    coeffs: &EffectiveCoefficients,
    phases: &PhaseProfile,
    n: usize,
) -> Vec<(f64, f64)> {
    let rot = cis(phases.thetas()[n]);
    state
        .sums
        .iter()
        .zip(coeffs.row(n))
        .map(|(s, c)| {
            let r = s - c * rot;
            let mag = r.norm();
            if mag == 0.0 {
                (0.0, 0.0)
            } else {
                (mag, wrap_phase(r.arg()))
            }
        })
        .collect()
}

/// The surrogate coefficients `(D, U)` from amplitudes `Ψ`, phases `ψ`,
/// residuals `(Υ, υ)` and weights.
pub fn surrogate_terms(
    amplitudes: &[f64],
    phases: &[f64],
    residuals: &[(f64, f64)],
    weights: &[f64],
) -> (f64, f64) {
    let mut d = 0.0;
    let mut u = 0.0;
    for (((&psi_amp, &psi), &(ups_amp, ups)), &w) in amplitudes.iter().zip(phases).zip(residuals).zip(weights) {
        let denom = psi_amp * psi_amp + ups_amp * ups_amp;
        if denom == 0.0 {
            continue;
        }
        let a = w * psi_amp * ups_amp / denom;
        let (s, c) = (psi - ups).sin_cos();
        d += a * s;
        u += a * c;
    }
    (d, u)
}

/// Closed-form maximizer of `U cos θ − D sin θ` over `Q`. Returns `None`
/// when both terms are below [`NO_INFORMATION`].
pub fn update_from_terms(d: f64, u: f64, q: Quantization) -> Option<f64> {
    if d.abs() < NO_INFORMATION && u.abs() < NO_INFORMATION {
        return None;
    }
    let chi = u.atan2(-d);
    Some(quantize(FRAC_PI_2 - chi, q))
}

/// Closed-form update of one coordinate from the per-point amplitude/phase
/// quantities. Returns `None` for a no-information coordinate.
pub fn coordinate_update(
    amplitudes: &[f64],
    phases: &[f64],
    residuals: &[(f64, f64)],
    weights: &[f64],
    q: Quantization,
) -> Option<f64> {
    let (d, u) = surrogate_terms(amplitudes, phases, residuals, weights);
    update_from_terms(d, u, q)
}

/// `(D, U)` for element `n` straight from the complex sums.
fn surrogate_terms_complex(row: &[Complex64], sums: &[Complex64], weights: &[f64], rot: Complex64) -> (f64, f64) {
    let mut acc = Complex64::new(0.0, 0.0);
    for ((c, s), &w) in row.iter().zip(sums).zip(weights) {
        let r = s - c * rot;
        let denom = c.norm_sqr() + r.norm_sqr();
        if denom == 0.0 {
            continue;
        }
        acc += c * r.conj() * (w / denom);
    }
    (acc.im, acc.re)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepStats {
    /// Elements whose phase changed.
    pub changed: usize,
    /// Relative drift of the incrementally maintained sums, measured just
    /// before the end-of-sweep refresh.
    pub drift: f64,
}

/// One pass of coordinate updates over all elements in sweep order.
pub fn sweep(
    coeffs: &EffectiveCoefficients,
    weights: &[f64],
    phases: &mut PhaseProfile,
    state: &mut ResidualState,
) -> Result<SweepStats> {
    check_dims(coeffs, weights, phases, state)?;
    let q = phases.quantization();
    let mut changed = 0;
    for n in 0..coeffs.elements() {
        let row = coeffs.row(n);
        let old = phases.thetas()[n];
        let rot = cis(old);
        let (d, u) = surrogate_terms_complex(row, &state.sums, weights, rot);
        let Some(new) = update_from_terms(d, u, q) else {
            continue;
        };
        if new == old {
            continue;
        }
        let delta = cis(new) - rot;
        for (s, c) in state.sums.iter_mut().zip(row) {
            *s += c * delta;
        }
        phases.set(n, new);
        changed += 1;
    }
    let drift = state.refresh(coeffs, phases);
    Ok(SweepStats { changed, drift })
}

fn check_dims(
    coeffs: &EffectiveCoefficients,
    weights: &[f64],
    phases: &PhaseProfile,
    state: &ResidualState,
) -> Result<()> {
    if phases.len() != coeffs.elements() {
        return Err(Error::DimensionMismatch {
            what: "phase count",
            expected: coeffs.elements(),
            actual: phases.len(),
        });
    }
    if weights.len() != coeffs.points() {
        return Err(Error::DimensionMismatch {
            what: "weight count",
            expected: coeffs.points(),
            actual: weights.len(),
        });
    }
    if state.sums.len() != coeffs.points() {
        return Err(Error::DimensionMismatch {
            what: "residual state size",
            expected: coeffs.points(),
            actual: state.sums.len(),
        });
    }
    Ok(())
}

/// Adds 1 to the weight of every point whose SE is at or below the uniform
/// mean SE.
pub fn update_weights(se: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if se.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "weight count",
            expected: se.len(),
            actual: weights.len(),
        });
    }
    let mean = metrics::mean(se);
    Ok(se
        .iter()
        .zip(weights)
        .map(|(&eta, &w)| if eta <= mean { w + 1.0 } else { w })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Fixed weights.
    Bcd,
    /// Per-epoch weight increments on under-served points.
    Awbcd,
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bcd" => Ok(SolverMode::Bcd),
            "awbcd" => Ok(SolverMode::Awbcd),
            other => Err(format!("unknown solver mode `{other}` (expected bcd or awbcd)")),
        }
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverMode::Bcd => "bcd",
            SolverMode::Awbcd => "awbcd",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub mode: SolverMode,
    pub max_epochs: usize,
    pub w_initial: f64,
    pub tx_power: f64,
    pub noise_power: f64,
    /// SE thresholds (bps/Hz) tracked in the per-epoch outage columns.
    pub thresholds: Vec<f64>,
    /// Stop once the relative mean-SE change between epochs drops below
    /// this value. Off by default.
    pub early_stop: Option<f64>,
}

impl SolverSettings {
    pub fn from_scenario(scenario: &ScenarioConfig, mode: SolverMode) -> Self {
        SolverSettings {
            mode,
            max_epochs: scenario.max_epochs,
            w_initial: scenario.w_initial,
            tx_power: scenario.tx_power,
            noise_power: scenario.noise_power,
            thresholds: Vec::new(),
            early_stop: None,
        }
    }

    pub fn with_thresholds(mut self, thresholds: &[f64]) -> Self {
        self.thresholds = thresholds.to_vec();
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_se: f64,
    /// Outage fraction per configured threshold, in threshold order.
    pub outage: Vec<f64>,
    pub duration: Duration,
    pub residual_drift: f64,
    pub changed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub thresholds: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn final_mean_se(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_se)
    }

    /// CSV with columns `epoch, mean_se_bps_hz, outage@<t>..., elapsed_ms`;
    /// `elapsed_ms` is cumulative since the solve started.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_se_bps_hz");
        for t in &self.thresholds {
            out.push_str(&format!(",outage@{t}"));
        }
        out.push_str(",elapsed_ms\n");
        let mut elapsed = Duration::ZERO;
        for e in &self.epochs {
            elapsed += e.duration;
            out.push_str(&format!("{},{}", e.epoch, e.mean_se));
            for o in &e.outage {
                out.push_str(&format!(",{o}"));
            }
            out.push_str(&format!(",{}\n", elapsed.as_secs_f64() * 1e3));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub phases: PhaseProfile,
    pub trace: SolveTrace,
    pub weights: Vec<f64>,
}

/// Runs up to `max_epochs` sweeps from `initial`. AWBCD bumps the weights of
/// under-served points after every epoch; BCD keeps them at `w_initial`.
pub fn solve(coeffs: &EffectiveCoefficients, settings: &SolverSettings, initial: PhaseProfile) -> Result<Solution> {
    if coeffs.points() == 0 {
        return Err(Error::EmptyRegion("<coefficients>".into()));
    }
    if settings.max_epochs == 0 {
        return Err(Error::config("max_epochs must be at least 1"));
    }
    if initial.len() != coeffs.elements() {
        return Err(Error::DimensionMismatch {
            what: "initial phase count",
            expected: coeffs.elements(),
            actual: initial.len(),
        });
    }
    if !(settings.w_initial > 0.0) {
        return Err(Error::config("w_initial must be positive"));
    }

    let mut phases = initial;
    let mut state = ResidualState::new(coeffs, &phases);
    let mut weights = vec![settings.w_initial; coeffs.points()];
    let mut epochs = Vec::with_capacity(settings.max_epochs);

    for epoch in 1..=settings.max_epochs {
        let start = Instant::now();
        let stats = sweep(coeffs, &weights, &mut phases, &mut state)?;
        let se: Vec<f64> = state
            .sums()
            .iter()
            .map(|s| metrics::se_from_ratio(settings.tx_power * s.norm_sqr() / settings.noise_power))
            .collect();
        if se.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("spectral efficiency after epoch {epoch}")));
        }
        let mean_se = metrics::mean(&se);
        let outage = settings.thresholds.iter().map(|&t| metrics::outage(&se, t)).collect();
        if settings.mode == SolverMode::Awbcd {
            weights = update_weights(&se, &weights)?;
        }
        epochs.push(EpochRecord {
            epoch,
            mean_se,
            outage,
            duration: start.elapsed(),
            residual_drift: stats.drift,
            changed: stats.changed,
        });

        if let (Some(eps), [.., prev, last]) = (settings.early_stop, epochs.as_slice()) {
            let rel = (last.mean_se - prev.mean_se).abs() / prev.mean_se.abs().max(f64::MIN_POSITIVE);
            if rel < eps {
                break;
            }
        }
    }

    Ok(Solution {
        phases,
        trace: SolveTrace {
            thresholds: settings.thresholds.clone(),
            epochs,
        },
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn table(rows: &[&[Complex64]]) -> EffectiveCoefficients {
        let points = rows[0].len();
        EffectiveCoefficients::from_values(rows.len(), points, rows.iter().flat_map(|r| r.iter().copied()).collect())
            .unwrap()
    }

    #[test]
    fn quantize_examples() {
        let q2 = Quantization::Bits(2);
        assert_abs_diff_eq!(quantize(0.8, q2), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(quantize(6.0, q2), 0.0);
        assert_eq!(quantize(PI / 4.0, q2), 0.0);
        assert_eq!(quantize(-0.1, q2), 0.0);
        assert_abs_diff_eq!(quantize(7.0, Quantization::Continuous), 7.0 - TAU, epsilon = 1e-15);
        // wrap-around tie between the top level and level 0
        assert_eq!(q2.nearest_level(7.0 * PI / 4.0), Some(0));
    }

    #[test]
    fn quantization_parsing() {
        assert_eq!("continuous".parse::<Quantization>().unwrap(), Quantization::Continuous);
        assert_eq!("3".parse::<Quantization>().unwrap(), Quantization::Bits(3));
        assert_eq!("q2".parse::<Quantization>().unwrap(), Quantization::Bits(2));
        assert!("x".parse::<Quantization>().is_err());
        assert!(Quantization::Bits(0).validate().is_err());
        let json = serde_json::to_string(&[Quantization::Continuous, Quantization::Bits(3)]).unwrap();
        assert_eq!(json, r#"["continuous",3]"#);
    }

    #[test]
    fn residual_examples() {
        let one = Complex64::new(1.0, 0.0);
        let j = Complex64::new(0.0, 1.0);
        let coeffs = table(&[&[one], &[j]]);
        let phases = PhaseProfile::new(Quantization::Continuous, &[0.0, 0.0]);
        let state = ResidualState::new(&coeffs, &phases);
        let r = residual(&state, &coeffs, &phases, 0);
        assert_abs_diff_eq!(r[0].0, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[0].1, FRAC_PI_2, epsilon = 1e-15);

        let single = table(&[&[Complex64::new(0.3, -0.2)]]);
        let p1 = PhaseProfile::new(Quantization::Continuous, &[1.0]);
        let s1 = ResidualState::new(&single, &p1);
        assert_eq!(residual(&s1, &single, &p1, 0)[0], (0.0, 0.0));
    }

    #[test]
    fn coordinate_update_examples() {
        let (amp, psi, res, w) = ([1.0], [0.2], [(10.0, 0.0)], [1.0]);
        let cont = coordinate_update(&amp, &psi, &res, &w, Quantization::Continuous).unwrap();
        assert_abs_diff_eq!(cont, TAU - 0.2, epsilon = 1e-12);
        assert_eq!(coordinate_update(&amp, &psi, &res, &w, Quantization::Bits(2)), Some(0.0));
        // phase-aligned point: D = 0, U > 0
        let aligned = coordinate_update(&amp, &[0.0], &res, &w, Quantization::Continuous).unwrap();
        assert_eq!(aligned, 0.0);
        assert_eq!(update_from_terms(0.0, 0.0, Quantization::Continuous), None);
    }

    #[test]
    fn complex_and_trig_terms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let points = 7;
            let row: Vec<Complex64> = (0..points)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let sums: Vec<Complex64> = (0..points)
                .map(|_| Complex64::new(rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0))
                .collect();
            let weights: Vec<f64> = (0..points).map(|_| 100.0 + rng.random::<f64>() * 10.0).collect();
            let theta = rng.random::<f64>() * TAU;
            let rot = cis(theta);
            let (dc, uc) = surrogate_terms_complex(&row, &sums, &weights, rot);
            let amps: Vec<f64> = row.iter().map(|c| c.norm()).collect();
            let phs: Vec<f64> = row.iter().map(|c| c.arg()).collect();
            let res: Vec<(f64, f64)> = row
                .iter()
                .zip(&sums)
                .map(|(c, s)| {
                    let r = s - c * rot;
                    (r.norm(), r.arg())
                })
                .collect();
            let (dt, ut) = surrogate_terms(&amps, &phs, &res, &weights);
            assert_abs_diff_eq!(dc, dt, epsilon = 1e-10);
            assert_abs_diff_eq!(uc, ut, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_element_reaches_own_maximum() {
        let c = Complex64::new(0.4, 0.3);
        let coeffs = table(&[&[c]]);
        let mut phases = PhaseProfile::new(Quantization::Continuous, &[2.0]);
        let mut state = ResidualState::new(&coeffs, &phases);
        let stats = sweep(&coeffs, &[1.0], &mut phases, &mut state).unwrap();
        // no residual, nothing to align against
        assert_eq!(stats.changed, 0);
        assert_abs_diff_eq!(state.sums()[0].norm_sqr(), c.norm_sqr(), epsilon = 1e-15);
    }

    #[test]
    fn zero_coefficients_leave_phases_unchanged() {
        let zero = Complex64::new(0.0, 0.0);
        let coeffs = table(&[&[zero, zero], &[zero, zero], &[zero, zero]]);
        let start = PhaseProfile::random(3, Quantization::Bits(3), 5);
        let mut phases = start.clone();
        let mut state = ResidualState::new(&coeffs, &phases);
        sweep(&coeffs, &[100.0, 100.0], &mut phases, &mut state).unwrap();
        assert_eq!(phases, start);
    }

    #[test]
    fn one_sweep_phase_aligns_single_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 256;
        let values: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(0.5 + rng.random::<f64>(), rng.random::<f64>() * TAU))
            .collect();
        let coeffs = EffectiveCoefficients::from_values(n, 1, values.clone()).unwrap();
        let mut phases = PhaseProfile::random(n, Quantization::Continuous, 9);
        let mut state = ResidualState::new(&coeffs, &phases);
        let bound: f64 = values.iter().map(|c| c.norm()).sum();
        // the residual direction keeps moving while the first sweep runs, so
        // a single pass lands within 1% and the second within 0.1%
        sweep(&coeffs, &[100.0], &mut phases, &mut state).unwrap();
        assert!(state.sums()[0].norm_sqr() >= 0.99 * bound * bound);
        sweep(&coeffs, &[100.0], &mut phases, &mut state).unwrap();
        assert!(state.sums()[0].norm_sqr() >= 0.999 * bound * bound);
        for _ in 0..40 {
            sweep(&coeffs, &[100.0], &mut phases, &mut state).unwrap();
        }
        let total = state.sums()[0];
        for (c, &t) in values.iter().zip(phases.thetas()) {
            let term = c * cis(t);
            assert!((term / total).arg().abs() < 1e-6);
        }
    }

    #[test]
    fn weight_update_examples() {
        assert_eq!(update_weights(&[1.0, 2.0, 3.0], &[100.0; 3]).unwrap(), vec![101.0, 101.0, 100.0]);
        assert_eq!(update_weights(&[0.1; 5], &[100.0; 5]).unwrap(), vec![101.0; 5]);
        assert!(update_weights(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exhaustive_fixed_point_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let q = Quantization::Bits(1);
        for trial in 0..50 {
            let values: Vec<Complex64> = (0..3)
                .map(|_| Complex64::from_polar(0.2 + rng.random::<f64>(), rng.random::<f64>() * TAU))
                .collect();
            let coeffs = EffectiveCoefficients::from_values(3, 1, values.clone()).unwrap();
            let settings = SolverSettings {
                mode: SolverMode::Awbcd,
                max_epochs: 5,
                w_initial: 100.0,
                tx_power: 1.0,
                noise_power: 1e-6,
                thresholds: vec![],
                early_stop: None,
            };
            let sol = solve(&coeffs, &settings, PhaseProfile::random(3, q, trial)).unwrap();
            let power = |t: &[f64]| values.iter().zip(t).map(|(c, &th)| c * cis(th)).sum::<Complex64>().norm_sqr();
            let best = power(sol.phases.thetas());
            for n in 0..3 {
                let mut flipped = sol.phases.thetas().to_vec();
                flipped[n] = quantize(flipped[n] + PI, q);
                assert!(power(&flipped) <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn trace_csv_layout() {
        let coeffs = table(&[&[Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.5)], &[
            Complex64::new(0.0, 1.0),
            Complex64::new(0.2, 0.1),
        ]]);
        let settings = SolverSettings {
            mode: SolverMode::Bcd,
            max_epochs: 3,
            w_initial: 100.0,
            tx_power: 1.0,
            noise_power: 1e-3,
            thresholds: vec![5.0, 8.5],
            early_stop: None,
        };
        let sol = solve(&coeffs, &settings, PhaseProfile::random(2, Quantization::Continuous, 1)).unwrap();
        let csv = sol.trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "epoch,mean_se_bps_hz,outage@5,outage@8.5,elapsed_ms");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
        assert_eq!(sol.weights, vec![100.0, 100.0]);
    }

    #[test]
    fn solve_rejects_bad_inputs() {
        let coeffs = table(&[&[Complex64::new(1.0, 0.0)]]);
        let settings = SolverSettings::from_scenario(&ScenarioConfig::default(), SolverMode::Bcd);
        let wrong = PhaseProfile::random(2, Quantization::Continuous, 0);
        assert!(matches!(solve(&coeffs, &settings, wrong), Err(Error::DimensionMismatch { .. })));
        let empty = EffectiveCoefficients::from_values(1, 0, vec![]).unwrap();
        let p = PhaseProfile::random(1, Quantization::Continuous, 0);
        assert!(matches!(solve(&empty, &settings, p), Err(Error::EmptyRegion(_))));
    }

    #[test]
    fn early_stop_cuts_trace() {
        let coeffs = table(&[&[Complex64::new(1.0, 0.0)], &[Complex64::new(0.0, 1.0)]]);
        let mut settings = SolverSettings::from_scenario(&ScenarioConfig::default(), SolverMode::Bcd);
        settings.max_epochs = 50;
        settings.early_stop = Some(1e-9);
        let sol = solve(&coeffs, &settings, PhaseProfile::random(2, Quantization::Continuous, 4)).unwrap();
        assert!(sol.trace.len() < 50);
    }

    proptest! {
        #[test]
        fn quantize_returns_nearest_level(angle in -20.0f64..20.0, bits in 1u8..6) {
            let q = Quantization::Bits(bits);
            let got = quantize(angle, q);
            let dist = |a: f64, b: f64| {
                let d = (a - b).rem_euclid(TAU);
                d.min(TAU - d)
            };
            let levels = q.level_count().unwrap();
            let best = (0..levels).map(|l| dist(q.level_angle(l), angle)).fold(f64::INFINITY, f64::min);
            prop_assert!(dist(got, angle) <= best + 1e-12);
        }

        #[test]
        fn levels_round_trip(levels in proptest::collection::vec(0u32..8, 1..40)) {
            let p = PhaseProfile::from_levels(Quantization::Bits(3), &levels).unwrap();
            prop_assert_eq!(p.levels().unwrap(), levels);
        }

        #[test]
        fn incremental_sums_track_full_recomputation(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, points) = (24, 5);
            let values: Vec<Complex64> = (0..n * points)
                .map(|_| Complex64::from_polar(rng.random::<f64>(), rng.random::<f64>() * TAU))
                .collect();
            let coeffs = EffectiveCoefficients::from_values(n, points, values).unwrap();
            let mut phases = PhaseProfile::random(n, Quantization::Bits(2), seed);
            let mut state = ResidualState::new(&coeffs, &phases);
            for _ in 0..3 {
                let stats = sweep(&coeffs, &[100.0; 5], &mut phases, &mut state).unwrap();
                prop_assert!(stats.drift <= 1e-8);
            }
        }

        #[test]
        fn single_point_sweeps_never_lose_power(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 16;
            let values: Vec<Complex64> = (0..n)
                .map(|_| Complex64::from_polar(rng.random::<f64>(), rng.random::<f64>() * TAU))
                .collect();
            let coeffs = EffectiveCoefficients::from_values(n, 1, values).unwrap();
            let mut phases = PhaseProfile::random(n, Quantization::Continuous, seed);
            let mut state = ResidualState::new(&coeffs, &phases);
            let mut prev = state.sums()[0].norm_sqr();
            for _ in 0..4 {
                sweep(&coeffs, &[100.0], &mut phases, &mut state).unwrap();
                let now = state.sums()[0].norm_sqr();
                prop_assert!(now >= prev * (1.0 - 1e-12));
                prev = now;
            }
        }

        #[test]
        fn awbcd_weights_stay_within_epoch_bounds(seed in 0u64..200, epochs in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (n, points) = (8, 6);
            let values: Vec<Complex64> = (0..n * points)
                .map(|_| Complex64::from_polar(rng.random::<f64>(), rng.random::<f64>() * TAU))
                .collect();
            let coeffs = EffectiveCoefficients::from_values(n, points, values).unwrap();
            let settings = SolverSettings {
                mode: SolverMode::Awbcd,
                max_epochs: epochs,
                w_initial: 100.0,
                tx_power: 1.0,
                noise_power: 1e-3,
                thresholds: vec![],
                early_stop: None,
            };
            let sol = solve(&coeffs, &settings, PhaseProfile::random(n, Quantization::Continuous, seed)).unwrap();
            for w in &sol.weights {
                prop_assert!(*w >= 100.0 && *w <= 100.0 + epochs as f64);
            }
        }
    }
}
