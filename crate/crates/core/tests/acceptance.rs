//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Oracles here are written independently of the
//! library's update code: brute-force enumeration, the branched arctangent
//! form and direct field sums.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xlris::channel::{effective_coeffs, EffectiveCoefficients, ScenarioConfig};
use xlris::codebook::{generate_codebook, pair_seed, scenario_digest, Codebook, GenerateOptions, RisCodeword};
use xlris::geometry::{build_layout, sample_region, BsArray, PanelSpec, Region, Shape, Vec3};
use xlris::metrics::{mean, outage, received_power, region_se};
use xlris::solver::{
    coordinate_update, residual, solve, PhaseProfile, Quantization, ResidualState, Solution, SolverMode,
    SolverSettings,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_c(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.01..1.0), rng.random_range(0.0..TAU))
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn levels(q: Quantization) -> Vec<f64> {
    let n = q.level_count().unwrap();
    (0..n).map(|l| TAU * l as f64 / n as f64).collect()
}

fn power_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let values: Vec<Complex64> = (0..8).map(|_| random_c(&mut rng)).collect();
        let thetas: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..TAU)).collect();
        let coeffs = EffectiveCoefficients::from_values(8, 1, values.clone()).unwrap();
        let phases = PhaseProfile::new(Quantization::Continuous, &thetas);
        let state = ResidualState::new(&coeffs, &phases);
        let tx = 25.0;
        let direct = received_power(values.iter().copied(), &thetas, tx);
        for (n, theta) in thetas.iter().enumerate() {
            let (ups, ups_phase) = residual(&state, &coeffs, &phases, n)[0];
            let psi = coeffs.amplitude(n, 0);
            let psi_phase = coeffs.phase(n, 0);
            let decomposed = tx * (psi * psi + ups * ups + 2.0 * psi * ups * (theta + psi_phase - ups_phase).cos());
            worst = worst.max(((decomposed - direct) / direct).abs());
        }
    }
    check(worst < 1e-10, format!("max relative error {worst:.2e} over 100 instances x 8 pivots"))
}

/// The surrogate as a single sinusoid with the sign/arctangent branch,
/// computed from scratch.
fn branched_surrogate(amps: &[f64], phases: &[f64], res: &[(f64, f64)], w: &[f64]) -> (f64, f64, f64) {
    let mut d = 0.0;
    let mut u = 0.0;
    for i in 0..amps.len() {
        let a = w[i] * amps[i] * res[i].0 / (amps[i].powi(2) + res[i].0.powi(2));
        d += a * (phases[i] - res[i].1).sin();
        u += a * (phases[i] - res[i].1).cos();
    }
    let sign = if d <= 0.0 { 1.0 } else { -1.0 };
    let chi = (-u / d).atan();
    (sign, (d * d + u * u).sqrt(), chi)
}

fn closed_form_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut total = 0;
    for bits in 1..=4u8 {
        let q = Quantization::Bits(bits);
        let grid = levels(q);
        for _ in 0..1000 {
            let points = rng.random_range(1..12);
            let amps: Vec<f64> = (0..points).map(|_| rng.random_range(0.01..1.0)).collect();
            let phases: Vec<f64> = (0..points).map(|_| rng.random_range(0.0..TAU)).collect();
            let res: Vec<(f64, f64)> = (0..points)
                .map(|_| (rng.random_range(0.5..20.0), rng.random_range(0.0..TAU)))
                .collect();
            let w: Vec<f64> = (0..points).map(|_| rng.random_range(100.0..130.0)).collect();
            let got = coordinate_update(&amps, &phases, &res, &w, q).unwrap();

            let (sign, r, chi) = branched_surrogate(&amps, &phases, &res, &w);
            let mut best = 0;
            let mut best_val = f64::NEG_INFINITY;
            for (i, &theta) in grid.iter().enumerate() {
                let v = sign * r * (theta + chi).sin();
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            total += 1;
            if circ_dist(grid[best], got) > 1e-12 {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("{mismatches}/{total} disagreements with grid argmax, q in 1..=4"))
}

fn branched_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut discrete_mismatch = 0;
    let mut n = 0;
    while n < 10_000 {
        let d: f64 = rng.random_range(-5.0..5.0);
        let u: f64 = rng.random_range(-5.0..5.0);
        if d.abs() <= 1e-9 {
            continue;
        }
        n += 1;
        let unified = (FRAC_PI_2 - u.atan2(-d)).rem_euclid(TAU);
        let chi = (-u / d).atan();
        let branched = if d <= 0.0 { FRAC_PI_2 - chi } else { 1.5 * PI - chi };
        worst = worst.max(circ_dist(unified, branched));
        // Through the library, with an instance whose surrogate terms are (d, u).
        let amp = (d * d + u * u).sqrt();
        let psi = d.atan2(u);
        let got = coordinate_update(&[1.0], &[psi], &[(1.0, 0.0)], &[2.0 * amp], Quantization::Continuous).unwrap();
        if circ_dist(got, branched) > 1e-9 {
            discrete_mismatch += 1;
        }
    }
    check(
        worst < 1e-9 && discrete_mismatch == 0,
        format!("max angular difference {worst:.2e} rad over 10000 draws; {discrete_mismatch} library mismatches"),
    )
}

fn desk_scenario(q: Quantization, epochs: usize) -> ScenarioConfig {
    ScenarioConfig {
        quantization: q,
        max_epochs: epochs,
        rng_seed: 7,
        ..ScenarioConfig::default()
    }
}

fn square(id: &str, lo: f64, hi: f64, step: f64) -> Region {
    Region {
        id: id.into(),
        shape: Shape::Rectangle { x: [lo, hi], y: [lo, hi] },
        z: 0.5,
        sample_step: step,
    }
}

fn coherent_bound() -> Outcome {
    let scenario = desk_scenario(Quantization::Continuous, 5);
    let lambda = scenario.wavelength();
    let panel = PanelSpec::new(Vec3::new(0.0, 10.0, 3.5), 16, 16, lambda / 2.0).unwrap();
    let bs = BsArray::three_antenna_default(lambda);
    let layout = build_layout(&[panel], &bs).unwrap();
    let samples = sample_region(&square("spot", 9.95, 10.05, 0.1), 100.0).unwrap();
    assert_eq!(samples.len(), 1);
    let coeffs = effective_coeffs(&layout, &bs, 0, &samples, &scenario).unwrap();
    let settings = SolverSettings::from_scenario(&scenario, SolverMode::Bcd);
    let sol = solve(&coeffs, &settings, PhaseProfile::random(layout.len(), scenario.quantization, 99)).unwrap();
    let achieved = received_power(coeffs.column(0), sol.phases.thetas(), scenario.tx_power);
    let bound = scenario.tx_power * coeffs.column(0).map(|c| c.norm()).sum::<f64>().powi(2);
    let ratio = achieved / bound;
    check(
        ratio >= 0.999 && sol.trace.len() <= 5,
        format!("{:.6} of coherent bound after {} epochs", ratio, sol.trace.len()),
    )
}

fn tiny_exhaustive() -> Outcome {
    let q = Quantization::Bits(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    let mut global = 0;
    let instances = 200;
    for i in 0..instances {
        let values: Vec<Complex64> = (0..3).map(|_| random_c(&mut rng)).collect();
        let coeffs = EffectiveCoefficients::from_values(3, 1, values.clone()).unwrap();
        let settings = SolverSettings {
            mode: SolverMode::Bcd,
            max_epochs: 10,
            w_initial: 100.0,
            tx_power: 1.0,
            noise_power: 1e-3,
            thresholds: vec![],
            early_stop: None,
        };
        let sol = solve(&coeffs, &settings, PhaseProfile::random(3, q, i)).unwrap();
        let out: Vec<usize> = sol.phases.levels().unwrap().iter().map(|&l| l as usize).collect();
        let power = |bits: &[usize]| {
            let thetas: Vec<f64> = bits.iter().map(|&b| b as f64 * PI).collect();
            received_power(values.iter().copied(), &thetas, 1.0)
        };
        let p_out = power(&out);
        let mut best = 0.0f64;
        for mask in 0..8usize {
            let profile = [mask & 1, (mask >> 1) & 1, (mask >> 2) & 1];
            let p = power(&profile);
            best = best.max(p);
            let hamming = profile.iter().zip(&out).filter(|(a, b)| a != b).count();
            if hamming == 1 && p > p_out * (1.0 + 1e-12) {
                failures += 1;
            }
        }
        if p_out >= best * (1.0 - 1e-12) {
            global += 1;
        }
    }
    check(
        failures == 0,
        format!("{failures} improving single flips over {instances} instances; globally optimal in {global}"),
    )
}

struct DeskRun {
    coeffs: EffectiveCoefficients,
    solution: Solution,
    codeword_json: String,
    trace_csv: String,
}

fn desk_setup(side: usize) -> (Vec<PanelSpec>, BsArray, Region) {
    let lambda = ScenarioConfig::default().wavelength();
    let panel = PanelSpec::new(Vec3::new(0.0, 10.0, 3.5), side, side, lambda / 2.0).unwrap();
    (vec![panel], BsArray::three_antenna_default(lambda), square("center", 8.5, 11.5, 0.15))
}

fn desk_run(side: usize, q: Quantization, mode: SolverMode, thresholds: &[f64]) -> DeskRun {
    let scenario = desk_scenario(q, 20);
    let (panels, bs, region) = desk_setup(side);
    let layout = build_layout(&panels, &bs).unwrap();
    let samples = sample_region(&region, scenario.w_initial).unwrap();
    let coeffs = effective_coeffs(&layout, &bs, 0, &samples, &scenario).unwrap();
    let settings = SolverSettings::from_scenario(&scenario, mode).with_thresholds(thresholds);
    let seed = pair_seed(scenario.rng_seed, 1, 1);
    let solution = solve(&coeffs, &settings, PhaseProfile::random(layout.len(), q, seed)).unwrap();
    let book = Codebook {
        scenario_digest: scenario_digest(&scenario, &panels, &bs),
        scenario: scenario.clone(),
        panels,
        regions: vec![region],
        bs,
        codewords: vec![RisCodeword {
            j: 1,
            k: 1,
            seed,
            epochs: solution.trace.len(),
            mode,
            phases: solution.phases.clone(),
        }],
    };
    DeskRun {
        codeword_json: book.to_json().unwrap(),
        trace_csv: solution.trace.to_csv(),
        coeffs,
        solution,
    }
}

fn final_se(run: &DeskRun) -> Vec<f64> {
    let s = ScenarioConfig::default();
    region_se(&run.coeffs, run.solution.phases.thetas(), s.tx_power, s.noise_power).unwrap()
}

fn strip_elapsed(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn convergence_trace(first: &DeskRun, second: &DeskRun, threshold: f64) -> Outcome {
    let means: Vec<f64> = first.solution.trace.epochs.iter().map(|e| e.mean_se).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-3));
    let trace = &second.solution.trace.epochs;
    let (o1, of) = (trace[0].outage[0], trace.last().unwrap().outage[0]);
    check(
        monotone && of <= o1 && means.len() == 20,
        format!(
            "mean SE {:.4} -> {:.4} over {} epochs, non-decreasing: {monotone}; outage@{threshold:.3} {o1:.4} -> {of:.4}",
            means[0],
            means.last().unwrap(),
            means.len()
        ),
    )
}

fn quantization_trend(cont: &DeskRun) -> Outcome {
    let c = cont.solution.trace.final_mean_se().unwrap();
    let q3 = desk_run(64, Quantization::Bits(3), SolverMode::Awbcd, &[])
        .solution
        .trace
        .final_mean_se()
        .unwrap();
    let q1 = desk_run(64, Quantization::Bits(1), SolverMode::Awbcd, &[])
        .solution
        .trace
        .final_mean_se()
        .unwrap();
    let pass = c >= q3 && q3 >= q1 && q3 >= 0.98 * c && q1 <= 0.97 * c;
    check(
        pass,
        format!(
            "continuous {c:.4}, q=3 {q3:.4} ({:+.2}%), q=1 {q1:.4} ({:+.2}%)",
            100.0 * (q3 / c - 1.0),
            100.0 * (q1 / c - 1.0)
        ),
    )
}

fn element_trend(full: &DeskRun) -> Outcome {
    let threshold = 12.0;
    let mut means = Vec::new();
    let mut outs = Vec::new();
    for side in [16, 32] {
        let run = desk_run(side, Quantization::Continuous, SolverMode::Awbcd, &[]);
        let se = final_se(&run);
        means.push(mean(&se));
        outs.push(outage(&se, threshold));
    }
    let se = final_se(full);
    means.push(mean(&se));
    outs.push(outage(&se, threshold));
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let non_increasing = outs.windows(2).all(|w| w[1] <= w[0]);
    check(
        increasing && non_increasing,
        format!(
            "16/32/64 mean SE {:.3}/{:.3}/{:.3}; outage@{threshold} {:.4}/{:.4}/{:.4}",
            means[0], means[1], means[2], outs[0], outs[1], outs[2]
        ),
    )
}

fn fairness(aw: &DeskRun) -> Outcome {
    let bcd = desk_run(64, Quantization::Continuous, SolverMode::Bcd, &[]);
    let se_aw = final_se(aw);
    let se_bcd = final_se(&bcd);
    let (m_aw, m_bcd) = (mean(&se_aw), mean(&se_bcd));
    let base = m_aw.min(m_bcd);
    let mut pass = m_aw >= 0.97 * m_bcd;
    let mut cols = Vec::new();
    for frac in [0.80, 0.85, 0.90, 0.95, 1.00] {
        let t = frac * base;
        let (oa, ob) = (outage(&se_aw, t), outage(&se_bcd, t));
        pass &= oa <= ob + 0.02;
        cols.push(format!("{t:.2}: {oa:.4}/{ob:.4}"));
    }
    check(
        pass,
        format!("mean AWBCD {m_aw:.4} vs BCD {m_bcd:.4}; outage AWBCD/BCD at {}", cols.join(", ")),
    )
}

fn residual_fidelity(run: &DeskRun) -> Outcome {
    let worst = run.solution.trace.epochs.iter().map(|e| e.residual_drift).fold(0.0, f64::max);
    check(
        worst <= 1e-8,
        format!("max relative drift {worst:.2e} across {} sweeps", run.solution.trace.len()),
    )
}

fn determinism(a: &DeskRun, b: &DeskRun) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        fs::read(p).unwrap()
    };
    let same_codeword = write("a.json", &a.codeword_json) == write("b.json", &b.codeword_json);
    let same_trace =
        write("a.csv", &strip_elapsed(&a.trace_csv)) == write("b.csv", &strip_elapsed(&b.trace_csv));

    let scenario = desk_scenario(Quantization::Bits(2), 4);
    let lambda = scenario.wavelength();
    let panels = vec![PanelSpec::new(Vec3::new(0.0, 10.0, 3.5), 24, 24, lambda / 2.0).unwrap()];
    let bs = BsArray::with_dft_codebook(BsArray::three_antenna_default(lambda).antenna_positions, 2).unwrap();
    let regions = vec![
        square("center", 8.5, 11.5, 0.3),
        square("corner", 3.5, 6.5, 0.3),
        square("far", 13.5, 16.5, 0.3),
    ];
    let books: Vec<Vec<u8>> = [1, 8]
        .iter()
        .map(|&jobs| {
            let opts = GenerateOptions {
                jobs,
                ..GenerateOptions::default()
            };
            let book = generate_codebook(&scenario, &panels, &bs, &regions, SolverMode::Awbcd, &opts).unwrap();
            write(&format!("book{jobs}.json"), &book.to_json().unwrap())
        })
        .collect();
    let same_book = books[0] == books[1];
    check(
        same_codeword && same_trace && same_book,
        format!(
            "rerun codeword identical: {same_codeword}, trace (without elapsed_ms): {same_trace}; codebook jobs 1 vs 8: {same_book}"
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, budget: Duration, start: Instant, outcome: Outcome| {
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} ({}; {:.2}s of {}s budget)",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    };
    let secs = Duration::from_secs;

    let t = Instant::now();
    report(1, "power decomposition identity", secs(1), t, power_decomposition());
    let t = Instant::now();
    report(2, "closed-form update vs grid argmax", secs(5), t, closed_form_oracle());
    let t = Instant::now();
    report(3, "arctangent vs branched update", secs(5), t, branched_equivalence());
    let t = Instant::now();
    report(4, "coherent combining bound", secs(5), t, coherent_bound());
    let t = Instant::now();
    report(5, "tiny exhaustive fixed point", secs(1), t, tiny_exhaustive());

    let t = Instant::now();
    let first = desk_run(64, Quantization::Continuous, SolverMode::Awbcd, &[]);
    let threshold = 0.9 * first.solution.trace.final_mean_se().unwrap();
    let second = desk_run(64, Quantization::Continuous, SolverMode::Awbcd, &[threshold]);
    let outcome = convergence_trace(&first, &second, threshold);
    report(6, "desk convergence trace", secs(60), t, outcome);

    let t = Instant::now();
    report(7, "quantization trend", secs(180), t, quantization_trend(&first));
    let t = Instant::now();
    report(8, "element-count trend", secs(300), t, element_trend(&first));
    let t = Instant::now();
    report(9, "AWBCD vs BCD fairness", secs(120), t, fairness(&first));
    let t = Instant::now();
    report(10, "incremental residual fidelity", secs(60), t, residual_fidelity(&first));
    let t = Instant::now();
    let rerun = desk_run(64, Quantization::Continuous, SolverMode::Awbcd, &[]);
    report(11, "determinism", secs(120), t, determinism(&first, &rerun));

    println!(
        "criterion 12 full-scale reproduction: NOT RUN (long-running recipe: cargo run --release --example full_scale)"
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

