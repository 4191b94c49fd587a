//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;

use berry_core::ensemble::{run_ensemble, EnsembleConfig, EnsembleStats};
use berry_core::noise::{ou_autocovariance, ou_generate, NoiseKind, NoiseParams};
use berry_core::path::{mhz_to_rad_per_ns, LoopSpec};
use berry_core::protocol::{noiseless_run, NoiseSpec, SequenceConfig};
use berry_core::theory::{
    crossover_time, delta_gamma_first_order, variance_dynamic, variance_geometric, TheoryInput,
};
use berry_sim::preset::{run_preset, PresetName, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DELTA_MHZ: f64 = 50.0;
const BANDWIDTH_MHZ: f64 = 10.0;
const S: f64 = 1.0 / 15.0;
const HISTOGRAM_ANGLES: [f64; 4] = [1.0, 3.0, 8.0, 15.0];

// Tolerances.
const BERRY_TOL: f64 = 0.05;
const SE_FACTOR: f64 = 3.0;
const SIGMA_GEOMETRIC_TARGET: f64 = 0.0330;
const SIGMA_DYNAMIC_TARGET: f64 = 0.5405;
const TARGET_TOL: f64 = 5e-4;
const ANGULAR_COHERENCE_MIN: f64 = 0.99;
const CROSSOVER_FACTOR: f64 = 2.0;
const SLOPE_TOL: f64 = 0.05;
const NORMALITY_P: f64 = 0.01;
const COHERENCE_REL_TOL: f64 = 0.05;
const CORRELATION_MIN: f64 = 0.95;
const RESIDUAL_SHRINK_MIN: f64 = 4.0;
const ORACLE_REL_TOL: f64 = 1e-10;
const OU_TOL: f64 = 0.01;

fn delta() -> f64 {
    mhz_to_rad_per_ns(DELTA_MHZ)
}

fn gamma() -> f64 {
    mhz_to_rad_per_ns(BANDWIDTH_MHZ)
}

fn spec(a: f64, tau: f64) -> LoopSpec<f64> {
    LoopSpec::for_solid_angle(a, delta(), tau)
        .unwrap()
        .with_default_dt(Some(gamma()))
}

fn noisy(seq: SequenceConfig<f64>, kind: NoiseKind, s: f64) -> SequenceConfig<f64> {
    seq.with_noise(NoiseSpec::new(kind, s, gamma()))
}

fn ensemble(seq: SequenceConfig<f64>, n: usize, seed: u64) -> EnsembleStats<f64> {
    run_ensemble(&EnsembleConfig::new(seq, n, seed)).expect("ensemble runs")
}

fn theory(seq: &SequenceConfig<f64>) -> TheoryInput<f64> {
    let p = seq.noise_params(0).unwrap().unwrap();
    TheoryInput {
        theta: seq.loop_spec.theta().unwrap(),
        b: seq.loop_spec.b_max(),
        tau: seq.loop_spec.tau,
        gamma_rate: p.rate,
        power: p.power,
    }
}

fn sigma_se(stats: &EnsembleStats<f64>) -> f64 {
    stats.sigma / (2.0 * stats.realizations as f64).sqrt()
}

/// Least-squares slope of `y` on `x` with the standard error propagated from
/// per-point errors `ey`.
fn slope(x: &[f64], y: &[f64], ey: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let b = x
        .iter()
        .zip(y)
        .map(|(a, c)| (a - mx) * (c - my))
        .sum::<f64>()
        / sxx;
    let se = x
        .iter()
        .zip(ey)
        .map(|(a, e)| ((a - mx) * e).powi(2))
        .sum::<f64>()
        .sqrt()
        / sxx;
    (b, se)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn adiabatic_berry_phase() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in HISTOGRAM_ANGLES {
        let a = k * PI / 16.0;
        let r = noiseless_run(&SequenceConfig::berry(spec(a, 100.0))).unwrap();
        worst = worst.max((r.extracted_phase.abs() - a / 2.0).abs());
    }
    outcome(
        worst < BERRY_TOL,
        format!("max ||gamma| - A/2| = {worst:.4} rad (tol {BERRY_TOL})"),
    )
}

fn variance_check(dynamic: bool) -> Outcome {
    let sp = spec(7.0 * PI / 16.0, 100.0);
    let base = if dynamic {
        SequenceConfig::dynamic(sp)
    } else {
        SequenceConfig::berry(sp)
    };
    let seq = noisy(base, NoiseKind::Radial, S);
    let stats = ensemble(seq, 300, if dynamic { 3 } else { 2 });
    let input = theory(&seq);
    let (closed, target) = if dynamic {
        (variance_dynamic(&input).sqrt(), SIGMA_DYNAMIC_TARGET)
    } else {
        (variance_geometric(&input).sqrt(), SIGMA_GEOMETRIC_TARGET)
    };
    let se = sigma_se(&stats);
    let pass = (stats.sigma - closed).abs() <= SE_FACTOR * se
        && (closed - target).abs() < TARGET_TOL
        && !stats.saturated;
    outcome(
        pass,
        format!(
            "sigma = {:.4} +- {se:.4}, closed form {closed:.4} (target {target}), saturated = {}",
            stats.sigma, stats.saturated
        ),
    )
}

fn angular_resilience() -> Outcome {
    let mut worst_coherence: f64 = f64::INFINITY;
    let mut worst_shift: f64 = 0.0;
    let mut failing = Vec::new();
    for k in 1..=15 {
        let a = k as f64 * PI / 16.0;
        let seq = noisy(SequenceConfig::berry(spec(a, 100.0)), NoiseKind::Angular, S);
        let stats = ensemble(seq, 300, 40 + k);
        let z = stats.mean_shift().abs() / (stats.sigma / (stats.realizations as f64).sqrt());
        worst_coherence = worst_coherence.min(stats.coherence_normalized);
        worst_shift = worst_shift.max(z);
        if stats.coherence_normalized < ANGULAR_COHERENCE_MIN || z > SE_FACTOR {
            failing.push(format!("{k}pi/16"));
        }
    }
    outcome(
        failing.is_empty(),
        format!(
            "min normalized coherence {worst_coherence:.4} (min {ANGULAR_COHERENCE_MIN}), \
             max |shift|/SE {worst_shift:.2}; failing at [{}]",
            failing.join(", ")
        ),
    )
}

fn crossover() -> Outcome {
    let a = 0.37 * PI;
    let sp = spec(a, 1.0);
    let (theta, b) = (sp.theta().unwrap(), sp.b_max());
    let t_star = crossover_time(theta, b).unwrap();
    let seq = noisy(SequenceConfig::berry(spec(a, t_star)), NoiseKind::Radial, S);
    let input = theory(&seq);
    let (g, d) = (variance_geometric(&input), variance_dynamic(&input));
    let theory_ok = (g - d).abs() <= 1e-12 * d;

    let taus = log_space(2.0, 64.0, 11);
    let diffs: Vec<f64> = taus
        .iter()
        .map(|&tau| {
            let sp = spec(a, tau);
            let berry = ensemble(
                noisy(SequenceConfig::berry(sp), NoiseKind::Radial, S),
                300,
                50,
            );
            let dynamic = ensemble(
                noisy(SequenceConfig::dynamic(sp), NoiseKind::Radial, S),
                300,
                51,
            );
            berry.sigma.ln() - dynamic.sigma.ln()
        })
        .collect();
    let crossing = (1..taus.len()).find_map(|i| {
        let (d0, d1) = (diffs[i - 1], diffs[i]);
        (d0 > 0.0 && d1 <= 0.0).then(|| {
            let (l0, l1) = (taus[i - 1].ln(), taus[i].ln());
            (l0 + d0 / (d0 - d1) * (l1 - l0)).exp()
        })
    });
    let mc_ok =
        crossing.is_some_and(|t| t >= t_star / CROSSOVER_FACTOR && t <= t_star * CROSSOVER_FACTOR);
    outcome(
        theory_ok && mc_ok,
        format!(
            "tau* = {t_star:.3} ns, theory |sg^2 - sd^2|/sd^2 = {:.1e}; Monte Carlo crossing at {} \
             (window [{:.2}, {:.2}] ns)",
            (g - d).abs() / d,
            crossing.map_or_else(
                || {
                    let above = diffs.iter().filter(|d| **d > 0.0).count();
                    format!(
                        "none (sigma_berry > sigma_dynamic at {above} of {} points in [2, 64] ns)",
                        taus.len()
                    )
                },
                |t| format!("{t:.2} ns")
            ),
            t_star / CROSSOVER_FACTOR,
            t_star * CROSSOVER_FACTOR
        ),
    )
}

fn scaling_laws() -> Outcome {
    let a = 0.37 * PI;
    let theory_taus = log_space(200.0, 2000.0, 9);
    let th = |dynamic: bool, taus: &[f64]| -> (f64, f64) {
        let x: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
        let y: Vec<f64> = taus
            .iter()
            .map(|&t| {
                let seq = noisy(SequenceConfig::berry(spec(a, t)), NoiseKind::Radial, S);
                let input = theory(&seq);
                let v = if dynamic {
                    variance_dynamic(&input)
                } else {
                    variance_geometric(&input)
                };
                0.5 * v.ln()
            })
            .collect();
        slope(&x, &y, &vec![0.0; x.len()])
    };
    let (th_g, _) = th(false, &theory_taus);
    let (th_d, _) = th(true, &theory_taus);
    let theory_ok = (th_g + 0.5).abs() <= SLOPE_TOL && (th_d - 0.5).abs() <= SLOPE_TOL;

    let mc_taus = log_space(200.0, 2000.0, 3);
    let mc = |dynamic: bool| -> (f64, f64) {
        let x: Vec<f64> = mc_taus.iter().map(|t| t.ln()).collect();
        let mut y = Vec::new();
        let mut ey = Vec::new();
        for &tau in &mc_taus {
            let sp = spec(a, tau);
            let seq = if dynamic {
                noisy(SequenceConfig::dynamic(sp), NoiseKind::Radial, S / 10.0)
            } else {
                noisy(SequenceConfig::berry(sp), NoiseKind::Radial, S)
            };
            let stats = ensemble(seq, 400, 60);
            assert!(!stats.saturated);
            y.push(stats.sigma.ln());
            ey.push(sigma_se(&stats) / stats.sigma);
        }
        slope(&x, &y, &ey)
    };
    let (mc_g, se_g) = mc(false);
    let (mc_d, se_d) = mc(true);
    let (ref_g, _) = th(false, &mc_taus);
    let (ref_d, _) = th(true, &mc_taus);
    let mc_ok =
        (mc_g - ref_g).abs() <= SE_FACTOR * se_g && (mc_d - ref_d).abs() <= SE_FACTOR * se_d;
    outcome(
        theory_ok && mc_ok,
        format!(
            "theory slopes {th_g:.3} / {th_d:.3} (tol {SLOPE_TOL}); Monte Carlo {mc_g:.3} +- {se_g:.3} \
             vs {ref_g:.3}, {mc_d:.3} +- {se_d:.3} vs {ref_d:.3}"
        ),
    )
}

fn gaussianity() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for k in HISTOGRAM_ANGLES {
        let seq = noisy(
            SequenceConfig::berry(spec(k * PI / 16.0, 100.0)),
            NoiseKind::Radial,
            S,
        );
        let stats = ensemble(seq, 600, 70 + k as u64);
        let p = stats.gaussian_fit.and_then(|g| g.p_value).unwrap_or(0.0);
        let predicted = (-(4.0 * stats.sigma).powi(2) / 2.0).exp();
        let rel = stats.coherence_normalized / predicted - 1.0;
        pass &= p > NORMALITY_P && rel.abs() <= COHERENCE_REL_TOL;
        lines.push(format!(
            "{k}pi/16: p = {p:.3}, coherence rel. dev. {rel:+.4}"
        ));
    }
    outcome(pass, lines.join("; "))
}

fn first_order_estimator() -> Outcome {
    let sp = spec(7.0 * PI / 16.0, 100.0);
    let (theta, b) = (sp.theta().unwrap(), sp.b_max());
    let seed = 80;
    let n = 300;
    let run = |s: f64| -> (Vec<f64>, Vec<f64>) {
        let seq = noisy(SequenceConfig::berry(sp), NoiseKind::Radial, s);
        let stats = ensemble(seq, n, seed);
        let full: Vec<f64> = stats
            .phases
            .iter()
            .map(|p| p - stats.noiseless.extracted_phase)
            .collect();
        let first: Vec<f64> = (0..n as u64)
            .map(|id| {
                let params = seq.noise_params(id).unwrap().unwrap();
                let trace = ou_generate(&params, sp.dt, seq.trace_len(), seed).unwrap();
                let plateau = trace.window(sp.ramp_steps(), sp.plateau_steps()).unwrap();
                delta_gamma_first_order(&plateau, theta, b, sp.tau).unwrap()
            })
            .collect();
        (full, first)
    };
    let rms_residual = |(full, first): &(Vec<f64>, Vec<f64>)| {
        (full
            .iter()
            .zip(first)
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
            / full.len() as f64)
            .sqrt()
    };
    let base = run(S);
    let r = correlation(&base.0, &base.1);
    let res_full = rms_residual(&base);
    let res_quarter = rms_residual(&run(S / 4.0));
    let shrink = res_full / res_quarter;
    outcome(
        r >= CORRELATION_MIN && shrink >= RESIDUAL_SHRINK_MIN,
        format!(
            "correlation {r:.4} (min {CORRELATION_MIN}); rms residual {res_full:.2e} -> {res_quarter:.2e}, \
             shrink x{shrink:.1} (min {RESIDUAL_SHRINK_MIN})"
        ),
    )
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn composite<F: Fn(f64) -> f64>(rule: &[(f64, f64)], a: f64, b: f64, panels: usize, f: F) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + h * (p as f64 + 0.5);
            rule.iter()
                .map(|&(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

fn exactness_oracles() -> Outcome {
    let rule = gauss_legendre(20);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let input = TheoryInput {
            theta: rng.random_range(0.01..1.56),
            b: rng.random_range(0.05..2.0),
            tau: rng.random_range(1.0..300.0),
            gamma_rate: rng.random_range(1e-3..1.0),
            power: rng.random_range(1e-6..1.0),
        };
        let params = NoiseParams::new(input.power, input.gamma_rate, NoiseKind::Radial, 0).unwrap();
        let integral = 2.0
            * composite(&rule, 0.0, input.tau, 32, |t| {
                composite(&rule, 0.0, t, 32, |s| ou_autocovariance(&params, t - s))
            });
        let lever = PI * input.theta.cos() * input.theta.sin() / (input.b * input.tau);
        let g_ref = lever * lever * integral;
        let d_ref = input.theta.sin().powi(2) * integral;
        worst = worst
            .max((variance_geometric(&input) - g_ref).abs() / g_ref)
            .max((variance_dynamic(&input) - d_ref).abs() / d_ref);
    }

    let dt = 10.0;
    let params = NoiseParams::new(1.0, gamma(), NoiseKind::Radial, 0).unwrap();
    let trace = ou_generate(&params, dt, 1_000_000, 91).unwrap();
    let xs = trace.samples();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut ou_err = (var - 1.0).abs().max(mean.abs());
    for lag in [1usize, 3, 10] {
        let m = xs.len() - lag;
        let c = (0..m)
            .map(|i| (xs[i] - mean) * (xs[i + lag] - mean))
            .sum::<f64>()
            / m as f64;
        ou_err = ou_err.max((c / var - ou_autocovariance(&params, lag as f64 * dt)).abs());
    }
    outcome(
        worst < ORACLE_REL_TOL && ou_err < OU_TOL,
        format!(
            "max closed-form rel. error {worst:.1e} over 100 draws (tol {ORACLE_REL_TOL:e}); \
             OU moment error {ou_err:.4} (tol {OU_TOL})"
        ),
    )
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in [1, 2, 8] {
        let dir = root.path().join(format!("w{workers}"));
        let opts = RunOptions {
            master_seed: 100,
            realizations: 6,
            workers,
            ..RunOptions::default()
        };
        let manifest = run_preset(PresetName::Fig2, &opts, &dir).unwrap();
        let bytes: Vec<Vec<u8>> = manifest
            .files
            .iter()
            .map(|f| fs::read(dir.join(f)).unwrap())
            .collect();
        outputs.push(bytes);
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical,
        format!(
            "fig2 CSVs for 1, 2 and 8 workers {}",
            if identical {
                "are bit-identical"
            } else {
                "differ"
            }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("adiabatic Berry phase", adiabatic_berry_phase),
        ("geometric variance", || variance_check(false)),
        ("dynamic variance", || variance_check(true)),
        ("angular-noise resilience", angular_resilience),
        ("crossover", crossover),
        ("scaling laws", scaling_laws),
        ("gaussianity", gaussianity),
        ("first-order estimator", first_order_estimator),
        ("exactness oracles", exactness_oracles),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
