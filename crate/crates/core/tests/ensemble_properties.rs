use berry_core::ensemble::{gaussian_check, run_ensemble, EnsembleConfig};
use berry_core::noise::NoiseKind;
use berry_core::path::{omega_for_solid_angle, LoopSpec};
use berry_core::protocol::{NoiseSpec, SequenceConfig};
use berry_core::theory::coherence_with_multiplier;
use berry_core::{EnsembleConfig32, LoopSpec32, NoiseSpec32, SequenceConfig32};
use std::f64::consts::PI;

const DELTA: f64 = 2.0 * PI * 0.05;
const GAMMA: f64 = 2.0 * PI * 0.01;

fn radial_berry(a: f64, tau: f64, s: f64) -> SequenceConfig<f64> {
    let spec = LoopSpec::new(omega_for_solid_angle(a, DELTA).unwrap(), DELTA, tau)
        .with_default_dt(Some(GAMMA));
    SequenceConfig::berry(spec).with_noise(NoiseSpec::new(NoiseKind::Radial, s, GAMMA))
}

#[test]
fn worker_count_is_invisible() {
    let config = EnsembleConfig::new(radial_berry(7.0 * PI / 16.0, 30.0, 1.0 / 15.0), 40, 31);
    let one = run_ensemble(&config.with_workers(1)).unwrap();
    for workers in [2, 8] {
        let other = run_ensemble(&config.with_workers(workers)).unwrap();
        assert_eq!(one, other, "workers = {workers}");
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&one.phases), bits(&other.phases));
    }
}

#[test]
fn shot_sampled_ensembles_are_reproducible() {
    let seq = radial_berry(PI / 4.0, 30.0, 0.05).with_shots(1000);
    let config = EnsembleConfig::new(seq, 16, 5);
    let a = run_ensemble(&config).unwrap();
    let b = run_ensemble(&config.with_workers(3)).unwrap();
    assert_eq!(a, b);
    for &(x, y) in &a.xy_points {
        assert!(x.abs() <= 1.0 && y.abs() <= 1.0);
    }
}

#[test]
fn different_seeds_give_different_ensembles() {
    let seq = radial_berry(PI / 4.0, 30.0, 0.05);
    let a = run_ensemble(&EnsembleConfig::new(seq, 8, 1)).unwrap();
    let b = run_ensemble(&EnsembleConfig::new(seq, 8, 2)).unwrap();
    assert_ne!(a.phases, b.phases);
}

#[test]
fn coherence_routes_agree_for_gaussian_ensembles() {
    let config = EnsembleConfig::new(radial_berry(7.0 * PI / 16.0, 100.0, 1.0 / 15.0), 300, 11)
        .with_workers(4);
    let stats = run_ensemble(&config).unwrap();
    let fit = stats.gaussian_fit.unwrap();
    assert!(fit.p_value.unwrap() > 0.01, "{fit:?}");
    let predicted =
        coherence_with_multiplier(stats.sigma, stats.phase_multiplier) * stats.mean_radius;
    assert!(
        (stats.coherence / predicted - 1.0).abs() < 0.05,
        "{} vs {predicted}",
        stats.coherence
    );
    assert!(stats.coherence <= 1.0 + 1e-9);
    assert_eq!(stats.histogram.counts.iter().sum::<usize>(), 300);
    assert!(!stats.saturated);
}

#[test]
fn radial_noise_leaves_mean_phase_unbiased() {
    let config = EnsembleConfig::new(radial_berry(7.0 * PI / 16.0, 100.0, 1.0 / 15.0), 1000, 5)
        .with_workers(4);
    let stats = run_ensemble(&config).unwrap();
    let bound = 3.0 * stats.sigma / (stats.realizations as f64).sqrt();
    assert!(
        stats.mean_shift().abs() <= bound,
        "{} vs {bound}",
        stats.mean_shift()
    );
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut seq = radial_berry(PI / 4.0, 30.0, 0.05);
    seq.noise = Some(NoiseSpec::new(NoiseKind::Radial, 0.05, -1.0));
    assert!(run_ensemble(&EnsembleConfig::new(seq, 4, 0)).is_err());
    assert!(gaussian_check(&[1.0, 2.0]).is_err());
}

#[test]
fn single_precision_ensemble_tracks_double() {
    let a = 7.0f32 * std::f32::consts::PI / 16.0;
    let delta = 2.0f32 * std::f32::consts::PI * 0.05;
    let spec = LoopSpec32::for_solid_angle(a, delta, 100.0).unwrap();
    let seq = SequenceConfig32::berry(spec);
    let stats = run_ensemble(&EnsembleConfig32::new(seq, 1, 0)).unwrap();
    let double = run_ensemble(&EnsembleConfig::new(
        SequenceConfig::berry(LoopSpec::for_solid_angle(7.0 * PI / 16.0, DELTA, 100.0).unwrap()),
        1,
        0,
    ))
    .unwrap();
    assert!((stats.mean_phase as f64 - double.mean_phase).abs() < 1e-3);
    let noisy = seq.with_noise(NoiseSpec32::new(NoiseKind::Radial, 1.0 / 15.0, 0.0628));
    let s = run_ensemble(&EnsembleConfig32::new(noisy, 20, 3)).unwrap();
    assert!(s.sigma > 0.0 && s.sigma < 0.1);
}
