//! Spin-echo Ramsey sequences.
//!
//! Both sequences start from |0⟩, apply an ideal π/2 pulse about y, run a first
//! arm, apply an ideal π pulse about x, run a second arm and read out the
//! Bloch vector.
//!
//! * Berry echo: the loop, then the same loop with reversed orientation. The
//!   same noise record is replayed in both arms, so dynamic phases cancel and
//!   the geometric phases add up to a relative phase of `4γ`.
//! * Dynamic echo: a ramped drive held at `φ = 0` for the loop time, then an
//!   idle arm of equal length at bare detuning. Only the first arm is noisy.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::evolve::{bloch_expectations, propagate, QubitState, Unitary2};
use crate::noise::{NoiseKind, NoiseParams, NoiseTrace};
use crate::path::{
    build_field_trace, normalized_amplitude_to_power, FieldTrace, LoopSpec, Orientation,
};
use crate::rng::{substream, Domain};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceKind {
    BerryEcho,
    DynamicEcho,
}

impl SequenceKind {
    /// Ratio between the measured relative phase and the reported per-loop phase.
    pub fn phase_multiplier<T: Real>(self) -> T {
        match self {
            SequenceKind::BerryEcho => T::lit(4.0),
            SequenceKind::DynamicEcho => T::one(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SequenceKind::BerryEcho => "berry-echo",
            SequenceKind::DynamicEcho => "dynamic-echo",
        }
    }
}

impl std::fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Noise described by its normalized amplitude `s` and decay rate Γ (ns⁻¹).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec<T> {
    pub kind: NoiseKind,
    pub amplitude: T,
    pub rate: T,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(kind: NoiseKind, amplitude: T, rate: T) -> Self {
        Self {
            kind,
            amplitude,
            rate,
        }
    }

    /// OU parameters for a loop of drive amplitude `omega`.
    pub fn params(&self, omega: T, stream_id: u64) -> Result<NoiseParams<T>> {
        let power = normalized_amplitude_to_power(self.amplitude, self.kind, omega)?;
        NoiseParams::new(power, self.rate, self.kind, stream_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceConfig<T> {
    /// Loop of the first arm; the Berry echo runs its reverse in the second.
    pub loop_spec: LoopSpec<T>,
    pub noise: Option<NoiseSpec<T>>,
    pub kind: SequenceKind,
    /// Readout repetitions per realization; `None` reads ideal expectations.
    pub shots: Option<u64>,
}

impl<T: Real> SequenceConfig<T> {
    pub fn berry(loop_spec: LoopSpec<T>) -> Self {
        Self {
            loop_spec,
            noise: None,
            kind: SequenceKind::BerryEcho,
            shots: None,
        }
    }

    pub fn dynamic(loop_spec: LoopSpec<T>) -> Self {
        Self {
            loop_spec,
            noise: None,
            kind: SequenceKind::DynamicEcho,
            shots: None,
        }
    }

    pub fn with_noise(mut self, noise: NoiseSpec<T>) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_shots(mut self, shots: u64) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.loop_spec.validate()?;
        if self.kind == SequenceKind::BerryEcho
            && self.loop_spec.orientation == Orientation::Stationary
        {
            return Err(invalid("berry echo needs a forward or reverse loop"));
        }
        if let Some(noise) = &self.noise {
            if noise.kind == NoiseKind::Radial && self.loop_spec.omega == T::zero() {
                if noise.amplitude != T::zero() {
                    return Err(invalid(
                        "radial noise amplitude is relative to omega, which is 0",
                    ));
                }
            } else {
                noise.params(self.loop_spec.omega, 0)?;
            }
        }
        if self.shots == Some(0) {
            return Err(invalid("shots must be >= 1"));
        }
        Ok(())
    }

    pub fn phase_multiplier(&self) -> T {
        self.kind.phase_multiplier()
    }

    /// OU parameters for realization `stream_id`, if the sequence is noisy.
    pub fn noise_params(&self, stream_id: u64) -> Result<Option<NoiseParams<T>>> {
        match &self.noise {
            None => Ok(None),
            Some(spec) if spec.kind == NoiseKind::Radial && self.loop_spec.omega == T::zero() => {
                NoiseParams::new(T::zero(), spec.rate, spec.kind, stream_id).map(Some)
            }
            Some(spec) => spec.params(self.loop_spec.omega, stream_id).map(Some),
        }
    }

    /// Samples a noise record must provide: one per step of the first arm.
    pub fn trace_len(&self) -> usize {
        self.loop_spec.total_steps()
    }

    fn first_arm(&self) -> LoopSpec<T> {
        match self.kind {
            SequenceKind::BerryEcho => self.loop_spec,
            SequenceKind::DynamicEcho => self.loop_spec.with_orientation(Orientation::Stationary),
        }
    }

    /// Adiabatic estimate of the noiseless total phase, used to pick the
    /// winding of the noiseless run.
    pub fn predicted_total_phase(&self) -> Result<T> {
        match self.kind {
            SequenceKind::BerryEcho => {
                let a = self.loop_spec.solid_angle()?;
                let sign = self.loop_spec.orientation.sign::<T>();
                Ok(-sign * T::lit(2.0) * a)
            }
            SequenceKind::DynamicEcho => {
                let trace = build_field_trace(&self.first_arm(), None)?;
                let delta = self.loop_spec.delta;
                let integral = trace.samples.iter().fold(T::zero(), |acc, b| {
                    acc + (b[0].hypot(b[1]).hypot(b[2]) - delta.abs())
                }) * trace.dt;
                Ok(-delta.signum() * integral)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceResult<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    /// Relative phase `arg(⟨X⟩ + i⟨Y⟩)`, unwrapped against the reference.
    pub total_phase: T,
    /// `total_phase` divided by the sequence's phase multiplier.
    pub extracted_phase: T,
    pub realization_id: u64,
}

impl<T: Real> SequenceResult<T> {
    pub fn xy_radius(&self) -> T {
        self.x.hypot(self.y)
    }
}

/// Per-run context: unwrapping reference, realization index and seed for
/// shot-noise sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunContext<T> {
    pub reference: T,
    pub realization_id: u64,
    pub master_seed: u64,
}

/// `atan2(y, x)` moved by the multiple of 2π that lands within π of `reference`.
/// A value exactly half a turn away resolves to the one below the reference.
pub fn extract_phase<T: Real>(x: T, y: T, reference: T) -> Result<T> {
    if x == T::zero() && y == T::zero() {
        return Err(SimError::UndefinedPhase);
    }
    let raw = y.atan2(x);
    let turns = ((reference - raw) / T::two_pi() - T::lit(0.5)).ceil();
    Ok(raw + turns * T::two_pi())
}

/// Estimates an expectation value from `shots` projective measurements.
pub fn sample_readout<T: Real, R: Rng + ?Sized>(expectation: T, shots: u64, rng: &mut R) -> T {
    let shots = shots.max(1);
    let p = ((T::one() + expectation) / T::lit(2.0))
        .max(T::zero())
        .min(T::one())
        .to_f64_lossy();
    let ups = Binomial::new(shots, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng);
    T::lit(2.0) * T::from_u64(ups).unwrap() / T::from_u64(shots).unwrap() - T::one()
}

fn initial_superposition<T: Real>() -> QubitState<T> {
    Unitary2::rotation([T::zero(), T::one(), T::zero()], T::FRAC_PI_2())
        .apply(&QubitState::ground())
}

fn echo_pulse<T: Real>() -> Unitary2<T> {
    Unitary2::rotation([T::one(), T::zero(), T::zero()], T::PI())
}

/// Final state of the sequence for an optional noise record.
pub fn final_state<T: Real>(
    config: &SequenceConfig<T>,
    noise_trace: Option<&NoiseTrace<T>>,
) -> Result<QubitState<T>> {
    config.validate()?;
    if config.noise.is_some() && noise_trace.is_none() {
        return Err(invalid(
            "sequence is configured with noise but no noise trace was given",
        ));
    }
    let first = config.first_arm();
    let arm1 = build_field_trace(&first, noise_trace)?;
    let arm2 = match config.kind {
        SequenceKind::BerryEcho => {
            let second = first.with_orientation(first.orientation.reversed());
            build_field_trace(&second, noise_trace)?
        }
        SequenceKind::DynamicEcho => FieldTrace::idle(first.delta, arm1.len(), first.dt),
    };
    let mut state = initial_superposition();
    state = propagate(&arm1, state);
    state = echo_pulse().apply(&state);
    Ok(propagate(&arm2, state))
}

fn read_out<T: Real>(
    config: &SequenceConfig<T>,
    state: &QubitState<T>,
    ctx: &RunContext<T>,
) -> Result<SequenceResult<T>> {
    let (mut x, mut y, mut z) = bloch_expectations(state);
    if let Some(shots) = config.shots {
        let mut rng = substream(ctx.master_seed, Domain::Readout, ctx.realization_id);
        x = sample_readout(x, shots, &mut rng);
        y = sample_readout(y, shots, &mut rng);
        z = sample_readout(z, shots, &mut rng);
    }
    let total_phase = extract_phase(x, y, ctx.reference)?;
    Ok(SequenceResult {
        x,
        y,
        z,
        total_phase,
        extracted_phase: total_phase / config.phase_multiplier(),
        realization_id: ctx.realization_id,
    })
}

/// Runs either sequence kind.
pub fn run_sequence<T: Real>(
    config: &SequenceConfig<T>,
    noise_trace: Option<&NoiseTrace<T>>,
    ctx: &RunContext<T>,
) -> Result<SequenceResult<T>> {
    let state = final_state(config, noise_trace)?;
    read_out(config, &state, ctx)
}

pub fn berry_echo_run<T: Real>(
    config: &SequenceConfig<T>,
    noise_trace: Option<&NoiseTrace<T>>,
    ctx: &RunContext<T>,
) -> Result<SequenceResult<T>> {
    if config.kind != SequenceKind::BerryEcho {
        return Err(invalid("berry_echo_run needs a berry-echo configuration"));
    }
    run_sequence(config, noise_trace, ctx)
}

pub fn dynamic_echo_run<T: Real>(
    config: &SequenceConfig<T>,
    noise_trace: Option<&NoiseTrace<T>>,
    ctx: &RunContext<T>,
) -> Result<SequenceResult<T>> {
    if config.kind != SequenceKind::DynamicEcho {
        return Err(invalid(
            "dynamic_echo_run needs a dynamic-echo configuration",
        ));
    }
    run_sequence(config, noise_trace, ctx)
}

/// Noiseless run with ideal readout, unwrapped against the adiabatic estimate.
/// Its `total_phase` is the reference for every noisy realization.
pub fn noiseless_run<T: Real>(config: &SequenceConfig<T>) -> Result<SequenceResult<T>> {
    let clean = SequenceConfig {
        noise: None,
        shots: None,
        ..*config
    };
    let ctx = RunContext {
        reference: clean.predicted_total_phase()?,
        realization_id: 0,
        master_seed: 0,
    };
    run_sequence(&clean, None, &ctx)
}

/// `⟨X⟩ + i⟨Y⟩` of a result.
pub fn equatorial<T: Real>(r: &SequenceResult<T>) -> Complex<T> {
    Complex::new(r.x, r.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::omega_for_solid_angle;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const DELTA: f64 = 2.0 * PI * 0.05;

    fn ctx(reference: f64) -> RunContext<f64> {
        RunContext {
            reference,
            realization_id: 0,
            master_seed: 1,
        }
    }

    #[test]
    fn extract_phase_examples() {
        assert_eq!(extract_phase(1.0, 0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(extract_phase(0.0, 1.0, 0.0).unwrap(), PI / 2.0);
        let v = extract_phase(-1.0, -1e-8, 2.0 * PI).unwrap();
        assert_relative_eq!(v, PI, epsilon = 1e-7);
        assert_eq!(extract_phase(0.0, 0.0, 1.0), Err(SimError::UndefinedPhase));
        // Exact half-turn tie resolves below the reference.
        let v = extract_phase(1.0, 0.0, PI).unwrap();
        assert_eq!(v, 0.0);
        let v = extract_phase(1.0, 0.0, 7.0).unwrap();
        assert_relative_eq!(v, 2.0 * PI);
    }

    #[test]
    fn readout_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_readout(1.0, 1000, &mut rng), 1.0);
        assert_eq!(sample_readout(-1.0, 7, &mut rng), -1.0);
        for _ in 0..50 {
            let v = sample_readout(0.3, 1, &mut rng);
            assert!(v == 1.0 || v == -1.0);
        }
        let v: f64 = sample_readout(0.0, 1_000_000, &mut rng);
        assert!(v.abs() < 0.004, "{v}");
    }

    #[test]
    fn berry_echo_without_loop_has_no_phase() {
        let spec = LoopSpec::new(1e-9, DELTA, 100.0);
        let r = noiseless_run(&SequenceConfig::berry(spec)).unwrap();
        assert!(r.extracted_phase.abs() < 1e-6);
        assert_relative_eq!(r.xy_radius(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn dynamic_echo_with_zero_drive_cancels() {
        let spec = LoopSpec::new(0.0, DELTA, 100.0);
        let r = noiseless_run(&SequenceConfig::dynamic(spec)).unwrap();
        assert!(r.total_phase.abs() < 1e-12);
    }

    #[test]
    fn missing_trace_is_rejected() {
        let spec = LoopSpec::new(0.25, DELTA, 100.0);
        let config =
            SequenceConfig::berry(spec).with_noise(NoiseSpec::new(NoiseKind::Radial, 0.05, 0.0628));
        assert!(berry_echo_run(&config, None, &ctx(0.0)).is_err());
        assert!(dynamic_echo_run(&config, None, &ctx(0.0)).is_err());
    }

    #[test]
    fn berry_echo_reports_half_solid_angle() {
        let a = 7.0 * PI / 16.0;
        let omega = omega_for_solid_angle(a, DELTA).unwrap();
        let spec = LoopSpec::new(omega, DELTA, 100.0);
        let r = noiseless_run(&SequenceConfig::berry(spec)).unwrap();
        assert!((r.extracted_phase.abs() - a / 2.0).abs() < 0.05, "{r:?}");
        assert!(r.extracted_phase < 0.0);
    }

    #[test]
    fn shots_change_readout_deterministically() {
        let spec = LoopSpec::new(0.25, DELTA, 100.0);
        let config = SequenceConfig::berry(spec).with_shots(1000);
        let reference = noiseless_run(&config).unwrap().total_phase;
        let a = run_sequence(&config, None, &ctx(reference)).unwrap();
        let b = run_sequence(&config, None, &ctx(reference)).unwrap();
        assert_eq!(a, b);
        let ideal = noiseless_run(&config).unwrap();
        assert!((a.x - ideal.x).abs() < 0.15);
        assert_ne!(a.x, ideal.x);
    }
}
