//! The circular control path and its noisy realizations.
//!
//! The effective field in the rotating frame is
//! `B(t) = (B_ρ cos φ, B_ρ sin φ, Δ)`. A loop ramps `B_ρ` linearly from 0 to
//! `Ω` at `φ = 0`, sweeps `φ` once around the circle in time `τ`, and ramps
//! `B_ρ` back to 0 at the final azimuth. Everything is in rad/ns and ns.
//!
//! Field samples are taken at step midpoints: sample `k` is the constant field
//! applied over `[k dt, (k + 1) dt)`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::noise::{NoiseKind, NoiseTrace};
use crate::scalar::Real;

/// Default linear ramp duration in ns.
pub const DEFAULT_RAMP_NS: f64 = 100.0;

/// Converts a cyclic frequency in MHz to an angular frequency in rad/ns.
pub fn mhz_to_rad_per_ns<T: Real>(mhz: T) -> T {
    mhz * T::two_pi() * T::lit(1e-3)
}

pub fn rad_per_ns_to_mhz<T: Real>(w: T) -> T {
    w / (T::two_pi() * T::lit(1e-3))
}

/// Sense in which the azimuth advances during the plateau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// φ: 0 → 2π
    Forward,
    /// φ: 0 → −2π
    Reverse,
    /// φ held at 0; used for the fixed-azimuth drive of the dynamic-phase echo.
    Stationary,
}

impl Orientation {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Forward => T::one(),
            Orientation::Reverse => -T::one(),
            Orientation::Stationary => T::zero(),
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
            Orientation::Stationary => Orientation::Stationary,
        }
    }
}

/// Part of the sequence that receives injected noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseWindow {
    /// Only the plateau (the circular sweep itself).
    #[default]
    Plateau,
    /// Ramps and plateau.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSpec<T> {
    /// Drive amplitude Ω (rad/ns).
    pub omega: T,
    /// Detuning Δ (rad/ns). The sign is kept in `B_z`; geometry uses `|Δ|`.
    pub delta: T,
    /// Plateau duration τ (ns).
    pub tau: T,
    pub orientation: Orientation,
    pub ramp_time: T,
    /// Integration step (ns), always an exact divisor of `tau`.
    pub dt: T,
    pub noise_window: NoiseWindow,
}

/// Default integration step: resolves the loop, the precession and the noise
/// correlation time.
pub fn default_dt<T: Real>(tau: T, b_max: T, rate: Option<T>) -> T {
    let mut dt = tau / T::lit(2000.0);
    if b_max > T::zero() {
        dt = dt.min(T::lit(0.005) / b_max);
    }
    if let Some(rate) = rate.filter(|r| *r > T::zero()) {
        dt = dt.min(T::lit(0.1) / rate);
    }
    dt
}

fn snap_dt<T: Real>(tau: T, dt: T) -> T {
    let n = (tau / dt - T::lit(1e-9)).ceil().max(T::one());
    tau / n
}

impl<T: Real> LoopSpec<T> {
    /// Forward loop with the default ramp and step.
    pub fn new(omega: T, delta: T, tau: T) -> Self {
        let b_max = omega.hypot(delta);
        let dt = snap_dt(tau, default_dt(tau, b_max, None));
        Self {
            omega,
            delta,
            tau,
            orientation: Orientation::Forward,
            ramp_time: T::lit(DEFAULT_RAMP_NS),
            dt,
            noise_window: NoiseWindow::Plateau,
        }
    }

    /// Loop whose cone encloses `solid_angle` at detuning `delta`.
    pub fn for_solid_angle(solid_angle: T, delta: T, tau: T) -> Result<Self> {
        Ok(Self::new(
            omega_for_solid_angle(solid_angle, delta)?,
            delta,
            tau,
        ))
    }

    /// Sets the step; it is shortened if needed so that it divides `tau`.
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = snap_dt(self.tau, dt);
        self
    }

    /// Applies the default step rule, including the noise correlation time.
    pub fn with_default_dt(self, rate: Option<T>) -> Self {
        let dt = default_dt(self.tau, self.b_max(), rate);
        self.with_dt(dt)
    }

    pub fn with_ramp_time(mut self, ramp_time: T) -> Self {
        self.ramp_time = ramp_time;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_noise_window(mut self, window: NoiseWindow) -> Self {
        self.noise_window = window;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega, self.delta, self.tau, self.ramp_time, self.dt]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("loop parameters must be finite"));
        }
        if self.omega < T::zero() {
            return Err(invalid(format!("omega must be >= 0, got {}", self.omega)));
        }
        if self.tau <= T::zero() {
            return Err(invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.ramp_time < T::zero() {
            return Err(invalid(format!(
                "ramp_time must be >= 0, got {}",
                self.ramp_time
            )));
        }
        if self.dt <= T::zero() {
            return Err(invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.dt > self.tau / T::lit(100.0) * (T::one() + T::lit(1e-12)) {
            return Err(invalid(format!(
                "dt = {} exceeds tau/100 = {}",
                self.dt,
                self.tau / T::lit(100.0)
            )));
        }
        polar_angle(self.omega, self.delta)?;
        Ok(())
    }

    pub fn theta(&self) -> Result<T> {
        polar_angle(self.omega, self.delta)
    }

    pub fn solid_angle(&self) -> Result<T> {
        Ok(solid_angle(self.theta()?))
    }

    /// Plateau field magnitude `|B| = sqrt(Ω² + Δ²)`.
    pub fn b_max(&self) -> T {
        self.omega.hypot(self.delta)
    }

    pub fn plateau_steps(&self) -> usize {
        (self.tau / self.dt).round().to_usize().unwrap_or(0).max(1)
    }

    pub fn ramp_steps(&self) -> usize {
        (self.ramp_time / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Steps over ramp-on, plateau and ramp-off.
    pub fn total_steps(&self) -> usize {
        self.plateau_steps() + 2 * self.ramp_steps()
    }

    pub fn plateau_range(&self) -> Range<usize> {
        let start = self.ramp_steps();
        start..start + self.plateau_steps()
    }

    pub fn duration(&self) -> T {
        T::from_usize(self.total_steps()).unwrap() * self.dt
    }

    /// `(B_ρ, φ)` of the noiseless path at time `t` from the start of ramp-on.
    pub fn polar_at(&self, t: T) -> (T, T) {
        let ramp = T::from_usize(self.ramp_steps()).unwrap() * self.dt;
        let plateau = T::from_usize(self.plateau_steps()).unwrap() * self.dt;
        let sweep = self.orientation.sign::<T>() * T::two_pi();
        if t < ramp {
            (self.omega * t / ramp, T::zero())
        } else if t < ramp + plateau {
            (self.omega, sweep * (t - ramp) / plateau)
        } else {
            let left = (ramp + ramp + plateau - t).max(T::zero());
            let rho = if ramp > T::zero() {
                self.omega * left / ramp
            } else {
                T::zero()
            };
            (rho, sweep)
        }
    }

    /// Noiseless field at time `t`.
    pub fn field_at(&self, t: T) -> [T; 3] {
        let (rho, phi) = self.polar_at(t);
        [rho * phi.cos(), rho * phi.sin(), self.delta]
    }
}

/// Time-sampled effective field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace<T> {
    pub samples: Vec<[T; 3]>,
    pub dt: T,
    /// Sample indices of the plateau; empty for idle traces.
    pub plateau: Range<usize>,
}

impl<T: Real> FieldTrace<T> {
    /// Bare detuning for `n` steps.
    pub fn idle(delta: T, n: usize, dt: T) -> Self {
        Self {
            samples: vec![[T::zero(), T::zero(), delta]; n],
            dt,
            plateau: 0..0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> T {
        T::from_usize(self.samples.len()).unwrap() * self.dt
    }

    pub fn split_at(&self, k: usize) -> (Self, Self) {
        let (a, b) = self.samples.split_at(k);
        (
            Self {
                samples: a.to_vec(),
                dt: self.dt,
                plateau: 0..0,
            },
            Self {
                samples: b.to_vec(),
                dt: self.dt,
                plateau: 0..0,
            },
        )
    }
}

/// Polar angle `ϑ = arctan(Ω/|Δ|)` of the plateau field.
pub fn polar_angle<T: Real>(omega: T, delta: T) -> Result<T> {
    if omega == T::zero() && delta == T::zero() {
        return Err(SimError::DegenerateField);
    }
    Ok(omega.abs().atan2(delta.abs()))
}

/// Solid angle `2π(1 − cos ϑ)` enclosed by the cone of half-angle `theta`.
pub fn solid_angle<T: Real>(theta: T) -> T {
    T::two_pi() * (T::one() - theta.cos())
}

/// Inverse of [`solid_angle`]: polar angle enclosing `a`, for `0 <= a < 2π`.
pub fn theta_for_solid_angle<T: Real>(a: T) -> Result<T> {
    if !(a >= T::zero() && a < T::two_pi()) {
        return Err(invalid(format!("solid angle must lie in [0, 2π), got {a}")));
    }
    Ok((T::one() - a / T::two_pi()).acos())
}

/// Drive amplitude `Ω = |Δ| tan ϑ` whose loop encloses `a` at detuning `delta`.
pub fn omega_for_solid_angle<T: Real>(a: T, delta: T) -> Result<T> {
    if delta == T::zero() {
        return Err(invalid("detuning must be non-zero to set a solid angle"));
    }
    Ok(delta.abs() * theta_for_solid_angle(a)?.tan())
}

/// Noise power for a normalized amplitude: `(s B_ρ)²` radial, `s²` angular.
pub fn normalized_amplitude_to_power<T: Real>(s: T, kind: NoiseKind, b_rho: T) -> Result<T> {
    if !(s.is_finite() && s >= T::zero()) {
        return Err(invalid(format!("noise amplitude must be >= 0, got {s}")));
    }
    match kind {
        NoiseKind::Radial => {
            if !(b_rho > T::zero()) {
                return Err(invalid(format!(
                    "radial noise amplitude needs b_rho > 0, got {b_rho}"
                )));
            }
            Ok((s * b_rho) * (s * b_rho))
        }
        NoiseKind::Angular => Ok(s * s),
    }
}

/// Samples the loop described by `spec`, optionally with noise injected.
///
/// The injection trace must use the loop's step and cover every step of the
/// sequence; only the steps inside `spec.noise_window` are perturbed.
pub fn build_field_trace<T: Real>(
    spec: &LoopSpec<T>,
    injection: Option<&NoiseTrace<T>>,
) -> Result<FieldTrace<T>> {
    spec.validate()?;
    let n = spec.total_steps();
    let plateau = spec.plateau_range();

    if let Some(noise) = injection {
        let tol = T::lit(1e-9) * spec.dt;
        if (noise.dt() - spec.dt).abs() > tol {
            return Err(invalid(format!(
                "noise step {} differs from loop step {}",
                noise.dt(),
                spec.dt
            )));
        }
        if noise.len() < n {
            return Err(invalid(format!(
                "noise trace has {} samples, sequence needs {n}",
                noise.len()
            )));
        }
    }

    let half = T::lit(0.5);
    let samples = (0..n)
        .map(|k| {
            let t = (T::from_usize(k).unwrap() + half) * spec.dt;
            let (mut rho, mut phi) = spec.polar_at(t);
            if let Some(noise) = injection {
                let active = match spec.noise_window {
                    NoiseWindow::Plateau => plateau.contains(&k),
                    NoiseWindow::Full => true,
                };
                if active {
                    let offset = noise.samples()[k];
                    match noise.kind() {
                        NoiseKind::Radial => rho = rho + offset,
                        NoiseKind::Angular => phi = phi + offset,
                    }
                }
            }
            [rho * phi.cos(), rho * phi.sin(), spec.delta]
        })
        .collect();

    Ok(FieldTrace {
        samples,
        dt: spec.dt,
        plateau,
    })
}
