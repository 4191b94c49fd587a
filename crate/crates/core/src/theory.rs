//! Closed-form predictions for an adiabatic circular loop under OU noise.
//!
//! With `K(Γ, τ) = (Γτ − 1 + e^{−Γτ}) / Γ²`:
//!
//! ```text
//! σ_γ² = 2 P_ρ (π cosϑ sinϑ / (Bτ))² K      geometric (per-loop Berry phase)
//! σ_δ² = 2 P_ρ sin²ϑ K                      dynamic
//! τ*   = π cosϑ / B                          σ_γ(τ*) = σ_δ(τ*)
//! ```

use crate::error::{invalid, Result};
use crate::noise::{integrated_kernel, NoiseTrace};
use crate::scalar::Real;

/// Parameters of the variance formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInput<T> {
    /// Polar angle ϑ (rad).
    pub theta: T,
    /// Field magnitude |B| (rad/ns).
    pub b: T,
    /// Loop time τ (ns).
    pub tau: T,
    /// Noise decay rate Γ (ns⁻¹).
    pub gamma_rate: T,
    /// Noise power P_ρ ((rad/ns)²).
    pub power: T,
}

impl<T: Real> TheoryInput<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.theta, self.b, self.tau, self.gamma_rate]
            .iter()
            .all(|x| x.is_finite() && *x > T::zero());
        if !positive || !(self.power >= T::zero()) {
            return Err(invalid(format!("theory inputs out of range: {self:?}")));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: T) -> Self {
        Self { tau, ..self }
    }
}

/// Magnitude of the per-loop Berry phase, `A/2`.
///
/// A state adiabatically following `+B` around a forward loop acquires `−A/2`.
pub fn berry_phase_ideal<T: Real>(solid_angle: T) -> T {
    solid_angle / T::lit(2.0)
}

/// First-order Berry-phase deviation for a radial fluctuation record:
/// `−(π/τ) sinϑ (cosϑ/B) Σ δρ_k dt` over the first `τ/dt` samples.
pub fn delta_gamma_first_order<T: Real>(
    delta_rho: &NoiseTrace<T>,
    theta: T,
    b: T,
    tau: T,
) -> Result<T> {
    let dt = delta_rho.dt();
    let steps = (tau / dt).round().to_usize().unwrap_or(0);
    if steps == 0 || steps > delta_rho.len() {
        return Err(invalid(format!(
            "trace of {} samples x {dt} ns does not span tau = {tau} ns",
            delta_rho.len()
        )));
    }
    let integral = delta_rho.samples()[..steps]
        .iter()
        .fold(T::zero(), |acc, &x| acc + x)
        * dt;
    Ok(-(T::PI() / tau) * theta.sin() * (theta.cos() / b) * integral)
}

/// First-order dynamic-phase deviation `sinϑ Σ δρ_k dt` over the first `τ/dt` samples.
pub fn delta_dynamic_first_order<T: Real>(
    delta_rho: &NoiseTrace<T>,
    theta: T,
    tau: T,
) -> Result<T> {
    let dt = delta_rho.dt();
    let steps = (tau / dt).round().to_usize().unwrap_or(0);
    if steps == 0 || steps > delta_rho.len() {
        return Err(invalid(format!(
            "trace of {} samples x {dt} ns does not span tau = {tau} ns",
            delta_rho.len()
        )));
    }
    let integral = delta_rho.samples()[..steps]
        .iter()
        .fold(T::zero(), |acc, &x| acc + x)
        * dt;
    Ok(theta.sin() * integral)
}

/// Geometric-phase variance σ_γ² (rad²).
pub fn variance_geometric<T: Real>(input: &TheoryInput<T>) -> T {
    let lever = T::PI() * input.theta.cos() * input.theta.sin() / (input.b * input.tau);
    T::lit(2.0) * input.power * lever * lever * integrated_kernel(input.gamma_rate, input.tau)
}

/// Dynamic-phase variance σ_δ² (rad²).
pub fn variance_dynamic<T: Real>(input: &TheoryInput<T>) -> T {
    let s = input.theta.sin();
    T::lit(2.0) * input.power * s * s * integrated_kernel(input.gamma_rate, input.tau)
}

/// Loop time at which the geometric and dynamic variances coincide.
pub fn crossover_time<T: Real>(theta: T, b: T) -> Result<T> {
    if !(b > T::zero()) {
        return Err(invalid(format!("field magnitude must be > 0, got {b}")));
    }
    Ok(T::PI() * theta.cos() / b)
}

/// Coherence `e^{−(mσ)²/2}` of a gaussian phase spread `sigma` seen through a
/// phase multiplier `m`.
pub fn coherence_with_multiplier<T: Real>(sigma: T, multiplier: T) -> T {
    let x = multiplier * sigma;
    (-(x * x) / T::lit(2.0)).exp()
}

/// Berry-echo coherence `e^{−(4σ)²/2} = e^{−8σ²}`.
pub fn coherence_from_sigma<T: Real>(sigma: T) -> T {
    coherence_with_multiplier(sigma, T::lit(4.0))
}
