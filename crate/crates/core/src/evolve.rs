//! Two-level propagation under `H = σ·B/2` (ħ = 1, B in rad/ns).
//!
//! Each step applies the closed-form Pauli rotation
//! `exp(−i σ·B dt/2) = cos(|B|dt/2) 𝟙 − i sin(|B|dt/2) B̂·σ`, so the only
//! approximation is holding the field constant over a step.

use std::ops::Mul;

use num_complex::Complex;

use crate::path::FieldTrace;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState<T> {
    pub amp0: Complex<T>,
    pub amp1: Complex<T>,
}

impl<T: Real> QubitState<T> {
    pub fn new(amp0: Complex<T>, amp1: Complex<T>) -> Self {
        Self { amp0, amp1 }
    }

    /// |0⟩
    pub fn ground() -> Self {
        Self::new(
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        )
    }

    /// |1⟩
    pub fn excited() -> Self {
        Self::new(
            Complex::new(T::zero(), T::zero()),
            Complex::new(T::one(), T::zero()),
        )
    }

    pub fn norm_sqr(&self) -> T {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Euclidean distance between amplitude vectors.
    pub fn distance(&self, other: &Self) -> T {
        ((self.amp0 - other.amp0).norm_sqr() + (self.amp1 - other.amp1).norm_sqr()).sqrt()
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &Self) -> T {
        (self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1).norm_sqr()
    }
}

/// A 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Real> Unitary2<T> {
    pub fn identity() -> Self {
        let (o, z) = (
            Complex::new(T::one(), T::zero()),
            Complex::new(T::zero(), T::zero()),
        );
        Self {
            m: [[o, z], [z, o]],
        }
    }

    /// Rotation `exp(−i angle n̂·σ/2)` about the unit axis `axis`.
    pub fn rotation(axis: [T; 3], angle: T) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let b = [
            axis[0] / n * angle,
            axis[1] / n * angle,
            axis[2] / n * angle,
        ];
        step_unitary(b, T::one())
    }

    pub fn apply(&self, s: &QubitState<T>) -> QubitState<T> {
        QubitState {
            amp0: self.m[0][0] * s.amp0 + self.m[0][1] * s.amp1,
            amp1: self.m[1][0] * s.amp0 + self.m[1][1] * s.amp1,
        }
    }

    pub fn dagger(&self) -> Self {
        let m = &self.m;
        Self {
            m: [
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ],
        }
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Largest entry-wise deviation of `self` from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }
}

impl<T: Real> Mul for Unitary2<T> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.m, &rhs.m);
        let mut m = [[Complex::new(T::zero(), T::zero()); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { m }
    }
}

/// `exp(−i (σ·B) dt / 2)` in closed form; `B = 0` gives the identity.
pub fn step_unitary<T: Real>(b: [T; 3], dt: T) -> Unitary2<T> {
    let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if norm == T::zero() {
        return Unitary2::identity();
    }
    let half = norm * dt * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let f = s / norm;
    let (x, y, z) = (b[0] * f, b[1] * f, b[2] * f);
    Unitary2 {
        m: [
            [Complex::new(c, -z), Complex::new(-y, -x)],
            [Complex::new(y, -x), Complex::new(c, z)],
        ],
    }
}

/// Applies the per-step unitaries of `trace` to `initial`, in time order.
pub fn propagate<T: Real>(trace: &FieldTrace<T>, initial: QubitState<T>) -> QubitState<T> {
    trace
        .samples
        .iter()
        .fold(initial, |state, &b| step_unitary(b, trace.dt).apply(&state))
}

/// Time-ordered product of the per-step unitaries of `trace`.
pub fn propagator<T: Real>(trace: &FieldTrace<T>) -> Unitary2<T> {
    trace.samples.iter().fold(Unitary2::identity(), |acc, &b| {
        step_unitary(b, trace.dt) * acc
    })
}

/// `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` of a normalized state.
pub fn bloch_expectations<T: Real>(state: &QubitState<T>) -> (T, T, T) {
    let coh = state.amp0.conj() * state.amp1;
    let two = T::lit(2.0);
    (
        two * coh.re,
        two * coh.im,
        state.amp0.norm_sqr() - state.amp1.norm_sqr(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn zero_field_is_identity() {
        assert_eq!(step_unitary([0.0; 3], 3.0), Unitary2::identity());
    }

    #[test]
    fn z_rotation_by_pi() {
        let w = 0.7;
        let u = step_unitary([0.0, 0.0, w], PI / w);
        let expected = Unitary2 {
            m: [[c(0.0, -1.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]],
        };
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn x_rotation_by_pi_flips_ground_state() {
        let w = 0.3;
        let u = step_unitary([w, 0.0, 0.0], PI / w);
        let out = u.apply(&QubitState::ground());
        assert!(out.amp0.norm() < 1e-15);
        assert!((out.amp1 - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn bloch_examples() {
        let (x, y, z) = bloch_expectations(&QubitState::<f64>::ground());
        assert_eq!((x, y, z), (0.0, 0.0, 1.0));

        let plus = QubitState::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        let (x, y, z) = bloch_expectations(&plus);
        assert_relative_eq!(x, 1.0, epsilon = 1e-15);
        assert_relative_eq!(y, 0.0);
        assert_relative_eq!(z, 0.0, epsilon = 1e-15);

        let plus_i = QubitState::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2));
        let (x, y, z) = bloch_expectations(&plus_i);
        assert_relative_eq!(x, 0.0);
        assert_relative_eq!(y, 1.0, epsilon = 1e-15);
        assert_relative_eq!(z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn y_half_pi_prepares_plus() {
        let u = Unitary2::rotation([0.0, 1.0, 0.0], PI / 2.0);
        let (x, y, z) = bloch_expectations(&u.apply(&QubitState::ground()));
        assert_relative_eq!(x, 1.0, epsilon = 1e-15);
        assert_relative_eq!(y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn idle_detuning_accumulates_relative_phase() {
        let delta = 0.314;
        let t = 3.7;
        let trace = FieldTrace::idle(delta, 370, 0.01);
        let plus = QubitState::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        let out = propagate(&trace, plus);
        let (x, y, _) = bloch_expectations(&out);
        assert_relative_eq!(y.atan2(x), delta * t, epsilon = 1e-12);
    }

    #[test]
    fn propagator_matches_state_propagation() {
        let trace = FieldTrace {
            samples: (0..50).map(|k| [0.1 * k as f64, 0.2, -0.3]).collect(),
            dt: 0.05,
            plateau: 0..0,
        };
        let init = QubitState::ground();
        let a = propagate(&trace, init);
        let b = propagator(&trace).apply(&init);
        assert!(a.distance(&b) < 1e-14);
    }
}
