//! Ornstein-Uhlenbeck fluctuation traces.
//!
//! Traces are generated with the exact one-step transition of the OU process,
//!
//! ```text
//! X_0     ~ N(0, P)
//! X_{k+1} = X_k e^{-Γ dt} + sqrt(P (1 - e^{-2Γ dt})) ξ_k
//! ```
//!
//! so their statistics do not depend on the sampling step. The autocovariance
//! of the stationary process is `P e^{-Γ|lag|}` (lorentzian spectrum of
//! half-width `Γ`).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{substream, Domain};
use crate::scalar::Real;

/// Direction in which a fluctuation displaces the control field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Offsets the in-plane field magnitude `B_ρ` (units rad/ns).
    Radial,
    /// Offsets the azimuth `φ` of the field (units rad).
    Angular,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Radial => "radial",
            NoiseKind::Angular => "angular",
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams<T> {
    /// Stationary variance: (rad/ns)² for radial noise, rad² for angular noise.
    pub power: T,
    /// Autocorrelation decay rate Γ in ns⁻¹.
    pub rate: T,
    pub kind: NoiseKind,
    pub stream_id: u64,
}

impl<T: Real> NoiseParams<T> {
    pub fn new(power: T, rate: T, kind: NoiseKind, stream_id: u64) -> Result<Self> {
        let params = Self {
            power,
            rate,
            kind,
            stream_id,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power.is_finite() && self.power >= T::zero()) {
            return Err(invalid(format!(
                "noise power must be >= 0, got {}",
                self.power
            )));
        }
        if !(self.rate.is_finite() && self.rate > T::zero()) {
            return Err(invalid(format!(
                "noise rate must be > 0, got {}",
                self.rate
            )));
        }
        Ok(())
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    /// Per-step decay factor `e^{-Γ dt}` of the exact update.
    pub fn decay_factor(&self, dt: T) -> T {
        (-self.rate * dt).exp()
    }
}

/// A sampled fluctuation record, one offset per integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace<T> {
    samples: Vec<T>,
    dt: T,
    params: NoiseParams<T>,
}

impl<T: Real> NoiseTrace<T> {
    /// Wraps explicit samples, e.g. a constant offset used to probe the response.
    pub fn from_samples(samples: Vec<T>, dt: T, params: NoiseParams<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("noise trace must contain at least one sample"));
        }
        if !(dt.is_finite() && dt > T::zero()) {
            return Err(invalid(format!("trace step must be > 0, got {dt}")));
        }
        if let Some(k) = samples.iter().position(|x| !x.is_finite()) {
            return Err(invalid(format!("noise sample {k} is not finite")));
        }
        Ok(Self {
            samples,
            dt,
            params,
        })
    }

    pub fn constant(value: T, n: usize, dt: T, kind: NoiseKind) -> Result<Self> {
        let params = NoiseParams {
            power: value * value,
            rate: T::one(),
            kind,
            stream_id: 0,
        };
        Self::from_samples(vec![value; n], dt, params)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn params(&self) -> &NoiseParams<T> {
        &self.params
    }

    pub fn kind(&self) -> NoiseKind {
        self.params.kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sub-trace of `len` samples starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        let end = start
            .checked_add(len)
            .filter(|&e| e <= self.samples.len() && len > 0)
            .ok_or_else(|| {
                invalid(format!(
                    "window {start}..{} outside trace of {} samples",
                    start + len,
                    self.samples.len()
                ))
            })?;
        Ok(Self {
            samples: self.samples[start..end].to_vec(),
            dt: self.dt,
            params: self.params,
        })
    }
}

/// Samples `n` steps of the OU process described by `params`.
///
/// The draw is fully determined by `(master_seed, params.stream_id)`.
pub fn ou_generate<T: Real>(
    params: &NoiseParams<T>,
    dt: T,
    n: usize,
    master_seed: u64,
) -> Result<NoiseTrace<T>> {
    params.validate()?;
    if !(dt.is_finite() && dt > T::zero()) {
        return Err(invalid(format!("trace step must be > 0, got {dt}")));
    }
    if n == 0 {
        return Err(invalid("sample count must be >= 1"));
    }

    let mut rng = substream(master_seed, Domain::Noise, params.stream_id);
    let decay = params.decay_factor(dt);
    let stationary = params.power.sqrt();
    let kick = (params.power * (T::one() - decay * decay)).sqrt();

    let mut samples = Vec::with_capacity(n);
    let mut x = stationary * T::standard_normal(&mut rng);
    samples.push(x);
    for _ in 1..n {
        x = x * decay + kick * T::standard_normal(&mut rng);
        samples.push(x);
    }

    Ok(NoiseTrace {
        samples,
        dt,
        params: *params,
    })
}

/// Analytic autocovariance `P e^{-Γ|lag|}` of the stationary process.
pub fn ou_autocovariance<T: Real>(params: &NoiseParams<T>, lag: T) -> T {
    params.power * (-params.rate * lag.abs()).exp()
}

/// `(x - 1 + e^{-x}) / Γ²` with `x = Γτ`, i.e. half the variance of `∫₀^τ X dt`
/// per unit power. Accurate to full relative precision for small `x`.
pub fn integrated_kernel<T: Real>(rate: T, tau: T) -> T {
    let x = rate * tau;
    let core = if x < T::lit(0.5) {
        // x²/2 - x³/6 + x⁴/24 - ...
        let mut term = x * x / T::lit(2.0);
        let mut sum = term;
        let mut k = 3.0;
        loop {
            term = -term * x / T::lit(k);
            sum = sum + term;
            if term.abs() <= sum.abs() * T::epsilon() * T::lit(0.25) {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        x - T::one() + (-x).exp()
    };
    core / (rate * rate)
}
