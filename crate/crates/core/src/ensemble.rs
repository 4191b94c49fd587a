//! Monte Carlo over noise realizations.
//!
//! Realization `k` draws its noise from substream `k` of the master seed, so the
//! statistics do not depend on how the realizations are scheduled. Results are
//! collected in realization order before any reduction.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, Result, SimError};
use crate::noise::ou_generate;
use crate::protocol::{noiseless_run, run_sequence, RunContext, SequenceConfig, SequenceResult};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig<T> {
    pub sequence: SequenceConfig<T>,
    pub realizations: usize,
    pub master_seed: u64,
    /// Worker threads; has no effect on the result.
    pub workers: usize,
}

impl<T: Real> EnsembleConfig<T> {
    pub fn new(sequence: SequenceConfig<T>, realizations: usize, master_seed: u64) -> Self {
        Self {
            sequence,
            realizations,
            master_seed,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Sample mean, sample standard deviation and Anderson-Darling normality p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCheck {
    pub mean: f64,
    pub sigma: f64,
    /// `None` when the sample has zero spread.
    pub p_value: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedCoherence {
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T> {
    /// Per-loop phases, unwrapped against the noiseless run.
    pub phases: Vec<T>,
    pub xy_points: Vec<(T, T)>,
    pub mean_phase: T,
    /// Sample standard deviation of `phases` (0 for a single realization).
    pub sigma: T,
    /// `|mean_k(⟨X⟩_k + i⟨Y⟩_k)|`
    pub coherence: T,
    pub coherence_normalized: T,
    /// Mean of the per-realization equatorial radii.
    pub mean_radius: T,
    pub noiseless: SequenceResult<T>,
    pub phase_multiplier: T,
    pub gaussian_fit: Option<GaussianCheck>,
    pub histogram: Histogram,
    /// Set when the measured phase spread is wide enough for wrapping to bias
    /// the unwrapped statistics.
    pub saturated: bool,
    pub realizations: usize,
    pub master_seed: u64,
}

impl<T: Real> EnsembleStats<T> {
    /// Noiseless per-loop phase.
    pub fn reference_phase(&self) -> T {
        self.noiseless.extracted_phase
    }

    /// Shift of the mean phase relative to the noiseless run.
    pub fn mean_shift(&self) -> T {
        self.mean_phase - self.noiseless.extracted_phase
    }

    /// Standard error of `sigma` for a gaussian sample, `σ/sqrt(2(N−1))`.
    pub fn sigma_standard_error(&self) -> T {
        let n = self.realizations.max(2) - 1;
        self.sigma / (T::lit(2.0) * T::from_usize(n).unwrap()).sqrt()
    }
}

fn realization<T: Real>(
    config: &EnsembleConfig<T>,
    reference: T,
    id: u64,
) -> Result<SequenceResult<T>> {
    let seq = &config.sequence;
    let trace = match seq.noise_params(id)? {
        Some(params) => Some(ou_generate(
            &params,
            seq.loop_spec.dt,
            seq.trace_len(),
            config.master_seed,
        )?),
        None => None,
    };
    let ctx = RunContext {
        reference,
        realization_id: id,
        master_seed: config.master_seed,
    };
    run_sequence(seq, trace.as_ref(), &ctx)
}

/// Runs `config.realizations` noise realizations and reduces them.
pub fn run_ensemble<T: Real>(config: &EnsembleConfig<T>) -> Result<EnsembleStats<T>> {
    if config.realizations == 0 {
        return Err(invalid("realizations must be >= 1"));
    }
    config.sequence.validate()?;
    let noiseless = noiseless_run(&config.sequence)?;
    let reference = noiseless.total_phase;

    let one = |id: u64| {
        realization(config, reference, id).map_err(|e| SimError::Realization {
            id,
            source: Box::new(e),
        })
    };
    let ids = 0..config.realizations as u64;
    let results = if config.workers <= 1 {
        ids.map(one).collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(|| ids.into_par_iter().map(one).collect::<Result<Vec<_>>>())?
    };

    Ok(reduce(config, noiseless, &results))
}

fn reduce<T: Real>(
    config: &EnsembleConfig<T>,
    noiseless: SequenceResult<T>,
    results: &[SequenceResult<T>],
) -> EnsembleStats<T> {
    let n = T::from_usize(results.len()).unwrap();
    let phases: Vec<T> = results.iter().map(|r| r.extracted_phase).collect();
    let xy_points: Vec<(T, T)> = results.iter().map(|r| (r.x, r.y)).collect();

    let mean_phase = phases.iter().fold(T::zero(), |a, &p| a + p) / n;
    let sigma = if results.len() > 1 {
        let ss = phases
            .iter()
            .fold(T::zero(), |a, &p| a + (p - mean_phase) * (p - mean_phase));
        (ss / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    let sum = xy_points
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |a, &(x, y)| {
            a + Complex::new(x, y)
        });
    let coherence = (sum / n).norm();
    let mean_radius = xy_points
        .iter()
        .fold(T::zero(), |a, &(x, y)| a + x.hypot(y))
        / n;

    let coherence_normalized = {
        let base = noiseless.xy_radius();
        if base > T::zero() {
            T::lit(normalize_ratio(coherence.to_f64_lossy(), base.to_f64_lossy()).value)
        } else {
            T::nan()
        }
    };

    let as_f64: Vec<f64> = phases.iter().map(|p| p.to_f64_lossy()).collect();
    let multiplier = config.sequence.phase_multiplier();
    // P(|total deviation| > π) exceeds ~0.3% once the total spread passes π/3.
    let saturated = multiplier * sigma > T::PI() / T::lit(3.0);

    EnsembleStats {
        phases,
        xy_points,
        mean_phase,
        sigma,
        coherence,
        coherence_normalized,
        mean_radius,
        noiseless,
        phase_multiplier: multiplier,
        gaussian_fit: gaussian_check(&as_f64).ok(),
        histogram: histogram(&as_f64),
        saturated,
        realizations: results.len(),
        master_seed: config.master_seed,
    }
}

fn normalize_ratio(with_noise: f64, without_noise: f64) -> NormalizedCoherence {
    let ratio = with_noise / without_noise;
    let value = ratio.clamp(0.0, 1.05);
    NormalizedCoherence {
        value,
        clamped: value != ratio,
    }
}

/// Coherence with noise relative to the coherence of a noiseless reference.
pub fn normalize_coherence<T: Real>(
    with_noise: &EnsembleStats<T>,
    without_noise: &EnsembleStats<T>,
) -> Result<NormalizedCoherence> {
    let base = without_noise.coherence.to_f64_lossy();
    if !(base > 0.0) {
        return Err(SimError::DegenerateReference);
    }
    Ok(normalize_ratio(with_noise.coherence.to_f64_lossy(), base))
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussianity check on a phase sample: moments plus an Anderson-Darling test
/// with estimated mean and variance (Stephens' small-sample correction,
/// D'Agostino-Stephens p-value approximation).
pub fn gaussian_check(phases: &[f64]) -> Result<GaussianCheck> {
    const MIN_SAMPLES: usize = 20;
    let n = phases.len();
    if n < MIN_SAMPLES {
        return Err(SimError::InsufficientData {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let nf = n as f64;
    let mean = phases.iter().sum::<f64>() / nf;
    let var = phases.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sigma = var.sqrt();
    if !(sigma > 1e-12 * mean.abs().max(1.0)) {
        return Ok(GaussianCheck {
            mean,
            sigma,
            p_value: None,
            degenerate: true,
        });
    }

    let mut z: Vec<f64> = phases.iter().map(|p| (p - mean) / sigma).collect();
    z.sort_by(|a, b| a.total_cmp(b));
    let a2 = -nf
        - (0..n)
            .map(|i| {
                let lower = normal_cdf(z[i]).max(f64::MIN_POSITIVE).ln();
                let upper = normal_cdf(-z[n - 1 - i]).max(f64::MIN_POSITIVE).ln();
                (2.0 * i as f64 + 1.0) * (lower + upper)
            })
            .sum::<f64>()
            / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(GaussianCheck {
        mean,
        sigma,
        p_value: Some(p.clamp(0.0, 1.0)),
        degenerate: false,
    })
}

/// Equal-width histogram over the sample range with `ceil(sqrt(N))` bins (5..=50).
pub fn histogram(values: &[f64]) -> Histogram {
    if values.is_empty() {
        return Histogram {
            edges: vec![],
            counts: vec![],
        };
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Histogram {
            edges: vec![lo, hi],
            counts: vec![values.len()],
        };
    }
    let bins = ((values.len() as f64).sqrt().ceil() as usize).clamp(5, 50);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}
