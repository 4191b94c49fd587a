//! Experiment presets and their CSV/JSON output.
//!
//! Every run writes one CSV per sweep and a `manifest.json` holding everything
//! needed to regenerate the CSVs bit for bit (see [`rerun`]).

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use berry_core::theory::berry_phase_ideal;
use berry_core::{
    coherence_with_multiplier, crossover_time, mhz_to_rad_per_ns, run_ensemble, variance_dynamic,
    variance_geometric, EnsembleConfig, EnsembleStats, LoopSpec, NoiseKind, NoiseSpec,
    SequenceConfig, SequenceKind, TheoryInput,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, DEFAULT_REALIZATIONS, DEFAULT_SEED};

pub const DETUNING_MHZ: f64 = 50.0;
pub const BANDWIDTH_MHZ: f64 = 10.0;
pub const AMPLITUDE: f64 = 1.0 / 15.0;
pub const FIG2_TAU_NS: f64 = 100.0;
pub const FIG3_SOLID_ANGLE: f64 = 7.0 * PI / 16.0;
pub const FIG4_SOLID_ANGLE: f64 = 0.37 * PI;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Fig2,
    Fig3Berry,
    Fig3Dynamic,
    Fig4,
    Custom,
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig2 => "fig2",
            Self::Fig3Berry => "fig3-berry",
            Self::Fig3Dynamic => "fig3-dynamic",
            Self::Fig4 => "fig4",
            Self::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub master_seed: u64,
    pub realizations: usize,
    pub workers: usize,
    /// Step override (ns); `None` uses the default step rule per sweep point.
    pub dt_ns: Option<f64>,
    /// Configuration of the `custom` preset.
    pub config: Option<ExperimentConfig>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            master_seed: DEFAULT_SEED,
            realizations: DEFAULT_REALIZATIONS,
            workers: 1,
            dt_ns: None,
            config: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub preset: PresetName,
    pub master_seed: u64,
    pub realizations: usize,
    pub workers: usize,
    pub dt_ns: Option<f64>,
    /// Fixed sweep parameters; absent for the custom preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
    pub files: Vec<String>,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn options(&self) -> RunOptions {
        RunOptions {
            master_seed: self.master_seed,
            realizations: self.realizations,
            workers: self.workers,
            dt_ns: self.dt_ns,
            config: self.config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    #[serde(rename = "A")]
    pub solid_angle: f64,
    pub kind: NoiseKind,
    pub coherence_norm: f64,
    pub mean_phase: f64,
    pub delta_gamma: f64,
    pub sigma: f64,
    pub theory_sigma: f64,
    pub a_over_pi: f64,
    pub coherence: f64,
    pub noiseless_phase: f64,
    pub sigma_se: f64,
    pub gaussian_p: Option<f64>,
    pub saturated: bool,
    pub master_seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationRow {
    #[serde(rename = "A")]
    pub solid_angle: f64,
    pub kind: NoiseKind,
    pub realization: usize,
    pub phase: f64,
    pub x: f64,
    pub y: f64,
    pub master_seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Row {
    pub s: f64,
    pub kind: NoiseKind,
    pub sequence: SequenceKind,
    pub coherence_norm: f64,
    pub coherence: f64,
    pub mean_phase: f64,
    pub sigma: f64,
    pub sigma_se: f64,
    pub theory_sigma: f64,
    pub theory_coherence: f64,
    pub saturated: bool,
    pub master_seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Row {
    pub tau: f64,
    pub is_crossover: bool,
    pub sigma_berry: f64,
    pub sigma_berry_se: f64,
    pub sigma_dynamic: f64,
    pub sigma_dynamic_se: f64,
    pub coherence_berry: f64,
    pub coherence_dynamic: f64,
    pub theory_sigma_geometric: f64,
    pub theory_sigma_dynamic: f64,
    pub saturated_berry: bool,
    pub saturated_dynamic: bool,
    pub master_seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomRow {
    pub sequence: SequenceKind,
    pub kind: String,
    #[serde(rename = "A")]
    pub solid_angle: f64,
    pub tau: f64,
    pub s: f64,
    pub coherence_norm: f64,
    pub coherence: f64,
    pub mean_phase: f64,
    pub noiseless_phase: f64,
    pub sigma: f64,
    pub sigma_se: f64,
    pub theory_sigma: f64,
    pub gaussian_p: Option<f64>,
    pub saturated: bool,
    pub master_seed: u64,
    pub realizations: usize,
}

/// Solid angles of the `fig2` sweep, `kπ/16` for `k = 1..=15`.
pub fn fig2_solid_angles() -> Vec<f64> {
    (1..=15).map(|k| k as f64 * PI / 16.0).collect()
}

/// Normalized amplitudes of the `fig3-*` sweeps, log-spaced over [0.01, 1].
pub fn fig3_amplitudes() -> Vec<f64> {
    (0..=12)
        .map(|k| 10f64.powf(-2.0 + k as f64 / 6.0))
        .collect()
}

/// Loop times of the `fig4` sweep: log-spaced over [5, 300] ns plus the crossover.
pub fn fig4_taus() -> Vec<f64> {
    let mut taus: Vec<f64> = (0..=16)
        .map(|k| 5.0 * 60f64.powf(k as f64 / 16.0))
        .collect();
    taus.push(fig4_crossover());
    taus.sort_by(|a, b| a.total_cmp(b));
    taus
}

pub fn fig4_crossover() -> f64 {
    let spec = preset_loop(FIG4_SOLID_ANGLE, 1.0, None).expect("valid preset geometry");
    crossover_time(spec.theta().unwrap(), spec.b_max()).unwrap()
}

fn rate() -> f64 {
    mhz_to_rad_per_ns(BANDWIDTH_MHZ)
}

fn preset_loop(a: f64, tau: f64, dt: Option<f64>) -> berry_core::Result<LoopSpec<f64>> {
    let spec = LoopSpec::for_solid_angle(a, mhz_to_rad_per_ns(DETUNING_MHZ), tau)?
        .with_default_dt(Some(rate()));
    Ok(match dt {
        Some(dt) => spec.with_dt(dt),
        None => spec,
    })
}

fn theory_input(seq: &SequenceConfig<f64>) -> berry_core::Result<Option<TheoryInput<f64>>> {
    let spec = seq.loop_spec;
    Ok(seq.noise_params(0)?.map(|p| TheoryInput {
        theta: spec.theta().unwrap_or(0.0),
        b: spec.b_max(),
        tau: spec.tau,
        gamma_rate: p.rate,
        power: p.power,
    }))
}

/// First-order per-loop phase spread: the geometric or dynamic variance for
/// radial noise, zero for angular noise.
pub fn theory_sigma(seq: &SequenceConfig<f64>) -> berry_core::Result<f64> {
    let Some(noise) = seq.noise else {
        return Ok(0.0);
    };
    if noise.kind == NoiseKind::Angular {
        return Ok(0.0);
    }
    let Some(input) = theory_input(seq)? else {
        return Ok(0.0);
    };
    Ok(match seq.kind {
        SequenceKind::BerryEcho => variance_geometric(&input).sqrt(),
        SequenceKind::DynamicEcho => variance_dynamic(&input).sqrt(),
    })
}

struct Runner<'a> {
    opts: &'a RunOptions,
}

impl Runner<'_> {
    fn ensemble(&self, seq: SequenceConfig<f64>) -> anyhow::Result<EnsembleStats<f64>> {
        let config = EnsembleConfig::new(seq, self.opts.realizations, self.opts.master_seed)
            .with_workers(self.opts.workers);
        Ok(run_ensemble(&config)?)
    }

    fn fig2(&self) -> anyhow::Result<(Vec<Fig2Row>, Vec<RealizationRow>)> {
        let mut rows = Vec::new();
        let mut points = Vec::new();
        for a in fig2_solid_angles() {
            for kind in [NoiseKind::Radial, NoiseKind::Angular] {
                let spec = preset_loop(a, FIG2_TAU_NS, self.opts.dt_ns)?;
                let seq =
                    SequenceConfig::berry(spec).with_noise(NoiseSpec::new(kind, AMPLITUDE, rate()));
                let stats = self.ensemble(seq)?;
                let ideal = -spec.orientation.sign::<f64>() * berry_phase_ideal(a);
                rows.push(Fig2Row {
                    solid_angle: a,
                    kind,
                    coherence_norm: stats.coherence_normalized,
                    mean_phase: stats.mean_phase,
                    delta_gamma: stats.mean_phase - ideal,
                    sigma: stats.sigma,
                    theory_sigma: theory_sigma(&seq)?,
                    a_over_pi: a / PI,
                    coherence: stats.coherence,
                    noiseless_phase: stats.reference_phase(),
                    sigma_se: stats.sigma_standard_error(),
                    gaussian_p: stats.gaussian_fit.and_then(|g| g.p_value),
                    saturated: stats.saturated,
                    master_seed: self.opts.master_seed,
                    realizations: stats.realizations,
                });
                for (k, (&phase, &(x, y))) in stats.phases.iter().zip(&stats.xy_points).enumerate()
                {
                    points.push(RealizationRow {
                        solid_angle: a,
                        kind,
                        realization: k,
                        phase,
                        x,
                        y,
                        master_seed: self.opts.master_seed,
                        realizations: stats.realizations,
                    });
                }
            }
        }
        Ok((rows, points))
    }

    fn fig3(&self, sequence: SequenceKind) -> anyhow::Result<Vec<Fig3Row>> {
        let mut rows = Vec::new();
        for s in fig3_amplitudes() {
            for kind in [NoiseKind::Radial, NoiseKind::Angular] {
                let spec = preset_loop(FIG3_SOLID_ANGLE, FIG2_TAU_NS, self.opts.dt_ns)?;
                let base = match sequence {
                    SequenceKind::BerryEcho => SequenceConfig::berry(spec),
                    SequenceKind::DynamicEcho => SequenceConfig::dynamic(spec),
                };
                let seq = base.with_noise(NoiseSpec::new(kind, s, rate()));
                let stats = self.ensemble(seq)?;
                let sigma_th = theory_sigma(&seq)?;
                rows.push(Fig3Row {
                    s,
                    kind,
                    sequence,
                    coherence_norm: stats.coherence_normalized,
                    coherence: stats.coherence,
                    mean_phase: stats.mean_phase,
                    sigma: stats.sigma,
                    sigma_se: stats.sigma_standard_error(),
                    theory_sigma: sigma_th,
                    theory_coherence: coherence_with_multiplier(sigma_th, seq.phase_multiplier()),
                    saturated: stats.saturated,
                    master_seed: self.opts.master_seed,
                    realizations: stats.realizations,
                });
            }
        }
        Ok(rows)
    }

    fn fig4(&self) -> anyhow::Result<Vec<Fig4Row>> {
        let t_star = fig4_crossover();
        let mut rows = Vec::new();
        for tau in fig4_taus() {
            let spec = preset_loop(FIG4_SOLID_ANGLE, tau, self.opts.dt_ns)?;
            let noise = NoiseSpec::new(NoiseKind::Radial, AMPLITUDE, rate());
            let berry_seq = SequenceConfig::berry(spec).with_noise(noise);
            let dynamic_seq = SequenceConfig::dynamic(spec).with_noise(noise);
            let berry = self.ensemble(berry_seq)?;
            let dynamic = self.ensemble(dynamic_seq)?;
            rows.push(Fig4Row {
                tau,
                is_crossover: tau == t_star,
                sigma_berry: berry.sigma,
                sigma_berry_se: berry.sigma_standard_error(),
                sigma_dynamic: dynamic.sigma,
                sigma_dynamic_se: dynamic.sigma_standard_error(),
                coherence_berry: berry.coherence_normalized,
                coherence_dynamic: dynamic.coherence_normalized,
                theory_sigma_geometric: theory_sigma(&berry_seq)?,
                theory_sigma_dynamic: theory_sigma(&dynamic_seq)?,
                saturated_berry: berry.saturated,
                saturated_dynamic: dynamic.saturated,
                master_seed: self.opts.master_seed,
                realizations: self.opts.realizations,
            });
        }
        Ok(rows)
    }

    fn custom(&self, config: &ExperimentConfig) -> anyhow::Result<CustomRow> {
        let mut seq = config.sequence_config()?;
        if let Some(dt) = self.opts.dt_ns {
            seq.loop_spec = seq.loop_spec.with_dt(dt);
        }
        let stats = self.ensemble(seq)?;
        let spec = seq.loop_spec;
        Ok(CustomRow {
            sequence: seq.kind,
            kind: seq
                .noise
                .map_or_else(|| "none".to_string(), |n| n.kind.as_str().to_string()),
            solid_angle: spec.solid_angle()?,
            tau: spec.tau,
            s: seq.noise.map_or(0.0, |n| n.amplitude),
            coherence_norm: stats.coherence_normalized,
            coherence: stats.coherence,
            mean_phase: stats.mean_phase,
            noiseless_phase: stats.reference_phase(),
            sigma: stats.sigma,
            sigma_se: stats.sigma_standard_error(),
            theory_sigma: theory_sigma(&seq)?,
            gaussian_p: stats.gaussian_fit.and_then(|g| g.p_value),
            saturated: stats.saturated,
            master_seed: self.opts.master_seed,
            realizations: stats.realizations,
        })
    }
}

fn write_csv<R: Serialize>(dir: &Path, name: &str, rows: &[R]) -> anyhow::Result<String> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(name.to_string())
}

/// Runs `preset` and writes its CSVs and manifest into `out_dir`.
pub fn run_preset(
    preset: PresetName,
    opts: &RunOptions,
    out_dir: &Path,
) -> anyhow::Result<Manifest> {
    if opts.realizations == 0 {
        bail!("realizations must be >= 1");
    }
    if opts.workers == 0 {
        bail!("workers must be >= 1");
    }
    let mut opts = opts.clone();
    if preset == PresetName::Custom {
        let Some(config) = opts.config.as_mut() else {
            bail!("the custom preset needs a configuration file (--config)");
        };
        config.run.seed = opts.master_seed;
        config.run.realizations = opts.realizations;
        config.run.workers = opts.workers;
    } else {
        opts.config = None;
    }

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let started = Instant::now();
    let runner = Runner { opts: &opts };
    let files = match preset {
        PresetName::Fig2 => {
            let (rows, points) = runner.fig2()?;
            vec![
                write_csv(out_dir, "fig2.csv", &rows)?,
                write_csv(out_dir, "fig2_realizations.csv", &points)?,
            ]
        }
        PresetName::Fig3Berry => {
            vec![write_csv(
                out_dir,
                "fig3_berry.csv",
                &runner.fig3(SequenceKind::BerryEcho)?,
            )?]
        }
        PresetName::Fig3Dynamic => {
            vec![write_csv(
                out_dir,
                "fig3_dynamic.csv",
                &runner.fig3(SequenceKind::DynamicEcho)?,
            )?]
        }
        PresetName::Fig4 => vec![write_csv(out_dir, "fig4.csv", &runner.fig4()?)?],
        PresetName::Custom => {
            let row = runner.custom(opts.config.as_ref().unwrap())?;
            vec![write_csv(out_dir, "custom.csv", &[row])?]
        }
    };

    let fixed = preset != PresetName::Custom;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        preset,
        master_seed: opts.master_seed,
        realizations: opts.realizations,
        workers: opts.workers,
        dt_ns: opts.dt_ns,
        detuning_mhz: fixed.then_some(DETUNING_MHZ),
        bandwidth_mhz: fixed.then_some(BANDWIDTH_MHZ),
        amplitude: fixed.then_some(AMPLITUDE),
        config: opts.config.clone(),
        files,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> anyhow::Result<Manifest> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed manifest {}", path.display()))
}

/// Re-runs the preset recorded in a manifest into `out_dir`.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> anyhow::Result<Manifest> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, running {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    run_preset(manifest.preset, &manifest.options(), out_dir)
}

/// Default output directory for a preset.
pub fn default_out_dir(preset: PresetName) -> PathBuf {
    PathBuf::from("out").join(preset.to_string())
}
