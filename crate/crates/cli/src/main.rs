use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use berry_core::path::{normalized_amplitude_to_power, omega_for_solid_angle};
use berry_core::theory::{
    coherence_with_multiplier, crossover_time, variance_dynamic, variance_geometric,
};
use berry_core::{mhz_to_rad_per_ns, polar_angle, NoiseKind, TheoryInput};
use berry_sim::config::{parse_config, DEFAULT_REALIZATIONS, DEFAULT_SEED};
use berry_sim::load_config;
use berry_sim::preset::{default_out_dir, rerun, run_preset, PresetName, RunOptions};
use clap::{Parser, Subcommand};

/// Berry-phase versus dynamic-phase dephasing simulator.
#[derive(Debug, Parser)]
#[command(name = "berry-sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset sweep and write CSVs plus a manifest.
    Run {
        preset: PresetName,
        /// Output directory [default: out/<preset>]
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Integration step in ns (overrides the default step rule)
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Experiment file for the custom preset
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Regenerate the outputs recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long, default_value = "rerun")]
        out: PathBuf,
    },
    /// Check an experiment file and print its normalized form.
    Validate { config: PathBuf },
    /// Print first-order predictions for radial noise.
    Theory {
        /// Solid angle in units of π
        #[arg(long, default_value_t = 0.37)]
        solid_angle_pi: f64,
        #[arg(long, default_value_t = 50.0)]
        detuning_mhz: f64,
        #[arg(long, default_value_t = 100.0)]
        tau_ns: f64,
        /// Normalized noise amplitude
        #[arg(long, default_value_t = 1.0 / 15.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 10.0)]
        bandwidth_mhz: f64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            preset,
            out,
            seed,
            realizations,
            dt,
            workers,
            config,
        } => {
            let config = config.map(|p| load_config(&p)).transpose()?;
            let run = config.as_ref().map(|c| c.run);
            let opts = RunOptions {
                master_seed: seed
                    .or(run.as_ref().map(|r| r.seed))
                    .unwrap_or(DEFAULT_SEED),
                realizations: realizations
                    .or(run.as_ref().map(|r| r.realizations))
                    .unwrap_or(DEFAULT_REALIZATIONS),
                workers: workers.or(run.as_ref().map(|r| r.workers)).unwrap_or(1),
                dt_ns: dt,
                config,
            };
            let out = out.unwrap_or_else(|| default_out_dir(preset));
            let manifest = run_preset(preset, &opts, &out)?;
            for f in &manifest.files {
                println!("{}", out.join(f).display());
            }
            eprintln!("{preset}: {:.1} s", manifest.wall_time_s);
        }
        Command::Rerun { manifest, out } => {
            let m = rerun(&manifest, &out)?;
            for f in &m.files {
                println!("{}", out.join(f).display());
            }
        }
        Command::Validate { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read {}", config.display()))?;
            match parse_config(&text) {
                Ok(c) => println!("{}", serde_json::to_string_pretty(&c.normalized()?)?),
                Err(errors) => {
                    for issue in &errors.0 {
                        eprintln!("{}: {issue}", config.display());
                    }
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Theory {
            solid_angle_pi,
            detuning_mhz,
            tau_ns,
            amplitude,
            bandwidth_mhz,
        } => {
            let delta = mhz_to_rad_per_ns(detuning_mhz);
            let omega = omega_for_solid_angle(solid_angle_pi * std::f64::consts::PI, delta)?;
            let theta = polar_angle(omega, delta)?;
            let b = omega.hypot(delta);
            let input = TheoryInput {
                theta,
                b,
                tau: tau_ns,
                gamma_rate: mhz_to_rad_per_ns(bandwidth_mhz),
                power: normalized_amplitude_to_power(amplitude, NoiseKind::Radial, omega)?,
            };
            input.validate()?;
            let sg = variance_geometric(&input).sqrt();
            let sd = variance_dynamic(&input).sqrt();
            println!("theta_rad        {theta:.6}");
            println!("b_rad_per_ns     {b:.6}");
            println!("sigma_geometric  {sg:.6}");
            println!("sigma_dynamic    {sd:.6}");
            println!("crossover_ns     {:.4}", crossover_time(theta, b)?);
            println!("coherence_berry  {:.6}", coherence_with_multiplier(sg, 4.0));
            println!("coherence_dyn    {:.6}", coherence_with_multiplier(sd, 1.0));
        }
    }
    Ok(ExitCode::SUCCESS)
}
