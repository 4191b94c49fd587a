//! Experiment configuration files.
//!
//! Files are TOML in lab units (MHz, ns). Frequencies are cyclic:
//! `1 MHz = 2π × 10⁻³ rad/ns`.
//!
//! ```toml
//! sequence = "berry-echo"        # or "dynamic-echo"
//! shots = 100000                 # optional; ideal expectations when absent
//!
//! [loop]
//! solid_angle_pi = 0.4375        # A/π; give this or omega_mhz
//! detuning_mhz = -50.0
//! tau_ns = 100.0
//! ramp_ns = 100.0                # optional
//! orientation = "forward"        # optional: forward | reverse
//! noise_window = "plateau"       # optional: plateau | full
//! dt_ns = 0.01                   # optional
//!
//! [noise]                        # optional
//! kind = "radial"                # radial | angular
//! amplitude = 0.0667             # normalized amplitude s
//! bandwidth_mhz = 10.0
//!
//! [run]                          # optional
//! seed = 1
//! realizations = 300
//! workers = 4
//! ```

use std::fmt;
use std::path::Path;

use berry_core::path::{default_dt, omega_for_solid_angle, DEFAULT_RAMP_NS};
use berry_core::{
    mhz_to_rad_per_ns, EnsembleConfig, LoopSpec, NoiseKind, NoiseSpec, NoiseWindow, Orientation,
    SequenceConfig, SequenceKind,
};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const DEFAULT_REALIZATIONS: usize = 300;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solid_angle_pi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_mhz: Option<f64>,
    pub detuning_mhz: f64,
    pub tau_ns: f64,
    pub ramp_ns: f64,
    pub orientation: Orientation,
    pub noise_window: NoiseWindow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_ns: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    pub amplitude: f64,
    pub bandwidth_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub seed: u64,
    pub realizations: usize,
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            realizations: DEFAULT_REALIZATIONS,
            workers: 1,
        }
    }
}

/// A validated configuration, still in lab units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sequence: SequenceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(rename = "loop")]
    pub loop_: LoopSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    pub run: RunSection,
}

/// One problem found in a configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} problem(s) in configuration:", self.0.len())?;
        for issue in &self.0 {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Walker {
    issues: Vec<ConfigIssue>,
}

impl Walker {
    fn issue(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, table: &Table, prefix: &str, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.issue(&join(prefix, key), "unknown key");
            }
        }
    }

    fn float(&mut self, table: &Table, prefix: &str, key: &str) -> Option<f64> {
        let path = join(prefix, key);
        match table.get(key)? {
            Value::Float(x) if x.is_finite() => Some(*x),
            Value::Float(_) => {
                self.issue(&path, "must be finite");
                None
            }
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.issue(
                    &path,
                    format!("expected a number, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn required_float(&mut self, table: &Table, prefix: &str, key: &str) -> Option<f64> {
        if !table.contains_key(key) {
            self.issue(&join(prefix, key), "missing");
            return None;
        }
        self.float(table, prefix, key)
    }

    fn uint(&mut self, table: &Table, prefix: &str, key: &str) -> Option<u64> {
        let path = join(prefix, key);
        match table.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.issue(&path, format!("must be >= 0, got {i}"));
                None
            }
            other => {
                self.issue(
                    &path,
                    format!("expected an integer, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn word<T: for<'de> Deserialize<'de>>(
        &mut self,
        table: &Table,
        prefix: &str,
        key: &str,
        allowed: &str,
    ) -> Option<T> {
        let path = join(prefix, key);
        let value = table.get(key)?;
        match value.clone().try_into::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.issue(&path, format!("expected one of {allowed}, found {value}"));
                None
            }
        }
    }

    fn section<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match root.get(key)? {
            Value::Table(t) => Some(t),
            other => {
                self.issue(key, format!("expected a table, found {}", other.type_str()));
                None
            }
        }
    }

    fn positive(&mut self, path: &str, value: Option<f64>) -> Option<f64> {
        match value {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.issue(path, format!("must be > 0, got {x}"));
                None
            }
            None => None,
        }
    }

    fn non_negative(&mut self, path: &str, value: Option<f64>) -> Option<f64> {
        match value {
            Some(x) if x >= 0.0 => Some(x),
            Some(x) => {
                self.issue(path, format!("must be >= 0, got {x}"));
                None
            }
            None => None,
        }
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Parses and validates configuration text, collecting every problem.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigErrors(vec![ConfigIssue {
            path: "<file>".into(),
            message: e.message().trim().to_string(),
        }])
    })?;
    let mut w = Walker { issues: Vec::new() };
    w.unknown_keys(&root, "", &["sequence", "shots", "loop", "noise", "run"]);

    let sequence = if root.contains_key("sequence") {
        w.word::<SequenceKind>(&root, "", "sequence", "berry-echo, dynamic-echo")
    } else {
        w.issue("sequence", "missing");
        None
    };
    let shots = match w.uint(&root, "", "shots") {
        Some(0) => {
            w.issue("shots", "must be >= 1");
            None
        }
        s => s,
    };

    let loop_ = match w.section(&root, "loop") {
        Some(t) => parse_loop(&mut w, t),
        None => {
            if !root.contains_key("loop") {
                w.issue("loop", "missing");
            }
            None
        }
    };
    let noise = w
        .section(&root, "noise")
        .and_then(|t| parse_noise(&mut w, t));
    let run = match w.section(&root, "run") {
        Some(t) => parse_run(&mut w, t),
        None => RunSection::default(),
    };

    let config = match (sequence, loop_) {
        (Some(sequence), Some(loop_)) if w.issues.is_empty() => Some(ExperimentConfig {
            sequence,
            shots,
            loop_,
            noise,
            run,
        }),
        _ => None,
    };
    if let Some(config) = &config {
        if let Err(e) = config.ensemble_config() {
            w.issue("loop", e.to_string());
        }
    }
    match config {
        Some(c) if w.issues.is_empty() => Ok(c),
        _ => Err(ConfigErrors(w.issues)),
    }
}

fn parse_loop(w: &mut Walker, t: &Table) -> Option<LoopSection> {
    let p = "loop";
    w.unknown_keys(
        t,
        p,
        &[
            "solid_angle_pi",
            "omega_mhz",
            "detuning_mhz",
            "tau_ns",
            "ramp_ns",
            "orientation",
            "noise_window",
            "dt_ns",
        ],
    );
    let solid_angle_pi = w.float(t, p, "solid_angle_pi");
    let omega_mhz = w.float(t, p, "omega_mhz");
    let mut ok = true;
    match (solid_angle_pi, omega_mhz) {
        (Some(_), Some(_)) => {
            w.issue(
                "loop.omega_mhz",
                "give either solid_angle_pi or omega_mhz, not both",
            );
            ok = false;
        }
        (None, None) if !t.contains_key("solid_angle_pi") && !t.contains_key("omega_mhz") => {
            w.issue("loop.solid_angle_pi", "missing (or give omega_mhz)");
            ok = false;
        }
        _ => {}
    }
    if let Some(a) = solid_angle_pi {
        if !(0.0..2.0).contains(&a) {
            w.issue("loop.solid_angle_pi", format!("must be in [0, 2), got {a}"));
            ok = false;
        }
    }
    let omega_mhz = w.non_negative("loop.omega_mhz", omega_mhz);
    let detuning_mhz = w.required_float(t, p, "detuning_mhz");
    if detuning_mhz == Some(0.0) {
        w.issue("loop.detuning_mhz", "must be nonzero");
        ok = false;
    }
    let tau_raw = w.required_float(t, p, "tau_ns");
    let tau_ns = w.positive("loop.tau_ns", tau_raw);
    let ramp_raw = w.float(t, p, "ramp_ns");
    let ramp_ns = match ramp_raw {
        Some(_) => w.non_negative("loop.ramp_ns", ramp_raw),
        None => Some(DEFAULT_RAMP_NS),
    };
    let dt_raw = w.float(t, p, "dt_ns");
    let dt_ns = w.positive("loop.dt_ns", dt_raw);
    if let (Some(dt), Some(tau)) = (dt_ns, tau_ns) {
        if dt > tau / 100.0 {
            w.issue(
                "loop.dt_ns",
                format!("must be <= tau_ns/100 = {}, got {dt}", tau / 100.0),
            );
            ok = false;
        }
    }
    let orientation = if t.contains_key("orientation") {
        match w.word::<Orientation>(t, p, "orientation", "forward, reverse") {
            Some(Orientation::Stationary) => {
                w.issue("loop.orientation", "expected one of forward, reverse");
                None
            }
            o => o,
        }
    } else {
        Some(Orientation::Forward)
    };
    let noise_window = if t.contains_key("noise_window") {
        w.word::<NoiseWindow>(t, p, "noise_window", "plateau, full")
    } else {
        Some(NoiseWindow::Plateau)
    };
    if !ok || (dt_raw.is_some() && dt_ns.is_none()) {
        return None;
    }
    Some(LoopSection {
        solid_angle_pi,
        omega_mhz,
        detuning_mhz: detuning_mhz?,
        tau_ns: tau_ns?,
        ramp_ns: ramp_ns?,
        orientation: orientation?,
        noise_window: noise_window?,
        dt_ns,
    })
}

fn parse_noise(w: &mut Walker, t: &Table) -> Option<NoiseSection> {
    let p = "noise";
    w.unknown_keys(t, p, &["kind", "amplitude", "bandwidth_mhz"]);
    let kind = if t.contains_key("kind") {
        w.word::<NoiseKind>(t, p, "kind", "radial, angular")
    } else {
        w.issue("noise.kind", "missing");
        None
    };
    let amplitude_raw = w.required_float(t, p, "amplitude");
    let amplitude = w.non_negative("noise.amplitude", amplitude_raw);
    let bandwidth_raw = w.required_float(t, p, "bandwidth_mhz");
    let bandwidth_mhz = w.positive("noise.bandwidth_mhz", bandwidth_raw);
    Some(NoiseSection {
        kind: kind?,
        amplitude: amplitude?,
        bandwidth_mhz: bandwidth_mhz?,
    })
}

fn parse_run(w: &mut Walker, t: &Table) -> RunSection {
    let p = "run";
    w.unknown_keys(t, p, &["seed", "realizations", "workers"]);
    let defaults = RunSection::default();
    let seed = w.uint(t, p, "seed").unwrap_or(defaults.seed);
    let realizations = match w.uint(t, p, "realizations") {
        Some(0) => {
            w.issue("run.realizations", "must be >= 1");
            defaults.realizations
        }
        Some(n) => n as usize,
        None => defaults.realizations,
    };
    let workers = match w.uint(t, p, "workers") {
        Some(0) => {
            w.issue("run.workers", "must be >= 1");
            defaults.workers
        }
        Some(n) => n as usize,
        None => defaults.workers,
    };
    RunSection {
        seed,
        realizations,
        workers,
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(parse_config(&text)?)
}

/// Configuration values converted to simulation units (rad/ns, ns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedConfig {
    pub sequence: SequenceKind,
    pub omega_rad_per_ns: f64,
    pub detuning_rad_per_ns: f64,
    pub theta: f64,
    pub solid_angle: f64,
    pub b_rad_per_ns: f64,
    pub tau_ns: f64,
    pub ramp_ns: f64,
    pub dt_ns: f64,
    pub total_steps: usize,
    pub orientation: Orientation,
    pub noise_window: NoiseWindow,
    pub noise_kind: Option<NoiseKind>,
    pub noise_amplitude: Option<f64>,
    pub noise_power: Option<f64>,
    pub noise_rate_per_ns: Option<f64>,
    pub shots: Option<u64>,
    pub seed: u64,
    pub realizations: usize,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn omega(&self) -> berry_core::Result<f64> {
        let delta = mhz_to_rad_per_ns(self.loop_.detuning_mhz);
        match (self.loop_.solid_angle_pi, self.loop_.omega_mhz) {
            (Some(a), _) => omega_for_solid_angle(a * std::f64::consts::PI, delta),
            (None, Some(w)) => Ok(mhz_to_rad_per_ns(w)),
            (None, None) => Ok(0.0),
        }
    }

    pub fn noise_rate(&self) -> Option<f64> {
        self.noise.map(|n| mhz_to_rad_per_ns(n.bandwidth_mhz))
    }

    pub fn loop_spec(&self) -> berry_core::Result<LoopSpec<f64>> {
        let delta = mhz_to_rad_per_ns(self.loop_.detuning_mhz);
        let spec = LoopSpec::new(self.omega()?, delta, self.loop_.tau_ns)
            .with_ramp_time(self.loop_.ramp_ns)
            .with_orientation(self.loop_.orientation)
            .with_noise_window(self.loop_.noise_window);
        let dt = self
            .loop_
            .dt_ns
            .unwrap_or_else(|| default_dt(spec.tau, spec.b_max(), self.noise_rate()));
        Ok(spec.with_dt(dt))
    }

    pub fn sequence_config(&self) -> berry_core::Result<SequenceConfig<f64>> {
        let spec = self.loop_spec()?;
        let mut seq = match self.sequence {
            SequenceKind::BerryEcho => SequenceConfig::berry(spec),
            SequenceKind::DynamicEcho => SequenceConfig::dynamic(spec),
        };
        if let Some(n) = self.noise {
            seq = seq.with_noise(NoiseSpec::new(
                n.kind,
                n.amplitude,
                mhz_to_rad_per_ns(n.bandwidth_mhz),
            ));
        }
        seq.shots = self.shots;
        seq.validate()?;
        Ok(seq)
    }

    pub fn ensemble_config(&self) -> berry_core::Result<EnsembleConfig<f64>> {
        Ok(EnsembleConfig::new(
            self.sequence_config()?,
            self.run.realizations,
            self.run.seed,
        )
        .with_workers(self.run.workers))
    }

    pub fn normalized(&self) -> berry_core::Result<NormalizedConfig> {
        let seq = self.sequence_config()?;
        let spec = seq.loop_spec;
        let params = seq.noise_params(0)?;
        Ok(NormalizedConfig {
            sequence: self.sequence,
            omega_rad_per_ns: spec.omega,
            detuning_rad_per_ns: spec.delta,
            theta: spec.theta()?,
            solid_angle: spec.solid_angle()?,
            b_rad_per_ns: spec.b_max(),
            tau_ns: spec.tau,
            ramp_ns: spec.ramp_time,
            dt_ns: spec.dt,
            total_steps: spec.total_steps(),
            orientation: spec.orientation,
            noise_window: spec.noise_window,
            noise_kind: self.noise.map(|n| n.kind),
            noise_amplitude: self.noise.map(|n| n.amplitude),
            noise_power: params.map(|p| p.power),
            noise_rate_per_ns: params.map(|p| p.rate),
            shots: self.shots,
            seed: self.run.seed,
            realizations: self.run.realizations,
            workers: self.run.workers,
        })
    }
}
