use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use granular::ensemble::InitialDistribution;
use granular::kernel::{AngularWeight, KernelConfig};
use granular::num::{lit, Real};
use granular::rescaled::{default_v_max, RescaledParams};
use granular::{DsmcParams, PhysicalParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Physical,
    Rescaled,
    Coupled,
    Fit,
    Convergence,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Physical => "physical",
            Mode::Rescaled => "rescaled",
            Mode::Coupled => "coupled",
            Mode::Fit => "fit",
            Mode::Convergence => "convergence",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum B1 {
    Isotropic,
    LinearAnisotropy { coefficient: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    F32,
    F64,
}

/// Every knob of a run. Optional fields are filled in by [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub e: Option<f64>,
    pub a: f64,
    pub tau: Option<f64>,
    pub b1: B1,
    pub init: InitialDistribution,
    pub precision: Precision,
    pub elastic_diagnostics: bool,
    pub c_target: f64,
    pub epsilon_stop: f64,
    pub t_max: f64,
    pub s_max: f64,
    pub avg_window: Option<f64>,
    pub records: usize,
    pub record_every: usize,
    pub bins: usize,
    pub v_max: Option<f64>,
    pub transient_fraction: f64,
    /// Series CSV analysed by the fit mode instead of a fresh run.
    pub input: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PhysicalParams::default();
        let r = RescaledParams::default();
        Self {
            mode: None,
            d: 3,
            n: 20_000,
            seed: 1,
            e: None,
            a: 0.0,
            tau: None,
            b1: B1::Isotropic,
            init: InitialDistribution::Maxwellian,
            precision: Precision::F64,
            elastic_diagnostics: false,
            c_target: p.dsmc.c_target,
            epsilon_stop: p.epsilon_stop,
            t_max: p.t_max,
            s_max: r.s_max,
            avg_window: None,
            records: r.records,
            record_every: p.record_every,
            bins: r.bins,
            v_max: None,
            transient_fraction: 0.2,
            input: None,
            out_dir: None,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file, or a summary.json emitted by an earlier run
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, env = "GRANULAR_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Velocity dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of particles
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restitution coefficient
    #[arg(long)]
    pub e: Option<f64>,
    /// Anomaly exponent of the collision rate E^{-a}
    #[arg(long)]
    pub a: Option<f64>,
    /// Drift strength of the rescaled equation (default 1 - e)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Linear angular anisotropy coefficient (isotropic when absent)
    #[arg(long)]
    pub anisotropy: Option<f64>,
    /// Initial law: maxwellian, uniform-ball or two-temperature:RATIO
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitialDistribution>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    /// Allow e = 1 for conservation diagnostics
    #[arg(long)]
    pub elastic_diagnostics: bool,
    /// Target collisions per particle per step
    #[arg(long)]
    pub c_target: Option<f64>,
    /// Energy at which a collapsing run counts as resolved
    #[arg(long)]
    pub epsilon_stop: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Trailing averaging window of rescaled runs (default s_max / 2)
    #[arg(long)]
    pub avg_window: Option<f64>,
    /// Records over a rescaled run
    #[arg(long)]
    pub records: Option<usize>,
    /// Steps between moment records of physical runs
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Speed histogram bins
    #[arg(long)]
    pub bins: Option<usize>,
    /// Speed histogram range
    #[arg(long)]
    pub v_max: Option<f64>,
    /// Fraction of records excluded as transient by the cooling fit
    #[arg(long)]
    pub transient_fraction: Option<f64>,
    /// Existing series CSV to fit (fit mode)
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn parse_init(s: &str) -> Result<InitialDistribution, String> {
    match s.split_once(':') {
        None if s == "maxwellian" => Ok(InitialDistribution::Maxwellian),
        None if s == "uniform-ball" => Ok(InitialDistribution::UniformBall),
        Some(("two-temperature", r)) => r
            .parse()
            .map(|ratio| InitialDistribution::TwoTemperature { ratio })
            .map_err(|_| format!("invalid temperature ratio {r:?}")),
        _ => Err(format!("unknown initial distribution {s:?}")),
    }
}

/// A usage error: bad flags, bad config file or out-of-range parameters.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Reads a config file. A summary emitted by an earlier run is accepted and
/// its `config` object used.
pub fn load(path: &Path) -> Result<RunConfig, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    let value = match value {
        serde_json::Value::Object(mut m) if m.contains_key("config_hash") => m.remove("config").unwrap_or_default(),
        v => v,
    };
    serde_json::from_value(value).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

macro_rules! apply {
    ($cfg:ident, $o:ident; $($field:ident),*) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$field = v; })*
    };
}

impl RunConfig {
    /// Defaults, then the config file, then the flags.
    pub fn from_sources(mode: Option<Mode>, o: &Overrides) -> Result<Self, UsageError> {
        let mut cfg = match &o.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        if mode.is_some() {
            cfg.mode = mode;
        }
        apply!(cfg, o; d, n, seed, a, c_target, epsilon_stop, t_max, s_max, records, record_every, bins, transient_fraction, init, precision);
        if o.e.is_some() {
            cfg.e = o.e;
        }
        if o.tau.is_some() {
            cfg.tau = o.tau;
        }
        if o.avg_window.is_some() {
            cfg.avg_window = o.avg_window;
        }
        if o.v_max.is_some() {
            cfg.v_max = o.v_max;
        }
        if o.input.is_some() {
            cfg.input = o.input.clone();
        }
        if o.out_dir.is_some() {
            cfg.out_dir = o.out_dir.clone();
        }
        if let Some(c) = o.anisotropy {
            cfg.b1 = B1::LinearAnisotropy { coefficient: c };
        }
        cfg.elastic_diagnostics |= o.elastic_diagnostics;
        cfg.resolve()
    }

    /// Fills every default and validates the ranges.
    pub fn resolve(mut self) -> Result<Self, UsageError> {
        let Some(mode) = self.mode else {
            return usage("no mode given");
        };
        let Some(e) = self.e else {
            return usage("the restitution coefficient e is required");
        };
        self.tau = Some(self.tau.unwrap_or(1.0 - e));
        self.avg_window = Some(self.avg_window.unwrap_or(0.5 * self.s_max));
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return usage(format!("a must be a non-negative number, got {}", self.a));
        }
        if self.n < 2 {
            return usage(format!("need at least two particles, got {}", self.n));
        }
        if !(self.epsilon_stop > 0.0 && self.epsilon_stop < 1.0) {
            return usage(format!("epsilon_stop must lie in (0, 1), got {}", self.epsilon_stop));
        }
        if !(self.t_max > 0.0) {
            return usage(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.record_every == 0 || self.bins == 0 {
            return usage("record_every and bins must be at least 1");
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return usage(format!("transient_fraction must lie in [0, 1), got {}", self.transient_fraction));
        }
        if let Some(v) = self.v_max {
            if !(v > 0.0 && v.is_finite()) {
                return usage(format!("v_max must be positive, got {v}"));
            }
        }
        let kernel = self.kernel::<f64>()?;
        if self.v_max.is_none() && matches!(mode, Mode::Rescaled | Mode::Coupled | Mode::Convergence) {
            self.v_max = Some(default_v_max(&kernel));
        }
        self.physical_params().dsmc.validate().map_err(|e| UsageError(e.to_string()))?;
        if matches!(mode, Mode::Rescaled | Mode::Coupled | Mode::Convergence) {
            self.rescaled_params().validate().map_err(|e| UsageError(e.to_string()))?;
        }
        if mode == Mode::Coupled && !(self.tau.unwrap() > 0.0) {
            return usage("the coupled mode needs tau > 0");
        }
        if let Some(path) = &self.input {
            if mode != Mode::Fit {
                return usage("input is only used by the fit mode");
            }
            if !path.is_file() {
                return usage(format!("input file {} does not exist", path.display()));
            }
        }
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        self.mode.expect("resolved config")
    }

    pub fn tau(&self) -> f64 {
        self.tau.expect("resolved config")
    }

    pub fn kernel<T: Real>(&self) -> Result<KernelConfig<T>, UsageError> {
        let e = self.e.unwrap_or(f64::NAN);
        let bad = |err: granular::Error| UsageError(err.to_string());
        let base = if self.elastic_diagnostics && e == 1.0 {
            KernelConfig::elastic(self.d, lit(self.a))
        } else {
            KernelConfig::new(self.d, lit(e), lit(self.a))
        }
        .map_err(bad)?;
        let b1 = match self.b1 {
            B1::Isotropic => AngularWeight::isotropic(self.d),
            B1::LinearAnisotropy { coefficient } => AngularWeight::linear(self.d, coefficient),
        }
        .map_err(bad)?;
        let tau = self.tau.unwrap_or(1.0 - e);
        if !(tau >= 0.0 && tau.is_finite()) {
            return usage(format!("tau must be a non-negative number, got {tau}"));
        }
        base.with_tau(lit(tau)).and_then(|k| k.with_angular_weight(b1)).map_err(bad)
    }

    fn dsmc(&self) -> DsmcParams {
        DsmcParams { c_target: self.c_target, ..Default::default() }
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams {
            dsmc: self.dsmc(),
            epsilon_stop: self.epsilon_stop,
            t_max: self.t_max,
            record_every: self.record_every,
            init: self.init,
        }
    }

    pub fn rescaled_params(&self) -> RescaledParams {
        RescaledParams {
            dsmc: self.dsmc(),
            s_max: self.s_max,
            avg_window: self.avg_window.unwrap_or(0.5 * self.s_max),
            records: self.records,
            bins: self.bins,
            v_max: self.v_max,
            init: self.init,
            ..Default::default()
        }
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}
