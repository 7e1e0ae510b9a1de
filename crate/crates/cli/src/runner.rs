use std::fs;
use std::path::{Path, PathBuf};

use granular::analysis::{check_moment_bound, fit_convergence, fit_cooling};
use granular::dsmc::run_physical;
use granular::io;
use granular::num::{to_f64, Real};
use granular::rescaled::{residual_noise_floor, run_rescaled, RescaledParams};
use granular::scaling::{build_scaling_map, verify_energy_coupling};
use granular::{l1_distance, HaltReason, MomentSeries, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Mode, Precision, RunConfig};

const DEFAULT_OUT_DIR: &str = "granular-out";
const BOOTSTRAP_RESAMPLES: usize = 200;
const PERMUTATION_RESAMPLES: usize = 50;
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Serialize)]
pub struct Versions {
    #[serde(rename = "granular-core")]
    pub core: &'static str,
    #[serde(rename = "granular-cli")]
    pub cli: &'static str,
}

/// Contents of `summary.json`.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub config: RunConfig,
    pub config_hash: String,
    pub versions: Versions,
    pub halt_reason: Option<HaltReason>,
    pub results: Value,
    pub artifacts: Vec<String>,
}

struct Output {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn series<T: Real>(&mut self, name: &str, s: &MomentSeries<T>) -> Result<()> {
        let path = self.path(name);
        io::write_series(s, io::create(&path)?, Some(&self.hash))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| granular::Error::Input(e.to_string()))?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

pub fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Runs the configured experiment and writes its artifacts and `summary.json`.
pub fn execute(cfg: &RunConfig) -> Result<Summary> {
    match cfg.precision {
        Precision::F64 => execute_as::<f64>(cfg),
        Precision::F32 => execute_as::<f32>(cfg),
    }
}

fn execute_as<T: Real>(cfg: &RunConfig) -> Result<Summary> {
    let dir = out_dir(cfg);
    fs::create_dir_all(&dir)?;
    let mut out = Output { dir, hash: cfg.hash(), written: Vec::new() };
    let (halt_reason, results) = match cfg.mode() {
        Mode::Physical => physical::<T>(cfg, &mut out)?,
        Mode::Rescaled => rescaled::<T>(cfg, &mut out)?,
        Mode::Coupled => coupled::<T>(cfg, &mut out)?,
        Mode::Fit => fit::<T>(cfg, &mut out)?,
        Mode::Convergence => convergence::<T>(cfg, &mut out)?,
    };
    out.written.push("summary.json".into());
    let summary = Summary {
        mode: cfg.mode(),
        config: cfg.clone(),
        config_hash: out.hash.clone(),
        versions: Versions { core: granular::VERSION, cli: env!("CARGO_PKG_VERSION") },
        halt_reason,
        results,
        artifacts: out.written.clone(),
    };
    out.written.pop();
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn kernel<T: Real>(cfg: &RunConfig) -> Result<granular::KernelConfig<T>> {
    cfg.kernel::<T>().map_err(|e| granular::Error::Input(e.0))
}

type ModeResult = Result<(Option<HaltReason>, Value)>;

fn physical<T: Real>(cfg: &RunConfig, out: &mut Output) -> ModeResult {
    let run = run_physical(&kernel::<T>(cfg)?, cfg.n, cfg.seed, &cfg.physical_params())?;
    out.series("series.csv", &run.series)?;
    let last = run.series.last().expect("runs record their initial state");
    let results = json!({
        "t_end": to_f64(last.t),
        "energy_end": to_f64(last.energy),
        "n_records": run.series.len(),
        "n_steps": run.state.n_steps(),
        "n_collisions": run.state.n_collisions(),
        "n_majorant_breaches": run.state.n_breaches(),
    });
    Ok((Some(run.halt), results))
}

fn rescaled<T: Real>(cfg: &RunConfig, out: &mut Output) -> ModeResult {
    let params = cfg.rescaled_params();
    let run = run_rescaled(&kernel::<T>(cfg)?, cfg.n, cfg.seed, &params)?;
    out.series("series.csv", &run.series)?;
    let path = out.path("profile.csv");
    io::write_profile(&run.profile, io::create(&path)?, Some(&out.hash))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ NOISE_STREAM);
    let noise = residual_noise_floor(&run.series, run.window, PERMUTATION_RESAMPLES, &mut rng)?;
    let results = json!({
        "c0_hat": to_f64(run.c0_hat),
        "c1_hat": to_f64(run.c1_hat),
        "band_ratio": to_f64(run.c1_hat / run.c0_hat),
        "stationarity_residual": to_f64(run.stationarity_residual),
        "residual_noise_floor": to_f64(noise),
        "converged": run.converged(),
        "window": [to_f64(run.window.0), to_f64(run.window.1)],
        "profile_mean_speed": run.profile.mean_speed(),
        "profile_overflow": run.profile.overflow(),
    });
    Ok((None, results))
}

fn coupled<T: Real>(cfg: &RunConfig, out: &mut Output) -> ModeResult {
    let kernel = kernel::<T>(cfg)?;
    let phys = run_physical(&kernel, cfg.n, cfg.seed, &cfg.physical_params())?;
    let map = build_scaling_map(&phys.series, cfg.tau(), cfg.a)?;
    let t_end = *map.s.last().expect("non-empty map");
    let s_max = (1.01 * t_end).max(1.0);
    let params = RescaledParams { s_max, avg_window: 0.5 * s_max, ..cfg.rescaled_params() };
    let resc = run_rescaled(&kernel, cfg.n, cfg.seed, &params)?;
    let err = verify_energy_coupling(&phys.series, &resc.series, &map)?;

    out.series("physical_series.csv", &phys.series)?;
    out.series("rescaled_series.csv", &resc.series)?;
    let path = out.path("scaling.csv");
    io::write_scaling(&map, io::create(&path)?, Some(&out.hash))?;
    let path = out.path("profile.csv");
    io::write_profile(&resc.profile, io::create(&path)?, Some(&out.hash))?;
    let results = json!({
        "coupling_error": err,
        "t_end": map.t.last(),
        "v_end": map.v.last(),
        "rescaled_time_end": t_end,
        "rescaled_s_max": s_max,
        "c0_hat": to_f64(resc.c0_hat),
        "c1_hat": to_f64(resc.c1_hat),
    });
    Ok((Some(phys.halt), results))
}

fn fit<T: Real>(cfg: &RunConfig, out: &mut Output) -> ModeResult {
    let (series, halt) = match &cfg.input {
        Some(path) => (io::read_series::<T, _>(io::open(path)?)?, None),
        None => {
            let run = run_physical(&kernel::<T>(cfg)?, cfg.n, cfg.seed, &cfg.physical_params())?;
            out.series("series.csv", &run.series)?;
            (run.series, Some(run.halt))
        }
    };
    let cooling = fit_cooling(&series, cfg.a, cfg.transient_fraction)?;
    let has_m32 = series.records().iter().all(|r| r.m_three_half.is_some());
    let moment_bound = if cfg.a == 0.0 && has_m32 { Some(check_moment_bound(&series)?) } else { None };
    out.json("fit.json", &json!({ "config_hash": out.hash, "cooling": cooling, "moment_bound": moment_bound }))?;
    let results = json!({
        "regime": cooling.regime,
        "slope": cooling.slope,
        "r2": cooling.r2,
        "reliable": cooling.reliable,
        "exponent_hat": cooling.exponent_hat,
        "tc_hat": cooling.tc_hat,
        "kappa_hat": moment_bound.as_ref().map(|m| m.kappa_hat),
    });
    Ok((halt, results))
}

fn convergence<T: Real>(cfg: &RunConfig, out: &mut Output) -> ModeResult {
    let run = run_rescaled(&kernel::<T>(cfg)?, cfg.n, cfg.seed, &cfg.rescaled_params())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ NOISE_STREAM);
    let noise = run.profile.bootstrap_noise_floor(cfg.n as u64, BOOTSTRAP_RESAMPLES, &mut rng);
    let l1 = run
        .history
        .iter()
        .map(|(s, h)| Ok((to_f64(*s), l1_distance(h, &run.profile)?)))
        .collect::<Result<Vec<_>>>()?;
    let conv = fit_convergence(&l1, noise, cfg.tau())?;

    out.series("series.csv", &run.series)?;
    let path = out.path("profile.csv");
    io::write_profile(&run.profile, io::create(&path)?, Some(&out.hash))?;
    let path = out.path("l1.csv");
    io::write_l1(&l1, io::create(&path)?, Some(&out.hash))?;
    out.json("fit.json", &json!({ "config_hash": out.hash, "convergence": conv }))?;
    let results = json!({
        "rate_hat": conv.rate_hat,
        "mu_e_check": conv.mu_e_check,
        "noise_floor": conv.noise_floor,
        "r2": conv.r2,
        "n_used": conv.n_used,
        "reliable": conv.reliable,
    });
    Ok((None, results))
}

/// Artifact paths of a finished run, for the console report.
pub fn artifact_paths(cfg: &RunConfig, summary: &Summary) -> Vec<PathBuf> {
    let dir = out_dir(cfg);
    summary.artifacts.iter().map(|a| Path::new(&dir).join(a)).collect()
}
