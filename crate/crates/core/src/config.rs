//! Flat key/value experiment configuration.
//!
//! Layers: built-in defaults, then a TOML file of top-level `key = value`
//! pairs, then command-line overrides. Every layer goes through [`set_key`],
//! so unknown keys and ill-typed values are rejected the same way.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::model::CdnId;
use crate::planner::PlanningConfig;
use crate::traces::Period;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruningMode {
    On,
    Off,
    IOnly,
    IiOnly,
}

impl PruningMode {
    pub fn apply(self, planning: &mut PlanningConfig) {
        let (i, ii) = match self {
            PruningMode::On => (true, true),
            PruningMode::Off => (false, false),
            PruningMode::IOnly => (true, false),
            PruningMode::IiOnly => (false, true),
        };
        planning.pruning_i = i;
        planning.pruning_ii = ii;
    }
}

impl FromStr for PruningMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(PruningMode::On),
            "off" => Ok(PruningMode::Off),
            "i-only" => Ok(PruningMode::IOnly),
            "ii-only" => Ok(PruningMode::IiOnly),
            _ => Err(Error::InvalidInput(format!("pruning mode `{s}` (expected on, off, i-only or ii-only)"))),
        }
    }
}

impl fmt::Display for PruningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruningMode::On => "on",
            PruningMode::Off => "off",
            PruningMode::IOnly => "i-only",
            PruningMode::IiOnly => "ii-only",
        })
    }
}

/// Every key accepted by [`set_key`].
pub const KEYS: &[&str] = &[
    "seed",
    "replications",
    "periods",
    "strategies",
    "cost_per_mb",
    "traces_path",
    "workload_path",
    "mu1",
    "mu2",
    "tau_st_s",
    "gamma",
    "player_cap_s",
    "viewing_low_s",
    "viewing_target_s",
    "preload_count",
    "preload_s",
    "startup_charge",
    "pool_idle_timeout_s",
    "probe_range_s",
    "probe_charged",
    "probe_buffered",
    "max_decisions",
    "horizon",
    "candidate_ranges_s",
    "pruning",
    "ratio_steps",
    "window_w",
    "degradation_alpha",
    "switch_setup_rtt_mult",
    "avg_rtt_s",
    "probe_interval_s",
    "priors_mbps",
    "probing",
    "switch_model",
    "production_margin",
    "production_recovery_buffer_s",
    "production_emergency_cdn",
    "trace_means_mbps",
    "off_peak_multipliers",
    "peak_multipliers",
    "evening_peak_multipliers",
    "trace_ar",
    "trace_sigma",
    "sigma_multipliers",
    "trace_length_s",
    "video_count",
    "short_fraction",
    "short_range_s",
    "long_range_s",
    "bitrates_mbps",
    "watch_median_s",
    "watch_sigma",
    "max_plays",
    "cache_coverage",
    "chunk_duration_s",
];

fn typed<T: DeserializeOwned>(key: &str, v: &Value) -> Result<T> {
    T::deserialize(v.clone()).map_err(|e| Error::Config { key: key.into(), msg: e.message().to_string() })
}

fn parsed<T: FromStr<Err = Error>>(key: &str, v: &Value) -> Result<T> {
    let s: String = typed(key, v)?;
    s.parse().map_err(|e: Error| Error::Config { key: key.into(), msg: e.to_string() })
}

/// Sets one configuration key.
pub fn set_key(cfg: &mut ExperimentConfig, key: &str, v: &Value) -> Result<()> {
    let k = key;
    let sess = &mut cfg.sim.session;
    let plan = &mut cfg.pira.planning;
    match key {
        "seed" => cfg.seed = typed(k, v)?,
        "replications" => cfg.replications = typed(k, v)?,
        "periods" => cfg.periods = typed::<Vec<Period>>(k, v)?,
        "strategies" => cfg.strategies = typed(k, v)?,
        "cost_per_mb" => cfg.cost_per_mb = typed(k, v)?,
        "traces_path" => cfg.traces_path = Some(typed(k, v)?),
        "workload_path" => cfg.workload_path = Some(typed(k, v)?),
        "mu1" => sess.params.mu1 = typed(k, v)?,
        "mu2" => sess.params.mu2 = typed(k, v)?,
        "tau_st_s" => sess.params.tau_st_s = typed(k, v)?,
        "gamma" => sess.params.gamma = typed(k, v)?,
        "player_cap_s" => sess.player_cap_s = typed(k, v)?,
        "viewing_low_s" => sess.preload.viewing_low_s = typed(k, v)?,
        "viewing_target_s" => sess.preload.viewing_target_s = typed(k, v)?,
        "preload_count" => sess.preload.preload_count = typed(k, v)?,
        "preload_s" => sess.preload.preload_s = typed(k, v)?,
        "startup_charge" => sess.startup_charge = typed(k, v)?,
        "pool_idle_timeout_s" => sess.pool_idle_timeout_s = typed(k, v)?,
        "probe_range_s" => cfg.sim.probe_range_s = typed(k, v)?,
        "probe_charged" => cfg.sim.probe_charged = typed(k, v)?,
        "probe_buffered" => cfg.sim.probe_buffered = typed(k, v)?,
        "max_decisions" => cfg.sim.max_decisions = typed(k, v)?,
        "horizon" => plan.horizon_n = typed(k, v)?,
        "candidate_ranges_s" => plan.candidate_ranges_s = typed(k, v)?,
        "pruning" => parsed::<PruningMode>(k, v)?.apply(plan),
        "ratio_steps" => plan.ratio_steps = typed(k, v)?,
        "window_w" | "degradation_alpha" | "switch_setup_rtt_mult" | "avg_rtt_s" | "probe_interval_s" => {
            // one predictor setting shared by PIRA and the production baseline
            for p in [&mut cfg.pira.predictor, &mut cfg.production.predictor] {
                match key {
                    "window_w" => p.window_w = typed(k, v)?,
                    "degradation_alpha" => p.degradation_alpha = typed(k, v)?,
                    "switch_setup_rtt_mult" => p.switch_setup_rtt_mult = typed(k, v)?,
                    "avg_rtt_s" => p.avg_rtt_s = typed(k, v)?,
                    _ => p.probe_interval_s = typed(k, v)?,
                }
            }
        }
        "priors_mbps" => {
            let priors: Vec<f64> = typed(k, v)?;
            cfg.pira.priors_mbps = priors.clone();
            cfg.production.priors_mbps = priors;
        }
        "probing" => cfg.pira.probing = typed(k, v)?,
        "switch_model" => cfg.pira.switch_model = typed(k, v)?,
        "production_margin" => cfg.production.margin = typed(k, v)?,
        "production_recovery_buffer_s" => cfg.production.recovery_buffer_s = typed(k, v)?,
        "production_emergency_cdn" => cfg.production.emergency_cdn = CdnId(typed(k, v)?),
        "trace_means_mbps" => cfg.synth.means_mbps = typed(k, v)?,
        "off_peak_multipliers" => cfg.synth.off_peak_multipliers = typed(k, v)?,
        "peak_multipliers" => cfg.synth.peak_multipliers = typed(k, v)?,
        "evening_peak_multipliers" => cfg.synth.evening_peak_multipliers = typed(k, v)?,
        "trace_ar" => cfg.synth.ar = typed(k, v)?,
        "trace_sigma" => cfg.synth.sigma = typed(k, v)?,
        "sigma_multipliers" => cfg.synth.sigma_multipliers = typed(k, v)?,
        "trace_length_s" => cfg.synth.length_s = typed(k, v)?,
        "video_count" => cfg.workload.video_count = typed(k, v)?,
        "short_fraction" => cfg.workload.short_fraction = typed(k, v)?,
        "short_range_s" => cfg.workload.short_range_s = typed(k, v)?,
        "long_range_s" => cfg.workload.long_range_s = typed(k, v)?,
        "bitrates_mbps" => cfg.workload.bitrates_mbps = typed(k, v)?,
        "watch_median_s" => cfg.workload.watch_median_s = typed(k, v)?,
        "watch_sigma" => cfg.workload.watch_sigma = typed(k, v)?,
        "max_plays" => cfg.workload.max_plays = typed(k, v)?,
        "cache_coverage" => cfg.workload.cache_coverage = typed(k, v)?,
        "chunk_duration_s" => cfg.workload.chunk_duration_s = typed(k, v)?,
        _ => return Err(Error::Config { key: key.into(), msg: "unknown key".into() }),
    }
    Ok(())
}

/// Applies every top-level pair of a TOML document, in key order.
pub fn apply_toml(cfg: &mut ExperimentConfig, text: &str, origin: &str) -> Result<()> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|sp| text[..sp.start].lines().count().max(1)).unwrap_or(0);
        Error::Parse { path: origin.into(), line, msg: e.message().to_string() }
    })?;
    for (key, v) in &table {
        set_key(cfg, key, v)?;
    }
    Ok(())
}

/// Parses a command-line override value: TOML syntax if it parses as a
/// value, otherwise a bare string.
pub fn override_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Defaults, then the file (if any), then `overrides`; validated.
pub fn load_config(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        apply_toml(&mut cfg, &text, &p.display().to_string())?;
    }
    for (k, v) in overrides {
        set_key(&mut cfg, k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
