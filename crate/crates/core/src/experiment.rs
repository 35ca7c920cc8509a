//! Replicated experiment suites: episode fan-out, aggregation with Student-t
//! confidence intervals, comparison and sweep reports.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{Oracle, Production, ProductionConfig, PureCdn};
use crate::controller::{PiraConfig, PiraController};
use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::model::{CdnCatalog, CdnId, MediaList};
use crate::sim::{replay_check, run_episode, EpisodeResult, SimConfig, Strategy};
use crate::traces::{synthesize_traces, Period, SynthConfig, TraceFile};
use crate::workload::{generate_workload, WorkloadConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Pira,
    Production,
    Oracle,
    Pure(CdnId),
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Pira => f.write_str("pira"),
            StrategyKind::Production => f.write_str("production"),
            StrategyKind::Oracle => f.write_str("oracle"),
            StrategyKind::Pure(c) => write!(f, "cdn{c}"),
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pira" => Ok(StrategyKind::Pira),
            "production" => Ok(StrategyKind::Production),
            "oracle" => Ok(StrategyKind::Oracle),
            _ => s
                .strip_prefix("cdn")
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|&n| n >= 1)
                .map(|n| StrategyKind::Pure(CdnId(n)))
                .ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "unknown strategy `{s}` (expected pira, production, oracle or cdnN)"
                    ))
                }),
        }
    }
}

impl Serialize for StrategyKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StrategyKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fully resolved experiment configuration. Embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replications: usize,
    pub periods: Vec<Period>,
    pub strategies: Vec<StrategyKind>,
    /// Traffic cost per megabit, one entry per pan-CDN.
    pub cost_per_mb: Vec<f64>,
    pub synth: SynthConfig,
    pub workload: WorkloadConfig,
    pub sim: SimConfig,
    pub pira: PiraConfig,
    pub production: ProductionConfig,
    /// Fixed trace file instead of synthetic traces.
    pub traces_path: Option<String>,
    /// Fixed workload file instead of generated ones.
    pub workload_path: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            replications: 50,
            periods: Period::ALL.to_vec(),
            strategies: vec![
                StrategyKind::Pira,
                StrategyKind::Production,
                StrategyKind::Oracle,
                StrategyKind::Pure(CdnId(1)),
                StrategyKind::Pure(CdnId(2)),
                StrategyKind::Pure(CdnId(3)),
                StrategyKind::Pure(CdnId(4)),
            ],
            cost_per_mb: vec![0.01, 0.007, 0.005, 0.0035],
            synth: SynthConfig::default(),
            workload: WorkloadConfig::default(),
            sim: SimConfig::default(),
            pira: PiraConfig::default(),
            production: ProductionConfig::default(),
            traces_path: None,
            workload_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.periods.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidInput("need at least one period and one strategy".into()));
        }
        self.catalog()?;
        self.synth.validate()?;
        self.workload.validate()?;
        self.sim.session.validate()?;
        self.pira.planning.validate()?;
        self.pira.predictor.validate()?;
        self.production.predictor.validate()?;
        for s in &self.strategies {
            if let StrategyKind::Pure(c) = s {
                if c.index() >= self.cost_per_mb.len() {
                    return Err(Error::InvalidInput(format!("strategy {s}: no such pan-CDN")));
                }
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<CdnCatalog> {
        CdnCatalog::from_costs(&self.cost_per_mb)
    }

    /// Seed of replication `rep`.
    pub fn episode_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

/// Inputs of one episode, shared by every strategy that runs it.
#[derive(Clone, Debug)]
pub struct EpisodeInputs {
    pub period: Period,
    pub seed: u64,
    pub media: MediaList,
    pub link: LinkModel,
}

pub fn episode_inputs(cfg: &ExperimentConfig, period: Period, rep: usize) -> Result<EpisodeInputs> {
    let seed = cfg.episode_seed(rep);
    let traces: Arc<TraceFile> = match &cfg.traces_path {
        Some(p) => Arc::new(crate::traces::parse_trace(p.as_ref())?),
        None => Arc::new(synthesize_traces(&SynthConfig { seed, period, ..cfg.synth.clone() })?),
    };
    let media = match &cfg.workload_path {
        Some(p) => crate::workload::parse_workload(p.as_ref(), cfg.workload.chunk_duration_s)?,
        None => generate_workload(&WorkloadConfig { seed, ..cfg.workload.clone() })?,
    };
    let p = &cfg.pira.predictor;
    let link = LinkModel::new(traces, p.setup_s(), p.degradation_alpha)?;
    Ok(EpisodeInputs { period, seed, media, link })
}

pub fn make_strategy(cfg: &ExperimentConfig, kind: StrategyKind, link: &LinkModel) -> Result<Box<dyn Strategy>> {
    Ok(match kind {
        StrategyKind::Pira => Box::new(PiraController::new(cfg.pira.clone())?),
        StrategyKind::Production => Box::new(Production::new(cfg.production.clone())?),
        StrategyKind::Oracle => Box::new(Oracle::new(link.clone(), cfg.pira.planning.clone())?),
        StrategyKind::Pure(c) => Box::new(PureCdn { cdn: c }),
    })
}

/// Per-episode row of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub strategy: StrategyKind,
    pub period: Period,
    pub seed: u64,
    pub rebuffer_ratio: f64,
    pub rebuffer_s: f64,
    pub rebuffer_events: u32,
    pub mean_startup_s: f64,
    pub cost: f64,
    pub megabits: f64,
    pub megabits_share: Vec<f64>,
    pub qoe: f64,
    pub utility: f64,
    pub decisions: usize,
    pub probes: usize,
    pub scored_sequences: u64,
    pub fallbacks: u64,
    pub replay_ok: bool,
}

/// Outcome of one episode with the nondeterministic timings kept apart.
#[derive(Clone, Debug)]
pub struct EpisodeRun {
    pub summary: EpisodeSummary,
    pub result: EpisodeResult,
    pub wall_s: f64,
}

pub fn run_one(cfg: &ExperimentConfig, kind: StrategyKind, inputs: &EpisodeInputs) -> Result<EpisodeRun> {
    let catalog = cfg.catalog()?;
    let mut strategy = make_strategy(cfg, kind, &inputs.link)?;
    let t0 = Instant::now();
    let result = run_episode(&inputs.media, &catalog, &inputs.link, &cfg.sim, strategy.as_mut())?;
    let wall_s = t0.elapsed().as_secs_f64();
    let replay_ok = replay_check(&result, &inputs.media, &catalog, &cfg.sim)?;
    let m = &result.metrics;
    let total_mb = m.total_megabits();
    let megabits_share = catalog
        .ids()
        .map(|c| {
            let mb = m.megabits_by_cdn.get(&c).copied().unwrap_or(0.0);
            if total_mb > 0.0 { mb / total_mb } else { 0.0 }
        })
        .collect();
    let summary = EpisodeSummary {
        strategy: kind,
        period: inputs.period,
        seed: inputs.seed,
        rebuffer_ratio: m.rebuffer_ratio(),
        rebuffer_s: m.total_rebuffer_s.iter().sum(),
        rebuffer_events: m.rebuffer_count.iter().sum(),
        mean_startup_s: m.mean_startup_delay_s(),
        cost: m.total_cost,
        megabits: total_mb,
        megabits_share,
        qoe: result.qoe,
        utility: result.utility,
        decisions: result.log.len(),
        probes: result.log.iter().filter(|r| r.kind == crate::sim::RecordKind::Probe).count(),
        scored_sequences: result.scored_sequences,
        fallbacks: result.fallbacks,
        replay_ok,
    };
    Ok(EpisodeRun { summary, result, wall_s })
}

/// Runs every (strategy, period, replication) of the suite in parallel.
/// Output order is by strategy list position, period, then seed.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<EpisodeRun>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for (pi, &period) in cfg.periods.iter().enumerate() {
        for rep in 0..cfg.replications {
            jobs.push((pi, period, rep));
        }
    }
    let per_input: Vec<Vec<(usize, usize, usize, EpisodeRun)>> = jobs
        .par_iter()
        .map(|&(pi, period, rep)| {
            let inputs = episode_inputs(cfg, period, rep)?;
            cfg.strategies
                .iter()
                .enumerate()
                .map(|(si, &kind)| run_one(cfg, kind, &inputs).map(|r| (si, pi, rep, r)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs: Vec<_> = per_input.into_iter().flatten().collect();
    runs.sort_by_key(|&(si, pi, rep, _)| (si, pi, rep));
    Ok(runs.into_iter().map(|(_, _, _, r)| r).collect())
}

/// Sample mean with a two-sided 95% Student-t interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn from_samples(xs: &[f64]) -> MeanCi {
        let n = xs.len();
        if n == 0 {
            return MeanCi { mean: f64::NAN, half_width: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MeanCi { mean, half_width: 0.0, n };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("valid degrees of freedom")
            .inverse_cdf(0.975);
        MeanCi { mean, half_width: t * (var / n as f64).sqrt(), n }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn scaled(&self, k: f64) -> MeanCi {
        MeanCi { mean: self.mean * k, half_width: self.half_width * k, n: self.n }
    }

    /// True when the two intervals share no point.
    pub fn disjoint(&self, other: &MeanCi) -> bool {
        self.hi() < other.lo() || other.hi() < self.lo()
    }
}

/// Aggregate of one strategy in one period, or over all periods when
/// `period` is `None` (per-seed means across periods are the samples).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: StrategyKind,
    pub period: Option<Period>,
    pub rebuffer_ratio: MeanCi,
    pub startup_s: MeanCi,
    pub cost: MeanCi,
    /// Cost relative to the costliest strategy in the same group.
    pub normalized_cost: MeanCi,
    pub qoe: MeanCi,
    pub utility: MeanCi,
    pub megabits_share: Vec<f64>,
    pub scored_sequences: u64,
    pub decisions: u64,
}

fn per_seed_samples(rows: &[&EpisodeSummary], f: impl Fn(&EpisodeSummary) -> f64) -> Vec<f64> {
    let mut by_seed: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for r in rows {
        let e = by_seed.entry(r.seed).or_insert((0.0, 0));
        e.0 += f(r);
        e.1 += 1;
    }
    by_seed.values().map(|&(s, n)| s / n as f64).collect()
}

/// Aggregates episode rows per (strategy, period) and over all periods.
/// Depends only on the set of rows, not their order.
pub fn aggregate(strategies: &[StrategyKind], periods: &[Period], rows: &[EpisodeSummary]) -> Vec<AggregateRow> {
    let mut groups: Vec<Option<Period>> = periods.iter().copied().map(Some).collect();
    groups.push(None);
    let mut out = Vec::new();
    for g in groups {
        let mut group_rows: Vec<AggregateRow> = strategies
            .iter()
            .map(|&s| {
                let mut sel: Vec<&EpisodeSummary> = rows
                    .iter()
                    .filter(|r| r.strategy == s && g.is_none_or(|p| r.period == p))
                    .collect();
                sel.sort_by_key(|r| (r.period, r.seed));
                let ci = |f: &dyn Fn(&EpisodeSummary) -> f64| MeanCi::from_samples(&per_seed_samples(&sel, f));
                let total_mb: f64 = sel.iter().map(|r| r.megabits).sum();
                let width = sel.iter().map(|r| r.megabits_share.len()).max().unwrap_or(0);
                let megabits_share = (0..width)
                    .map(|j| {
                        let mb: f64 = sel.iter().map(|r| r.megabits * r.megabits_share.get(j).copied().unwrap_or(0.0)).sum();
                        if total_mb > 0.0 { mb / total_mb } else { 0.0 }
                    })
                    .collect();
                let cost = ci(&|r| r.cost);
                AggregateRow {
                    strategy: s,
                    period: g,
                    rebuffer_ratio: ci(&|r| r.rebuffer_ratio),
                    startup_s: ci(&|r| r.mean_startup_s),
                    cost,
                    normalized_cost: cost,
                    qoe: ci(&|r| r.qoe),
                    utility: ci(&|r| r.utility),
                    megabits_share,
                    scored_sequences: sel.iter().map(|r| r.scored_sequences).sum(),
                    decisions: sel.iter().map(|r| r.decisions as u64).sum(),
                }
            })
            .collect();
        let max_cost = group_rows.iter().map(|r| r.cost.mean).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut group_rows {
            r.normalized_cost = if max_cost > 0.0 { r.cost.scaled(1.0 / max_cost) } else { r.cost };
        }
        out.extend(group_rows);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config: ExperimentConfig,
    pub rows: Vec<AggregateRow>,
    pub episodes: Vec<EpisodeSummary>,
}

impl CompareReport {
    pub fn row(&self, strategy: StrategyKind, period: Option<Period>) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.period == period)
    }
}

/// Wall-clock measurements, reported separately from the deterministic report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub decisions: usize,
    pub planned_decisions: usize,
    pub mean_plan_latency_s: f64,
    pub p50_plan_latency_s: f64,
    pub p99_plan_latency_s: f64,
    pub max_plan_latency_s: f64,
    pub episode_wall_s: f64,
}

/// `q`-quantile by nearest rank on sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Latency statistics over decisions that ran the planner.
pub fn timing_of(runs: &[EpisodeRun]) -> TimingReport {
    let mut lat: Vec<f64> = runs
        .iter()
        .flat_map(|r| {
            r.result
                .log
                .iter()
                .zip(&r.result.decision_latency_s)
                .filter(|(rec, _)| rec.scored_sequences > 0)
                .map(|(_, &l)| l)
        })
        .collect();
    lat.sort_by(f64::total_cmp);
    TimingReport {
        decisions: runs.iter().map(|r| r.result.log.len()).sum(),
        planned_decisions: lat.len(),
        mean_plan_latency_s: if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 },
        p50_plan_latency_s: quantile(&lat, 0.5),
        p99_plan_latency_s: quantile(&lat, 0.99),
        max_plan_latency_s: lat.last().copied().unwrap_or(f64::NAN),
        episode_wall_s: runs.iter().map(|r| r.wall_s).sum(),
    }
}

pub fn compare(cfg: &ExperimentConfig) -> Result<(CompareReport, TimingReport)> {
    let runs = run_suite(cfg)?;
    if let Some(bad) = runs.iter().find(|r| !r.summary.replay_ok) {
        return Err(Error::InvalidInput(format!(
            "replay check failed for {} seed {} ({})",
            bad.summary.strategy, bad.summary.seed, bad.summary.period
        )));
    }
    let episodes: Vec<EpisodeSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let rows = aggregate(&cfg.strategies, &cfg.periods, &episodes);
    let timing = timing_of(&runs);
    Ok((CompareReport { config: cfg.clone(), rows, episodes }, timing))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Gamma,
    Horizon,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepAxis::Gamma),
            "horizon" => Ok(SweepAxis::Horizon),
            _ => Err(Error::InvalidInput(format!("unknown sweep axis `{s}` (gamma or horizon)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub utility: MeanCi,
    /// Mean utility relative to the best value of the sweep.
    pub normalized_utility: f64,
    pub rebuffer_ratio: MeanCi,
    pub cost: MeanCi,
    pub scored_sequences: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub axis: SweepAxis,
    pub strategy: StrategyKind,
    pub points: Vec<SweepPoint>,
}

pub fn apply_axis(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Gamma => {
            if !(value >= 0.0) {
                return Err(Error::InvalidInput(format!("gamma must be >= 0, got {value}")));
            }
            c.sim.session.params.gamma = value;
        }
        SweepAxis::Horizon => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(Error::InvalidInput(format!("horizon must be a positive integer, got {value}")));
            }
            c.pira.planning.horizon_n = value as usize;
        }
    }
    Ok(c)
}

pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], strategy: StrategyKind) -> Result<(SweepReport, Vec<TimingReport>)> {
    if values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let mut points = Vec::new();
    let mut timings = Vec::new();
    for &v in values {
        let mut c = apply_axis(cfg, axis, v)?;
        c.strategies = vec![strategy];
        let runs = run_suite(&c)?;
        let rows: Vec<EpisodeSummary> = runs.iter().map(|r| r.summary.clone()).collect();
        let agg = aggregate(&c.strategies, &c.periods, &rows);
        let overall = agg.last().expect("overall row");
        points.push(SweepPoint {
            value: v,
            utility: overall.utility,
            normalized_utility: 0.0,
            rebuffer_ratio: overall.rebuffer_ratio,
            cost: overall.cost,
            scored_sequences: overall.scored_sequences,
        });
        timings.push(timing_of(&runs));
    }
    let best = points.iter().map(|p| p.utility.mean).fold(f64::NEG_INFINITY, f64::max);
    for p in &mut points {
        p.normalized_utility = if best != 0.0 { p.utility.mean / best } else { 1.0 };
    }
    Ok((SweepReport { config: cfg.clone(), axis, strategy, points }, timings))
}

/// Per-episode rows as delimiter-separated text.
pub fn episodes_csv(rows: &[EpisodeSummary]) -> String {
    let mut out = String::from(
        "strategy,period,seed,rebuffer_ratio,rebuffer_s,rebuffer_events,mean_startup_s,cost,megabits,qoe,utility,decisions,probes,scored_sequences,fallbacks,replay_ok\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.strategy,
            r.period,
            r.seed,
            r.rebuffer_ratio,
            r.rebuffer_s,
            r.rebuffer_events,
            r.mean_startup_s,
            r.cost,
            r.megabits,
            r.qoe,
            r.utility,
            r.decisions,
            r.probes,
            r.scored_sequences,
            r.fallbacks,
            r.replay_ok
        ));
    }
    out
}
