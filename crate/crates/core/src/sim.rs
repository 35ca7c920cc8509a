//! Trace-driven episode runner, decision log and replay.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{Link, LinkModel};
use crate::model::{CdnCatalog, CdnId, MediaList, SessionMetrics};
use crate::session::{Engine, Event, Recorder, SessionConfig, SessionState, Transfer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub session: SessionConfig,
    /// Content seconds fetched by one throughput probe.
    pub probe_range_s: f64,
    pub probe_charged: bool,
    /// Probe content is kept in the buffer instead of discarded.
    pub probe_buffered: bool,
    pub max_decisions: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            session: SessionConfig::default(),
            probe_range_s: 0.5,
            probe_charged: true,
            probe_buffered: true,
            max_decisions: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Action {
    Range { cdn: CdnId, range_s: f64 },
    Probe { cdn: CdnId },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub scored_sequences: u64,
    pub fallback: bool,
}

impl Decision {
    pub fn range(cdn: CdnId, range_s: f64) -> Self {
        Decision { action: Action::Range { cdn, range_s }, scored_sequences: 0, fallback: false }
    }
}

pub struct DecisionContext<'a, 'e> {
    pub engine: &'a Engine<'e>,
    pub state: &'a SessionState,
    /// Video the player is requesting data for.
    pub target: usize,
}

pub trait Strategy {
    fn name(&self) -> String;
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision>;
    fn observe(&mut self, _record: &DecisionRecord) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Range,
    Probe,
}

/// One executed decision and everything it was charged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: usize,
    pub kind: RecordKind,
    pub start_s: f64,
    pub video: usize,
    pub cdn: CdnId,
    pub requested_s: f64,
    /// Content seconds actually fetched (probe: probe length).
    pub range_s: f64,
    pub megabits: f64,
    pub cold: bool,
    pub setup_s: f64,
    pub download_s: f64,
    /// `megabits / download_s`, setup included.
    pub realized_mbps: f64,
    pub steady_mbps: f64,
    pub hold_s: f64,
    pub rebuffer_s: f64,
    pub startup_s: f64,
    pub cost: f64,
    pub scored_sequences: u64,
    pub fallback: bool,
}

impl DecisionRecord {
    fn transfer(&self) -> Transfer {
        Transfer {
            duration_s: self.download_s,
            setup_s: self.setup_s,
            cold: self.cold,
            steady_mbps: self.steady_mbps,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub strategy: String,
    pub metrics: SessionMetrics,
    pub qoe: f64,
    pub utility: f64,
    pub end_s: f64,
    pub log: Vec<DecisionRecord>,
    pub events: Vec<Event>,
    pub scored_sequences: u64,
    pub fallbacks: u64,
    /// Wall-clock decision latencies. Not deterministic.
    #[serde(skip)]
    pub decision_latency_s: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct MetricsRecorder {
    pub metrics: SessionMetrics,
    pub events: Vec<Event>,
    rebuffer_total: f64,
    startup_total: f64,
}

impl MetricsRecorder {
    pub fn new(media: &MediaList) -> Self {
        MetricsRecorder { metrics: SessionMetrics::new(media), events: Vec::new(), rebuffer_total: 0.0, startup_total: 0.0 }
    }
}

impl Recorder for MetricsRecorder {
    fn event(&mut self, ev: Event) {
        if ev.kind == crate::session::EventKind::RebufferStart {
            self.metrics.rebuffer_count[ev.video] += 1;
        }
        self.events.push(ev);
    }
    fn rebuffer(&mut self, video: usize, secs: f64) {
        self.metrics.total_rebuffer_s[video] += secs;
        self.rebuffer_total += secs;
    }
    fn startup(&mut self, video: usize, secs: f64) {
        self.metrics.startup_delay_s[video] += secs;
        self.startup_total += secs;
    }
    fn traffic(&mut self, cdn: CdnId, megabits: f64, cost: f64) {
        *self.metrics.megabits_by_cdn.entry(cdn).or_insert(0.0) += megabits;
        self.metrics.total_cost += cost;
    }
}

/// Executes one decision against the engine with the given timing.
#[allow(clippy::too_many_arguments)]
fn execute(
    engine: &Engine,
    cfg: &SimConfig,
    s: &mut SessionState,
    rec: &mut MetricsRecorder,
    step: usize,
    target: usize,
    action: Action,
    timing: impl FnOnce(&SessionState, CdnId, f64) -> Result<Transfer>,
) -> Result<DecisionRecord> {
    let media = engine.media;
    let spec = &media.videos[target];
    let (rb0, st0) = (rec.rebuffer_total, rec.startup_total);
    let start_s = s.time_s;
    let (kind, cdn, requested_s, range_s, mb, tr, hold, cost) = match action {
        Action::Range { cdn, range_s } => {
            if !engine.catalog.contains(cdn) || !spec.is_cached_on(cdn) {
                return Err(Error::Infeasible(format!("video {} is not servable from pan-CDN {cdn}", spec.id)));
            }
            if !(range_s > 0.0) {
                return Err(Error::Infeasible(format!("nonpositive range {range_s}")));
            }
            let eff = engine.effective_range(s, target, range_s);
            let mb = spec.range_megabits(eff);
            let tr = timing(s, cdn, mb)?;
            let (hold, mb, cost) = engine.apply_range(s, target, cdn, eff, &tr, rec);
            (RecordKind::Range, cdn, range_s, eff, mb, tr, hold, cost)
        }
        Action::Probe { cdn } => {
            if !engine.catalog.contains(cdn) || (cfg.probe_buffered && !spec.is_cached_on(cdn)) {
                return Err(Error::Infeasible(format!("cannot probe pan-CDN {cdn} with video {}", spec.id)));
            }
            let eff = if cfg.probe_buffered { engine.probe_range(s, target, cfg.probe_range_s) } else { cfg.probe_range_s };
            let mb = spec.range_megabits(eff);
            let tr = timing(s, cdn, mb)?;
            let (hold, mb, cost) = engine.apply_probe(s, target, cdn, eff, cfg.probe_charged, cfg.probe_buffered, &tr, rec);
            (RecordKind::Probe, cdn, cfg.probe_range_s, eff, mb, tr, hold, cost)
        }
    };
    engine.idle_until_request(s, rec);
    Ok(DecisionRecord {
        step,
        kind,
        start_s,
        video: target,
        cdn,
        requested_s,
        range_s,
        megabits: mb,
        cold: tr.cold,
        setup_s: tr.setup_s,
        download_s: tr.duration_s,
        realized_mbps: mb / tr.duration_s,
        steady_mbps: tr.steady_mbps,
        hold_s: hold,
        rebuffer_s: rec.rebuffer_total - rb0,
        startup_s: rec.startup_total - st0,
        cost,
        scored_sequences: 0,
        fallback: false,
    })
}

fn finish(strategy: String, engine: &Engine, s: &SessionState, rec: MetricsRecorder, log: Vec<DecisionRecord>, lat: Vec<f64>) -> Result<EpisodeResult> {
    let params = engine.params();
    let qoe = rec.metrics.qoe(params)?;
    let utility = rec.metrics.utility(params)?;
    Ok(EpisodeResult {
        strategy,
        scored_sequences: log.iter().map(|r| r.scored_sequences).sum(),
        fallbacks: log.iter().filter(|r| r.fallback).count() as u64,
        metrics: rec.metrics,
        qoe,
        utility,
        end_s: s.time_s,
        log,
        events: rec.events,
        decision_latency_s: lat,
    })
}

/// Plays the media list against the trace-driven link under `strategy`.
pub fn run_episode(
    media: &MediaList,
    catalog: &CdnCatalog,
    link: &LinkModel,
    cfg: &SimConfig,
    strategy: &mut dyn Strategy,
) -> Result<EpisodeResult> {
    if link.traces.cdn_count() < catalog.len() {
        return Err(Error::InvalidInput(format!(
            "trace has {} pan-CDN series but the catalog has {}",
            link.traces.cdn_count(),
            catalog.len()
        )));
    }
    let engine = Engine::new(media, catalog, &cfg.session)?;
    let mut rec = MetricsRecorder::new(media);
    let mut s = engine.initial_state(&mut rec);
    engine.idle_until_request(&mut s, &mut rec);
    let mut log = Vec::new();
    let mut lat = Vec::new();
    while !s.done {
        if log.len() >= cfg.max_decisions {
            return Err(Error::InvalidInput(format!("episode exceeded {} decisions", cfg.max_decisions)));
        }
        let target = engine.next_target(&s).expect("live session has a request");
        let t0 = Instant::now();
        let dec = strategy.decide(&DecisionContext { engine: &engine, state: &s, target })?;
        lat.push(t0.elapsed().as_secs_f64());
        let engine_ref = &engine;
        let mut record = execute(&engine, cfg, &mut s, &mut rec, log.len(), target, dec.action, |st, cdn, mb| {
            link.transfer(engine_ref, st, cdn, mb)
        })?;
        record.scored_sequences = dec.scored_sequences;
        record.fallback = dec.fallback;
        strategy.observe(&record)?;
        log.push(record);
    }
    finish(strategy.name(), &engine, &s, rec, log, lat)
}

/// Re-runs the logged decisions with their logged transfer times and checks
/// that the log is self-consistent and reproduces the metrics exactly.
pub fn replay_check(result: &EpisodeResult, media: &MediaList, catalog: &CdnCatalog, cfg: &SimConfig) -> Result<bool> {
    let engine = Engine::new(media, catalog, &cfg.session)?;
    let mut rec = MetricsRecorder::new(media);
    let mut s = engine.initial_state(&mut rec);
    engine.idle_until_request(&mut s, &mut rec);
    let mut log = Vec::with_capacity(result.log.len());
    for r in &result.log {
        if r.realized_mbps != r.megabits / r.download_s {
            return Ok(false);
        }
        if s.done || engine.next_target(&s) != Some(r.video) || s.time_s != r.start_s {
            return Ok(false);
        }
        let action = match r.kind {
            RecordKind::Range => Action::Range { cdn: r.cdn, range_s: r.requested_s },
            RecordKind::Probe => Action::Probe { cdn: r.cdn },
        };
        let tr = r.transfer();
        let mut again = execute(&engine, cfg, &mut s, &mut rec, r.step, r.video, action, |_, _, _| Ok(tr))?;
        again.scored_sequences = r.scored_sequences;
        again.fallback = r.fallback;
        if &again != r {
            return Ok(false);
        }
        log.push(again);
    }
    if !s.done {
        return Ok(false);
    }
    let replayed = finish(result.strategy.clone(), &engine, &s, rec, log, Vec::new())?;
    Ok(replayed.metrics == result.metrics
        && replayed.qoe.to_bits() == result.qoe.to_bits()
        && replayed.utility.to_bits() == result.utility.to_bits()
        && replayed.events == result.events)
}
