//! Comparison strategies: single pan-CDN, a production-style heuristic and a
//! trace-clairvoyant planner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkModel;
use crate::model::{CdnId, MAX_CDNS};
use crate::planner::{plan, PlanningConfig};
use crate::predictor::{Predictor, PredictorConfig, ThroughputSample};
use crate::sim::{Decision, DecisionContext, DecisionRecord, Strategy};

/// Full-chunk ranges, always from one pan-CDN.
#[derive(Clone, Debug)]
pub struct PureCdn {
    pub cdn: CdnId,
}

impl Strategy for PureCdn {
    fn name(&self) -> String {
        format!("cdn{}", self.cdn)
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision> {
        let spec = &ctx.engine.media.videos[ctx.target];
        if !spec.is_cached_on(self.cdn) {
            return Err(Error::Infeasible(format!(
                "{}: video {} is not cached on pan-CDN {}",
                self.name(),
                spec.id,
                self.cdn
            )));
        }
        Ok(Decision::range(self.cdn, spec.chunk_s()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductionConfig {
    /// Required headroom of predicted throughput over the bitrate.
    pub margin: f64,
    /// Emergency mode ends once the viewed buffer reaches this level.
    pub recovery_buffer_s: f64,
    pub emergency_cdn: CdnId,
    pub predictor: PredictorConfig,
    pub priors_mbps: Vec<f64>,
}

impl Default for ProductionConfig {
    fn default() -> Self {
        ProductionConfig {
            margin: 1.1,
            recovery_buffer_s: 5.0,
            emergency_cdn: CdnId(1),
            predictor: PredictorConfig::default(),
            priors_mbps: vec![20.0; 4],
        }
    }
}

/// Cheapest pan-CDN whose predicted throughput covers the bitrate with a
/// margin; falls back to the premium pan-CDN after a stall until the buffer
/// recovers.
#[derive(Clone, Debug)]
pub struct Production {
    cfg: ProductionConfig,
    predictor: Predictor,
    emergency: bool,
    stalls_seen: u32,
}

impl Production {
    pub fn new(cfg: ProductionConfig) -> Result<Self> {
        cfg.predictor.validate()?;
        if !(cfg.margin > 0.0) || !(cfg.recovery_buffer_s >= 0.0) {
            return Err(Error::InvalidInput("production: margin must be positive".into()));
        }
        let predictor = Predictor::new(cfg.predictor.clone(), cfg.priors_mbps.clone());
        Ok(Production { cfg, predictor, emergency: false, stalls_seen: 0 })
    }
}

impl Strategy for Production {
    fn name(&self) -> String {
        "production".into()
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision> {
        let s = ctx.state;
        let spec = &ctx.engine.media.videos[ctx.target];
        let catalog = ctx.engine.catalog;
        if s.rebuffer_events > self.stalls_seen {
            self.stalls_seen = s.rebuffer_events;
            self.emergency = true;
        }
        if self.emergency && s.viewing_progress().buffer_s >= self.cfg.recovery_buffer_s {
            self.emergency = false;
        }
        let fastest = || {
            spec.cached_on
                .iter()
                .copied()
                .max_by(|a, b| {
                    self.predictor.forecast(*a).mbps.total_cmp(&self.predictor.forecast(*b).mbps).then(b.cmp(a))
                })
                .expect("video cached somewhere")
        };
        let emergency_cdn = if spec.is_cached_on(self.cfg.emergency_cdn) { self.cfg.emergency_cdn } else { fastest() };
        let cdn = if self.emergency {
            emergency_cdn
        } else {
            let need = self.cfg.margin * spec.bitrate_mbps;
            spec.cached_on
                .iter()
                .copied()
                .filter(|&c| self.predictor.forecast(c).mbps >= need)
                .min_by(|a, b| catalog.cost(*a).total_cmp(&catalog.cost(*b)).then(a.cmp(b)))
                .unwrap_or(emergency_cdn)
        };
        Ok(Decision::range(cdn, spec.chunk_s()))
    }

    fn observe(&mut self, r: &DecisionRecord) -> Result<()> {
        self.predictor.observe(ThroughputSample {
            at_s: r.start_s + r.download_s,
            mbps: r.steady_mbps,
            pan_cdn_id: r.cdn,
        })
    }
}

/// The planner with exact future throughput (the simulator's own link and
/// pool state) and no pruning.
#[derive(Clone, Debug)]
pub struct Oracle {
    link: LinkModel,
    planning: PlanningConfig,
}

impl Oracle {
    pub fn new(link: LinkModel, planning: PlanningConfig) -> Result<Self> {
        planning.validate()?;
        Ok(Oracle { link, planning: planning.without_pruning() })
    }
}

impl Strategy for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision> {
        let out = plan(ctx.engine, ctx.state, ctx.target, &self.link, &[0.0; MAX_CDNS], &self.planning)?;
        Ok(Decision {
            action: crate::sim::Action::Range { cdn: out.cdn, range_s: out.range_s },
            scored_sequences: out.scored_sequences,
            fallback: out.fallback,
        })
    }
}
