//! The PIRA controller: predict, prune, plan, commit the first action.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::link::{PredictedLink, SwitchModel};
use crate::model::{CdnId, MAX_CDNS};
use crate::planner::{plan, PlanningConfig};
use crate::predictor::{Predictor, PredictorConfig, ThroughputSample};
use crate::sim::{Action, Decision, DecisionContext, DecisionRecord, Strategy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiraConfig {
    pub planning: PlanningConfig,
    pub predictor: PredictorConfig,
    /// Cold-start throughput guesses, one per pan-CDN.
    pub priors_mbps: Vec<f64>,
    pub probing: bool,
    pub switch_model: SwitchModel,
}

impl Default for PiraConfig {
    fn default() -> Self {
        PiraConfig {
            planning: PlanningConfig::default(),
            predictor: PredictorConfig::default(),
            priors_mbps: vec![20.0; 4],
            probing: true,
            switch_model: SwitchModel::OnChange,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PiraController {
    cfg: PiraConfig,
    predictor: Predictor,
    last_viewing: Option<usize>,
    /// Media-list refreshes seen (one per swipe).
    pub refreshes: u64,
}

impl PiraController {
    pub fn new(cfg: PiraConfig) -> Result<Self> {
        cfg.planning.validate()?;
        cfg.predictor.validate()?;
        let predictor = Predictor::new(cfg.predictor.clone(), cfg.priors_mbps.clone());
        Ok(PiraController { cfg, predictor, last_viewing: None, refreshes: 0 })
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn forecasts(&self, cdns: impl Iterator<Item = CdnId>) -> [f64; MAX_CDNS] {
        let mut f = [0.0; MAX_CDNS];
        for c in cdns {
            f[c.index()] = self.predictor.forecast(c).mbps;
        }
        f
    }
}

impl Strategy for PiraController {
    fn name(&self) -> String {
        "pira".into()
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision> {
        let s = ctx.state;
        if self.last_viewing != Some(s.viewing) {
            self.last_viewing = Some(s.viewing);
            self.refreshes += 1;
        }
        let engine = ctx.engine;
        let v = s.viewing_progress();
        if self.cfg.probing && v.started && v.buffer_s >= engine.params().tau_st_s {
            if let Some(&cdn) = self.predictor.probes_due(engine.media.videos[ctx.target].cached_on.iter().copied(), s.time_s).first() {
                return Ok(Decision { action: Action::Probe { cdn }, scored_sequences: 0, fallback: false });
            }
        }
        let forecasts = self.forecasts(engine.catalog.ids());
        let link = PredictedLink {
            mbps: forecasts,
            setup_s: self.cfg.predictor.setup_s(),
            alpha: self.cfg.predictor.degradation_alpha,
            switch: self.cfg.switch_model,
        };
        let out = plan(engine, s, ctx.target, &link, &forecasts, &self.cfg.planning)?;
        Ok(Decision {
            action: Action::Range { cdn: out.cdn, range_s: out.range_s },
            scored_sequences: out.scored_sequences,
            fallback: out.fallback,
        })
    }

    fn observe(&mut self, r: &DecisionRecord) -> Result<()> {
        self.predictor.observe(ThroughputSample {
            at_s: r.start_s + r.download_s,
            mbps: r.steady_mbps,
            pan_cdn_id: r.cdn,
        })
    }
}
