//! Link models: how long a transfer takes.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CdnId, MAX_CDNS};
use crate::session::{Engine, SessionState, Transfer};
use crate::traces::TraceFile;

pub trait Link {
    fn transfer(&self, engine: &Engine, s: &SessionState, cdn: CdnId, megabits: f64) -> Result<Transfer>;
}

/// Ground-truth link: piecewise-constant trace throughput, with a setup
/// latency and degraded throughput on connections that are not pooled.
#[derive(Clone, Debug)]
pub struct LinkModel {
    pub traces: Arc<TraceFile>,
    pub setup_s: f64,
    pub alpha: f64,
}

impl LinkModel {
    pub fn new(traces: Arc<TraceFile>, setup_s: f64, alpha: f64) -> Result<Self> {
        traces.validate()?;
        if !(setup_s >= 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "link needs setup >= 0 and alpha in (0, 1], got {setup_s}, {alpha}"
            )));
        }
        Ok(LinkModel { traces, setup_s, alpha })
    }

    /// Time to move `megabits` from `cdn` starting at `start_s`.
    pub fn download_range(&self, cdn: CdnId, megabits: f64, start_s: f64, pooled: bool) -> Result<Transfer> {
        if cdn.index() >= self.traces.cdn_count() {
            return Err(Error::NotFound(format!("no trace for pan-CDN {cdn}")));
        }
        if !(megabits > 0.0) || !(start_s >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "transfer needs positive size and start >= 0, got {megabits} Mb at {start_s}"
            )));
        }
        let (setup, scale) = if pooled { (0.0, 1.0) } else { (self.setup_s, self.alpha) };
        let series = self.traces.series(cdn);
        let exhausted = |at_s| Error::TraceExhausted { cdn, at_s, len_s: series.len() };
        let data_start = start_s + setup;
        let mut t = data_start;
        let mut left = megabits;
        loop {
            let i = t.floor() as usize;
            let rate = series.get(i).ok_or_else(|| exhausted(t))? * scale;
            let seg = (i + 1) as f64 - t;
            let can = rate * seg;
            if can >= left {
                t += left / rate;
                break;
            }
            left -= can;
            t = (i + 1) as f64;
        }
        let duration = t - start_s;
        Ok(Transfer {
            duration_s: duration,
            setup_s: setup,
            cold: !pooled,
            steady_mbps: megabits / (t - data_start) / scale,
        })
    }
}

impl Link for LinkModel {
    fn transfer(&self, engine: &Engine, s: &SessionState, cdn: CdnId, megabits: f64) -> Result<Transfer> {
        let pooled = engine.is_warm(s, cdn, s.time_s);
        self.download_range(cdn, megabits, s.time_s, pooled)
    }
}

/// When the planner's link model charges the switch penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchModel {
    /// Whenever the pan-CDN differs from the last one used for a range.
    OnChange,
    /// Only when the connection to the pan-CDN is not pooled.
    ColdConnection,
}

/// Planner link: constant per-CDN throughput forecasts.
#[derive(Clone, Copy, Debug)]
pub struct PredictedLink {
    pub mbps: [f64; MAX_CDNS],
    pub setup_s: f64,
    pub alpha: f64,
    pub switch: SwitchModel,
}

impl Link for PredictedLink {
    fn transfer(&self, engine: &Engine, s: &SessionState, cdn: CdnId, megabits: f64) -> Result<Transfer> {
        let rate = self.mbps[cdn.index()];
        if !(rate > 0.0) {
            return Err(Error::NoData(cdn));
        }
        let cold = match self.switch {
            SwitchModel::OnChange => s.last_cdn.is_some_and(|l| l != cdn),
            SwitchModel::ColdConnection => !engine.is_warm(s, cdn, s.time_s),
        };
        let (setup, scale) = if cold { (self.setup_s, self.alpha) } else { (0.0, 1.0) };
        Ok(Transfer {
            duration_s: setup + megabits / (rate * scale),
            setup_s: setup,
            cold,
            steady_mbps: rate,
        })
    }
}
