//! Per-pan-CDN throughput history and harmonic-mean forecasting.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CdnId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSample {
    pub at_s: f64,
    pub mbps: f64,
    pub pan_cdn_id: CdnId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub window_w: usize,
    /// Throughput multiplier for the first range on a fresh connection.
    pub degradation_alpha: f64,
    pub switch_setup_rtt_mult: f64,
    pub avg_rtt_s: f64,
    pub probe_interval_s: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            window_w: 5,
            degradation_alpha: 0.8,
            switch_setup_rtt_mult: 1.5,
            avg_rtt_s: 0.05,
            probe_interval_s: 30.0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_w == 0 {
            return Err(Error::InvalidInput("window_w must be positive".into()));
        }
        if !(self.degradation_alpha > 0.0 && self.degradation_alpha <= 1.0) {
            return Err(Error::InvalidInput("degradation_alpha must be in (0, 1]".into()));
        }
        if !(self.switch_setup_rtt_mult >= 0.0) || !(self.avg_rtt_s >= 0.0) {
            return Err(Error::InvalidInput("setup parameters must be nonnegative".into()));
        }
        if !(self.probe_interval_s > 0.0) {
            return Err(Error::InvalidInput("probe_interval_s must be positive".into()));
        }
        Ok(())
    }

    /// Connection setup latency charged to the first range after a switch.
    pub fn setup_s(&self) -> f64 {
        self.switch_setup_rtt_mult * self.avg_rtt_s
    }
}

/// Bounded FIFO of recent samples per pan-CDN.
#[derive(Clone, Debug, PartialEq)]
pub struct ThroughputHistory {
    window: usize,
    per_cdn: BTreeMap<CdnId, VecDeque<ThroughputSample>>,
}

impl ThroughputHistory {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "history window must be positive");
        ThroughputHistory {
            window,
            per_cdn: BTreeMap::new(),
        }
    }

    pub fn record_sample(&mut self, sample: ThroughputSample) -> Result<()> {
        if !(sample.mbps > 0.0) || !sample.mbps.is_finite() {
            return Err(Error::InvalidInput(format!(
                "throughput sample must be positive, got {}",
                sample.mbps
            )));
        }
        let q = self.per_cdn.entry(sample.pan_cdn_id).or_default();
        if let Some(last) = q.back() {
            if sample.at_s < last.at_s {
                return Err(Error::InvalidInput(format!(
                    "sample for pan-CDN {} at {}s precedes previous sample at {}s",
                    sample.pan_cdn_id, sample.at_s, last.at_s
                )));
            }
        }
        if q.len() == self.window {
            q.pop_front();
        }
        q.push_back(sample);
        Ok(())
    }

    pub fn samples(&self, cdn: CdnId) -> impl Iterator<Item = &ThroughputSample> + '_ {
        self.per_cdn.get(&cdn).into_iter().flatten()
    }

    pub fn len(&self, cdn: CdnId) -> usize {
        self.per_cdn.get(&cdn).map_or(0, VecDeque::len)
    }

    pub fn last_at(&self, cdn: CdnId) -> Option<f64> {
        self.per_cdn.get(&cdn).and_then(|q| q.back()).map(|s| s.at_s)
    }

    /// Harmonic mean of the windowed samples.
    pub fn predict(&self, cdn: CdnId) -> Result<f64> {
        let q = self
            .per_cdn
            .get(&cdn)
            .filter(|q| !q.is_empty())
            .ok_or(Error::NoData(cdn))?;
        let inv: f64 = q.iter().map(|s| 1.0 / s.mbps).sum();
        Ok(q.len() as f64 / inv)
    }

    /// Forecast for the first range after switching `from -> to`: the
    /// target's forecast scaled by the degradation coefficient, plus the
    /// connection setup latency.
    pub fn predict_after_switch(
        &self,
        from: CdnId,
        to: CdnId,
        config: &PredictorConfig,
    ) -> Result<(f64, f64)> {
        if from == to {
            return Err(Error::InvalidInput(format!(
                "predict_after_switch called without a switch (pan-CDN {from})"
            )));
        }
        let base = self.predict(to)?;
        Ok((config.degradation_alpha * base, config.setup_s()))
    }
}

/// Pan-CDNs whose last sample or probe is older than the probe interval.
/// A pan-CDN missing from `last_probe_s` has never been measured and is due.
pub fn probe_due(
    last_probe_s: &BTreeMap<CdnId, f64>,
    candidates: impl IntoIterator<Item = CdnId>,
    now_s: f64,
    config: &PredictorConfig,
) -> BTreeSet<CdnId> {
    candidates
        .into_iter()
        .filter(|id| match last_probe_s.get(id) {
            Some(&t) => now_s - t > config.probe_interval_s,
            None => true,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Forecast {
    pub mbps: f64,
    /// No samples yet: `mbps` is the configured prior.
    pub low_confidence: bool,
}

/// History plus cold-start priors and probe bookkeeping.
#[derive(Clone, Debug)]
pub struct Predictor {
    pub config: PredictorConfig,
    history: ThroughputHistory,
    priors: Vec<f64>,
    last_measured: BTreeMap<CdnId, f64>,
}

impl Predictor {
    /// `priors[j]` is the cold-start mean for pan-CDN `j+1`.
    pub fn new(config: PredictorConfig, priors: Vec<f64>) -> Self {
        Predictor {
            history: ThroughputHistory::new(config.window_w),
            config,
            priors,
            last_measured: BTreeMap::new(),
        }
    }

    pub fn history(&self) -> &ThroughputHistory {
        &self.history
    }

    pub fn forecast(&self, cdn: CdnId) -> Forecast {
        match self.history.predict(cdn) {
            Ok(mbps) => Forecast {
                mbps,
                low_confidence: false,
            },
            Err(_) => Forecast {
                mbps: self.priors.get(cdn.index()).copied().unwrap_or(1.0),
                low_confidence: true,
            },
        }
    }

    pub fn observe(&mut self, sample: ThroughputSample) -> Result<()> {
        self.history.record_sample(sample)?;
        self.last_measured.insert(sample.pan_cdn_id, sample.at_s);
        Ok(())
    }

    pub fn probes_due(&self, candidates: impl IntoIterator<Item = CdnId>, now_s: f64) -> BTreeSet<CdnId> {
        probe_due(&self.last_measured, candidates, now_s, &self.config)
    }
}
