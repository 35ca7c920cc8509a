//! Receding-horizon search over (pan-CDN, range) sequences, with the two
//! pruning rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::Link;
use crate::model::{CdnCatalog, CdnId, MAX_CDNS};
use crate::session::{Engine, SessionState, EPS};

/// Utility differences below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `ratio >= min_ratio` allows ranges of at least `min_range_s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStep {
    pub min_ratio: f64,
    pub min_range_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningConfig {
    pub horizon_n: usize,
    pub candidate_ranges_s: Vec<f64>,
    pub pruning_i: bool,
    pub pruning_ii: bool,
    /// Ascending in `min_ratio`.
    pub ratio_steps: Vec<RatioStep>,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        let step = |min_ratio, min_range_s| RatioStep { min_ratio, min_range_s };
        PlanningConfig {
            horizon_n: 4,
            candidate_ranges_s: vec![1.0, 2.0, 3.0, 4.0],
            pruning_i: true,
            pruning_ii: true,
            ratio_steps: vec![step(0.0, 1.0), step(1.0, 2.0), step(2.0, 3.0), step(4.0, 4.0)],
        }
    }
}

impl PlanningConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("planning: {m}")));
        if self.horizon_n == 0 {
            return bad("horizon must be at least 1");
        }
        if self.candidate_ranges_s.is_empty() || self.candidate_ranges_s.iter().any(|&r| !(r > 0.0)) {
            return bad("candidate ranges must be a nonempty list of positive durations");
        }
        if self.ratio_steps.is_empty()
            || self.ratio_steps.windows(2).any(|w| w[1].min_ratio <= w[0].min_ratio)
        {
            return bad("ratio steps must be nonempty and strictly ascending");
        }
        Ok(())
    }

    pub fn without_pruning(mut self) -> Self {
        self.pruning_i = false;
        self.pruning_ii = false;
        self
    }
}

/// Sequences the unpruned search scores: `sum_{i=1..n} (|PC| |R|)^i`.
pub fn count_enumerated(n: usize, pan_cdns: usize, ranges: usize) -> u64 {
    let b = (pan_cdns * ranges) as u64;
    (1..=n as u32).map(|i| b.pow(i)).sum()
}

/// Drops every pan-CDN that another candidate beats on both throughput and
/// cost. Equal values on either axis keep both.
pub fn prune_pan_cdns(candidates: &[CdnId], predicted: impl Fn(CdnId) -> f64, catalog: &CdnCatalog) -> Vec<CdnId> {
    candidates
        .iter()
        .copied()
        .filter(|&c| {
            let (tc, cc) = (predicted(c), catalog.cost(c));
            !candidates
                .iter()
                .any(|&o| predicted(o) > tc && catalog.cost(o) < cc)
        })
        .collect()
}

/// Smallest range worth fetching given predicted throughput relative to the
/// bitrate.
pub fn min_range_for(predicted_mbps: f64, bitrate_mbps: f64, steps: &[RatioStep]) -> f64 {
    let ratio = predicted_mbps / bitrate_mbps;
    steps
        .iter()
        .rev()
        .find(|s| ratio >= s.min_ratio)
        .or(steps.first())
        .map_or(0.0, |s| s.min_range_s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub cdn: CdnId,
    pub range_s: f64,
    /// Best terminal utility found.
    pub utility: f64,
    pub scored_sequences: u64,
    /// Pruning left nothing and the cheapest pan-CDN was used instead.
    pub fallback: bool,
    /// Some branch ended with the media list before the horizon.
    pub truncated: bool,
}

struct Search<'x, 'e, L: Link> {
    engine: &'x Engine<'e>,
    link: &'x L,
    forecasts: &'x [f64; MAX_CDNS],
    cfg: &'x PlanningConfig,
    scored: u64,
    truncated: bool,
    fallback: bool,
    best: Option<(f64, (CdnId, f64))>,
}

impl<L: Link> Search<'_, '_, L> {
    fn candidates(&mut self, video: usize) -> Vec<(CdnId, f64)> {
        let spec = &self.engine.media.videos[video];
        let catalog = self.engine.catalog;
        let mut cdns = spec.cached_on.clone();
        if self.cfg.pruning_i {
            cdns = prune_pan_cdns(&cdns, |c| self.forecasts[c.index()], catalog);
        }
        let mut out = Vec::with_capacity(cdns.len() * self.cfg.candidate_ranges_s.len());
        for &c in &cdns {
            let min_r = if self.cfg.pruning_ii {
                min_range_for(self.forecasts[c.index()], spec.bitrate_mbps, &self.cfg.ratio_steps)
            } else {
                0.0
            };
            out.extend(
                self.cfg
                    .candidate_ranges_s
                    .iter()
                    .filter(|&&r| r >= min_r - EPS)
                    .map(|&r| (c, r)),
            );
        }
        if out.is_empty() {
            self.fallback = true;
            let cheapest = spec
                .cached_on
                .iter()
                .copied()
                .min_by(|a, b| catalog.cost(*a).total_cmp(&catalog.cost(*b)).then(a.cmp(b)))
                .expect("video cached somewhere");
            let shortest = self.cfg.candidate_ranges_s.iter().copied().fold(f64::INFINITY, f64::min);
            out.push((cheapest, shortest));
        }
        out
    }

    /// Lower cost, then longer range, then lower id.
    fn preferred(&self, a: (CdnId, f64), b: (CdnId, f64)) -> bool {
        let (ca, cb) = (self.engine.catalog.cost(a.0), self.engine.catalog.cost(b.0));
        if ca != cb {
            return ca < cb;
        }
        if a.1 != b.1 {
            return a.1 > b.1;
        }
        a.0 < b.0
    }

    fn consider(&mut self, u: f64, first: (CdnId, f64)) {
        let better = match self.best {
            None => true,
            Some((bu, bf)) => u > bu + TIE_TOLERANCE || ((u - bu).abs() <= TIE_TOLERANCE && self.preferred(first, bf)),
        };
        if better {
            self.best = Some((u, first));
        }
    }

    fn dfs(&mut self, s: &SessionState, video: usize, depth: usize, first: Option<(CdnId, f64)>) -> Result<()> {
        let e = self.engine;
        let bitrate = e.media.videos[video].bitrate_mbps;
        for (cdn, r) in self.candidates(video) {
            let mut child = *s;
            let eff = e.effective_range(&child, video, r);
            let tr = self.link.transfer(e, &child, cdn, bitrate * eff)?;
            e.apply_range(&mut child, video, cdn, eff, &tr, &mut ());
            e.idle_until_request(&mut child, &mut ());
            self.scored += 1;
            let first = first.unwrap_or((cdn, r));
            if depth + 1 >= self.cfg.horizon_n || child.done {
                if child.done && depth + 1 < self.cfg.horizon_n {
                    self.truncated = true;
                }
                self.consider(e.utility(&child), first);
            } else {
                let next = e.next_target(&child).expect("live session has a request");
                self.dfs(&child, next, depth + 1, Some(first))?;
            }
        }
        Ok(())
    }
}

/// Best first action for the request on `video` at state `s`.
///
/// `forecasts[j]` is the predicted throughput of pan-CDN `j+1`; it is only
/// consulted by the pruning rules, the link decides transfer times.
pub fn plan<L: Link>(
    engine: &Engine,
    s: &SessionState,
    video: usize,
    link: &L,
    forecasts: &[f64; MAX_CDNS],
    cfg: &PlanningConfig,
) -> Result<PlanOutcome> {
    if s.done {
        return Err(Error::InvalidInput("planning on a finished session".into()));
    }
    let mut search = Search {
        engine,
        link,
        forecasts,
        cfg,
        scored: 0,
        truncated: false,
        fallback: false,
        best: None,
    };
    search.dfs(s, video, 0, None)?;
    let (utility, (cdn, range_s)) = search.best.expect("at least one candidate");
    Ok(PlanOutcome {
        cdn,
        range_s,
        utility,
        scored_sequences: search.scored,
        fallback: search.fallback,
        truncated: search.truncated,
    })
}
