//! Player/session state machine shared by the simulator, planner rollouts and
//! replay.
//!
//! The state is a small `Copy` value so rollouts can branch without
//! allocation. Time only moves through [`Engine::advance`]; range landings and
//! swipes happen at instants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{overflow_wait, prefetch_buffer_after, CdnCatalog, CdnId, MediaList, QoEParams, MAX_CDNS};

/// Viewed video plus at most this many preload slots.
pub const MAX_WINDOW: usize = 6;
pub(crate) const EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartupCharge {
    /// Every second the viewed video waits to start is charged.
    Cumulative,
    /// Only the wait for its first range is charged.
    FirstRange,
}

/// When the player asks for data and for which video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreloadPolicy {
    /// Refill the viewed video first once its buffer falls to this level.
    pub viewing_low_s: f64,
    /// Stop fetching the viewed video above this level.
    pub viewing_target_s: f64,
    /// Number of upcoming videos to preload.
    pub preload_count: usize,
    /// Preload each upcoming video up to this many seconds.
    pub preload_s: f64,
}

impl Default for PreloadPolicy {
    fn default() -> Self {
        PreloadPolicy {
            viewing_low_s: 4.0,
            viewing_target_s: 12.0,
            preload_count: 2,
            preload_s: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub params: QoEParams,
    pub player_cap_s: f64,
    pub preload: PreloadPolicy,
    pub startup_charge: StartupCharge,
    /// A connection unused for longer than this is cold again.
    pub pool_idle_timeout_s: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            params: QoEParams::default(),
            player_cap_s: 30.0,
            preload: PreloadPolicy::default(),
            startup_charge: StartupCharge::Cumulative,
            pool_idle_timeout_s: 180.0,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let p = &self.preload;
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.player_cap_s > 0.0) {
            return bad(format!("player cap must be positive, got {}", self.player_cap_s));
        }
        if !(self.pool_idle_timeout_s >= 0.0) {
            return bad("pool idle timeout must be nonnegative".into());
        }
        if p.preload_count + 1 > MAX_WINDOW {
            return bad(format!("preload_count must be at most {}", MAX_WINDOW - 1));
        }
        if !(p.viewing_low_s >= 0.0 && p.viewing_target_s > 0.0 && p.preload_s >= 0.0) {
            return bad("preload thresholds must be nonnegative".into());
        }
        if p.viewing_target_s > self.player_cap_s {
            return bad("viewing target exceeds the player cap".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VideoProgress {
    /// Content seconds downloaded and kept.
    pub fetched_s: f64,
    pub buffer_s: f64,
    /// Content still to be played before the watch ends or the video loops.
    pub to_play_s: f64,
    /// Looping playback after the content was played once.
    pub loop_left_s: f64,
    pub started: bool,
    pub stalled: bool,
    pub ranges_landed: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionState {
    pub time_s: f64,
    pub viewing: usize,
    window: [VideoProgress; MAX_WINDOW],
    pool_last_use: [f64; MAX_CDNS],
    /// Pan-CDN of the last range download.
    pub last_cdn: Option<CdnId>,
    /// Accumulated `mu1 * rebuffer / T_v + mu2 * startup` over all videos.
    pub penalty: f64,
    pub cost: f64,
    pub rebuffer_events: u32,
    pub done: bool,
}

impl SessionState {
    /// Progress of `video`, if it is the viewed video or in the preload window.
    pub fn progress(&self, video: usize) -> Option<&VideoProgress> {
        video
            .checked_sub(self.viewing)
            .filter(|&slot| slot < MAX_WINDOW)
            .map(|slot| &self.window[slot])
    }

    pub fn viewing_progress(&self) -> &VideoProgress {
        &self.window[0]
    }

    pub fn last_use(&self, cdn: CdnId) -> Option<f64> {
        let t = self.pool_last_use[cdn.index()];
        (t > f64::NEG_INFINITY).then_some(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Swipe,
    RangeComplete,
    ProbeComplete,
    RebufferEnd,
    StartupComplete,
    RebufferStart,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    pub kind: EventKind,
    pub video: usize,
}

/// Observer for everything the engine charges.
pub trait Recorder {
    fn event(&mut self, _ev: Event) {}
    fn rebuffer(&mut self, _video: usize, _secs: f64) {}
    fn startup(&mut self, _video: usize, _secs: f64) {}
    fn traffic(&mut self, _cdn: CdnId, _megabits: f64, _cost: f64) {}
}

impl Recorder for () {}

/// Timing of one transfer as produced by a link model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub duration_s: f64,
    pub setup_s: f64,
    pub cold: bool,
    /// Throughput of the data phase with any cold-connection scaling removed.
    pub steady_mbps: f64,
}

pub struct Engine<'a> {
    pub media: &'a MediaList,
    pub catalog: &'a CdnCatalog,
    pub cfg: &'a SessionConfig,
    window_len: usize,
}

impl<'a> Engine<'a> {
    pub fn new(media: &'a MediaList, catalog: &'a CdnCatalog, cfg: &'a SessionConfig) -> Result<Self> {
        cfg.validate()?;
        media.validate()?;
        if catalog.len() > MAX_CDNS {
            return Err(Error::InvalidInput(format!("at most {MAX_CDNS} pan-CDNs supported")));
        }
        for v in &media.videos {
            if let Some(c) = v.cached_on.iter().find(|c| !catalog.contains(**c)) {
                return Err(Error::InvalidInput(format!("video {} cached on unknown pan-CDN {c}", v.id)));
            }
        }
        Ok(Engine {
            media,
            catalog,
            cfg,
            window_len: cfg.preload.preload_count + 1,
        })
    }

    pub fn params(&self) -> &QoEParams {
        &self.cfg.params
    }

    fn fresh(&self, video: usize) -> VideoProgress {
        if video >= self.media.list_len() {
            return VideoProgress::default();
        }
        let d = self.media.videos[video].duration_s;
        let w = self.media.watch_duration_s[video];
        VideoProgress {
            to_play_s: w.min(d),
            loop_left_s: (w - d).max(0.0),
            ..VideoProgress::default()
        }
    }

    pub fn initial_state<R: Recorder>(&self, rec: &mut R) -> SessionState {
        let viewing = self.media.current_index;
        let mut window = [VideoProgress::default(); MAX_WINDOW];
        for (i, slot) in window.iter_mut().enumerate().take(self.window_len) {
            *slot = self.fresh(viewing + i);
        }
        let mut s = SessionState {
            time_s: 0.0,
            viewing,
            window,
            pool_last_use: [f64::NEG_INFINITY; MAX_CDNS],
            last_cdn: None,
            penalty: 0.0,
            cost: 0.0,
            rebuffer_events: 0,
            done: false,
        };
        self.settle(&mut s, rec);
        s
    }

    /// Number of list videos from `viewing` within the window.
    fn live_slots(&self, s: &SessionState) -> usize {
        self.window_len.min(self.media.list_len().saturating_sub(s.viewing))
    }

    fn start_threshold(&self, video: usize) -> f64 {
        self.cfg.params.tau_st_s.min(self.media.videos[video].duration_s)
    }

    pub fn is_complete(&self, s: &SessionState, video: usize) -> bool {
        match s.progress(video) {
            Some(p) => p.fetched_s >= self.media.videos[video].duration_s - EPS,
            None => video < s.viewing,
        }
    }

    /// Utility of the session so far: `N - penalty - gamma * cost`.
    pub fn utility(&self, s: &SessionState) -> f64 {
        self.media.list_len() as f64 - s.penalty - self.cfg.params.gamma * s.cost
    }

    pub fn total_buffer(&self, s: &SessionState) -> f64 {
        s.window[..self.live_slots(s)].iter().map(|p| p.buffer_s).sum()
    }

    pub fn is_warm(&self, s: &SessionState, cdn: CdnId, at_s: f64) -> bool {
        match s.last_use(cdn) {
            Some(t) => at_s - t <= self.cfg.pool_idle_timeout_s,
            None => false,
        }
    }

    /// Instantaneous transitions: startups and swipes that are due now.
    fn settle<R: Recorder>(&self, s: &mut SessionState, rec: &mut R) {
        loop {
            if s.viewing >= self.media.list_len() {
                s.done = true;
                return;
            }
            let k = s.viewing;
            let threshold = self.start_threshold(k);
            let v = &mut s.window[0];
            if !v.started && v.buffer_s + EPS >= threshold {
                v.started = true;
                rec.event(Event { time_s: s.time_s, kind: EventKind::StartupComplete, video: k });
            }
            if v.started && v.to_play_s <= 0.0 && v.loop_left_s <= 0.0 {
                rec.event(Event { time_s: s.time_s, kind: EventKind::Swipe, video: k });
                s.window.copy_within(1..self.window_len, 0);
                s.window[self.window_len - 1] = self.fresh(k + self.window_len);
                s.viewing += 1;
                continue;
            }
            return;
        }
    }

    /// Let `d` seconds of wall time pass.
    pub fn advance<R: Recorder>(&self, s: &mut SessionState, mut d: f64, rec: &mut R) {
        self.settle(s, rec);
        while d > 0.0 && !s.done {
            let k = s.viewing;
            let p = self.cfg.params;
            let v = &mut s.window[0];
            if !v.started {
                let charged = match self.cfg.startup_charge {
                    StartupCharge::Cumulative => true,
                    StartupCharge::FirstRange => v.ranges_landed == 0,
                };
                if charged {
                    s.penalty += p.mu2 * d;
                    rec.startup(k, d);
                }
                s.time_s += d;
                return;
            }
            if v.to_play_s > 0.0 {
                if v.buffer_s > 0.0 {
                    let step = v.buffer_s.min(v.to_play_s).min(d);
                    v.buffer_s = if step >= v.buffer_s { 0.0 } else { v.buffer_s - step };
                    v.to_play_s = if step >= v.to_play_s { 0.0 } else { v.to_play_s - step };
                    s.time_s += step;
                    d = if step >= d { 0.0 } else { d - step };
                } else if v.to_play_s <= EPS {
                    // rounding residue of a fully played video
                    v.to_play_s = 0.0;
                } else {
                    if !v.stalled {
                        v.stalled = true;
                        s.rebuffer_events += 1;
                        rec.event(Event { time_s: s.time_s, kind: EventKind::RebufferStart, video: k });
                    }
                    s.penalty += p.mu1 * d / self.media.watch_duration_s[k];
                    rec.rebuffer(k, d);
                    s.time_s += d;
                    return;
                }
            } else {
                let step = v.loop_left_s.min(d);
                v.loop_left_s = if step >= v.loop_left_s { 0.0 } else { v.loop_left_s - step };
                s.time_s += step;
                d = if step >= d { 0.0 } else { d - step };
            }
            self.settle(s, rec);
        }
        if d > 0.0 {
            s.time_s += d;
        }
    }

    /// Data for `video` lands now. Returns the hold during which the player
    /// must wait for room in the shared buffer.
    fn land<R: Recorder>(&self, s: &mut SessionState, video: usize, range_s: f64, kind: EventKind, rec: &mut R) -> f64 {
        rec.event(Event { time_s: s.time_s, kind, video });
        let Some(slot) = video.checked_sub(s.viewing).filter(|&x| x < self.live_slots(s)) else {
            return 0.0;
        };
        let cap = self.cfg.player_cap_s;
        let duration = self.media.videos[video].duration_s;
        let total: f64 = self.total_buffer(s);
        let v = &mut s.window[slot];
        let others = total - v.buffer_s;
        let wait = overflow_wait(v.buffer_s, others, range_s, cap);
        v.ranges_landed += 1;
        let hold = if slot == 0 {
            v.buffer_s += range_s;
            v.fetched_s += range_s;
            if v.stalled {
                v.stalled = false;
                rec.event(Event { time_s: s.time_s, kind: EventKind::RebufferEnd, video });
            }
            wait
        } else {
            let after = prefetch_buffer_after(v.buffer_s, range_s, wait);
            v.fetched_s += after - v.buffer_s;
            v.buffer_s = after;
            0.0
        };
        if (v.fetched_s - duration).abs() < EPS {
            v.fetched_s = duration;
        }
        self.settle(s, rec);
        hold
    }

    #[allow(clippy::too_many_arguments)]
    fn download<R: Recorder>(
        &self,
        s: &mut SessionState,
        video: usize,
        cdn: CdnId,
        range_s: f64,
        tr: &Transfer,
        charged: bool,
        kind: EventKind,
        rec: &mut R,
    ) -> (f64, f64, f64) {
        let mb = self.media.videos[video].range_megabits(range_s);
        let cost = if charged { mb * self.catalog.cost(cdn) } else { 0.0 };
        s.cost += cost;
        rec.traffic(cdn, mb, cost);
        self.advance(s, tr.duration_s, rec);
        s.pool_last_use[cdn.index()] = s.time_s;
        if kind == EventKind::RangeComplete {
            s.last_cdn = Some(cdn);
        }
        let hold = self.land(s, video, range_s, kind, rec);
        if hold > 0.0 {
            self.advance(s, hold, rec);
        }
        (hold, mb, cost)
    }

    /// Download `range_s` seconds of `video` from `cdn` with the given timing.
    /// Returns `(hold_s, megabits, cost)`.
    pub fn apply_range<R: Recorder>(
        &self,
        s: &mut SessionState,
        video: usize,
        cdn: CdnId,
        range_s: f64,
        tr: &Transfer,
        rec: &mut R,
    ) -> (f64, f64, f64) {
        self.download(s, video, cdn, range_s, tr, true, EventKind::RangeComplete, rec)
    }

    /// A throughput probe fetching `range_s` seconds of `video`. With
    /// `buffered` the content is kept like any range, otherwise it is thrown
    /// away. Does not count as the last pan-CDN used.
    #[allow(clippy::too_many_arguments)]
    pub fn apply_probe<R: Recorder>(
        &self,
        s: &mut SessionState,
        video: usize,
        cdn: CdnId,
        range_s: f64,
        charged: bool,
        buffered: bool,
        tr: &Transfer,
        rec: &mut R,
    ) -> (f64, f64, f64) {
        if buffered {
            return self.download(s, video, cdn, range_s, tr, charged, EventKind::ProbeComplete, rec);
        }
        let mb = self.media.videos[video].range_megabits(range_s);
        let cost = if charged { mb * self.catalog.cost(cdn) } else { 0.0 };
        s.cost += cost;
        rec.traffic(cdn, mb, cost);
        self.advance(s, tr.duration_s, rec);
        s.pool_last_use[cdn.index()] = s.time_s;
        rec.event(Event { time_s: s.time_s, kind: EventKind::ProbeComplete, video });
        self.settle(s, rec);
        (0.0, mb, cost)
    }

    /// Content a probe of `video` fetches: `probe_s`, clipped like a range
    /// but never raised to the startup threshold.
    pub fn probe_range(&self, s: &SessionState, video: usize, probe_s: f64) -> f64 {
        let spec = &self.media.videos[video];
        let Some(p) = s.progress(video) else {
            return probe_s;
        };
        let chunk = spec.chunk_s();
        let chunk_idx = ((p.fetched_s + EPS) / chunk).floor();
        let chunk_end = ((chunk_idx + 1.0) * chunk).min(spec.duration_s);
        probe_s.min(chunk_end - p.fetched_s).min(spec.duration_s - p.fetched_s).max(0.0)
    }

    /// The video the player wants data for right now, if any.
    pub fn next_target(&self, s: &SessionState) -> Option<usize> {
        if s.done {
            return None;
        }
        let pol = &self.cfg.preload;
        let k = s.viewing;
        let v = &s.window[0];
        let chunk = self.media.videos[k].chunk_s();
        let viewing_incomplete = !self.is_complete(s, k);
        if viewing_incomplete && (!v.started || v.buffer_s <= pol.viewing_low_s + EPS) {
            return Some(k);
        }
        let total = self.total_buffer(s);
        // upcoming videos are first made startable, then topped up
        for level in [self.cfg.params.tau_st_s.min(pol.preload_s), pol.preload_s] {
            for slot in 1..self.live_slots(s) {
                let j = k + slot;
                let p = &s.window[slot];
                let chunk_j = self.media.videos[j].chunk_s();
                if !self.is_complete(s, j)
                    && p.buffer_s < level - EPS
                    && total + chunk_j <= self.cfg.player_cap_s + EPS
                {
                    return Some(j);
                }
            }
        }
        if viewing_incomplete && v.buffer_s + chunk <= pol.viewing_target_s + EPS {
            return Some(k);
        }
        None
    }

    /// Time until the player next wants data, assuming nothing lands.
    fn wake_delay(&self, s: &SessionState) -> f64 {
        let pol = &self.cfg.preload;
        let k = s.viewing;
        let v = &s.window[0];
        // swipe of the viewed video (all of its remaining content is buffered
        // or the viewing threshold below fires first)
        let mut delay = v.to_play_s + v.loop_left_s;
        if !self.is_complete(s, k) && v.to_play_s > 0.0 {
            let chunk = self.media.videos[k].chunk_s();
            let playable = v.buffer_s.min(v.to_play_s);
            // rule 1
            delay = delay.min(v.buffer_s - pol.viewing_low_s);
            // rule 3
            delay = delay.min(v.buffer_s + chunk - pol.viewing_target_s);
            // buffer empties while content is still owed
            delay = delay.min(playable);
            // prefetch rule: the shared buffer frees room as the viewed video plays
            let total = self.total_buffer(s);
            for slot in 1..self.live_slots(s) {
                let j = k + slot;
                let p = &s.window[slot];
                if !self.is_complete(s, j) && p.buffer_s < pol.preload_s - EPS {
                    let chunk_j = self.media.videos[j].chunk_s();
                    delay = delay.min(total + chunk_j - self.cfg.player_cap_s);
                }
            }
        } else if v.to_play_s > 0.0 {
            let total = self.total_buffer(s);
            for slot in 1..self.live_slots(s) {
                let j = k + slot;
                let p = &s.window[slot];
                if !self.is_complete(s, j) && p.buffer_s < pol.preload_s - EPS {
                    let chunk_j = self.media.videos[j].chunk_s();
                    let room = total + chunk_j - self.cfg.player_cap_s;
                    delay = delay.min(room.min(v.buffer_s));
                }
            }
        }
        if delay > 0.0 { delay } else { EPS }
    }

    /// Advance idle time until the player wants data or the session ends.
    pub fn idle_until_request<R: Recorder>(&self, s: &mut SessionState, rec: &mut R) {
        self.settle(s, rec);
        let mut guard = 0usize;
        while !s.done && self.next_target(s).is_none() {
            let d = self.wake_delay(s);
            self.advance(s, d, rec);
            guard += 1;
            assert!(guard < 1_000_000, "idle loop made no progress at t={}: {s:?} delay {d}", s.time_s);
        }
    }

    /// Range actually fetched for a request. A video that has not started
    /// fetches exactly what it needs to start; a preload never goes past the
    /// preload level; no range crosses the current chunk or the end of the
    /// content.
    pub fn effective_range(&self, s: &SessionState, video: usize, requested_s: f64) -> f64 {
        let spec = &self.media.videos[video];
        let Some(p) = s.progress(video) else {
            return requested_s;
        };
        let mut r = requested_s;
        let tau = self.cfg.params.tau_st_s;
        let preload_s = self.cfg.preload.preload_s;
        if !p.started && p.buffer_s < tau {
            r = tau - p.buffer_s;
            if video != s.viewing {
                r = r.min(preload_s - p.buffer_s);
            }
        } else if video != s.viewing && p.buffer_s < preload_s {
            r = r.min(preload_s - p.buffer_s);
        }
        let chunk = spec.chunk_s();
        let chunk_idx = ((p.fetched_s + EPS) / chunk).floor();
        let chunk_end = ((chunk_idx + 1.0) * chunk).min(spec.duration_s);
        r.min(chunk_end - p.fetched_s).min(spec.duration_s - p.fetched_s).max(0.0)
    }
}
