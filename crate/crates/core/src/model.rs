//! The streaming model: buffer evolution, rebuffering, startup delay,
//! traffic cost, QoE and the QoE/cost utility.
//!
//! Units throughout: seconds of video for buffers and ranges, megabits for
//! sizes, megabits/second for bitrate and throughput, cost units per megabit
//! for the pan-CDN price coefficients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(x)_+`
#[inline]
pub fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// One-based pan-CDN class index. pan-CDN1 is the most expensive tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CdnId(pub u8);

impl CdnId {
    /// Zero-based slot for dense per-CDN arrays.
    #[inline]
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn from_index(idx: usize) -> Self {
        CdnId(u8::try_from(idx + 1).expect("pan-CDN index out of range"))
    }
}

impl fmt::Display for CdnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A priced resource tier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanCdnClass {
    pub id: CdnId,
    /// Cost units per megabit.
    pub cost_coeff: f64,
    pub label: String,
}

/// Maximum number of pan-CDN classes a catalog may hold. Keeps per-CDN
/// state in fixed-size arrays on the planner's hot path.
pub const MAX_CDNS: usize = 8;

/// The configured pan-CDN classes, ids `1..=J` in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdnCatalog {
    classes: Vec<PanCdnClass>,
}

impl CdnCatalog {
    pub fn new(mut classes: Vec<PanCdnClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("at least one pan-CDN class is required".into()));
        }
        if classes.len() > MAX_CDNS {
            return Err(Error::InvalidInput(format!(
                "at most {MAX_CDNS} pan-CDN classes are supported, got {}",
                classes.len()
            )));
        }
        classes.sort_by_key(|c| c.id);
        for (i, c) in classes.iter().enumerate() {
            if c.id != CdnId::from_index(i) {
                return Err(Error::InvalidInput(format!(
                    "pan-CDN ids must be unique and contiguous from 1; found {} at position {}",
                    c.id,
                    i + 1
                )));
            }
            if !(c.cost_coeff >= 0.0) || !c.cost_coeff.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "pan-CDN {} has invalid cost coefficient {}",
                    c.id, c.cost_coeff
                )));
            }
        }
        Ok(CdnCatalog { classes })
    }

    /// Builds `pan-CDN1..J` from a list of cost coefficients.
    pub fn from_costs(costs: &[f64]) -> Result<Self> {
        Self::new(
            costs
                .iter()
                .enumerate()
                .map(|(i, &c)| PanCdnClass {
                    id: CdnId::from_index(i),
                    cost_coeff: c,
                    label: format!("pan-CDN{}", i + 1),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[PanCdnClass] {
        &self.classes
    }

    pub fn ids(&self) -> impl Iterator<Item = CdnId> + '_ {
        self.classes.iter().map(|c| c.id)
    }

    pub fn contains(&self, id: CdnId) -> bool {
        id.0 >= 1 && id.index() < self.classes.len()
    }

    pub fn get(&self, id: CdnId) -> Result<&PanCdnClass> {
        if self.contains(id) {
            Ok(&self.classes[id.index()])
        } else {
            Err(Error::NotFound(format!("pan-CDN {id}")))
        }
    }

    /// Cost coefficient; panics on an unknown id. Use [`CdnCatalog::get`] for
    /// untrusted ids.
    #[inline]
    pub fn cost(&self, id: CdnId) -> f64 {
        self.classes[id.index()].cost_coeff
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub id: String,
    pub duration_s: f64,
    pub bitrate_mbps: f64,
    pub chunk_duration_s: f64,
    /// Pan-CDNs able to serve the video, ascending.
    pub cached_on: Vec<CdnId>,
}

pub const DEFAULT_CHUNK_S: f64 = 4.0;

impl VideoSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("video {}: {what}", self.id)));
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return bad("duration must be positive");
        }
        if !(self.bitrate_mbps > 0.0) || !self.bitrate_mbps.is_finite() {
            return bad("bitrate must be positive");
        }
        if !(self.chunk_duration_s > 0.0) || !self.chunk_duration_s.is_finite() {
            return bad("chunk duration must be positive");
        }
        if self.cached_on.is_empty() {
            return bad("cached_on must name at least one pan-CDN");
        }
        Ok(())
    }

    /// Chunk length actually used: a video shorter than a chunk is one chunk.
    #[inline]
    pub fn chunk_s(&self) -> f64 {
        self.chunk_duration_s.min(self.duration_s)
    }

    #[inline]
    pub fn is_cached_on(&self, id: CdnId) -> bool {
        self.cached_on.contains(&id)
    }

    /// `d_k(r_k)` under constant bitrate.
    #[inline]
    pub fn range_megabits(&self, range_s: f64) -> f64 {
        self.bitrate_mbps * range_s
    }
}

/// The ordered per-user playlist and how long the user watches each entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediaList {
    pub videos: Vec<VideoSpec>,
    pub watch_duration_s: Vec<f64>,
    pub current_index: usize,
}

impl MediaList {
    pub fn new(videos: Vec<VideoSpec>, watch_duration_s: Vec<f64>) -> Result<Self> {
        let list = MediaList {
            videos,
            watch_duration_s,
            current_index: 0,
        };
        list.validate()?;
        Ok(list)
    }

    pub fn validate(&self) -> Result<()> {
        if self.videos.len() != self.watch_duration_s.len() {
            return Err(Error::InvalidInput(format!(
                "{} videos but {} watch durations",
                self.videos.len(),
                self.watch_duration_s.len()
            )));
        }
        for (v, &w) in self.videos.iter().zip(&self.watch_duration_s) {
            v.validate()?;
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "video {}: watch duration must be positive",
                    v.id
                )));
            }
        }
        if !self.videos.is_empty() && self.current_index >= self.videos.len() {
            return Err(Error::InvalidInput("current_index out of range".into()));
        }
        Ok(())
    }

    /// `N`, the media-list length.
    pub fn list_len(&self) -> usize {
        self.videos.len()
    }

    pub fn total_watch_s(&self) -> f64 {
        self.watch_duration_s.iter().sum()
    }
}

/// One download action. `video` is the position in the media list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeDecision {
    pub video: usize,
    pub pan_cdn_id: CdnId,
    pub range_duration_s: f64,
}

impl RangeDecision {
    pub fn validate_for(&self, video: &VideoSpec) -> Result<()> {
        if !(self.range_duration_s > 0.0) {
            return Err(Error::InvalidInput("range duration must be positive".into()));
        }
        if self.range_duration_s > video.chunk_s() + 1e-9 {
            return Err(Error::InvalidInput(format!(
                "range {}s exceeds chunk {}s",
                self.range_duration_s,
                video.chunk_s()
            )));
        }
        if !video.is_cached_on(self.pan_cdn_id) {
            return Err(Error::InvalidInput(format!(
                "video {} is not available on pan-CDN {}",
                video.id, self.pan_cdn_id
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeBytes {
    pub size_megabits: f64,
}

impl RangeBytes {
    pub fn for_range(video: &VideoSpec, range_s: f64) -> Self {
        RangeBytes {
            size_megabits: video.range_megabits(range_s),
        }
    }
}

/// Per-video buffered seconds sharing one player cap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferLedger {
    pub per_video_buffer_s: BTreeMap<usize, f64>,
    pub player_cap_s: f64,
}

impl BufferLedger {
    pub fn new(player_cap_s: f64) -> Self {
        BufferLedger {
            per_video_buffer_s: BTreeMap::new(),
            player_cap_s,
        }
    }

    pub fn with(mut self, video: usize, buffer_s: f64) -> Self {
        self.per_video_buffer_s.insert(video, buffer_s);
        self
    }

    pub fn get(&self, video: usize) -> Result<f64> {
        self.per_video_buffer_s
            .get(&video)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("video #{video} not in buffer ledger")))
    }

    pub fn total(&self) -> f64 {
        self.per_video_buffer_s.values().sum()
    }

    /// Sum over every video except `video`.
    pub fn others(&self, video: usize) -> f64 {
        self.per_video_buffer_s
            .iter()
            .filter(|(&k, _)| k != video)
            .map(|(_, &b)| b)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QoEParams {
    /// Rebuffer-ratio penalty.
    pub mu1: f64,
    /// Startup-delay penalty per second.
    pub mu2: f64,
    /// Buffered seconds needed to start playback.
    pub tau_st_s: f64,
    /// Cost weight in the utility.
    pub gamma: f64,
}

impl Default for QoEParams {
    fn default() -> Self {
        QoEParams {
            mu1: 2.0,
            mu2: 0.5,
            tau_st_s: 2.0,
            gamma: 0.3,
        }
    }
}

impl QoEParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu1 > 0.0 && self.mu2 > 0.0 && self.tau_st_s > 0.0 && self.gamma >= 0.0;
        if ok && [self.mu1, self.mu2, self.tau_st_s, self.gamma]
            .iter()
            .all(|x| x.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "QoE params must satisfy mu1, mu2, tau_st > 0 and gamma >= 0: {self:?}"
            )))
        }
    }
}

fn check_throughput(mbps: f64) -> Result<()> {
    if mbps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("throughput must be positive, got {mbps}")))
    }
}

/// Waiting time before a range fits in the shared player buffer.
///
/// `inner_s` is the target video's own term (already drained for the
/// currently viewed video), `others_s` the other videos' buffers.
#[inline]
pub fn overflow_wait(inner_s: f64, others_s: f64, range_s: f64, cap_s: f64) -> f64 {
    pos(inner_s + others_s + range_s - cap_s)
}

/// Buffer of the viewed video after downloading one of its own ranges.
#[inline]
pub fn current_buffer_after(buffer_s: f64, download_s: f64, range_s: f64, wait_s: f64) -> f64 {
    pos(pos(buffer_s - download_s) + range_s - wait_s)
}

/// Buffer of a prefetched video after one of its ranges lands.
#[inline]
pub fn prefetch_buffer_after(buffer_s: f64, range_s: f64, wait_s: f64) -> f64 {
    pos(buffer_s + range_s - wait_s)
}

/// The viewed video's buffer after playing through someone else's download.
#[inline]
pub fn drained(buffer_s: f64, download_s: f64) -> f64 {
    pos(buffer_s - download_s)
}

/// Downloading one of the currently viewed video's own ranges.
///
/// Returns `(ledger, download_time_s, wait_time_s)`.
pub fn advance_buffer_current(
    ledger: &BufferLedger,
    video: &VideoSpec,
    dec: &RangeDecision,
    avg_throughput_mbps: f64,
) -> Result<(BufferLedger, f64, f64)> {
    check_throughput(avg_throughput_mbps)?;
    let buffer = ledger.get(dec.video)?;
    let download_s = video.range_megabits(dec.range_duration_s) / avg_throughput_mbps;
    let inner = drained(buffer, download_s);
    let wait = overflow_wait(
        inner,
        ledger.others(dec.video),
        dec.range_duration_s,
        ledger.player_cap_s,
    );
    let mut out = ledger.clone();
    out.per_video_buffer_s.insert(
        dec.video,
        current_buffer_after(buffer, download_s, dec.range_duration_s, wait),
    );
    Ok((out, download_s, wait))
}

/// Downloading a range of a video other than the one being viewed.
///
/// The wait uses the same overflow structure as the viewed-video case with
/// the prefetched video's own buffer as the inner term; the viewed video
/// drains by the download time.
pub fn advance_buffer_prefetch(
    ledger: &BufferLedger,
    viewing: usize,
    video: &VideoSpec,
    dec: &RangeDecision,
    avg_throughput_mbps: f64,
) -> Result<(BufferLedger, f64, f64)> {
    check_throughput(avg_throughput_mbps)?;
    if dec.video == viewing {
        return Err(Error::InvalidInput(
            "prefetch target is the video being viewed".into(),
        ));
    }
    let target = ledger.get(dec.video)?;
    let viewed = ledger.get(viewing)?;
    let download_s = video.range_megabits(dec.range_duration_s) / avg_throughput_mbps;
    let wait = overflow_wait(
        target,
        ledger.others(dec.video),
        dec.range_duration_s,
        ledger.player_cap_s,
    );
    let mut out = ledger.clone();
    out.per_video_buffer_s.insert(
        dec.video,
        prefetch_buffer_after(target, dec.range_duration_s, wait),
    );
    out.per_video_buffer_s
        .insert(viewing, drained(viewed, download_s));
    Ok((out, download_s, wait))
}

/// Stall incurred while a range downloads against `buffer_s` of content.
#[inline]
pub fn rebuffer_time(buffer_s: f64, download_time_s: f64) -> f64 {
    pos(download_time_s - buffer_s)
}

/// Startup delay charged for one range: nothing once the buffer reaches the
/// startup threshold, otherwise the range's download time.
#[inline]
pub fn startup_delay(buffer_s: f64, tau_st_s: f64, download_time_s: f64) -> f64 {
    if buffer_s >= tau_st_s {
        0.0
    } else {
        download_time_s
    }
}

/// Total traffic cost of a sequence of downloads.
pub fn traffic_cost(decisions: &[(RangeDecision, RangeBytes)], catalog: &CdnCatalog) -> Result<f64> {
    decisions.iter().try_fold(0.0, |acc, (dec, bytes)| {
        Ok(acc + bytes.size_megabits * catalog.get(dec.pan_cdn_id)?.cost_coeff)
    })
}

/// Per-video QoE. Not clamped: heavy stalls drive it negative.
pub fn qoe_video(
    total_rebuffer_s: f64,
    startup_delay_s: f64,
    watch_duration_s: f64,
    params: &QoEParams,
) -> Result<f64> {
    if !(watch_duration_s > 0.0) {
        return Err(Error::InvalidInput(format!(
            "watch duration must be positive, got {watch_duration_s}"
        )));
    }
    Ok(1.0 - params.mu1 * (total_rebuffer_s / watch_duration_s) - params.mu2 * startup_delay_s)
}

pub fn qoe_media_list(per_video: &[f64]) -> f64 {
    per_video.iter().sum()
}

#[inline]
pub fn utility(qoe: f64, cost: f64, gamma: f64) -> f64 {
    qoe - gamma * cost
}

/// Accumulated outcome of a session.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub total_rebuffer_s: Vec<f64>,
    pub startup_delay_s: Vec<f64>,
    pub rebuffer_count: Vec<u32>,
    /// `T_v` per video, copied from the media list.
    pub watch_s: Vec<f64>,
    pub megabits_by_cdn: BTreeMap<CdnId, f64>,
    pub total_cost: f64,
}

impl SessionMetrics {
    pub fn new(media: &MediaList) -> Self {
        let n = media.list_len();
        SessionMetrics {
            total_rebuffer_s: vec![0.0; n],
            startup_delay_s: vec![0.0; n],
            rebuffer_count: vec![0; n],
            watch_s: media.watch_duration_s.clone(),
            megabits_by_cdn: BTreeMap::new(),
            total_cost: 0.0,
        }
    }

    pub fn per_video_qoe(&self, params: &QoEParams) -> Result<Vec<f64>> {
        (0..self.watch_s.len())
            .map(|i| {
                qoe_video(
                    self.total_rebuffer_s[i],
                    self.startup_delay_s[i],
                    self.watch_s[i],
                    params,
                )
            })
            .collect()
    }

    pub fn qoe(&self, params: &QoEParams) -> Result<f64> {
        Ok(qoe_media_list(&self.per_video_qoe(params)?))
    }

    pub fn utility(&self, params: &QoEParams) -> Result<f64> {
        Ok(utility(self.qoe(params)?, self.total_cost, params.gamma))
    }

    /// Total stall time over total watch time.
    pub fn rebuffer_ratio(&self) -> f64 {
        let watch: f64 = self.watch_s.iter().sum();
        if watch > 0.0 {
            self.total_rebuffer_s.iter().sum::<f64>() / watch
        } else {
            0.0
        }
    }

    pub fn mean_startup_delay_s(&self) -> f64 {
        if self.startup_delay_s.is_empty() {
            0.0
        } else {
            self.startup_delay_s.iter().sum::<f64>() / self.startup_delay_s.len() as f64
        }
    }

    pub fn total_megabits(&self) -> f64 {
        self.megabits_by_cdn.values().sum()
    }
}
