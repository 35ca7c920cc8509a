//! Media-list workloads: generation and the per-video record file.
//!
//! File format: a header row then one record per video,
//! `id,duration_s,bitrate_mbps,watch_s,cached_on` with `cached_on` a
//! `|`-separated list of pan-CDN ids.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CdnId, MediaList, VideoSpec, DEFAULT_CHUNK_S};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub video_count: usize,
    /// Probability mass of the short (5-30 s) duration component.
    pub short_fraction: f64,
    pub short_range_s: (f64, f64),
    pub long_range_s: (f64, f64),
    pub bitrates_mbps: Vec<f64>,
    pub watch_median_s: f64,
    pub watch_sigma: f64,
    /// Watch time is capped at this many plays of the video.
    pub max_plays: f64,
    /// Per pan-CDN probability that a video is servable from it.
    pub cache_coverage: Vec<f64>,
    pub chunk_duration_s: f64,
    pub seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            video_count: 25,
            short_fraction: 0.73,
            short_range_s: (5.0, 30.0),
            long_range_s: (30.0, 120.0),
            bitrates_mbps: vec![4.0, 6.0, 8.0],
            watch_median_s: 10.0,
            watch_sigma: 0.8,
            max_plays: 2.0,
            cache_coverage: vec![1.0, 1.0, 1.0, 1.0],
            chunk_duration_s: DEFAULT_CHUNK_S,
            seed: 1,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("workload: {m}")));
        if !(0.0..=1.0).contains(&self.short_fraction) {
            return bad("short_fraction must be in [0, 1]");
        }
        for (lo, hi) in [self.short_range_s, self.long_range_s] {
            if !(lo > 0.0 && hi > lo) {
                return bad("duration ranges must be positive and increasing");
            }
        }
        if self.bitrates_mbps.is_empty() || self.bitrates_mbps.iter().any(|&b| !(b > 0.0)) {
            return bad("bitrates must be a nonempty list of positive values");
        }
        if !(self.watch_median_s > 0.0) || !(self.watch_sigma >= 0.0) || !(self.max_plays > 0.0) {
            return bad("watch model parameters must be positive");
        }
        if self.cache_coverage.is_empty()
            || self.cache_coverage.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return bad("cache coverage probabilities must be in [0, 1]");
        }
        if !(self.chunk_duration_s > 0.0) {
            return bad("chunk duration must be positive");
        }
        Ok(())
    }
}

fn round_ms(x: f64) -> f64 {
    (x * 1e3).round() / 1e3
}

/// Seeded media list. The swipe schedule is implied by the watch durations.
pub fn generate_workload(cfg: &WorkloadConfig) -> Result<MediaList> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0xA076_1D64_78BD_642F) ^ 0x5bd1e995);
    let watch_dist = LogNormal::new(cfg.watch_median_s.ln(), cfg.watch_sigma)
        .map_err(|e| Error::InvalidInput(format!("watch distribution: {e}")))?;
    let mut videos = Vec::with_capacity(cfg.video_count);
    let mut watch = Vec::with_capacity(cfg.video_count);
    for i in 0..cfg.video_count {
        let (lo, hi) = if rng.random::<f64>() < cfg.short_fraction {
            cfg.short_range_s
        } else {
            cfg.long_range_s
        };
        let duration = round_ms(rng.random_range(lo..hi)).max(0.001);
        let bitrate = cfg.bitrates_mbps[rng.random_range(0..cfg.bitrates_mbps.len())];
        let w: f64 = watch_dist.sample(&mut rng);
        let w = round_ms(w.min(duration * cfg.max_plays)).max(0.5);
        let mut cached_on: Vec<CdnId> = cfg
            .cache_coverage
            .iter()
            .enumerate()
            .filter(|&(_, &p)| rng.random::<f64>() < p)
            .map(|(j, _)| CdnId::from_index(j))
            .collect();
        if cached_on.is_empty() {
            cached_on.push(CdnId(1));
        }
        videos.push(VideoSpec {
            id: format!("v{}-{i}", cfg.seed),
            duration_s: duration,
            bitrate_mbps: bitrate,
            chunk_duration_s: cfg.chunk_duration_s,
            cached_on,
        });
        watch.push(w);
    }
    MediaList::new(videos, watch)
}

/// Cumulative playback seconds at which the user swipes past each video.
pub fn swipe_schedule(media: &MediaList) -> Vec<f64> {
    media
        .watch_duration_s
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

pub fn workload_to_text(media: &MediaList) -> String {
    let mut out = String::from("id,duration_s,bitrate_mbps,watch_s,cached_on\n");
    for (v, w) in media.videos.iter().zip(&media.watch_duration_s) {
        let cached: Vec<String> = v.cached_on.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            v.id,
            v.duration_s,
            v.bitrate_mbps,
            w,
            cached.join("|")
        );
    }
    out
}

pub fn write_workload(media: &MediaList, path: &Path) -> Result<()> {
    std::fs::write(path, workload_to_text(media)).map_err(|e| Error::io(path, e))
}

pub fn parse_workload(path: &Path, chunk_duration_s: f64) -> Result<MediaList> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_workload_str(&text, &path.display().to_string(), chunk_duration_s)
}

pub fn parse_workload_str(text: &str, origin: &str, chunk_duration_s: f64) -> Result<MediaList> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let expected = ["id", "duration_s", "bitrate_mbps", "watch_s", "cached_on"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(err(1, format!("expected columns {}", expected.join(","))));
    }
    let mut videos = Vec::new();
    let mut watch = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| err(line, format!("bad {name} `{}`", &rec[i])))?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(err(line, format!("{name} must be positive, got {v}")))
            }
        };
        let duration = num(1, "duration_s")?;
        let bitrate = num(2, "bitrate_mbps")?;
        let w = num(3, "watch_s")?;
        let mut cached_on = Vec::new();
        for part in rec[4].split('|').filter(|p| !p.is_empty()) {
            let id: u8 = part
                .parse()
                .ok()
                .filter(|&x| x >= 1)
                .ok_or_else(|| err(line, format!("bad pan-CDN id `{part}` in cached_on")))?;
            cached_on.push(CdnId(id));
        }
        if cached_on.is_empty() {
            return Err(err(line, "cached_on is empty".into()));
        }
        cached_on.sort();
        cached_on.dedup();
        videos.push(VideoSpec {
            id: rec[0].to_string(),
            duration_s: duration,
            bitrate_mbps: bitrate,
            chunk_duration_s,
            cached_on,
        });
        watch.push(w);
    }
    MediaList::new(videos, watch).map_err(|e| err(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_roundtrip() {
        let cfg = WorkloadConfig { video_count: 40, seed: 9, ..Default::default() };
        let a = generate_workload(&cfg).unwrap();
        assert_eq!(a, generate_workload(&cfg).unwrap());
        let parsed = parse_workload_str(&workload_to_text(&a), "mem", cfg.chunk_duration_s).unwrap();
        assert_eq!(parsed, a);
    }

    #[test]
    fn single_video_no_swipes() {
        let cfg = WorkloadConfig { video_count: 1, ..Default::default() };
        let m = generate_workload(&cfg).unwrap();
        assert_eq!(m.list_len(), 1);
        assert_eq!(swipe_schedule(&m).len(), 1);
        assert_eq!(swipe_schedule(&m)[0], m.watch_duration_s[0]);
    }

    #[test]
    fn duration_and_watch_statistics() {
        let cfg = WorkloadConfig { video_count: 10_000, seed: 3, ..Default::default() };
        let m = generate_workload(&cfg).unwrap();
        let short = m.videos.iter().filter(|v| v.duration_s < 30.0).count() as f64 / 10_000.0;
        assert!((short - 0.73).abs() <= 0.03, "short fraction {short}");
        let mut w = m.watch_duration_s.clone();
        w.sort_by(f64::total_cmp);
        assert!(w[w.len() / 2] < 15.0);
    }

    #[test]
    fn coverage_never_empty() {
        let cfg = WorkloadConfig { video_count: 200, cache_coverage: vec![0.0, 0.3], ..Default::default() };
        let m = generate_workload(&cfg).unwrap();
        assert!(m.videos.iter().all(|v| !v.cached_on.is_empty()));
        assert!(m.videos.iter().all(|v| v.cached_on == [CdnId(1)] || v.cached_on == [CdnId(2)]));
    }

    #[test]
    fn parse_errors_name_line() {
        let text = "id,duration_s,bitrate_mbps,watch_s,cached_on\na,10,2,5,1|2\nb,-3,2,5,1\n";
        match parse_workload_str(text, "w.csv", 4.0).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e:?}"),
        }
    }
}
