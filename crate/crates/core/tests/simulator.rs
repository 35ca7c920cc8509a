use std::sync::Arc;

use pira::baselines::PureCdn;
use pira::controller::{PiraConfig, PiraController};
use pira::error::{Error, Result};
use pira::link::LinkModel;
use pira::model::{CdnCatalog, CdnId, MediaList, VideoSpec};
use pira::session::{Engine, EventKind, SessionConfig, Transfer};
use pira::sim::{replay_check, run_episode, Decision, DecisionContext, RecordKind, SimConfig, Strategy};
use pira::traces::{synthesize_traces, Period, SynthConfig, TraceFile};
use pira::workload::{generate_workload, WorkloadConfig};
use proptest::prelude::*;

fn traces(series: Vec<Vec<f64>>) -> Arc<TraceFile> {
    Arc::new(TraceFile { trace_id: "t".into(), period: Period::OffPeak, mbps: series })
}

fn spec(id: &str, duration_s: f64, bitrate_mbps: f64) -> VideoSpec {
    VideoSpec { id: id.into(), duration_s, bitrate_mbps, chunk_duration_s: 4.0, cached_on: vec![CdnId(1)] }
}

struct Fixed(f64);

impl Strategy for Fixed {
    fn name(&self) -> String {
        "fixed".into()
    }
    fn decide(&mut self, _ctx: &DecisionContext) -> Result<Decision> {
        Ok(Decision::range(CdnId(1), self.0))
    }
}

#[test]
fn very_fast_link_has_no_stalls() {
    let media = MediaList::new(vec![spec("a", 10.0, 4.0)], vec![10.0]).unwrap();
    let catalog = CdnCatalog::from_costs(&[0.02]).unwrap();
    let link = LinkModel::new(traces(vec![vec![1e6; 100]]), 0.0, 1.0).unwrap();
    let r = run_episode(&media, &catalog, &link, &SimConfig::default(), &mut PureCdn { cdn: CdnId(1) }).unwrap();
    assert_eq!(r.metrics.total_rebuffer_s, vec![0.0]);
    assert!((r.metrics.startup_delay_s[0] - r.log[0].download_s).abs() < 1e-12);
    assert!(r.metrics.startup_delay_s[0] < 1e-4);
    assert!((r.metrics.total_cost - 10.0 * 4.0 * 0.02).abs() < 1e-12);
}

#[test]
fn throughput_equal_to_bitrate() {
    let media = MediaList::new(vec![spec("a", 6.0, 4.0)], vec![6.0]).unwrap();
    let catalog = CdnCatalog::from_costs(&[0.01]).unwrap();
    let link = LinkModel::new(traces(vec![vec![4.0; 100]]), 0.0, 1.0).unwrap();
    let r = run_episode(&media, &catalog, &link, &SimConfig::default(), &mut Fixed(2.0)).unwrap();
    assert_eq!(r.log.len(), 3);
    assert!((r.metrics.startup_delay_s[0] - 2.0).abs() < 1e-12);
    assert_eq!(r.metrics.rebuffer_count, vec![0]);
    assert!(r.metrics.total_rebuffer_s[0] < 1e-12);
}

#[test]
fn swipe_to_unbuffered_video_waits_for_its_first_range() {
    let media = MediaList::new(vec![spec("a", 4.0, 4.0), spec("b", 20.0, 4.0)], vec![4.0, 10.0]).unwrap();
    let catalog = CdnCatalog::from_costs(&[0.01]).unwrap();
    let link = LinkModel::new(traces(vec![vec![8.0; 200]]), 0.0, 1.0).unwrap();
    let mut cfg = SimConfig::default();
    cfg.session.preload.preload_count = 0;
    let r = run_episode(&media, &catalog, &link, &cfg, &mut Fixed(4.0)).unwrap();
    let swipe = r.events.iter().find(|e| e.kind == EventKind::Swipe && e.video == 0).unwrap();
    let started = r.events.iter().find(|e| e.kind == EventKind::StartupComplete && e.video == 1).unwrap();
    let first_b = r.log.iter().find(|d| d.video == 1).unwrap();
    assert_eq!(first_b.start_s, swipe.time_s);
    assert!((started.time_s - swipe.time_s - first_b.download_s).abs() < 1e-12);
    assert!((r.metrics.startup_delay_s[1] - first_b.download_s).abs() < 1e-12);
}

fn synthetic(seed: u64, videos: usize) -> (MediaList, LinkModel) {
    let t = synthesize_traces(&SynthConfig { seed, period: Period::Peak, ..SynthConfig::default() }).unwrap();
    let media = generate_workload(&WorkloadConfig { seed, video_count: videos, ..WorkloadConfig::default() }).unwrap();
    (media, LinkModel::new(Arc::new(t), 0.075, 0.8).unwrap())
}

#[test]
fn replay_detects_tampering() {
    let (media, link) = synthetic(3, 6);
    let catalog = CdnCatalog::from_costs(&[0.01, 0.007, 0.005, 0.0035]).unwrap();
    let cfg = SimConfig::default();
    let mut pira = PiraController::new(PiraConfig::default()).unwrap();
    let r = run_episode(&media, &catalog, &link, &cfg, &mut pira).unwrap();
    assert!(replay_check(&r, &media, &catalog, &cfg).unwrap());
    let mut bad = r.clone();
    bad.log[1].realized_mbps *= 1.01;
    assert!(!replay_check(&bad, &media, &catalog, &cfg).unwrap());
    let mut bad = r;
    bad.log[2].download_s += 0.5;
    assert!(!replay_check(&bad, &media, &catalog, &cfg).unwrap());
}

#[test]
fn infeasible_pure_strategy() {
    let mut v = spec("a", 8.0, 4.0);
    v.cached_on = vec![CdnId(2)];
    let media = MediaList::new(vec![v], vec![8.0]).unwrap();
    let catalog = CdnCatalog::from_costs(&[0.01, 0.005]).unwrap();
    let link = LinkModel::new(traces(vec![vec![8.0; 100]; 2]), 0.0, 1.0).unwrap();
    let err = run_episode(&media, &catalog, &link, &SimConfig::default(), &mut PureCdn { cdn: CdnId(1) }).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)));
}

#[test]
fn exhausted_trace_aborts() {
    let media = MediaList::new(vec![spec("a", 60.0, 8.0)], vec![60.0]).unwrap();
    let catalog = CdnCatalog::from_costs(&[0.01]).unwrap();
    let link = LinkModel::new(traces(vec![vec![2.0; 20]]), 0.0, 1.0).unwrap();
    let err = run_episode(&media, &catalog, &link, &SimConfig::default(), &mut Fixed(4.0)).unwrap_err();
    assert!(matches!(err, Error::TraceExhausted { .. }));
}

fn integral_finish(series: &[f64], start: f64, mb: f64) -> f64 {
    // step through whole seconds independently of the link model
    let mut t = start;
    let mut left = mb;
    loop {
        let i = t as usize;
        let end = (i + 1) as f64;
        let chunk = series[i] * (end - t);
        if chunk >= left {
            return t + left / series[i];
        }
        left -= chunk;
        t = end;
    }
}

proptest! {
    #[test]
    fn throughput_fidelity(series in proptest::collection::vec(0.5f64..50.0, 200), start in 0.0f64..50.0, mb in 0.1f64..200.0) {
        let link = LinkModel::new(traces(vec![series.clone()]), 0.0, 1.0).unwrap();
        let tr = link.download_range(CdnId(1), mb, start, true).unwrap();
        let want = integral_finish(&series, start, mb) - start;
        prop_assert!((tr.duration_s - want).abs() < 1e-9);
        prop_assert!((mb / tr.duration_s - mb / want).abs() < 1e-9 * (1.0 + mb / want));
    }

    #[test]
    fn episodes_are_consistent(seed in 0u64..1000, videos in 1usize..8) {
        let (media, link) = synthetic(seed, videos);
        let catalog = CdnCatalog::from_costs(&[0.01, 0.007, 0.005, 0.0035]).unwrap();
        let cfg = SimConfig::default();
        let run = || run_episode(&media, &catalog, &link, &cfg, &mut PiraController::new(PiraConfig::default()).unwrap()).unwrap();
        let (a, b) = (run(), run());
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert!(replay_check(&a, &media, &catalog, &cfg).unwrap());
        prop_assert!(a.events.windows(2).all(|w| w[0].time_s <= w[1].time_s));
        prop_assert!(a.log.windows(2).all(|w| w[0].start_s <= w[1].start_s));
        let m = &a.metrics;
        let ratio = m.total_rebuffer_s.iter().sum::<f64>() / media.watch_duration_s.iter().sum::<f64>();
        prop_assert_eq!(m.rebuffer_ratio(), ratio);
        prop_assert!(m.total_rebuffer_s.iter().chain(&m.startup_delay_s).all(|&x| x >= 0.0));
        for r in &a.log {
            if r.kind == RecordKind::Probe {
                prop_assert!(media.videos[r.video].cached_on.contains(&r.cdn));
            }
        }
    }

    #[test]
    fn shared_buffer_respects_cap(
        steps in proptest::collection::vec((0usize..3, 0.5f64..4.0, 0.01f64..3.0), 1..40),
        cap in 12.0f64..30.0,
    ) {
        let media = MediaList::new(
            vec![spec("a", 30.0, 4.0), spec("b", 30.0, 4.0), spec("c", 30.0, 4.0)],
            vec![30.0, 30.0, 30.0],
        ).unwrap();
        let catalog = CdnCatalog::from_costs(&[0.01]).unwrap();
        let cfg = SessionConfig { player_cap_s: cap, ..SessionConfig::default() };
        let e = Engine::new(&media, &catalog, &cfg).unwrap();
        let mut s = e.initial_state(&mut ());
        for (offset, r, dl) in steps {
            if s.done {
                break;
            }
            let video = s.viewing + offset;
            if video >= media.list_len() {
                continue;
            }
            let eff = e.effective_range(&s, video, r);
            if eff <= 0.0 {
                continue;
            }
            let tr = Transfer { duration_s: dl, setup_s: 0.0, cold: false, steady_mbps: 4.0 * eff / dl };
            e.apply_range(&mut s, video, CdnId(1), eff, &tr, &mut ());
            prop_assert!(e.total_buffer(&s) <= cap + 1e-9, "total {} cap {cap}", e.total_buffer(&s));
            for v in s.viewing..media.list_len() {
                if let Some(p) = s.progress(v) {
                    prop_assert!(p.buffer_s >= 0.0);
                }
            }
        }
    }
}
