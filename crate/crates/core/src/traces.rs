//! Throughput trace files and the synthetic diurnal trace generator.
//!
//! File format (UTF-8, one sample per row, 1 s cadence, rows of one pan-CDN
//! contiguous):
//!
//! ```text
//! # trace_id=synth-7 period=evening-peak
//! cdn_id,t_s,mbps
//! 1,0,24.1873
//! 1,1,23.0021
//! ...
//! ```

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CdnId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Period {
    OffPeak,
    Peak,
    EveningPeak,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::OffPeak, Period::Peak, Period::EveningPeak];

    pub fn label(self) -> &'static str {
        match self {
            Period::OffPeak => "off-peak",
            Period::Peak => "peak",
            Period::EveningPeak => "evening-peak",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Period::OffPeak => 0x0ff_0001,
            Period::Peak => 0x9ea_0002,
            Period::EveningPeak => 0xe0e_0003,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off-peak" => Ok(Period::OffPeak),
            "peak" => Ok(Period::Peak),
            "evening-peak" => Ok(Period::EveningPeak),
            other => Err(Error::InvalidInput(format!(
                "unknown period `{other}` (expected off-peak, peak or evening-peak)"
            ))),
        }
    }
}

/// Per-pan-CDN piecewise-constant throughput at 1 s resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub trace_id: String,
    pub period: Period,
    /// `mbps[j][t]`: pan-CDN `j+1` during `[t, t+1)`.
    pub mbps: Vec<Vec<f64>>,
}

impl TraceFile {
    pub fn cdn_count(&self) -> usize {
        self.mbps.len()
    }

    pub fn len_s(&self) -> usize {
        self.mbps.first().map_or(0, Vec::len)
    }

    pub fn series(&self, cdn: CdnId) -> &[f64] {
        &self.mbps[cdn.index()]
    }

    pub fn mean(&self, cdn: CdnId) -> f64 {
        let s = self.series(cdn);
        s.iter().sum::<f64>() / s.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.mbps.is_empty() {
            return Err(Error::InvalidInput("trace has no pan-CDN series".into()));
        }
        let len = self.len_s();
        if len == 0 {
            return Err(Error::InvalidInput("trace series are empty".into()));
        }
        for (j, s) in self.mbps.iter().enumerate() {
            if s.len() != len {
                return Err(Error::InvalidInput(format!(
                    "pan-CDN {} series has {} samples, expected {len}",
                    j + 1,
                    s.len()
                )));
            }
            if let Some(t) = s.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "pan-CDN {} has nonpositive throughput at t={t}",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.cdn_count() * self.len_s() * 12 + 64);
        let _ = writeln!(out, "# trace_id={} period={}", self.trace_id, self.period);
        out.push_str("cdn_id,t_s,mbps\n");
        for (j, s) in self.mbps.iter().enumerate() {
            for (t, v) in s.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", j + 1, t, v);
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn parse_trace(path: &Path) -> Result<TraceFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace_str(&text, &path.display().to_string())
}

/// Parses trace text; `origin` names the source in error messages.
pub fn parse_trace_str(text: &str, origin: &str) -> Result<TraceFile> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty trace file".into()))?;
    let meta = header
        .strip_prefix('#')
        .ok_or_else(|| err(ln, "expected `# trace_id=... period=...` header".into()))?;
    let mut trace_id = None;
    let mut period = None;
    for kv in meta.split_whitespace() {
        match kv.split_once('=') {
            Some(("trace_id", v)) => trace_id = Some(v.to_string()),
            Some(("period", v)) => period = Some(v.parse::<Period>().map_err(|e| err(ln, e.to_string()))?),
            _ => return Err(err(ln, format!("unrecognized header field `{kv}`"))),
        }
    }
    let trace_id = trace_id.ok_or_else(|| err(ln, "header is missing trace_id".into()))?;
    let period = period.ok_or_else(|| err(ln, "header is missing period".into()))?;

    let body_start = ln;
    let body: String = text.lines().skip(body_start).collect::<Vec<_>>().join("\n");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| err(body_start + 1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["cdn_id", "t_s", "mbps"] {
        return Err(err(body_start + 1, format!("expected columns cdn_id,t_s,mbps, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }

    let mut mbps: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            err(body_start + line, e.to_string())
        })?;
        let line = body_start + rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(err(line, format!("expected 3 fields, got {}", rec.len())));
        }
        let cdn: u8 = rec[0]
            .parse()
            .map_err(|_| err(line, format!("bad cdn_id `{}`", &rec[0])))?;
        let t: usize = rec[1]
            .parse()
            .map_err(|_| err(line, format!("bad t_s `{}` (integer seconds expected)", &rec[1])))?;
        let v: f64 = rec[2]
            .parse()
            .map_err(|_| err(line, format!("bad mbps `{}`", &rec[2])))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(err(line, format!("throughput must be positive, got {v}")));
        }
        if cdn == 0 {
            return Err(err(line, "cdn_id must be >= 1".into()));
        }
        let idx = usize::from(cdn) - 1;
        if idx == mbps.len() {
            mbps.push(Vec::new());
        } else if idx + 1 != mbps.len() {
            return Err(err(
                line,
                format!("rows for pan-CDN {cdn} are not contiguous or ids are not ascending from 1"),
            ));
        }
        let series = &mut mbps[idx];
        if t != series.len() {
            return Err(err(
                line,
                format!("timestamp gap for pan-CDN {cdn}: expected t={}, got {t}", series.len()),
            ));
        }
        series.push(v);
    }

    let trace = TraceFile {
        trace_id,
        period,
        mbps,
    };
    trace
        .validate()
        .map_err(|e| err(text.lines().count(), e.to_string()))?;
    Ok(trace)
}

/// Synthetic generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Long-run mean per pan-CDN, before the period multiplier.
    pub means_mbps: Vec<f64>,
    pub off_peak_multipliers: Vec<f64>,
    pub peak_multipliers: Vec<f64>,
    pub evening_peak_multipliers: Vec<f64>,
    /// AR(1) coefficient of the log-throughput process.
    pub ar: f64,
    /// Marginal standard deviation of log-throughput.
    pub sigma: f64,
    /// Per pan-CDN factor on `sigma`; cheaper tiers fluctuate more.
    pub sigma_multipliers: Vec<f64>,
    pub length_s: usize,
    pub seed: u64,
    pub period: Period,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            means_mbps: vec![25.0, 22.0, 18.0, 14.0],
            off_peak_multipliers: vec![1.0, 1.0, 1.0, 1.0],
            peak_multipliers: vec![0.85, 0.85, 0.8, 0.8],
            evening_peak_multipliers: vec![0.75, 0.75, 0.6, 0.85],
            ar: 0.9,
            sigma: 0.35,
            sigma_multipliers: vec![0.8, 0.9, 1.0, 1.3],
            length_s: 3600,
            seed: 1,
            period: Period::OffPeak,
        }
    }
}

impl SynthConfig {
    pub fn multipliers(&self, period: Period) -> &[f64] {
        match period {
            Period::OffPeak => &self.off_peak_multipliers,
            Period::Peak => &self.peak_multipliers,
            Period::EveningPeak => &self.evening_peak_multipliers,
        }
    }

    /// Configured long-run mean of pan-CDN `j+1` in `period`.
    pub fn target_mean(&self, j: usize, period: Period) -> f64 {
        self.means_mbps[j] * self.multipliers(period)[j]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.means_mbps.len();
        if n == 0 {
            return Err(Error::InvalidInput("means_mbps is empty".into()));
        }
        if self.means_mbps.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidInput("trace means must be positive".into()));
        }
        for p in Period::ALL {
            let m = self.multipliers(p);
            if m.len() != n || m.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidInput(format!(
                    "{p} multipliers must be {n} positive values"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.ar) {
            return Err(Error::InvalidInput("AR coefficient must be in [0, 1)".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidInput("sigma must be nonnegative".into()));
        }
        if self.sigma_multipliers.len() != n || self.sigma_multipliers.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidInput(format!("sigma_multipliers must be {n} nonnegative values")));
        }
        if self.length_s == 0 {
            return Err(Error::InvalidInput("trace length must be positive".into()));
        }
        Ok(())
    }
}

/// Mean-preserving lognormal AR(1) traces, one independent stream per
/// pan-CDN. Values are rounded to 1e-4 Mbps so the file form is exact.
pub fn synthesize_traces(cfg: &SynthConfig) -> Result<TraceFile> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ cfg.period.salt().wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let innovation = (1.0 - cfg.ar * cfg.ar).sqrt();
    let mbps = (0..cfg.means_mbps.len())
        .map(|j| {
            let mean = cfg.target_mean(j, cfg.period);
            let sigma = cfg.sigma * cfg.sigma_multipliers[j];
            let correction = sigma * sigma / 2.0;
            let mut x: f64 = StandardNormal.sample(&mut rng);
            (0..cfg.length_s)
                .map(|t| {
                    if t > 0 {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        x = cfg.ar * x + innovation * e;
                    }
                    let v = mean * (sigma * x - correction).exp();
                    ((v * 1e4).round() / 1e4).max(1e-4)
                })
                .collect()
        })
        .collect();
    Ok(TraceFile {
        trace_id: format!("synth-{}-{}", cfg.seed, cfg.period),
        period: cfg.period,
        mbps,
    })
}
