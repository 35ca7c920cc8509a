use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pira::config::{load_config, override_value, PruningMode};
use pira::experiment::{compare, episodes_csv, sweep, CompareReport, ExperimentConfig, StrategyKind, SweepAxis};
use pira::traces::{parse_trace, synthesize_traces, Period, SynthConfig};
use pira::workload::{generate_workload, parse_workload, write_workload, WorkloadConfig};
use pira::Error;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "pira", version, about = "Pan-CDN short-video streaming simulator and range/CDN controller")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one strategy over the configured periods and seeds.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "pira")]
        strategy: String,
    },
    /// Run several strategies on the same episodes and tabulate them.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies (default: all).
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Vary gamma or the planning horizon for one strategy.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "pira")]
        strategy: String,
    },
    /// Write a synthetic trace file.
    GenTraces {
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic workload file.
    GenWorkload {
        #[command(flatten)]
        common: Common,
    },
    /// Check a configuration and any trace or workload files it names.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Flat TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// off-peak, peak or evening-peak; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    period: Vec<String>,
    /// Output directory (simulate, compare, sweep) or file (gen-*).
    #[arg(long)]
    out: Option<PathBuf>,
    /// on, off, i-only or ii-only.
    #[arg(long)]
    pruning: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Trace file to use instead of synthetic traces.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Workload file to use instead of generated workloads.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Any other configuration key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::Config { .. }) => 1,
            Failure::Lib(Error::Infeasible(_)) => 3,
            Failure::Lib(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

impl Common {
    fn resolve(&self, strategies: Option<Vec<StrategyKind>>) -> Res<ExperimentConfig> {
        let mut ov: Vec<(String, toml::Value)> = Vec::new();
        let mut put = |k: &str, v: toml::Value| ov.push((k.to_string(), v));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            put(k.trim(), override_value(v.trim()));
        }
        if let Some(s) = self.seed {
            put("seed", toml::Value::Integer(s as i64));
        }
        if let Some(r) = self.replications {
            put("replications", toml::Value::Integer(r as i64));
        }
        if !self.period.is_empty() {
            let ps: Vec<toml::Value> = self.period.iter().map(|p| toml::Value::String(p.clone())).collect();
            put("periods", toml::Value::Array(ps));
        }
        if let Some(p) = &self.pruning {
            p.parse::<PruningMode>().map_err(|e| Failure::Usage(e.to_string()))?;
            put("pruning", toml::Value::String(p.clone()));
        }
        if let Some(h) = self.horizon {
            put("horizon", toml::Value::Integer(h as i64));
        }
        if let Some(g) = self.gamma {
            put("gamma", toml::Value::Float(g));
        }
        if let Some(t) = &self.traces {
            put("traces_path", toml::Value::String(t.display().to_string()));
        }
        if let Some(w) = &self.workload {
            put("workload_path", toml::Value::String(w.display().to_string()));
        }
        if let Some(s) = strategies {
            let names = s.iter().map(|k| toml::Value::String(k.to_string())).collect();
            put("strategies", toml::Value::Array(names));
        }
        Ok(load_config(self.config.as_deref(), &ov)?)
    }
}

fn parse_strategies(list: &str) -> Res<Vec<StrategyKind>> {
    list.split(',')
        .map(|s| s.trim().parse::<StrategyKind>().map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn write_file(path: &Path, text: &str) -> Res<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn print_table(report: &CompareReport) {
    println!(
        "{:<12} {:<12} {:>22} {:>20} {:>9} {:>9}",
        "period", "strategy", "rebuffer ratio", "normalized cost", "startup", "utility"
    );
    for r in &report.rows {
        let period = r.period.map_or("all".to_string(), |p| p.to_string());
        println!(
            "{:<12} {:<12} {:>11.5} ±{:>9.5} {:>9.4} ±{:>8.4} {:>9.3} {:>9.3}",
            period,
            r.strategy.to_string(),
            r.rebuffer_ratio.mean,
            r.rebuffer_ratio.half_width,
            r.normalized_cost.mean,
            r.normalized_cost.half_width,
            r.startup_s.mean,
            r.utility.mean
        );
    }
}

fn run_compare(cfg: &ExperimentConfig, out: Option<&Path>) -> Res<()> {
    let (report, timing) = compare(cfg)?;
    print_table(&report);
    if let Some(dir) = out {
        write_file(&dir.join("report.json"), &to_json(&report))?;
        write_file(&dir.join("episodes.csv"), &episodes_csv(&report.episodes))?;
        write_file(&dir.join("timing.json"), &to_json(&timing))?;
    }
    Ok(())
}

fn single_period(common: &Common, cfg: &ExperimentConfig) -> Res<Period> {
    match cfg.periods.as_slice() {
        [p] => Ok(*p),
        _ if common.period.is_empty() => Ok(Period::OffPeak),
        _ => Err(Failure::Usage("gen-traces takes a single --period".into())),
    }
}

fn run(cli: Cli) -> Res<()> {
    match cli.cmd {
        Cmd::Simulate { common, strategy } => {
            let kinds = parse_strategies(&strategy)?;
            if kinds.len() != 1 {
                return Err(Failure::Usage("simulate takes one --strategy; use compare for several".into()));
            }
            let cfg = common.resolve(Some(kinds))?;
            run_compare(&cfg, common.out.as_deref())
        }
        Cmd::Compare { common, strategy } => {
            let kinds = strategy.as_deref().map(parse_strategies).transpose()?;
            let cfg = common.resolve(kinds)?;
            run_compare(&cfg, common.out.as_deref())
        }
        Cmd::Sweep { common, axis, values, strategy } => {
            let axis: SweepAxis = axis.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("bad sweep value `{v}`"))))
                .collect::<Res<_>>()?;
            let kind: StrategyKind = strategy.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let cfg = common.resolve(None)?;
            let (report, timings) = sweep(&cfg, axis, &values, kind)?;
            println!("{:>8} {:>10} {:>10} {:>12} {:>16} {:>10}", "value", "utility", "normalized", "rebuffer", "scored", "wall_s");
            for (p, t) in report.points.iter().zip(&timings) {
                println!(
                    "{:>8} {:>10.4} {:>10.4} {:>12.6} {:>16} {:>10.2}",
                    p.value, p.utility.mean, p.normalized_utility, p.rebuffer_ratio.mean, p.scored_sequences, t.episode_wall_s
                );
            }
            if let Some(dir) = common.out.as_deref() {
                write_file(&dir.join("sweep.json"), &to_json(&report))?;
                write_file(&dir.join("timing.json"), &to_json(&timings))?;
            }
            Ok(())
        }
        Cmd::GenTraces { common } => {
            let cfg = common.resolve(None)?;
            let period = single_period(&common, &cfg)?;
            let out = common.out.as_deref().ok_or_else(|| Failure::Usage("gen-traces needs --out FILE".into()))?;
            let trace = synthesize_traces(&SynthConfig { seed: cfg.seed, period, ..cfg.synth.clone() })?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            trace.write(out)?;
            println!("wrote {} ({} pan-CDNs, {} s, {})", out.display(), trace.cdn_count(), trace.len_s(), period);
            Ok(())
        }
        Cmd::GenWorkload { common } => {
            let cfg = common.resolve(None)?;
            let out = common.out.as_deref().ok_or_else(|| Failure::Usage("gen-workload needs --out FILE".into()))?;
            let media = generate_workload(&WorkloadConfig { seed: cfg.seed, ..cfg.workload.clone() })?;
            write_workload(&media, out)?;
            println!("wrote {} ({} videos)", out.display(), media.videos.len());
            Ok(())
        }
        Cmd::Validate { common } => {
            let cfg = common.resolve(None)?;
            if let Some(p) = &cfg.traces_path {
                let t = parse_trace(p.as_ref())?;
                if t.cdn_count() < cfg.cost_per_mb.len() {
                    return Err(Error::InvalidInput(format!(
                        "{p}: {} pan-CDN series for {} configured pan-CDNs",
                        t.cdn_count(),
                        cfg.cost_per_mb.len()
                    ))
                    .into());
                }
            }
            if let Some(p) = &cfg.workload_path {
                parse_workload(p.as_ref(), cfg.workload.chunk_duration_s)?;
            }
            print!("{}", to_json(&cfg));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
