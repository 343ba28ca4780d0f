//! Experiment runner: a TOML scenario expands into sweep points, each point
//! runs once per seed on the rayon pool, and results are written as CSV.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    degradation_grid, log_space, p_na_for_target, residual_error_exact, DegradationGrid,
};
use crate::config::{RanConfig, SimConfig};
use crate::error::{Error, Result};
use crate::harq::{HarqConfig, HarqMode};
use crate::link::{ErrorModelParams, LinkConfig};
use crate::metrics::{aggregate_runs, empirical_cdf, percentile, Aggregate, RunMetrics};
use crate::rlc::{RlcConfig, RlcMode};
use crate::stack::{run, RunOptions};
use crate::tcp::{TcpConfig, TcpVariant};
use crate::traffic::FtpConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "HARQ_VS_L1ARQ")]
    HarqVsL1Arq,
    #[serde(rename = "RESIDUAL_SWEEP")]
    ResidualSweep,
    #[serde(rename = "DELAY_SWEEP")]
    DelaySweep,
    #[serde(rename = "DEGRADATION_GRID")]
    DegradationGrid,
    #[serde(rename = "SINGLE_RUN")]
    SingleRun,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::HarqVsL1Arq,
        Experiment::ResidualSweep,
        Experiment::DelaySweep,
        Experiment::DegradationGrid,
        Experiment::SingleRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::HarqVsL1Arq => "HARQ_VS_L1ARQ",
            Experiment::ResidualSweep => "RESIDUAL_SWEEP",
            Experiment::DelaySweep => "DELAY_SWEEP",
            Experiment::DegradationGrid => "DEGRADATION_GRID",
            Experiment::SingleRun => "SINGLE_RUN",
        }
    }

    /// Lower-case stem used for output file names.
    pub fn file_stem(self) -> String {
        self.name().to_ascii_lowercase()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!(
                    "unknown experiment `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSweep {
    /// Target residual error rates; `p_na` is solved for each.
    pub targets: Vec<f64>,
    pub p_ch: f64,
    pub p_da: f64,
    /// Also run a point with `p_na = p_da = p_an = 0` (sweep value 0).
    pub include_zero: bool,
    pub variants: Vec<TcpVariant>,
    pub modes: Vec<RlcMode>,
}

impl Default for ResidualSweep {
    fn default() -> Self {
        ResidualSweep {
            targets: vec![2e-6, 1e-5, 5e-5, 8e-5, 1e-3],
            p_ch: 0.01,
            p_da: 1e-4,
            include_zero: true,
            variants: vec![TcpVariant::Reno, TcpVariant::Cubic],
            modes: vec![RlcMode::Am, RlcMode::Um],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelaySweep {
    pub delays_ms: Vec<f64>,
    pub target: f64,
    pub p_ch: f64,
    pub p_da: f64,
    pub variants: Vec<TcpVariant>,
    pub modes: Vec<RlcMode>,
}

impl Default for DelaySweep {
    fn default() -> Self {
        DelaySweep {
            delays_ms: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            target: 8e-5,
            p_ch: 0.01,
            p_da: 1e-4,
            variants: vec![TcpVariant::Cubic],
            modes: vec![RlcMode::Am, RlcMode::Um],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarqVsL1ArqSweep {
    /// First-transmission error rates to compare at.
    pub p_e: Vec<f64>,
}

impl Default for HarqVsL1ArqSweep {
    fn default() -> Self {
        HarqVsL1ArqSweep {
            p_e: vec![0.1, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSweep {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub p_ch: f64,
    pub mode: RlcMode,
    /// Degradation level in percent whose boundary is reported.
    pub level_pct: f64,
}

impl Default for GridSweep {
    fn default() -> Self {
        GridSweep {
            lo: 1e-5,
            hi: 1e-1,
            n: 7,
            p_ch: 0.01,
            mode: RlcMode::Um,
            level_pct: 5.0,
        }
    }
}

/// A scenario file: which experiments to run, seeds, and the base
/// configuration every sweep point starts from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub experiments: Vec<Experiment>,
    pub seeds: u64,
    pub first_seed: u64,
    pub sim_seconds: f64,
    pub warmup_seconds: f64,
    pub link: LinkConfig,
    pub errors: ErrorModelParams,
    pub harq: HarqConfig,
    pub rlc: RlcConfig,
    pub tcp: TcpConfig,
    pub traffic: FtpConfig,
    pub ran: RanConfig,
    pub residual_sweep: ResidualSweep,
    pub delay_sweep: DelaySweep,
    pub harq_vs_l1arq: HarqVsL1ArqSweep,
    pub degradation_grid: GridSweep,
}

impl Default for Scenario {
    fn default() -> Self {
        let base = SimConfig::default();
        Scenario {
            experiments: vec![Experiment::SingleRun],
            seeds: 10,
            first_seed: 0,
            sim_seconds: base.sim_seconds,
            warmup_seconds: base.warmup_seconds,
            link: base.link,
            errors: base.errors,
            harq: base.harq,
            rlc: base.rlc,
            tcp: base.tcp,
            traffic: base.traffic,
            ran: base.ran,
            residual_sweep: ResidualSweep::default(),
            delay_sweep: DelaySweep::default(),
            harq_vs_l1arq: HarqVsL1ArqSweep::default(),
            degradation_grid: GridSweep::default(),
        }
    }
}

/// Splits `key=value`; the value is parsed as TOML, falling back to a string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {v}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(v.to_string()),
    };
    Ok((k.to_string(), value))
}

fn apply_override(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl Scenario {
    /// Parses scenario text and applies `key=value` overrides (dotted keys)
    /// before deserializing, so overrides get the same checking as the file.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Scenario> {
        let mut root: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            apply_override(&mut root, &k, v)?;
        }
        let sc: Scenario = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        if self.experiments.is_empty() {
            return Err(Error::Config("no experiments selected".into()));
        }
        self.base().validate()?;
        let r = &self.residual_sweep;
        if r.variants.is_empty() || r.modes.is_empty() {
            return Err(Error::Config(
                "residual_sweep needs at least one variant and mode".into(),
            ));
        }
        let d = &self.delay_sweep;
        if d.delays_ms.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Config("delay_sweep.delays_ms must be >= 0".into()));
        }
        let g = &self.degradation_grid;
        if g.n < 2 {
            return Err(Error::Config(
                "degradation grid must be at least 2x2".into(),
            ));
        }
        if !(g.lo > 0.0 && g.hi > g.lo && g.hi <= 1.0) {
            return Err(Error::Config(
                "degradation_grid needs 0 < lo < hi <= 1".into(),
            ));
        }
        Ok(())
    }

    /// The per-run configuration shared by every point.
    pub fn base(&self) -> SimConfig {
        SimConfig {
            sim_seconds: self.sim_seconds,
            warmup_seconds: self.warmup_seconds,
            link: self.link,
            errors: self.errors,
            harq: self.harq,
            rlc: self.rlc,
            tcp: self.tcp,
            traffic: self.traffic,
            ran: self.ran,
        }
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }

    /// Expands one experiment into its sweep points. Targets that cannot be
    /// reached are returned as messages instead.
    pub fn points(&self, exp: Experiment) -> (Vec<Point>, Vec<String>) {
        let base = self.base();
        let mut pts = Vec::new();
        let mut skipped = Vec::new();
        match exp {
            Experiment::SingleRun => pts.push(Point::new("single", "none", 0.0, base)),
            Experiment::HarqVsL1Arq => {
                for (name, mode) in [
                    ("harq", HarqMode::HarqCombining),
                    ("l1_arq", HarqMode::L1Arq),
                ] {
                    for &p_e in &self.harq_vs_l1arq.p_e {
                        let mut c = base;
                        c.harq.mode = mode;
                        c.errors.p_e = p_e;
                        pts.push(Point::new(name, "p_e", p_e, c));
                    }
                }
            }
            Experiment::ResidualSweep => {
                let r = &self.residual_sweep;
                for &v in &r.variants {
                    for &m in &r.modes {
                        let series = series_name(v, m);
                        let mut c = base;
                        c.tcp.variant = v;
                        c.rlc.mode = m;
                        c.errors.p_ch = r.p_ch;
                        if r.include_zero {
                            let mut z = c;
                            z.errors.p_na = 0.0;
                            z.errors.p_da = 0.0;
                            z.errors.p_an = 0.0;
                            pts.push(Point::new(&series, "p_re_target", 0.0, z));
                        }
                        for &t in &r.targets {
                            match p_na_for_target(t, r.p_ch, c.errors.p_e, r.p_da) {
                                Ok(p_na) => {
                                    let mut x = c;
                                    x.errors.p_na = p_na;
                                    x.errors.p_da = r.p_da;
                                    pts.push(Point::new(&series, "p_re_target", t, x));
                                }
                                Err(e) => skipped.push(format!("{series} at {t:e}: {e}")),
                            }
                        }
                    }
                }
            }
            Experiment::DelaySweep => {
                let d = &self.delay_sweep;
                match p_na_for_target(d.target, d.p_ch, base.errors.p_e, d.p_da) {
                    Ok(p_na) => {
                        for &v in &d.variants {
                            for &m in &d.modes {
                                let series = series_name(v, m);
                                for &ms in &d.delays_ms {
                                    let mut c = base;
                                    c.tcp.variant = v;
                                    c.rlc.mode = m;
                                    c.tcp.network_delay_ms = ms;
                                    c.errors.p_ch = d.p_ch;
                                    c.errors.p_na = p_na;
                                    c.errors.p_da = d.p_da;
                                    pts.push(Point::new(&series, "network_delay_ms", ms, c));
                                }
                            }
                        }
                    }
                    Err(e) => skipped.push(format!("delay sweep target {:e}: {e}", d.target)),
                }
            }
            Experiment::DegradationGrid => {
                let g = &self.degradation_grid;
                let mut c = base;
                c.rlc.mode = g.mode;
                c.errors.p_ch = g.p_ch;
                c.errors.p_an = 0.0;
                let mut b = c;
                b.errors.p_na = 0.0;
                b.errors.p_da = 0.0;
                pts.push(Point::new("baseline", "p_na", 0.0, b));
                let axis = log_space(g.lo, g.hi, g.n);
                for &p_da in &axis {
                    for &p_na in &axis {
                        let mut x = c;
                        x.errors.p_na = p_na;
                        x.errors.p_da = p_da;
                        pts.push(Point::new(&format!("p_da={p_da:e}"), "p_na", p_na, x));
                    }
                }
            }
        }
        (pts, skipped)
    }
}

pub fn series_name(v: TcpVariant, m: RlcMode) -> String {
    let v = match v {
        TcpVariant::Reno => "reno",
        TcpVariant::Cubic => "cubic",
    };
    let m = match m {
        RlcMode::Am => "am",
        RlcMode::Um => "um",
    };
    format!("{v}_{m}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub series: String,
    pub sweep_param: &'static str,
    pub value: f64,
    pub cfg: SimConfig,
}

impl Point {
    fn new(series: &str, sweep_param: &'static str, value: f64, cfg: SimConfig) -> Point {
        Point {
            series: series.to_string(),
            sweep_param,
            value,
            cfg,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub metrics: RunMetrics,
    /// Throughput of every user in the run.
    pub user_tputs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: Point,
    pub runs: Vec<SeedResult>,
    pub agg: Aggregate,
    pub analytic_p_re: f64,
}

impl PointResult {
    pub fn user_samples(&self) -> Vec<f64> {
        self.runs
            .iter()
            .flat_map(|r| r.user_tputs.iter().copied())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub points: Vec<PointResult>,
    pub skipped: Vec<String>,
    pub grid: Option<DegradationGrid>,
}

impl ExperimentResult {
    pub fn find(&self, series: &str, value: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.point.series == series && p.point.value == value)
    }

    pub fn series(&self, series: &str) -> Vec<&PointResult> {
        self.points
            .iter()
            .filter(|p| p.point.series == series)
            .collect()
    }
}

/// Runs every (point, seed) pair of one experiment on the rayon pool.
/// Results come back in point-major, seed-minor order regardless of
/// scheduling.
pub fn run_experiment(sc: &Scenario, exp: Experiment) -> Result<ExperimentResult> {
    let (points, skipped) = sc.points(exp);
    for p in &points {
        p.cfg.validate()?;
    }
    let seeds = sc.seed_list();
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results: Vec<Result<SeedResult>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let out = run(&points[i].cfg, seed, RunOptions::default())?;
            Ok(SeedResult {
                user_tputs: out.users.iter().map(|u| u.throughput_bps).collect(),
                metrics: out.metrics,
            })
        })
        .collect();
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(points.len());
    for point in points {
        let runs = (0..seeds.len())
            .map(|_| results.next().expect("one result per job"))
            .collect::<Result<Vec<_>>>()?;
        let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
        let agg = aggregate_runs(&metrics)?;
        let analytic_p_re = residual_error_exact(&point.cfg.errors)?.p_re_exact;
        out.push(PointResult {
            point,
            runs,
            agg,
            analytic_p_re,
        });
    }
    let grid = if exp == Experiment::DegradationGrid {
        Some(build_grid(sc, &out)?)
    } else {
        None
    };
    Ok(ExperimentResult {
        experiment: exp,
        points: out,
        skipped,
        grid,
    })
}

fn build_grid(sc: &Scenario, points: &[PointResult]) -> Result<DegradationGrid> {
    let g = &sc.degradation_grid;
    let axis = log_space(g.lo, g.hi, g.n);
    let baseline = points
        .iter()
        .find(|p| p.point.series == "baseline")
        .ok_or(Error::Empty("degradation baseline"))?
        .agg
        .user_tput_mean;
    let cell = |p_na: f64, p_da: f64| {
        points
            .iter()
            .find(|p| p.point.cfg.errors.p_na == p_na && p.point.cfg.errors.p_da == p_da)
            .map_or(f64::NAN, |p| p.agg.user_tput_mean)
    };
    degradation_grid(baseline, &axis, &axis, cell)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn mbps(x: f64) -> String {
    num(x / 1e6)
}

pub const RAW_HEADER: [&str; 20] = [
    "series",
    "sweep_param",
    "value",
    "seed",
    "agg",
    "user_tput_mbps",
    "user_tput_se_mbps",
    "user_tput_p5_mbps",
    "user_tput_p50_mbps",
    "pkt_tput_mbps",
    "pkt_tput_se_mbps",
    "residual_rate",
    "residual_rate_se",
    "analytic_p_re",
    "sdu_loss_rate",
    "sdu_loss_rate_se",
    "files_completed",
    "e2e_file_loss_count",
    "fast_retransmits",
    "timeouts",
];

fn seed_row(p: &PointResult, r: &SeedResult) -> Vec<String> {
    let m = &r.metrics;
    vec![
        p.point.series.clone(),
        p.point.sweep_param.to_string(),
        num(p.point.value),
        m.seed.to_string(),
        "0".into(),
        mbps(m.user_throughput_bps),
        String::new(),
        String::new(),
        String::new(),
        m.mean_packet_throughput_bps().map_or(String::new(), mbps),
        String::new(),
        num(m.mac_residual_rate),
        String::new(),
        num(p.analytic_p_re),
        num(m.rlc_sdu_loss_rate),
        String::new(),
        m.files_completed.to_string(),
        m.e2e_file_loss_count.to_string(),
        m.cwnd.fast_retransmits.to_string(),
        m.cwnd.timeouts.to_string(),
    ]
}

fn agg_row(p: &PointResult) -> Vec<String> {
    let a = &p.agg;
    let samples = p.user_samples();
    let pct = |q| percentile(&samples, q).map_or(String::new(), mbps);
    let sum = |f: fn(&RunMetrics) -> u64| {
        p.runs
            .iter()
            .map(|r| f(&r.metrics))
            .sum::<u64>()
            .to_string()
    };
    vec![
        p.point.series.clone(),
        p.point.sweep_param.to_string(),
        num(p.point.value),
        String::new(),
        "1".into(),
        mbps(a.user_tput_mean),
        mbps(a.user_tput_se),
        pct(0.05),
        pct(0.5),
        mbps(a.pkt_tput_mean),
        mbps(a.pkt_tput_se),
        num(a.residual_rate),
        num(a.residual_rate_se),
        num(p.analytic_p_re),
        num(a.sdu_loss_rate),
        num(a.sdu_loss_rate_se),
        sum(|m| m.files_completed),
        sum(|m| m.e2e_file_loss_count),
        sum(|m| m.cwnd.fast_retransmits),
        sum(|m| m.cwnd.timeouts),
    ]
}

/// Per-seed rows followed by one `agg=1` row for each point.
pub fn write_raw<W: Write>(res: &ExperimentResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RAW_HEADER)?;
    for p in &res.points {
        for r in &p.runs {
            out.write_record(seed_row(p, r))?;
        }
        out.write_record(agg_row(p))?;
    }
    out.flush()?;
    Ok(())
}

/// Only the aggregate rows, same columns as the raw file.
pub fn write_agg<W: Write>(res: &ExperimentResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RAW_HEADER)?;
    for p in &res.points {
        out.write_record(agg_row(p))?;
    }
    out.flush()?;
    Ok(())
}

/// Empirical CDF of per-user throughput for every point.
pub fn write_cdf<W: Write>(res: &ExperimentResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["series", "sweep_param", "value", "user_tput_mbps", "cdf"])?;
    for p in &res.points {
        for (x, f) in empirical_cdf(&p.user_samples())? {
            out.write_record([
                p.point.series.clone(),
                p.point.sweep_param.to_string(),
                num(p.point.value),
                mbps(x),
                num(f),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Degradation matrix: one row per `p_na`, one column per `p_da`.
pub fn write_grid<W: Write>(grid: &DegradationGrid, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["p_na\\p_da".to_string()];
    header.extend(grid.p_da.iter().map(|&x| num(x)));
    out.write_record(&header)?;
    for (i, row) in grid.loss_pct.iter().enumerate() {
        let mut rec = vec![num(grid.p_na[i])];
        rec.extend(row.iter().map(|&x| num(x)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// For each `p_da`, the largest grid `p_na` whose degradation is below `level`.
pub fn write_boundary<W: Write>(grid: &DegradationGrid, level: f64, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p_da", "max_p_na_within", "level_pct"])?;
    for (p_da, best) in grid.boundary(level) {
        out.write_record([num(p_da), best.map_or(String::new(), num), num(level)])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes every output file of one experiment into `dir` and returns the
/// file names written.
pub fn write_outputs(sc: &Scenario, res: &ExperimentResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let stem = res.experiment.file_stem();
    let mut names = Vec::new();
    let mut create = |suffix: &str| -> Result<fs::File> {
        let name = format!("{stem}_{suffix}.csv");
        let f = fs::File::create(dir.join(&name))?;
        names.push(name);
        Ok(f)
    };
    write_raw(res, create("raw")?)?;
    write_agg(res, create("agg")?)?;
    if matches!(
        res.experiment,
        Experiment::HarqVsL1Arq | Experiment::SingleRun
    ) {
        write_cdf(res, create("cdf")?)?;
    }
    if let Some(grid) = &res.grid {
        write_grid(grid, create("matrix")?)?;
        write_boundary(grid, sc.degradation_grid.level_pct, create("boundary")?)?;
    }
    Ok(names)
}

/// Runs the selected experiments (all listed in the scenario when `only` is
/// `None`), writing CSVs and `resolved_config.txt` into `dir`.
pub fn run_scenario(
    sc: &Scenario,
    dir: &Path,
    only: Option<Experiment>,
) -> Result<Vec<ExperimentResult>> {
    sc.validate()?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("resolved_config.txt"), sc.to_toml())?;
    let exps = match only {
        Some(e) => vec![e],
        None => sc.experiments.clone(),
    };
    let mut all = Vec::new();
    for e in exps {
        let res = run_experiment(sc, e)?;
        write_outputs(sc, &res, dir)?;
        all.push(res);
    }
    Ok(all)
}
