//! Monte-Carlo experiment driver: sweeps, baselines, CSV output.
//!
//! Detail CSV columns, in order:
//! `mode, seed, grid_value, C_B, C_E, C_S, power_used_W, interference_W,
//! tau_opt, P_S_W, iterations, wall_ms, flags`.
//! Missing values (τ outside robust mode, P_S outside no-CSI mode) are
//! empty; infeasible or failed runs carry NaN rates.
//!
//! The aggregate CSV has one row per (grid point, scheme) with the mean of
//! every numeric column over its finite entries. `wall_ms` is left out so
//! the aggregate file is byte-identical across runs and thread counts.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{db_to_linear, generate_channels, rates, ChannelSet, PhaseVector, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fullcsi::{ao_full_csi, AoInit};
use crate::nocsi::{run_no_csi, QosTarget};
use crate::par::Execution;
use crate::result::{Flags, RunResult};
use crate::robust::line_search_tau;
use crate::subproblems::{solve_beamformer_full, UncertaintyBounds};

pub const DEFAULT_REALIZATIONS: usize = 50;
pub const DEFAULT_RANDOM_TRIALS: usize = 10;
/// QoS target used by the no-CSI scheme when `T` is not swept.
pub const DEFAULT_QOS_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    FullCsi,
    Robust,
    NoCsi,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::FullCsi => "full-csi",
            Mode::Robust => "robust",
            Mode::NoCsi => "no-csi",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-csi" => Ok(Mode::FullCsi),
            "robust" => Ok(Mode::Robust),
            "no-csi" => Ok(Mode::NoCsi),
            _ => Err(Error::Config(format!("unknown mode {s:?} (expected full-csi, robust or no-csi)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Transmit power budget, dBm.
    PowerDbm,
    /// QoS target, dB (no-CSI mode).
    QosDb,
    /// Raw CSI error bound applied to both `ε_E` and `ε_AE` (robust mode).
    Eps,
}

impl SweepVar {
    pub fn label(self) -> &'static str {
        match self {
            SweepVar::PowerDbm => "P_T",
            SweepVar::QosDb => "T",
            SweepVar::Eps => "eps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub grid: Vec<f64>,
}

impl Sweep {
    pub fn single(var: SweepVar, value: f64) -> Self {
        Sweep { var, grid: vec![value] }
    }

    /// Inclusive `start, start + step, …, ≤ stop` (with a little slack for
    /// round-off at the end point).
    pub fn range(var: SweepVar, start: f64, step: f64, stop: f64) -> Result<Self> {
        if ![start, step, stop].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("sweep bounds must be finite".into()));
        }
        if step <= 0.0 && start != stop {
            return Err(Error::Config("sweep step must be positive".into()));
        }
        if stop < start {
            return Err(Error::Config("sweep stop is below start".into()));
        }
        let count = if start == stop { 1 } else { ((stop - start) / step + 1e-9).floor() as usize + 1 };
        Ok(Sweep { var, grid: (0..count).map(|i| start + step * i as f64).collect() })
    }
}

/// Parses `var=start:step:stop` or `var=value`.
impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, range) = s.split_once('=').ok_or_else(|| Error::Config(format!("sweep {s:?} lacks '='")))?;
        let var = match name.trim() {
            "P_T" | "p_t" | "PT" => SweepVar::PowerDbm,
            "T" | "t" => SweepVar::QosDb,
            "eps" | "epsilon" => SweepVar::Eps,
            other => return Err(Error::Config(format!("unknown sweep variable {other:?}"))),
        };
        let parts = range
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|e| Error::Config(format!("sweep value {p:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        match parts[..] {
            [v] => Ok(Sweep::single(var, v)),
            [a, st, b] => Sweep::range(var, a, st, b),
            _ => Err(Error::Config(format!("sweep range {range:?} must be start:step:stop"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Baselines {
    pub no_irs: bool,
    pub random_phase: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub base: ScenarioConfig,
    pub sweep: Sweep,
    pub realizations: usize,
    pub seed: u64,
    pub baselines: Baselines,
    /// Random phase draws per realization for the random-phase baseline.
    pub random_trials: usize,
    /// No-CSI QoS target when `T` is not swept, dB.
    pub qos_db: f64,
    /// Robust-mode error bound when `eps` is not swept.
    pub eps: f64,
    pub out: PathBuf,
    pub exec: Execution,
}

impl ExperimentSpec {
    /// Single-point spec at the config's own `P_T`.
    pub fn new(mode: Mode, base: ScenarioConfig, out: impl Into<PathBuf>) -> Self {
        let sweep = Sweep::single(SweepVar::PowerDbm, base.p_t);
        ExperimentSpec {
            mode,
            base,
            sweep,
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
            baselines: Baselines::default(),
            random_trials: DEFAULT_RANDOM_TRIALS,
            qos_db: DEFAULT_QOS_DB,
            eps: 0.0,
            out: out.into(),
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.sweep.grid.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realization count must be at least 1".into()));
        }
        if self.baselines.random_phase && self.random_trials == 0 {
            return Err(Error::Config("random-phase baseline needs at least one trial".into()));
        }
        match (self.sweep.var, self.mode) {
            (SweepVar::QosDb, m) if m != Mode::NoCsi => Err(Error::Config("T can only be swept in no-csi mode".into())),
            (SweepVar::Eps, m) if m != Mode::Robust => Err(Error::Config("eps can only be swept in robust mode".into())),
            _ => Ok(()),
        }
    }

    pub fn detail_path(&self) -> PathBuf {
        self.out.join(format!("{}_detail.csv", self.mode))
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.out.join(format!("{}_aggregate.csv", self.mode))
    }
}

/// One detail CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailRow {
    pub mode: String,
    pub seed: u64,
    pub grid_value: f64,
    #[serde(rename = "C_B")]
    pub c_b: f64,
    #[serde(rename = "C_E")]
    pub c_e: f64,
    #[serde(rename = "C_S")]
    pub c_s: f64,
    #[serde(rename = "power_used_W")]
    pub power_used_w: f64,
    #[serde(rename = "interference_W")]
    pub interference_w: f64,
    pub tau_opt: Option<f64>,
    #[serde(rename = "P_S_W")]
    pub p_s_w: Option<f64>,
    pub iterations: usize,
    pub wall_ms: f64,
    pub flags: String,
    #[serde(skip)]
    pub flag_bits: Flags,
}

impl DetailRow {
    fn new(mode: &str, seed: u64, grid_value: f64, r: &RunResult) -> Self {
        DetailRow {
            mode: mode.to_string(),
            seed,
            grid_value,
            c_b: r.rates.c_b,
            c_e: r.rates.c_e,
            c_s: if r.rates.c_s.is_nan() { f64::NAN } else { r.secrecy_rate() },
            power_used_w: r.power,
            interference_w: r.rates.interference,
            tau_opt: r.tau_opt,
            p_s_w: r.p_s,
            iterations: r.iterations,
            wall_ms: r.wall_ms,
            flags: r.flags.to_label(),
            flag_bits: r.flags,
        }
    }

    fn failed(mode: &str, seed: u64, grid_value: f64, wall_ms: f64) -> Self {
        DetailRow {
            mode: mode.to_string(),
            seed,
            grid_value,
            c_b: f64::NAN,
            c_e: f64::NAN,
            c_s: f64::NAN,
            power_used_w: f64::NAN,
            interference_w: f64::NAN,
            tau_opt: None,
            p_s_w: None,
            iterations: 0,
            wall_ms,
            flags: Flags::FAILED.to_label(),
            flag_bits: Flags::FAILED,
        }
    }
}

/// One aggregate CSV row: means over the finite entries of each column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub mode: String,
    pub grid_value: f64,
    pub realizations: usize,
    /// Rows without the infeasible or failed flag.
    pub valid: usize,
    pub infeasible: usize,
    pub failed: usize,
    #[serde(rename = "C_B")]
    pub c_b: Option<f64>,
    #[serde(rename = "C_E")]
    pub c_e: Option<f64>,
    #[serde(rename = "C_S")]
    pub c_s: Option<f64>,
    #[serde(rename = "power_used_W")]
    pub power_used_w: Option<f64>,
    #[serde(rename = "interference_W")]
    pub interference_w: Option<f64>,
    pub tau_opt: Option<f64>,
    #[serde(rename = "P_S_W")]
    pub p_s_w: Option<f64>,
    pub iterations: Option<f64>,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in values.filter(|v| v.is_finite()) {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Groups rows by `(grid_value, mode)` in order of first appearance.
pub fn aggregate(rows: &[DetailRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<(f64, &str)> = Vec::new();
    for r in rows {
        let k = (r.grid_value, r.mode.as_str());
        if !keys.iter().any(|q| q.0.to_bits() == k.0.to_bits() && q.1 == k.1) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(g, mode)| {
            let group: Vec<&DetailRow> =
                rows.iter().filter(|r| r.grid_value.to_bits() == g.to_bits() && r.mode == mode).collect();
            let col = |f: fn(&DetailRow) -> f64| finite_mean(group.iter().map(|r| f(r)));
            let bad = Flags::INFEASIBLE | Flags::FAILED;
            AggregateRow {
                mode: mode.to_string(),
                grid_value: g,
                realizations: group.len(),
                valid: group.iter().filter(|r| !r.flag_bits.intersects(bad)).count(),
                infeasible: group.iter().filter(|r| r.flag_bits.contains(Flags::INFEASIBLE)).count(),
                failed: group.iter().filter(|r| r.flag_bits.contains(Flags::FAILED)).count(),
                c_b: col(|r| r.c_b),
                c_e: col(|r| r.c_e),
                c_s: col(|r| r.c_s),
                power_used_w: col(|r| r.power_used_w),
                interference_w: col(|r| r.interference_w),
                tau_opt: col(|r| r.tau_opt.unwrap_or(f64::NAN)),
                p_s_w: col(|r| r.p_s_w.unwrap_or(f64::NAN)),
                iterations: col(|r| r.iterations as f64),
            }
        })
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed of realization `index`; independent of execution order.
pub fn realization_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

/// Seed of the random AO starting point for a channel seed.
pub fn init_seed(channel_seed: u64) -> u64 {
    splitmix64(channel_seed ^ 0xA5A5_5A5A_C3C3_3C3C)
}

/// Best of `trials` random phase vectors, each with the optimal beamformer.
pub fn baseline_random_phase(ch: &ChannelSet, p_t: f64, p_i: f64, trials: usize, seed: u64) -> Result<RunResult> {
    if trials == 0 {
        return Err(Error::InvalidInput("random-phase baseline needs at least one trial".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<RunResult> = None;
    for _ in 0..trials {
        let s = PhaseVector::random(ch.n, &mut rng);
        let bf = solve_beamformer_full(&s, ch, p_t, p_i)?;
        let r = rates(&bf.w, &s, ch);
        if best.as_ref().is_none_or(|b| r.c_s > b.rates.c_s) {
            let flags = if bf.randomized { Flags::RANDOMIZED } else { Flags::empty() };
            best = Some(RunResult {
                power: bf.w.power(),
                w: bf.w,
                s,
                rates: r,
                tau_opt: None,
                p_s: None,
                trace: Vec::new(),
                iterations: trials,
                wall_ms: 0.0,
                flags,
            });
        }
    }
    let mut best = best.expect("at least one trial");
    best.trace = vec![(0, best.rates.c_s)];
    best.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(best)
}

/// Optimal beamformer with every reflecting link removed.
pub fn baseline_no_irs(ch: &ChannelSet, p_t: f64, p_i: f64) -> Result<RunResult> {
    let start = Instant::now();
    let bare = ch.without_irs();
    let s = PhaseVector::ones(ch.n);
    let bf = solve_beamformer_full(&s, &bare, p_t, p_i)?;
    let r = rates(&bf.w, &s, &bare);
    Ok(RunResult {
        power: bf.w.power(),
        w: bf.w,
        s,
        rates: r,
        tau_opt: None,
        p_s: None,
        trace: vec![(0, r.c_s)],
        iterations: 1,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        flags: if bf.randomized { Flags::RANDOMIZED } else { Flags::empty() },
    })
}

/// Resolved parameters of one (grid point, realization) task.
#[derive(Debug, Clone)]
pub struct Point {
    pub config: ScenarioConfig,
    pub qos_db: f64,
    pub eps: f64,
}

impl ExperimentSpec {
    pub fn point(&self, grid_value: f64, realization: usize) -> Point {
        let mut config = self.base.clone();
        config.seed = realization_seed(self.seed, realization);
        let (mut qos_db, mut eps) = (self.qos_db, self.eps);
        match self.sweep.var {
            SweepVar::PowerDbm => config.p_t = grid_value,
            SweepVar::QosDb => qos_db = grid_value,
            SweepVar::Eps => eps = grid_value,
        }
        Point { config, qos_db, eps }
    }
}

/// Runs the proposed scheme of `mode` on one point.
pub fn run_point(mode: Mode, point: &Point, exec: Execution) -> Result<RunResult> {
    let cfg = &point.config;
    let ch = generate_channels(cfg)?;
    let init = AoInit::random(cfg.n, init_seed(cfg.seed));
    let (p_t, p_i) = (cfg.p_t_watts(), cfg.p_i_watts());
    match mode {
        Mode::FullCsi => Ok(ao_full_csi(&ch, p_t, p_i, &init)?.result),
        Mode::Robust => {
            let eps = UncertaintyBounds::from_raw(point.eps, point.eps, ch.sigma2_e)?;
            Ok(line_search_tau(&ch, &eps, p_t, p_i, &init, exec)?.result)
        }
        Mode::NoCsi => Ok(run_no_csi(&ch, p_t, p_i, QosTarget::new(db_to_linear(point.qos_db))?, &init)?.result),
    }
}

fn run_task(spec: &ExperimentSpec, grid_value: f64, realization: usize) -> Vec<DetailRow> {
    let point = spec.point(grid_value, realization);
    let seed = point.config.seed;
    let mut rows = Vec::new();
    let start = Instant::now();
    let label = spec.mode.label();
    rows.push(match run_point(spec.mode, &point, Execution::Sequential) {
        Ok(r) => DetailRow::new(label, seed, grid_value, &r),
        Err(_) => DetailRow::failed(label, seed, grid_value, start.elapsed().as_secs_f64() * 1e3),
    });
    if !(spec.baselines.random_phase || spec.baselines.no_irs) {
        return rows;
    }
    let cfg = &point.config;
    let (p_t, p_i) = (cfg.p_t_watts(), cfg.p_i_watts());
    let ch = generate_channels(cfg);
    if spec.baselines.random_phase {
        let start = Instant::now();
        let r = ch.as_ref().map_err(|_| ()).and_then(|ch| {
            baseline_random_phase(ch, p_t, p_i, spec.random_trials, init_seed(seed)).map_err(|_| ())
        });
        rows.push(match r {
            Ok(r) => DetailRow::new("random-phase", seed, grid_value, &r),
            Err(()) => DetailRow::failed("random-phase", seed, grid_value, start.elapsed().as_secs_f64() * 1e3),
        });
    }
    if spec.baselines.no_irs {
        let start = Instant::now();
        let r = ch.as_ref().map_err(|_| ()).and_then(|ch| baseline_no_irs(ch, p_t, p_i).map_err(|_| ()));
        rows.push(match r {
            Ok(r) => DetailRow::new("no-irs", seed, grid_value, &r),
            Err(()) => DetailRow::failed("no-irs", seed, grid_value, start.elapsed().as_secs_f64() * 1e3),
        });
    }
    rows
}

/// All detail rows, ordered by (grid point, realization, scheme).
pub fn collect_rows(spec: &ExperimentSpec) -> Result<Vec<DetailRow>> {
    spec.validate()?;
    let tasks: Vec<(f64, usize)> =
        spec.sweep.grid.iter().flat_map(|&g| (0..spec.realizations).map(move |r| (g, r))).collect();
    let per_task = spec.exec.map(tasks, |(g, r)| run_task(spec, g, r));
    Ok(per_task.into_iter().flatten().collect())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub detail: PathBuf,
    pub aggregate: PathBuf,
    pub rows: Vec<DetailRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutput {
    /// Any row flagged as a failure (used by `--strict`).
    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.flag_bits.is_failure())
    }
}

/// Runs every realization and writes the detail and aggregate CSVs into
/// `spec.out`. Realization errors become `failed` rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let rows = collect_rows(spec)?;
    let aggregates = aggregate(&rows);
    std::fs::create_dir_all(&spec.out)?;
    let (detail, agg) = (spec.detail_path(), spec.aggregate_path());
    write_csv(&detail, &rows)?;
    write_csv(&agg, &aggregates)?;
    Ok(ExperimentOutput { detail, aggregate: agg, rows, aggregates })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
}

/// Per-iteration objective of one run: secrecy rate (full CSI), `log2 φ`
/// at the selected `τ` (robust) or `‖w‖²` in watts (no CSI).
pub fn trace_rows(r: &RunResult) -> Vec<TraceRow> {
    r.trace.iter().map(|&(iteration, objective)| TraceRow { iteration, objective }).collect()
}
