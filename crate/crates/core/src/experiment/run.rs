//! Experiment runners. Grid points run concurrently; each produces one row.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{dbm_to_watts, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::scene_for_drop;
use crate::phases::{PhaseRegime, PhaseVector};
use crate::precoding::DacBits;
use crate::pso::{discrete_design, pso_optimize, PsoParams};
use crate::rate::{monte_carlo_rates, AnalyticRates, McOptions, RateBreakdown};
use crate::rng::{substream, Stream};

use super::spec::{ExperimentKind, ExperimentSpec, Settings};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<DacBits> for Cell {
    fn from(b: DacBits) -> Self {
        match b {
            DacBits::Finite(b) => Cell::Int(b as i64),
            DacBits::Infinite => Cell::Text("inf".into()),
        }
    }
}

impl From<PhaseRegime> for Cell {
    fn from(r: PhaseRegime) -> Self {
        match r {
            PhaseRegime::Discrete(b) => Cell::Int(b as i64),
            PhaseRegime::Continuous => Cell::Text("continuous".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: Vec<String>) -> Self {
        Self { name: name.into(), columns, rows: Vec::new() }
    }

    /// Values of a numeric column; non-numeric cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[j] {
                    Cell::Num(x) => Some(*x),
                    Cell::Int(i) => Some(*i as f64),
                    _ => None,
                })
                .collect(),
        )
    }
}

/// Axes of the emitted plot script.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSpec {
    /// Stem of the table the curves are read from.
    pub source: String,
    pub x: String,
    pub group: Option<String>,
    pub y: Vec<String>,
    pub x_label: String,
    pub y_label: String,
}

/// PSO settings actually used for one RIS size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerRecord {
    pub n: usize,
    pub params: Option<PsoParams>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub settings: Settings,
    pub table: Table,
    /// Additional tables (phases, traces), each written to its own CSV.
    pub extra: Vec<Table>,
    pub plot: PlotSpec,
    pub optimizer: Vec<OptimizerRecord>,
    pub row_wall_seconds: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Phases used at one scenario.
struct Design {
    /// Continuous optimum (or the fixed random draw in fast mode).
    continuous: PhaseVector,
    trace: Vec<f64>,
}

fn pso_params(spec: &ExperimentSpec, n: usize) -> PsoParams {
    PsoParams {
        boundary: spec.pso_boundary,
        per_dimension_random: spec.pso_per_dimension_random,
        memoryless_stagnation: spec.pso_memoryless_stagnation,
        ..PsoParams::reference(n)
    }
    .with_budget(spec.pso_budget)
}

/// Substream index shared by every grid point with the same drop and size.
fn design_index(drop: usize, n: usize) -> u64 {
    ((drop as u64) << 32) | n as u64
}

fn design(rates: &AnalyticRates, spec: &ExperimentSpec, seed: u64, drop: usize) -> Result<Design> {
    let n = rates.elements();
    let index = design_index(drop, n);
    if spec.fast {
        let continuous = PhaseVector::random(n, &mut substream(seed, Stream::Phases, index));
        return Ok(Design { continuous, trace: Vec::new() });
    }
    let d = pso_optimize(rates, &pso_params(spec, n), &mut substream(seed, Stream::Pso, index))?;
    Ok(Design { continuous: d.phases, trace: d.trace })
}

/// Applies the RIS constraint of `regime` to a continuous design.
fn constrained(
    rates: &AnalyticRates,
    design: &Design,
    regime: PhaseRegime,
    spec: &ExperimentSpec,
) -> Result<(PhaseVector, f64)> {
    match regime {
        PhaseRegime::Continuous => Ok((design.continuous.clone(), rates.sum_rate(design.continuous.as_slice())?)),
        PhaseRegime::Discrete(b) => discrete_design(rates, &design.continuous, b, spec.dps_local_search),
    }
}

fn at_size(sc: &ScenarioConfig, n: usize) -> ScenarioConfig {
    let mut s = sc.clone();
    s.n = n;
    s
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn user_columns(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|u| format!("{prefix}_{u}")).collect()
}

fn finish(settings: &Settings, mut table: Table, rows: Vec<(Vec<Cell>, f64)>, plot: PlotSpec) -> SweepResult {
    let mut warnings = Vec::new();
    if rows.is_empty() {
        warnings.push(format!("{}: empty grid, wrote header only", settings.experiment.kind));
    }
    let (cells, times): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    table.rows = cells;
    let optimizer = optimizer_records(settings);
    SweepResult {
        settings: settings.clone(),
        table,
        extra: Vec::new(),
        plot,
        optimizer,
        row_wall_seconds: times,
        warnings,
    }
}

fn optimizer_records(settings: &Settings) -> Vec<OptimizerRecord> {
    let ex = &settings.experiment;
    let mut sizes = match ex.kind {
        ExperimentKind::Optimize => vec![settings.scenario.n],
        _ => ex.grid_n.clone(),
    };
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| OptimizerRecord { n, params: (!ex.fast).then(|| pso_params(ex, n)) })
        .collect()
}

/// Per-drop outcome of one (N, P) point.
struct PowerPoint {
    closed: RateBreakdown,
    mc: Option<RateBreakdown>,
}

fn power_point(settings: &Settings, n: usize, p_dbm: f64, drop: usize) -> Result<PowerPoint> {
    let ex = &settings.experiment;
    let mut sc = at_size(&settings.scenario, n);
    sc.power_w = dbm_to_watts(p_dbm);
    let scene = scene_for_drop(&sc, drop as u64)?;
    let rates = AnalyticRates::new(&sc, &scene.gains, ex.moment_model)?;
    let d = design(&rates, ex, sc.seed, drop)?;
    let (phases, _) = constrained(&rates, &d, sc.ris, ex)?;
    let closed = rates.rates(phases.as_slice())?;
    let mc = if ex.mc_trials > 0 {
        let opts = McOptions {
            trials: ex.mc_trials,
            sample_quantization_noise: ex.mc_sample_quantization_noise,
            first_trial: (drop as u64) << 40,
        };
        Some(monte_carlo_rates(&sc, &scene.gains, &phases, &opts)?)
    } else {
        None
    };
    Ok(PowerPoint { closed, mc })
}

/// Closed form (and Monte Carlo when `mc_trials > 0`) over the (N, P) grid.
/// Serves both `validate` and `sweep-power`; they differ in defaults only.
pub fn run_power_grid(settings: &Settings) -> Result<SweepResult> {
    let ex = &settings.experiment;
    let k = settings.scenario.k;
    let mut columns: Vec<String> = [
        "N",
        "P_dbm",
        "closed_form_sum_rate",
        "monte_carlo_sum_rate",
        "monte_carlo_stderr",
        "relative_error",
    ]
    .map(String::from)
    .to_vec();
    columns.extend(user_columns("closed_form_rate_user", k));
    columns.extend(user_columns("monte_carlo_rate_user", k));

    let points: Vec<(usize, f64)> =
        ex.grid_n.iter().flat_map(|&n| ex.grid_p_dbm.iter().map(move |&p| (n, p))).collect();
    let rows = points
        .par_iter()
        .map(|&(n, p)| {
            timed(|| {
                let per_drop = (0..ex.drops).map(|d| power_point(settings, n, p, d)).collect::<Result<Vec<_>>>()?;
                let drops = per_drop.len() as f64;
                let cf_sum = mean(per_drop.iter().map(|x| x.closed.sum_rate));
                let cf_user: Vec<f64> = (0..k).map(|u| mean(per_drop.iter().map(|x| x.closed.rates[u]))).collect();
                let mc: Option<Vec<&RateBreakdown>> = per_drop.iter().map(|x| x.mc.as_ref()).collect();
                let mut row: Vec<Cell> = vec![n.into(), p.into(), cf_sum.into()];
                match mc {
                    Some(mc) => {
                        let mc_sum = mean(mc.iter().map(|r| r.sum_rate));
                        let se = mc.iter().map(|r| r.sum_rate_stderr.unwrap_or(0.0).powi(2)).sum::<f64>().sqrt() / drops;
                        row.extend([mc_sum.into(), se.into(), ((cf_sum - mc_sum).abs() / mc_sum).into()]);
                        row.extend(cf_user.iter().map(|&x| Cell::Num(x)));
                        row.extend((0..k).map(|u| Cell::Num(mean(mc.iter().map(|r| r.rates[u])))));
                    }
                    None => {
                        row.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
                        row.extend(cf_user.iter().map(|&x| Cell::Num(x)));
                        row.extend((0..k).map(|_| Cell::Empty));
                    }
                }
                Ok(row)
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut y = vec!["closed_form_sum_rate".to_string()];
    if ex.mc_trials > 0 {
        y.push("monte_carlo_sum_rate".into());
    }
    let plot = PlotSpec {
        source: "results".into(),
        x: "P_dbm".into(),
        group: Some("N".into()),
        y,
        x_label: "P (dBm)".into(),
        y_label: "Sum rate (bit/s/Hz)".into(),
    };
    Ok(finish(settings, Table::new("results", columns), rows, plot))
}

pub fn run_validate(settings: &Settings) -> Result<SweepResult> {
    run_power_grid(settings)
}

pub fn run_sweep_power(settings: &Settings) -> Result<SweepResult> {
    run_power_grid(settings)
}

/// Optimized CPS and DPS sum rates for every (N, b).
pub fn run_sweep_dac_bits(settings: &Settings) -> Result<SweepResult> {
    let ex = &settings.experiment;
    let columns = ["N", "b", "B", "cps_sum_rate", "dps_sum_rate"].map(String::from).to_vec();
    let points: Vec<(usize, DacBits)> =
        ex.grid_n.iter().flat_map(|&n| ex.grid_b.iter().map(move |&b| (n, b))).collect();
    let regime = settings.scenario.ris;
    let rows = points
        .par_iter()
        .map(|&(n, b)| {
            timed(|| {
                let mut cps = Vec::new();
                let mut dps = Vec::new();
                for drop in 0..ex.drops {
                    let sc = at_size(&settings.scenario, n).with_dac(b);
                    let scene = scene_for_drop(&sc, drop as u64)?;
                    let rates = AnalyticRates::new(&sc, &scene.gains, ex.moment_model)?;
                    let d = design(&rates, ex, sc.seed, drop)?;
                    cps.push(constrained(&rates, &d, PhaseRegime::Continuous, ex)?.1);
                    if let PhaseRegime::Discrete(_) = regime {
                        dps.push(constrained(&rates, &d, regime, ex)?.1);
                    }
                }
                let dps = (!dps.is_empty()).then(|| mean(dps));
                Ok(vec![n.into(), b.into(), regime.into(), mean(cps).into(), dps.into()])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plot = PlotSpec {
        source: "results".into(),
        x: "b".into(),
        group: Some("N".into()),
        y: vec!["cps_sum_rate".into(), "dps_sum_rate".into()],
        x_label: "DAC bits b".into(),
        y_label: "Sum rate (bit/s/Hz)".into(),
    };
    Ok(finish(settings, Table::new("results", columns), rows, plot))
}

/// DPS sum rate for every (N, B) against the CPS optimum at that N.
pub fn run_sweep_ris_bits(settings: &Settings) -> Result<SweepResult> {
    let ex = &settings.experiment;
    let columns = ["N", "B", "b", "dps_sum_rate", "cps_sum_rate", "relative_gap"].map(String::from).to_vec();
    // One continuous design per (N, drop); every B projects it.
    let designs = ex
        .grid_n
        .par_iter()
        .map(|&n| {
            (0..ex.drops)
                .map(|drop| {
                    let sc = at_size(&settings.scenario, n);
                    let scene = scene_for_drop(&sc, drop as u64)?;
                    let rates = AnalyticRates::new(&sc, &scene.gains, ex.moment_model)?;
                    let d = design(&rates, ex, sc.seed, drop)?;
                    let cps = rates.sum_rate(d.continuous.as_slice())?;
                    Ok((rates, d, cps))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(usize, u32)> =
        (0..ex.grid_n.len()).flat_map(|i| ex.grid_ris_bits.iter().map(move |&b| (i, b))).collect();
    let rows = points
        .par_iter()
        .map(|&(i, bits)| {
            timed(|| {
                let per_drop = &designs[i];
                let dps = per_drop
                    .iter()
                    .map(|(rates, d, _)| Ok(constrained(rates, d, PhaseRegime::Discrete(bits), ex)?.1))
                    .collect::<Result<Vec<f64>>>()?;
                let dps = mean(dps);
                let cps = mean(per_drop.iter().map(|x| x.2));
                Ok(vec![
                    ex.grid_n[i].into(),
                    Cell::Int(bits as i64),
                    settings.scenario.dac.into(),
                    dps.into(),
                    cps.into(),
                    ((cps - dps) / cps).into(),
                ])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let plot = PlotSpec {
        source: "results".into(),
        x: "B".into(),
        group: Some("N".into()),
        y: vec!["dps_sum_rate".into()],
        x_label: "RIS phase bits B".into(),
        y_label: "Sum rate (bit/s/Hz)".into(),
    };
    Ok(finish(settings, Table::new("results", columns), rows, plot))
}

/// One design on the configured scenario with its phases and trace.
pub fn run_optimize(settings: &Settings) -> Result<SweepResult> {
    let ex = &settings.experiment;
    if ex.drops != 1 {
        return Err(Error::InvalidConfig("optimize works on a single drop".into()));
    }
    let sc = &settings.scenario;
    let ((row, phases_table, trace_table), secs) = timed(|| {
        let scene = scene_for_drop(sc, 0)?;
        let rates = AnalyticRates::new(sc, &scene.gains, ex.moment_model)?;
        let d = design(&rates, ex, sc.seed, 0)?;
        let cps = rates.sum_rate(d.continuous.as_slice())?;
        let discrete = match sc.ris {
            PhaseRegime::Discrete(b) => Some(discrete_design(&rates, &d.continuous, b, ex.dps_local_search)?),
            PhaseRegime::Continuous => None,
        };
        let chosen = discrete.as_ref().map_or(&d.continuous, |x| &x.0);
        let breakdown = rates.rates(chosen.as_slice())?;
        let mc = if ex.mc_trials > 0 {
            let opts = McOptions {
                trials: ex.mc_trials,
                sample_quantization_noise: ex.mc_sample_quantization_noise,
                first_trial: 0,
            };
            Some(monte_carlo_rates(sc, &scene.gains, chosen, &opts)?)
        } else {
            None
        };
        let mut row: Vec<Cell> = vec![
            sc.n.into(),
            sc.dac.into(),
            sc.ris.into(),
            cps.into(),
            discrete.as_ref().map(|x| x.1).into(),
            mc.as_ref().map(|r| r.sum_rate).into(),
            mc.as_ref().and_then(|r| r.sum_rate_stderr).into(),
            (d.trace.len().saturating_sub(1)).into(),
        ];
        row.extend(breakdown.rates.iter().map(|&r| Cell::Num(r)));

        let mut phases = Table::new("phases", ["n", "theta_cps", "theta_dps"].map(String::from).to_vec());
        for (i, t) in d.continuous.as_slice().iter().enumerate() {
            let dps = discrete.as_ref().map(|x| x.0.as_slice()[i]);
            phases.rows.push(vec![i.into(), (*t).into(), dps.into()]);
        }
        let mut trace = Table::new("trace", ["iteration", "best_sum_rate"].map(String::from).to_vec());
        for (t, f) in d.trace.iter().enumerate() {
            trace.rows.push(vec![t.into(), (-f).into()]);
        }
        Ok((row, phases, trace))
    })?;

    let mut columns: Vec<String> = [
        "N",
        "b",
        "B",
        "cps_sum_rate",
        "dps_sum_rate",
        "monte_carlo_sum_rate",
        "monte_carlo_stderr",
        "iterations",
    ]
    .map(String::from)
    .to_vec();
    columns.extend(user_columns("rate_user", sc.k));
    let plot = PlotSpec {
        source: "trace".into(),
        x: "iteration".into(),
        group: None,
        y: vec!["best_sum_rate".into()],
        x_label: "PSO iteration".into(),
        y_label: "Best sum rate (bit/s/Hz)".into(),
    };
    let mut out = finish(settings, Table::new("results", columns), vec![(row, secs)], plot);
    out.extra = vec![phases_table, trace_table];
    Ok(out)
}

/// Dispatches on the experiment kind.
pub fn run(settings: &Settings) -> Result<SweepResult> {
    match settings.experiment.kind {
        ExperimentKind::Validate => run_validate(settings),
        ExperimentKind::SweepPower => run_sweep_power(settings),
        ExperimentKind::SweepDacBits => run_sweep_dac_bits(settings),
        ExperimentKind::SweepRisBits => run_sweep_ris_bits(settings),
        ExperimentKind::Optimize => run_optimize(settings),
    }
}
