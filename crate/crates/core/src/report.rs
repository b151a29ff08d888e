//! Running a resolved [`Scenario`] and serializing what it produced.
//!
//! JSON reports are nested by section; CSV flattens the same data into one
//! row with the fixed column order [`CSV_COLUMNS`]. Floats in CSV carry 17
//! significant digits, list-valued fields are `;`-joined and absent values
//! are empty cells.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{run_engine, BoundReport, Check, CheckKind, EngineScenario, BOUND_TOL};
use crate::error::{Error, Result};
use crate::optimize::{optimize_feedback, OptimizationResult, RestartSummary};
use crate::scenario::{Mode, Scenario};
use crate::sweep::{run_sweep, SweepOutcome, SWEEP_CHECKS};
use crate::uncertainty::{two_engine_bounds, TwoEngineReport};

pub const REPORT_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub s: usize,
    pub reservoirs: Vec<usize>,
    pub a: usize,
    pub b: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub name: String,
    pub mode: Mode,
    pub seed: u64,
    #[serde(rename = "kB")]
    pub kb: Option<f64>,
    pub dims: Option<Dims>,
    pub wall_time_seconds: f64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub probabilities: Vec<f64>,
    pub e_s_initial: f64,
    pub e_s_final: f64,
    pub e_r_initial: Vec<f64>,
    pub e_r_final: Vec<f64>,
    pub heats: Vec<f64>,
    pub delta_u_s: f64,
    pub f_s_initial: f64,
    pub f_s_final: f64,
    pub delta_f_s: f64,
    pub delta_s_a: f64,
    pub delta_s_b: f64,
    pub delta_s: f64,
    pub mutual_info_initial: f64,
    pub mutual_info_final: f64,
    pub delta_i: f64,
    pub w_ext: Option<f64>,
    pub w_ext_total: f64,
    pub lhs_17: f64,
    pub rhs_17: f64,
    pub lhs_18: Option<f64>,
    pub rhs_18: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotSection {
    pub t_cold: f64,
    pub t_hot: f64,
    pub q_hot: f64,
    pub q_cold: f64,
    pub w_ext: f64,
    pub rhs_19: f64,
    pub eta: Option<f64>,
    pub eta_carnot: f64,
    pub eta_bound: Option<f64>,
    pub delta_u_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscordSection {
    pub c: f64,
    pub classical_initial: f64,
    pub classical_final: f64,
    pub delta_j: f64,
    pub discord_initial: f64,
    pub discord_final: f64,
    pub initial_optimized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoEngineSection {
    pub c: f64,
    pub eur_lhs: f64,
    pub eur_rhs: f64,
    pub eur_lhs_bits: f64,
    pub eur_rhs_bits: f64,
    pub s25_lhs: f64,
    pub s25_rhs: f64,
    pub s25_lhs_bits: f64,
    pub s25_rhs_bits: f64,
    pub s25_rhs_premeasure: f64,
    pub w_upper_k: f64,
    pub w_upper_m: f64,
    pub lower_bound_28: f64,
    pub achieved_work_k: f64,
    pub achieved_work_m: f64,
    pub saturation_gap_k: f64,
    pub saturation_gap_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizationSection {
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub include_u2: bool,
    pub best_parameters: Vec<Vec<f64>>,
    pub best_u2_parameters: Option<Vec<f64>>,
    pub achieved_work: f64,
    pub baseline_work: f64,
    pub bound: f64,
    pub gap: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub bound_violations: usize,
    pub worst_margin: f64,
    pub restart_results: Vec<RestartSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSummarySection {
    pub name: String,
    pub kind: CheckKind,
    pub violations: usize,
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub count: usize,
    pub seed: u64,
    pub dims: [usize; 4],
    pub theorem_violations: usize,
    pub conditional_violations: usize,
    pub worst_theorem_margin: f64,
    pub checks: Vec<CheckSummarySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: String,
    pub metadata: Metadata,
    pub engine: Option<EngineSection>,
    /// The M-basis engine of a two-engine run.
    pub second_engine: Option<EngineSection>,
    pub carnot: Option<CarnotSection>,
    pub discord: Option<DiscordSection>,
    pub two_engine: Option<TwoEngineSection>,
    pub optimization: Option<OptimizationSection>,
    pub sweep: Option<SweepSection>,
    pub checks: Vec<Check>,
    /// False when any theorem-kind check failed.
    pub theorems_hold: bool,
}

impl RunReport {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidScenario(format!("cannot encode report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(format!("cannot decode report: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        out.push_str(&csv_row(self).join(","));
        out.push('\n');
        out
    }
}

fn dims_of(s: &EngineScenario) -> Result<Dims> {
    Ok(Dims {
        s: s.h_s_initial.dim(),
        reservoirs: s.reservoirs.iter().map(|r| r.dim()).collect(),
        a: s.dim_a(),
        b: s.rho_ab_initial.layout().dims()[1],
        total: s.layout()?.dim(),
    })
}

fn engine_section(probabilities: Vec<f64>, r: &BoundReport) -> EngineSection {
    let (e, b) = (&r.energies, &r.bounds);
    EngineSection {
        probabilities,
        e_s_initial: e.e_s_initial,
        e_s_final: e.e_s_final,
        e_r_initial: e.e_r_initial.clone(),
        e_r_final: e.e_r_final.clone(),
        heats: e.heats.clone(),
        delta_u_s: e.delta_u_s,
        f_s_initial: e.f_s_initial,
        f_s_final: e.f_s_final,
        delta_f_s: e.delta_f_s,
        delta_s_a: b.delta_s_a,
        delta_s_b: b.delta_s_b,
        delta_s: b.delta_s,
        mutual_info_initial: b.mutual_info_initial,
        mutual_info_final: b.mutual_info_final,
        delta_i: b.delta_i,
        w_ext: e.w_ext,
        w_ext_total: e.w_ext_total,
        lhs_17: b.lhs_17,
        rhs_17: b.rhs_17,
        lhs_18: e.w_ext,
        rhs_18: b.rhs_18,
    }
}

fn two_engine_section(t: &TwoEngineReport) -> TwoEngineSection {
    TwoEngineSection {
        c: t.c,
        eur_lhs: t.eur_lhs,
        eur_rhs: t.eur_rhs,
        eur_lhs_bits: t.eur_lhs_bits(),
        eur_rhs_bits: t.eur_rhs_bits(),
        s25_lhs: t.s25_lhs,
        s25_rhs: t.s25_rhs,
        s25_lhs_bits: t.s25_lhs_bits(),
        s25_rhs_bits: t.s25_rhs_bits(),
        s25_rhs_premeasure: t.s25_rhs_premeasure,
        w_upper_k: t.w_upper_k,
        w_upper_m: t.w_upper_m,
        lower_bound_28: t.lower_bound_28,
        achieved_work_k: t.achieved_work_k,
        achieved_work_m: t.achieved_work_m,
        saturation_gap_k: t.saturation_gap_k,
        saturation_gap_m: t.saturation_gap_m,
    }
}

fn optimization_section(s: &Scenario, o: &OptimizationResult) -> OptimizationSection {
    OptimizationSection {
        budget: s.optimize.budget,
        restarts: s.optimize.restarts,
        seed: s.optimize.seed,
        include_u2: s.optimize.include_u2,
        best_parameters: o.best_parameters.clone(),
        best_u2_parameters: o.best_u2_parameters.clone(),
        achieved_work: o.achieved_work,
        baseline_work: o.baseline_work,
        bound: o.bound,
        gap: o.gap,
        evaluations: o.evaluations,
        converged: o.converged,
        bound_violations: o.bound_violations,
        worst_margin: o.worst_margin,
        restart_results: o.restarts.clone(),
    }
}

fn sweep_section(o: &SweepOutcome) -> SweepSection {
    let d = o.settings.dims;
    SweepSection {
        count: o.settings.count,
        seed: o.settings.seed,
        dims: [d.s, d.r, d.a, d.b],
        theorem_violations: o.theorem_violations(),
        conditional_violations: o.conditional_violations(),
        worst_theorem_margin: o.worst_theorem_margin(),
        checks: o
            .summary
            .iter()
            .map(|s| CheckSummarySection {
                name: s.name.clone(),
                kind: s.kind,
                violations: s.violations,
                worst_margin: s.worst_margin,
            })
            .collect(),
    }
}

/// One check per sweep column, failing when any item violated it.
fn sweep_checks(o: &SweepOutcome) -> Vec<Check> {
    o.summary
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let tolerance = o.rows.first().map_or(BOUND_TOL, |r| r.checks[j].tolerance);
            Check {
                name: s.name.clone(),
                kind: s.kind,
                margin: s.worst_margin,
                tolerance,
                passed: s.violations == 0,
            }
        })
        .collect()
}

/// Execute the scenario's mode.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION.into(),
        metadata: Metadata {
            name: scenario.name.clone(),
            mode: scenario.mode,
            seed: 0,
            kb: None,
            dims: None,
            wall_time_seconds: 0.0,
            generator: format!("demon-engine {}", env!("CARGO_PKG_VERSION")),
        },
        engine: None,
        second_engine: None,
        carnot: None,
        discord: None,
        two_engine: None,
        optimization: None,
        sweep: None,
        checks: Vec::new(),
        theorems_hold: true,
    };

    if scenario.mode == Mode::Sweep {
        let outcome = run_sweep(&scenario.sweep)?;
        report.metadata.seed = scenario.sweep.seed;
        report.checks = sweep_checks(&outcome);
        report.sweep = Some(sweep_section(&outcome));
    } else {
        let engine = scenario.engine()?;
        report.metadata.seed = engine.seed;
        report.metadata.kb = Some(engine.kb);
        report.metadata.dims = Some(dims_of(engine)?);

        let trace = run_engine(engine)?;
        let bounds = BoundReport::evaluate(&trace, engine)?;
        if scenario.mode == Mode::Carnot && bounds.carnot.is_none() {
            return Err(Error::InvalidScenario(
                "carnot mode needs two reservoirs (cold first, hot second) and identical system Hamiltonians".into(),
            ));
        }
        report.checks = bounds.checks().into_iter().cloned().collect();
        report.engine = Some(engine_section(trace.probabilities(), &bounds));
        report.carnot = bounds.carnot.as_ref().map(|c| CarnotSection {
            t_cold: c.t_cold,
            t_hot: c.t_hot,
            q_hot: c.q_hot,
            q_cold: c.q_cold,
            w_ext: c.w_ext,
            rhs_19: c.rhs_19,
            eta: c.eta,
            eta_carnot: c.eta_carnot,
            eta_bound: c.eta_bound,
            delta_u_warning: c.delta_u_warning,
        });
        report.discord = bounds.discord.as_ref().map(|d| DiscordSection {
            c: d.c,
            classical_initial: d.classical_initial,
            classical_final: d.classical_final,
            delta_j: d.delta_j,
            discord_initial: d.discord_initial,
            discord_final: d.discord_final,
            initial_optimized: d.initial_optimized,
        });

        match scenario.mode {
            Mode::TwoEngine => {
                let second = scenario
                    .second_engine
                    .as_ref()
                    .ok_or_else(|| Error::InvalidScenario("two-engine mode needs a second engine".into()))?;
                let trace_m = run_engine(second)?;
                let bounds_m = BoundReport::evaluate(&trace_m, second)?;
                report.second_engine = Some(engine_section(trace_m.probabilities(), &bounds_m));
                let two = two_engine_bounds(engine, second)?;
                report.checks.extend(two.checks.iter().cloned());
                report.two_engine = Some(two_engine_section(&two));
            }
            Mode::Optimize => {
                let o = optimize_feedback(engine, &scenario.optimize)?;
                report
                    .checks
                    .push(Check::theorem("optimizer_work_bound", o.worst_margin, BOUND_TOL));
                report.optimization = Some(optimization_section(scenario, &o));
            }
            _ => {}
        }
    }

    report.theorems_hold = report
        .checks
        .iter()
        .all(|c| c.passed || c.kind == CheckKind::Conditional);
    report.metadata.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Fixed CSV column order of a single-row report.
pub const CSV_COLUMNS: [&str; 66] = [
    "name",
    "mode",
    "seed",
    "kB",
    "dim_s",
    "dims_r",
    "dim_a",
    "dim_b",
    "dim_total",
    "wall_time_seconds",
    "probabilities",
    "e_s_initial",
    "e_s_final",
    "e_r_initial",
    "e_r_final",
    "heats",
    "delta_u_s",
    "f_s_initial",
    "f_s_final",
    "delta_f_s",
    "delta_s_a",
    "delta_s_b",
    "delta_s",
    "mutual_info_initial",
    "mutual_info_final",
    "delta_i",
    "w_ext",
    "w_ext_total",
    "lhs_17",
    "rhs_17",
    "lhs_18",
    "rhs_18",
    "t_cold",
    "t_hot",
    "q_hot",
    "q_cold",
    "rhs_19",
    "eta",
    "eta_carnot",
    "eta_bound",
    "discord_c",
    "delta_j",
    "discord_initial",
    "overlap_c",
    "eur_lhs",
    "eur_rhs",
    "s25_lhs",
    "s25_rhs",
    "s25_rhs_premeasure",
    "w_upper_k",
    "w_upper_m",
    "lower_bound_28",
    "saturation_gap_k",
    "saturation_gap_m",
    "opt_achieved_work",
    "opt_baseline_work",
    "opt_bound",
    "opt_gap",
    "opt_evaluations",
    "opt_converged",
    "sweep_count",
    "sweep_theorem_violations",
    "sweep_conditional_violations",
    "sweep_worst_theorem_margin",
    "failed_checks",
    "theorems_hold",
];

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn float_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(";")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_row(r: &RunReport) -> Vec<String> {
    let m = &r.metadata;
    let e = r.engine.as_ref();
    let c = r.carnot.as_ref();
    let d = r.discord.as_ref();
    let t = r.two_engine.as_ref();
    let o = r.optimization.as_ref();
    let s = r.sweep.as_ref();
    let ef = |f: fn(&EngineSection) -> f64| opt_float(e.map(f));
    let tf = |f: fn(&TwoEngineSection) -> f64| opt_float(t.map(f));
    let failed: Vec<&str> = r.failed_checks().iter().map(|c| c.name.as_str()).collect();
    vec![
        quote(&m.name),
        m.mode.as_str().to_string(),
        m.seed.to_string(),
        opt_float(m.kb),
        m.dims.as_ref().map(|d| d.s.to_string()).unwrap_or_default(),
        m.dims
            .as_ref()
            .map(|d| d.reservoirs.iter().map(usize::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default(),
        m.dims.as_ref().map(|d| d.a.to_string()).unwrap_or_default(),
        m.dims.as_ref().map(|d| d.b.to_string()).unwrap_or_default(),
        m.dims.as_ref().map(|d| d.total.to_string()).unwrap_or_default(),
        fmt_float(m.wall_time_seconds),
        e.map(|e| float_list(&e.probabilities)).unwrap_or_default(),
        ef(|e| e.e_s_initial),
        ef(|e| e.e_s_final),
        e.map(|e| float_list(&e.e_r_initial)).unwrap_or_default(),
        e.map(|e| float_list(&e.e_r_final)).unwrap_or_default(),
        e.map(|e| float_list(&e.heats)).unwrap_or_default(),
        ef(|e| e.delta_u_s),
        ef(|e| e.f_s_initial),
        ef(|e| e.f_s_final),
        ef(|e| e.delta_f_s),
        ef(|e| e.delta_s_a),
        ef(|e| e.delta_s_b),
        ef(|e| e.delta_s),
        ef(|e| e.mutual_info_initial),
        ef(|e| e.mutual_info_final),
        ef(|e| e.delta_i),
        opt_float(e.and_then(|e| e.w_ext)),
        ef(|e| e.w_ext_total),
        ef(|e| e.lhs_17),
        ef(|e| e.rhs_17),
        opt_float(e.and_then(|e| e.lhs_18)),
        opt_float(e.and_then(|e| e.rhs_18)),
        opt_float(c.map(|c| c.t_cold)),
        opt_float(c.map(|c| c.t_hot)),
        opt_float(c.map(|c| c.q_hot)),
        opt_float(c.map(|c| c.q_cold)),
        opt_float(c.map(|c| c.rhs_19)),
        opt_float(c.and_then(|c| c.eta)),
        opt_float(c.map(|c| c.eta_carnot)),
        opt_float(c.and_then(|c| c.eta_bound)),
        opt_float(d.map(|d| d.c)),
        opt_float(d.map(|d| d.delta_j)),
        opt_float(d.map(|d| d.discord_initial)),
        tf(|t| t.c),
        tf(|t| t.eur_lhs),
        tf(|t| t.eur_rhs),
        tf(|t| t.s25_lhs),
        tf(|t| t.s25_rhs),
        tf(|t| t.s25_rhs_premeasure),
        tf(|t| t.w_upper_k),
        tf(|t| t.w_upper_m),
        tf(|t| t.lower_bound_28),
        tf(|t| t.saturation_gap_k),
        tf(|t| t.saturation_gap_m),
        opt_float(o.map(|o| o.achieved_work)),
        opt_float(o.map(|o| o.baseline_work)),
        opt_float(o.map(|o| o.bound)),
        opt_float(o.map(|o| o.gap)),
        o.map(|o| o.evaluations.to_string()).unwrap_or_default(),
        o.map(|o| o.converged.to_string()).unwrap_or_default(),
        s.map(|s| s.count.to_string()).unwrap_or_default(),
        s.map(|s| s.theorem_violations.to_string()).unwrap_or_default(),
        s.map(|s| s.conditional_violations.to_string()).unwrap_or_default(),
        opt_float(s.map(|s| s.worst_theorem_margin)),
        failed.join(";"),
        r.theorems_hold.to_string(),
    ]
}

/// Header of sweep CSV output.
pub fn sweep_csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "index",
        "seed",
        "temperature",
        "w_ext",
        "lhs_17",
        "rhs_17",
        "delta_s",
        "delta_i",
        "overlap_c",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(SWEEP_CHECKS.iter().map(|c| format!("margin_{c}")));
    h
}

/// One row per sweep item, ordered by index.
pub fn sweep_csv(o: &SweepOutcome) -> String {
    let mut out = sweep_csv_header().join(",");
    out.push('\n');
    for r in &o.rows {
        let mut cells = vec![
            r.index.to_string(),
            r.seed.to_string(),
            fmt_float(r.temperature),
            fmt_float(r.w_ext),
            fmt_float(r.lhs_17),
            fmt_float(r.rhs_17),
            fmt_float(r.delta_s),
            fmt_float(r.delta_i),
            fmt_float(r.c),
        ];
        cells.extend(r.checks.iter().map(|c| fmt_float(c.margin)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `sweep: N scenarios, V theorem violations, worst theorem margin M; conditional: ...`
pub fn sweep_summary_line(o: &SweepOutcome) -> String {
    let conditional: Vec<String> = o
        .summary
        .iter()
        .filter(|s| s.kind == CheckKind::Conditional)
        .map(|s| format!("{} {}/{}", s.name, s.violations, o.rows.len()))
        .collect();
    format!(
        "sweep: {} scenarios, {} theorem violations, worst theorem margin {}; conditional violations: {}",
        o.rows.len(),
        o.theorem_violations(),
        fmt_float(o.worst_theorem_margin()),
        conditional.join(", ")
    )
}
