//! Derivative-free search over feedback unitaries for the largest extracted
//! work, and the Nelder–Mead minimizer it (and the discord optimizer) use.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::engine::{bound_evaluation, energy_accounting, run_engine, EngineScenario, ANCILLA, BOUND_TOL, SYSTEM};
use crate::error::{Error, Result};
use crate::linalg::{embed_operator, partial_trace, unitary_from_generator, ComplexMatrix};
use crate::states::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop once every vertex is within this (max-norm) of the best vertex.
    pub x_tolerance: f64,
    /// Stop once the spread of objective values drops below this.
    pub f_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 1000,
            x_tolerance: 1e-6,
            f_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Lowest value seen after each evaluation.
    pub best_history: Vec<f64>,
}

struct Evaluator<F> {
    f: F,
    budget: usize,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Evaluator<F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.history.len() >= self.budget {
            return None;
        }
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        let best = self.history.last().map_or(v, |b: &f64| b.min(v));
        self.history.push(best);
        Some(v)
    }
}

/// Minimize `f` starting from `start`, with initial simplex vertices
/// `start + steps[i]·e_i`. Standard coefficients (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2). Never evaluates `f` more than
/// `max_evaluations` times.
pub fn nelder_mead<F>(f: F, start: &[f64], steps: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(start.len(), steps.len(), "one step per coordinate");
    let n = start.len();
    let mut ev = Evaluator {
        f,
        budget: opts.max_evaluations.max(1),
        history: Vec::new(),
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut converged = false;
    'outer: {
        for i in 0..=n {
            let mut x = start.to_vec();
            if i > 0 {
                x[i - 1] += steps[i - 1];
            }
            match ev.eval(&x) {
                Some(v) => simplex.push((x, v)),
                None => break 'outer,
            }
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = &simplex[0];
            let spread = simplex[n].1 - best.1;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if n == 0 || diameter < opts.x_tolerance || spread < opts.f_tolerance {
                converged = true;
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

            let xr = along(1.0);
            let Some(fr) = ev.eval(&xr) else { break };
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let Some(fe) = ev.eval(&xe) else {
                    simplex[n] = (xr, fr);
                    break;
                };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, outside) = if fr < worst.1 {
                (along(0.5), true)
            } else {
                (along(-0.5), false)
            };
            let Some(fc) = ev.eval(&xc) else { break };
            if (outside && fc <= fr) || (!outside && fc < worst.1) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let x0 = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = vertex.0.iter().zip(&x0).map(|(v, b)| b + 0.5 * (v - b)).collect();
                let Some(v) = ev.eval(&x) else { break 'outer };
                *vertex = (x, v);
            }
        }
    }

    let (point, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_else(|| (start.to_vec(), f64::INFINITY));
    NelderMeadResult {
        point,
        value,
        evaluations: ev.history.len(),
        converged,
        best_history: ev.history,
    }
}

/// Unitary exp(i·G(θ)) where G(θ) = Σ θ_j E_j over an orthonormal
/// Hermitian basis: diagonal units first, then (E_jk + E_kj)/√2, then
/// i(E_kj − E_jk)/√2, each pair family in row-major (j < k) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterizedUnitary {
    pub dim: usize,
    pub parameters: Vec<f64>,
}

impl ParameterizedUnitary {
    pub fn new(dim: usize, parameters: Vec<f64>) -> Result<Self> {
        if dim == 0 || parameters.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "a {dim}-dimensional unitary needs {} generator parameters, got {}",
                dim * dim,
                parameters.len()
            )));
        }
        Ok(Self { dim, parameters })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            parameters: vec![0.0; dim * dim],
        }
    }

    pub fn generator(&self) -> ComplexMatrix {
        let d = self.dim;
        let mut g = ComplexMatrix::zeros(d, d);
        let mut it = self.parameters.iter().copied();
        for j in 0..d {
            g[(j, j)] = Complex64::new(it.next().unwrap_or(0.0), 0.0);
        }
        let s = FRAC_1_SQRT_2;
        for j in 0..d {
            for k in j + 1..d {
                let t = it.next().unwrap_or(0.0);
                g[(j, k)] += Complex64::new(t * s, 0.0);
                g[(k, j)] += Complex64::new(t * s, 0.0);
            }
        }
        for j in 0..d {
            for k in j + 1..d {
                let t = it.next().unwrap_or(0.0);
                // i(E_kj − E_jk)/√2
                g[(k, j)] += Complex64::new(0.0, t * s);
                g[(j, k)] += Complex64::new(0.0, -t * s);
            }
        }
        g
    }

    pub fn unitary(&self) -> Result<ComplexMatrix> {
        unitary_from_generator(&self.generator())
    }
}

/// Settings for [`optimize_feedback`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    /// Objective evaluations allowed per restart.
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Also search over U^(2) on S ⊗ A.
    pub include_u2: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            budget: 5000,
            restarts: 8,
            seed: 0,
            include_u2: false,
        }
    }
}

/// Step of the initial simplex around each start point, in radians.
pub const INITIAL_STEP: f64 = 0.1;
const X_TOL: f64 = 1e-6;
const F_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub seed: u64,
    pub achieved_work: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Generator coordinates of each feedback branch.
    pub best_parameters: Vec<Vec<f64>>,
    /// Generator coordinates of U^(2) when it was searched too.
    pub best_u2_parameters: Option<Vec<f64>>,
    pub achieved_work: f64,
    /// Work with identity feedback (and the scenario's own U^(2)).
    pub baseline_work: f64,
    /// rhs_18 at the best parameters.
    pub bound: f64,
    /// bound − achieved_work.
    pub gap: f64,
    pub evaluations: usize,
    /// Whether the winning restart's simplex converged within its budget.
    pub converged: bool,
    /// Evaluations at which W_ext exceeded rhs_18 + 1e-8 (expected 0).
    pub bound_violations: usize,
    /// Smallest rhs_18 − W_ext over every evaluation.
    pub worst_margin: f64,
    /// Best work seen so far, across restarts in index order.
    pub best_history: Vec<f64>,
    pub restarts: Vec<RestartSummary>,
}

/// Precomputed pieces that do not depend on the feedback unitaries.
struct FeedbackObjective {
    /// Unnormalized p_k ρ_SR^(2)k.
    branches_sr: Vec<ComplexMatrix>,
    /// H_S^(f) + Σ_m H_R_m on S ⊗ R.
    final_energy_op: ComplexMatrix,
    /// E_S^(i) + Σ_m E_R_m^(i).
    initial_energy: f64,
    bound: f64,
    dim_sr: usize,
}

impl FeedbackObjective {
    fn new(scenario: &EngineScenario) -> Result<Self> {
        let trace = run_engine(scenario)?;
        let energies = energy_accounting(&trace, scenario)?;
        let bounds = bound_evaluation(&trace, scenario, &energies)?;
        let bound = bounds
            .rhs_18
            .ok_or_else(|| Error::InvalidScenario("feedback optimization needs at most one reservoir".into()))?;
        let layout = trace.rho_2.layout().clone();
        let sr = scenario.sr_names();
        let mut branches_sr = Vec::new();
        for p in scenario.basis.projectors() {
            let proj = embed_operator(&p, &layout, &[ANCILLA])?;
            let projected = trace.rho_2.matrix().conjugate_by(&proj)?;
            branches_sr.push(partial_trace(&projected, &layout, &sr)?);
        }
        let sr_layout = layout.restrict(&sr)?;
        let mut op = embed_operator(&scenario.h_s_final.matrix, &sr_layout, &[SYSTEM])?;
        for r in &scenario.reservoirs {
            op = &op + &embed_operator(&r.matrix, &sr_layout, &[r.name.as_str()])?;
        }
        let e_r_initial: f64 = energies.e_r_initial.iter().sum();
        Ok(Self {
            branches_sr,
            final_energy_op: op,
            initial_energy: energies.e_s_initial + e_r_initial,
            bound,
            dim_sr: scenario.dim_sr(),
        })
    }

    fn work(&self, theta: &[f64]) -> Result<f64> {
        let per = self.dim_sr * self.dim_sr;
        let mut rho_f = ComplexMatrix::zeros(self.dim_sr, self.dim_sr);
        for (k, branch) in self.branches_sr.iter().enumerate() {
            let u = ParameterizedUnitary::new(self.dim_sr, theta[k * per..(k + 1) * per].to_vec())?.unitary()?;
            rho_f = &rho_f + &branch.conjugate_by(&u)?;
        }
        Ok(self.initial_energy - rho_f.trace_product(&self.final_energy_op)?.re)
    }
}

/// Split a flat parameter vector into per-branch feedback unitaries and an
/// optional U^(2).
fn apply_parameters(scenario: &EngineScenario, theta: &[f64], include_u2: bool) -> Result<EngineScenario> {
    let d = scenario.dim_sr();
    let per = d * d;
    let branches = scenario.basis.dim();
    let mut out = scenario.clone();
    out.feedback = (0..branches)
        .map(|k| ParameterizedUnitary::new(d, theta[k * per..(k + 1) * per].to_vec())?.unitary())
        .collect::<Result<_>>()?;
    if include_u2 {
        let dsa = scenario.h_s_initial.matrix.rows() * scenario.dim_a();
        let g = ParameterizedUnitary::new(dsa, theta[branches * per..].to_vec())?;
        out.u2 = g.unitary()?;
    }
    Ok(out)
}

fn parameter_count(scenario: &EngineScenario, include_u2: bool) -> usize {
    let d = scenario.dim_sr();
    let mut n = scenario.basis.dim() * d * d;
    if include_u2 {
        let dsa = scenario.h_s_initial.matrix.rows() * scenario.dim_a();
        n += dsa * dsa;
    }
    n
}

/// W_ext and rhs_18 at a parameter point, evaluated through the full
/// engine pipeline.
pub fn evaluate_parameters(scenario: &EngineScenario, theta: &[f64], include_u2: bool) -> Result<(f64, f64)> {
    if theta.len() != parameter_count(scenario, include_u2) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} parameters, got {}",
            parameter_count(scenario, include_u2),
            theta.len()
        )));
    }
    let candidate = apply_parameters(scenario, theta, include_u2)?;
    let trace = run_engine(&candidate)?;
    let energies = energy_accounting(&trace, &candidate)?;
    let bounds = bound_evaluation(&trace, &candidate, &energies)?;
    let work = energies
        .w_ext
        .ok_or_else(|| Error::InvalidScenario("feedback optimization needs at most one reservoir".into()))?;
    let bound = bounds.rhs_18.unwrap_or(f64::INFINITY);
    Ok((work, bound))
}

/// Outcome of one restart.
#[derive(Debug, Clone)]
pub struct RestartOutcome {
    pub summary: RestartSummary,
    pub parameters: Vec<f64>,
    pub bound: f64,
    pub bound_violations: usize,
    pub worst_margin: f64,
    /// Best work so far after each evaluation.
    pub best_history: Vec<f64>,
}

/// Run restart `index` in isolation. Its result depends only on the
/// scenario and options plus the index.
pub fn optimize_restart(scenario: &EngineScenario, opts: &OptimizeOptions, index: usize) -> Result<RestartOutcome> {
    scenario.validate()?;
    if scenario.n_reservoirs() > 1 {
        return Err(Error::InvalidScenario(
            "feedback optimization needs at most one reservoir".into(),
        ));
    }
    if opts.budget == 0 {
        return Err(Error::InvalidScenario("optimizer budget must be positive".into()));
    }
    let n = parameter_count(scenario, opts.include_u2);
    let seed = derive_seed(opts.seed, index as u64);
    let start: Vec<f64> = if index == 0 {
        vec![0.0; n]
    } else {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.random_range(-PI..PI)).collect()
    };
    let steps = vec![INITIAL_STEP; n];
    let nm_opts = NelderMeadOptions {
        max_evaluations: opts.budget,
        x_tolerance: X_TOL,
        f_tolerance: F_TOL,
    };

    let mut violations = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut failure: Option<Error> = None;
    let result = if opts.include_u2 {
        nelder_mead(
            |theta| match evaluate_parameters(scenario, theta, true) {
                Ok((w, b)) => {
                    worst_margin = worst_margin.min(b - w);
                    if w > b + BOUND_TOL {
                        violations += 1;
                    }
                    -w
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            &start,
            &steps,
            &nm_opts,
        )
    } else {
        let objective = FeedbackObjective::new(scenario)?;
        nelder_mead(
            |theta| match objective.work(theta) {
                Ok(w) => {
                    worst_margin = worst_margin.min(objective.bound - w);
                    if w > objective.bound + BOUND_TOL {
                        violations += 1;
                    }
                    -w
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            &start,
            &steps,
            &nm_opts,
        )
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let (work, bound) = evaluate_parameters(scenario, &result.point, opts.include_u2)?;
    Ok(RestartOutcome {
        summary: RestartSummary {
            index,
            seed,
            achieved_work: work,
            evaluations: result.evaluations,
            converged: result.converged,
        },
        parameters: result.point,
        bound,
        bound_violations: violations,
        worst_margin,
        best_history: result.best_history.iter().map(|v| -v).collect(),
    })
}

/// Maximize W_ext over the feedback unitaries (and optionally U^(2)) with
/// Nelder–Mead restarts. Restart 0 starts from identity feedback; the rest
/// start from uniformly random generator coordinates in [−π, π).
pub fn optimize_feedback(scenario: &EngineScenario, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    let restarts = opts.restarts.max(1);
    let outcomes = (0..restarts)
        .into_par_iter()
        .map(|i| optimize_restart(scenario, opts, i))
        .collect::<Result<Vec<_>>>()?;

    let baseline = {
        let zeros = vec![0.0; parameter_count(scenario, false)];
        evaluate_parameters(scenario, &zeros, false)?.0
    };

    let best = outcomes
        .iter()
        .reduce(|a, b| {
            if b.summary.achieved_work > a.summary.achieved_work {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");

    let mut best_history = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for o in &outcomes {
        for &w in &o.best_history {
            running = running.max(w);
            best_history.push(running);
        }
    }

    let d = scenario.dim_sr();
    let per = d * d;
    let branches = scenario.basis.dim();
    let best_parameters = (0..branches)
        .map(|k| best.parameters[k * per..(k + 1) * per].to_vec())
        .collect();
    let best_u2_parameters = opts.include_u2.then(|| best.parameters[branches * per..].to_vec());

    Ok(OptimizationResult {
        best_parameters,
        best_u2_parameters,
        achieved_work: best.summary.achieved_work,
        baseline_work: baseline,
        bound: best.bound,
        gap: best.bound - best.summary.achieved_work,
        evaluations: outcomes.iter().map(|o| o.summary.evaluations).sum(),
        converged: best.summary.converged,
        bound_violations: outcomes.iter().map(|o| o.bound_violations).sum(),
        worst_margin: outcomes.iter().map(|o| o.worst_margin).fold(f64::INFINITY, f64::min),
        best_history,
        restarts: outcomes.into_iter().map(|o| o.summary).collect(),
    })
}

/// Flat parameter vector for [`evaluate_parameters`].
pub fn flatten_parameters(result: &OptimizationResult) -> Vec<f64> {
    let mut out: Vec<f64> = result.best_parameters.iter().flatten().copied().collect();
    if let Some(u2) = &result.best_u2_parameters {
        out.extend_from_slice(u2);
    }
    out
}
