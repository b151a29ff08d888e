//! Scenario files and the built-in scenario suite.
//!
//! Files are strict JSON (unknown fields rejected). Complex numbers are
//! `[re, im]` pairs and matrices are row lists of them. Unitaries may be
//! written as a matrix, a named gate or a generator vector:
//!
//! ```json
//! { "matrix": [[[1,0],[0,0]], [[0,0],[1,0]]] }
//! { "gate": "cnot", "control": "S", "target": "A" }
//! { "gate": "swap", "a": "S", "b": "R1" }
//! { "gate": "hadamard", "on": "S" }
//! { "gate": "x", "on": "S" }
//! { "gate": "identity" }
//! { "generator": [0.1, 0.0, 0.0, 0.2] }
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::{carnot_applicable, EngineScenario, ANCILLA, MEMORY, SYSTEM};
use crate::entropy::MeasurementBasis;
use crate::error::{Error, Result};
use crate::linalg::{embed_operator, unitary_from_generator, ComplexMatrix, SubsystemLayout};
use crate::optimize::{OptimizeOptions, ParameterizedUnitary};
use crate::states::{bell_state, derive_seed, random_hermitian_with, rng_from_seed, DensityMatrix, HamiltonianTerm};
use crate::sweep::{SweepDims, SweepSettings};

pub const SCHEMA_VERSION: &str = "1";

pub const BUILTIN_NAMES: [&str; 4] = ["szilard", "carnot2", "eur-bell", "do-nothing"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Single,
    Carnot,
    TwoEngine,
    Sweep,
    Optimize,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Carnot => "carnot",
            Mode::TwoEngine => "two-engine",
            Mode::Sweep => "sweep",
            Mode::Optimize => "optimize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

/// A fully resolved scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    /// Absent only in sweep mode.
    pub engine: Option<EngineScenario>,
    /// The M-basis engine of a two-engine run.
    pub second_engine: Option<EngineScenario>,
    pub sweep: SweepSettings,
    pub optimize: OptimizeOptions,
    pub output: Option<OutputSpec>,
}

impl Scenario {
    pub fn engine(&self) -> Result<&EngineScenario> {
        self.engine
            .as_ref()
            .ok_or_else(|| Error::InvalidScenario(format!("scenario `{}` has no engine", self.name)))
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone)]
struct SquareMatrix(ComplexMatrix);

impl TryFrom<Vec<Vec<[f64; 2]>>> for SquareMatrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> std::result::Result<Self, String> {
        let n = rows.len();
        if n == 0 {
            return Err("matrix is empty".into());
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(format!(
                    "matrix is not square: row {i} has {} entries, expected {n}",
                    row.len()
                ));
            }
        }
        let data = rows
            .into_iter()
            .flatten()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::new(n, n, data)
            .map(SquareMatrix)
            .map_err(|e| e.to_string())
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        SquareMatrix::try_from(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorFile {
    matrix: Option<SquareMatrix>,
    gate: Option<String>,
    control: Option<String>,
    target: Option<String>,
    a: Option<String>,
    b: Option<String>,
    on: Option<String>,
    generator: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisFile {
    /// "computational" or "hadamard".
    named: Option<String>,
    /// Bloch angles (θ, φ) of a qubit basis.
    bloch: Option<[f64; 2]>,
    /// Explicit orthonormal vectors.
    vectors: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    h_initial: SquareMatrix,
    h_final: Option<SquareMatrix>,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReservoirFile {
    name: String,
    hamiltonian: SquareMatrix,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AncillaMemoryFile {
    dims: [usize; 2],
    state: SquareMatrix,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecondEngineFile {
    basis: BasisFile,
    feedback: Vec<OperatorFile>,
    h_final: Option<SquareMatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    count: Option<usize>,
    seed: Option<u64>,
    dims: Option<[usize; 4]>,
    jobs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizeFile {
    budget: Option<usize>,
    restarts: Option<usize>,
    seed: Option<u64>,
    include_u2: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: String,
    name: String,
    mode: Mode,
    #[serde(rename = "kB")]
    kb: Option<f64>,
    seed: Option<u64>,
    system: Option<SystemFile>,
    #[serde(default)]
    reservoirs: Vec<ReservoirFile>,
    ancilla_memory: Option<AncillaMemoryFile>,
    u1: Option<OperatorFile>,
    u2: Option<OperatorFile>,
    basis: Option<BasisFile>,
    feedback: Option<Vec<OperatorFile>>,
    second_engine: Option<SecondEngineFile>,
    sweep: Option<SweepFile>,
    optimize: Option<OptimizeFile>,
    output: Option<OutputSpec>,
}

fn field_error(field: impl Into<String>, message: impl std::fmt::Display) -> Error {
    Error::ScenarioFile {
        field: field.into(),
        line: None,
        column: None,
        message: message.to_string(),
    }
}

/// Attach a field name to any error produced while resolving that field.
fn at<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::ScenarioFile { .. } => e,
        other => field_error(field, other),
    })
}

fn required<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| field_error(field, "missing field required by this mode"))
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    let mut de = serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::ScenarioFile {
            field: if path.is_empty() || path == "." {
                "<root>".into()
            } else {
                path
            },
            line: Some(inner.line()),
            column: Some(inner.column()),
            message: strip_position(&inner.to_string()),
        }
    })?;
    resolve(file)
}

/// serde_json appends " at line L column C"; the error type carries those.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_str(&text)
}

fn resolve(file: ScenarioFile) -> Result<Scenario> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(field_error(
            "schema_version",
            format!(
                "unsupported schema version `{}`, expected `{SCHEMA_VERSION}`",
                file.schema_version
            ),
        ));
    }
    let seed = file.seed.unwrap_or(0);

    let sweep = {
        let s = file.sweep.as_ref();
        let defaults = SweepSettings::default();
        let dims = match s.and_then(|s| s.dims) {
            Some([s_, r, a, b]) => SweepDims { s: s_, r, a, b },
            None => defaults.dims,
        };
        SweepSettings {
            count: s.and_then(|s| s.count).unwrap_or(defaults.count),
            seed: s.and_then(|s| s.seed).unwrap_or(seed),
            dims,
            jobs: s.and_then(|s| s.jobs),
        }
    };
    if sweep.count == 0 {
        return Err(field_error("sweep.count", "must be at least 1"));
    }
    at("sweep.dims", sweep.dims.validate())?;

    let optimize = {
        let o = file.optimize.as_ref();
        let d = OptimizeOptions::default();
        OptimizeOptions {
            budget: o.and_then(|o| o.budget).unwrap_or(d.budget),
            restarts: o.and_then(|o| o.restarts).unwrap_or(d.restarts),
            seed: o.and_then(|o| o.seed).unwrap_or(seed),
            include_u2: o.and_then(|o| o.include_u2).unwrap_or(d.include_u2),
        }
    };
    if optimize.budget == 0 {
        return Err(field_error("optimize.budget", "must be at least 1"));
    }

    let engine = if file.mode == Mode::Sweep && file.system.is_none() {
        None
    } else {
        Some(resolve_engine(&file, seed)?)
    };

    let second_engine = match (&file.second_engine, &engine) {
        (Some(second), Some(first)) => Some(resolve_second(second, first)?),
        (None, _) if file.mode == Mode::TwoEngine => {
            return Err(field_error("second_engine", "missing field required by this mode"))
        }
        _ => None,
    };

    if file.mode == Mode::Carnot {
        if let Some(e) = &engine {
            if !carnot_applicable(e) {
                return Err(field_error(
                    "reservoirs",
                    "carnot mode needs two reservoirs (cold first, hot second) and h_final equal to h_initial",
                ));
            }
        }
    }
    if file.mode == Mode::Optimize {
        if let Some(e) = &engine {
            if e.n_reservoirs() > 1 {
                return Err(field_error("reservoirs", "optimize mode allows at most one reservoir"));
            }
        }
    }

    Ok(Scenario {
        name: file.name,
        mode: file.mode,
        engine,
        second_engine,
        sweep,
        optimize,
        output: file.output,
    })
}

fn hamiltonian(name: &str, m: &SquareMatrix, temperature: Option<f64>, field: &str) -> Result<HamiltonianTerm> {
    at(field, HamiltonianTerm::new(name, m.0.clone(), temperature))
}

fn resolve_engine(file: &ScenarioFile, seed: u64) -> Result<EngineScenario> {
    let system = required(&file.system, "system")?;
    let h_s_initial = hamiltonian(SYSTEM, &system.h_initial, None, "system.h_initial")?;
    let h_s_final = match &system.h_final {
        Some(h) => hamiltonian(SYSTEM, h, None, "system.h_final")?,
        None => h_s_initial.clone(),
    };
    if !(system.temperature > 0.0 && system.temperature.is_finite()) {
        return Err(field_error("system.temperature", "must be positive"));
    }
    let reservoirs = file
        .reservoirs
        .iter()
        .enumerate()
        .map(|(m, r)| {
            let field = format!("reservoirs[{m}]");
            if !(r.temperature > 0.0 && r.temperature.is_finite()) {
                return Err(field_error(format!("{field}.temperature"), "must be positive"));
            }
            hamiltonian(
                &r.name,
                &r.hamiltonian,
                Some(r.temperature),
                &format!("{field}.hamiltonian"),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let am = required(&file.ancilla_memory, "ancilla_memory")?;
    let ab_layout = at(
        "ancilla_memory.dims",
        SubsystemLayout::new([(ANCILLA, am.dims[0]), (MEMORY, am.dims[1])]),
    )?;
    if am.state.0.rows() != ab_layout.dim() {
        return Err(field_error(
            "ancilla_memory.state",
            format!("state is {0}x{0} but dims give {1}", am.state.0.rows(), ab_layout.dim()),
        ));
    }
    let rho_ab_initial = at(
        "ancilla_memory.state",
        DensityMatrix::new(am.state.0.clone(), ab_layout),
    )?;

    let mut sr_factors = vec![(SYSTEM.to_string(), h_s_initial.dim())];
    sr_factors.extend(reservoirs.iter().map(|r| (r.name.clone(), r.dim())));
    let sr_layout = at("reservoirs", SubsystemLayout::new(sr_factors))?;
    let sa_layout = at(
        "ancilla_memory.dims",
        SubsystemLayout::new([(SYSTEM, h_s_initial.dim()), (ANCILLA, am.dims[0])]),
    )?;

    let u1 = match &file.u1 {
        Some(op) => operator(op, &sr_layout, "u1")?,
        None => ComplexMatrix::identity(sr_layout.dim()),
    };
    let u2 = operator(required(&file.u2, "u2")?, &sa_layout, "u2")?;
    let basis = basis(required(&file.basis, "basis")?, am.dims[0], "basis")?;
    let feedback = feedback(required(&file.feedback, "feedback")?, &sr_layout, "feedback")?;

    let scenario = EngineScenario {
        name: file.name.clone(),
        h_s_initial,
        h_s_final,
        system_temperature: system.temperature,
        reservoirs,
        rho_ab_initial,
        u1,
        u2,
        basis,
        feedback,
        kb: file.kb.unwrap_or(1.0),
        seed,
    };
    at("<scenario>", scenario.validate())?;
    Ok(scenario)
}

fn resolve_second(second: &SecondEngineFile, first: &EngineScenario) -> Result<EngineScenario> {
    let mut out = first.clone();
    let sr_layout = first.layout()?.restrict(&first.sr_names())?;
    out.basis = basis(&second.basis, first.dim_a(), "second_engine.basis")?;
    out.feedback = feedback(&second.feedback, &sr_layout, "second_engine.feedback")?;
    if let Some(h) = &second.h_final {
        out.h_s_final = hamiltonian(SYSTEM, h, None, "second_engine.h_final")?;
    }
    at("second_engine", out.validate())?;
    Ok(out)
}

fn feedback(ops: &[OperatorFile], layout: &SubsystemLayout, field: &str) -> Result<Vec<ComplexMatrix>> {
    ops.iter()
        .enumerate()
        .map(|(k, op)| operator(op, layout, &format!("{field}[{k}]")))
        .collect()
}

fn basis(b: &BasisFile, dim: usize, field: &str) -> Result<MeasurementBasis> {
    let given = [b.named.is_some(), b.bloch.is_some(), b.vectors.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(field_error(field, "give exactly one of `named`, `bloch`, `vectors`"));
    }
    let out = if let Some(name) = &b.named {
        match name.as_str() {
            "computational" => MeasurementBasis::computational(ANCILLA, dim),
            "hadamard" if dim == 2 => MeasurementBasis::hadamard(ANCILLA),
            "hadamard" => return Err(field_error(field, "the hadamard basis needs a qubit ancilla")),
            other => return Err(field_error(field, format!("unknown basis `{other}`"))),
        }
    } else if let Some([theta, phi]) = b.bloch {
        if dim != 2 {
            return Err(field_error(field, "a bloch basis needs a qubit ancilla"));
        }
        MeasurementBasis::bloch(ANCILLA, theta, phi)
    } else {
        let vectors = b
            .vectors
            .as_ref()
            .map(|vs| {
                vs.iter()
                    .map(|v| v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                    .collect()
            })
            .unwrap_or_default();
        at(field, MeasurementBasis::new("custom", ANCILLA, vectors))?
    };
    if out.dim() != dim {
        return Err(field_error(
            field,
            format!("basis has {} vectors, ancilla dimension is {dim}", out.dim()),
        ));
    }
    Ok(out)
}

fn factor_arg<'a>(v: &'a Option<String>, gate: &str, arg: &str, field: &str) -> Result<&'a str> {
    v.as_deref()
        .ok_or_else(|| field_error(field, format!("gate `{gate}` needs `{arg}`")))
}

fn operator(op: &OperatorFile, layout: &SubsystemLayout, field: &str) -> Result<ComplexMatrix> {
    let given = [op.matrix.is_some(), op.gate.is_some(), op.generator.is_some()];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(field_error(field, "give exactly one of `matrix`, `gate`, `generator`"));
    }
    let d = layout.dim();
    let check_unused = |allowed: &[&str]| -> Result<()> {
        let present = [
            ("control", op.control.is_some()),
            ("target", op.target.is_some()),
            ("a", op.a.is_some()),
            ("b", op.b.is_some()),
            ("on", op.on.is_some()),
        ];
        match present.iter().find(|(n, p)| *p && !allowed.contains(n)) {
            Some((n, _)) => Err(field_error(field, format!("`{n}` does not apply here"))),
            None => Ok(()),
        }
    };
    let m = if let Some(m) = &op.matrix {
        check_unused(&[])?;
        m.0.clone()
    } else if let Some(g) = &op.generator {
        check_unused(&[])?;
        at(field, ParameterizedUnitary::new(d, g.clone()).and_then(|p| p.unitary()))?
    } else {
        let gate = op.gate.as_deref().unwrap_or_default();
        let m = match gate {
            "identity" => {
                check_unused(&[])?;
                Ok(ComplexMatrix::identity(d))
            }
            "cnot" => {
                check_unused(&["control", "target"])?;
                let c = factor_arg(&op.control, gate, "control", field)?;
                let t = factor_arg(&op.target, gate, "target", field)?;
                at(field, require_qubits(layout, &[c, t]))?;
                embed_operator(&cnot(), layout, &[c, t])
            }
            "swap" => {
                check_unused(&["a", "b"])?;
                let a = factor_arg(&op.a, gate, "a", field)?;
                let b = factor_arg(&op.b, gate, "b", field)?;
                let da = at(field, layout.factor_dim(a))?;
                if da != at(field, layout.factor_dim(b))? {
                    return Err(field_error(
                        field,
                        format!("cannot swap `{a}` and `{b}` of different dimensions"),
                    ));
                }
                embed_operator(&swap(da), layout, &[a, b])
            }
            "hadamard" => {
                check_unused(&["on"])?;
                let on = factor_arg(&op.on, gate, "on", field)?;
                at(field, require_qubits(layout, &[on]))?;
                embed_operator(&hadamard(), layout, &[on])
            }
            "x" => {
                check_unused(&["on"])?;
                let on = factor_arg(&op.on, gate, "on", field)?;
                let dim = at(field, layout.factor_dim(on))?;
                embed_operator(&shift(dim), layout, &[on])
            }
            other => return Err(field_error(field, format!("unknown gate `{other}`"))),
        };
        at(field, m)?
    };
    if m.rows() != d {
        return Err(field_error(
            field,
            format!("operator is {0}x{0} but acts on {layout} of dimension {d}", m.rows()),
        ));
    }
    Ok(m)
}

fn require_qubits(layout: &SubsystemLayout, names: &[&str]) -> Result<()> {
    for n in names {
        let d = layout.factor_dim(n)?;
        if d != 2 {
            return Err(Error::DimensionMismatch(format!(
                "factor `{n}` has dimension {d}, gate needs a qubit"
            )));
        }
    }
    if names.len() == 2 && names[0] == names[1] {
        return Err(Error::InvalidLayout(format!("gate uses factor `{}` twice", names[0])));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gates

/// CNOT with the control as the first factor.
pub fn cnot() -> ComplexMatrix {
    ComplexMatrix::from_real_rows(&[
        &[1.0, 0.0, 0.0, 0.0],
        &[0.0, 1.0, 0.0, 0.0],
        &[0.0, 0.0, 0.0, 1.0],
        &[0.0, 0.0, 1.0, 0.0],
    ])
}

pub fn hadamard() -> ComplexMatrix {
    let s = FRAC_1_SQRT_2;
    ComplexMatrix::from_real_rows(&[&[s, s], &[s, -s]])
}

pub fn pauli_x() -> ComplexMatrix {
    shift(2)
}

/// |j⟩ → |j+1 mod d⟩; Pauli-X for a qubit.
pub fn shift(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |r, c| {
        if r == (c + 1) % d {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Swap of two d-dimensional factors.
pub fn swap(d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (c / d, c % d);
        if r == j * d + i {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

// ---------------------------------------------------------------------------
// Built-in scenarios

fn pure_ab_zero() -> Result<DensityMatrix> {
    DensityMatrix::basis_state(SubsystemLayout::new([(ANCILLA, 2), (MEMORY, 2)])?, &[0, 0])
}

fn qubit_system(gap: f64) -> Result<HamiltonianTerm> {
    HamiltonianTerm::qubit(SYSTEM, gap, None)
}

/// S qubit with H = 0 at T = 1, no reservoir, A and B in |0⟩,
/// U^(2) = CNOT(S → A), computational basis, feedback (I, X_S).
pub fn szilard() -> Result<EngineScenario> {
    let h = qubit_system(0.0)?;
    Ok(EngineScenario {
        name: "szilard".into(),
        h_s_initial: h.clone(),
        h_s_final: h,
        system_temperature: 1.0,
        reservoirs: vec![],
        rho_ab_initial: pure_ab_zero()?,
        u1: ComplexMatrix::identity(2),
        u2: cnot(),
        basis: MeasurementBasis::computational(ANCILLA, 2),
        feedback: vec![ComplexMatrix::identity(2), pauli_x()],
        kb: 1.0,
        seed: 0,
    })
}

/// [`szilard`] with one work qubit R1 (gap 1, T = 1) and identity feedback,
/// the starting point for feedback optimization.
pub fn szilard_with_reservoir() -> Result<EngineScenario> {
    let mut s = szilard()?;
    s.name = "szilard-reservoir".into();
    s.reservoirs = vec![HamiltonianTerm::qubit("R1", 1.0, Some(1.0))?];
    s.u1 = ComplexMatrix::identity(4);
    s.feedback = vec![ComplexMatrix::identity(4); 2];
    s.validate()?;
    Ok(s)
}

/// Σ_s |s⟩⟨s|_S ⊗ V_s on S ⊗ R.
fn system_controlled(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let d_r = blocks[0].rows();
    let d = blocks.len() * d_r;
    let mut u = ComplexMatrix::zeros(d, d);
    for (s, v) in blocks.iter().enumerate() {
        for i in 0..d_r {
            for j in 0..d_r {
                u[(s * d_r + i, s * d_r + j)] = v[(i, j)];
            }
        }
    }
    u
}

/// Partial swap of two equal-gap qubits with random angle and phases; it
/// conserves their total energy.
fn random_exchange(rng: &mut rand_chacha::ChaCha8Rng) -> ComplexMatrix {
    use rand::Rng;
    let theta: f64 = rng.random_range(0.25 * PI..0.5 * PI);
    let [phi, alpha, beta]: [f64; 3] = std::array::from_fn(|_| rng.random_range(-PI..PI));
    let (c, s) = (theta.cos(), theta.sin());
    let mut v = ComplexMatrix::zeros(4, 4);
    v[(0, 0)] = Complex64::from_polar(1.0, alpha);
    v[(1, 1)] = Complex64::new(c, 0.0);
    v[(1, 2)] = -Complex64::from_polar(s, phi);
    v[(2, 1)] = Complex64::from_polar(s, -phi);
    v[(2, 2)] = Complex64::new(c, 0.0);
    v[(3, 3)] = Complex64::from_polar(1.0, beta);
    v
}

/// Strength of the random feedback generators in [`carnot2`].
const CARNOT_FEEDBACK_STRENGTH: f64 = 0.2;

/// Qubit S (gap 1) with a cold bath R1 (T = 1) and a hot bath R2 (T = 2),
/// both gap-1 qubits. U^(1) exchanges energy between the baths through a
/// seeded partial swap chosen per system level; the feedback applies weak
/// seeded random unitaries to the baths, again per system level.
pub fn carnot2(seed: u64) -> Result<EngineScenario> {
    let h = qubit_system(1.0)?;
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let u1 = system_controlled(&[random_exchange(&mut rng), random_exchange(&mut rng)]);
    let mut feedback = Vec::new();
    for _ in 0..2 {
        let blocks = (0..2)
            .map(|_| {
                let g = random_hermitian_with(&mut rng, 4).scale_real(CARNOT_FEEDBACK_STRENGTH);
                unitary_from_generator(&g)
            })
            .collect::<Result<Vec<_>>>()?;
        feedback.push(system_controlled(&blocks));
    }
    let s = EngineScenario {
        name: "carnot2".into(),
        h_s_initial: h.clone(),
        h_s_final: h,
        system_temperature: 1.0,
        reservoirs: vec![
            HamiltonianTerm::qubit("R1", 1.0, Some(1.0))?,
            HamiltonianTerm::qubit("R2", 1.0, Some(2.0))?,
        ],
        rho_ab_initial: pure_ab_zero()?,
        u1,
        u2: cnot(),
        basis: MeasurementBasis::computational(ANCILLA, 2),
        feedback,
        kb: 1.0,
        seed,
    };
    s.validate()?;
    Ok(s)
}

/// Bell ancilla–memory pair; K engine measures the computational basis,
/// M engine the Hadamard basis. Everything else is identity.
pub fn eur_bell() -> Result<(EngineScenario, EngineScenario)> {
    let h = qubit_system(1.0)?;
    let k = EngineScenario {
        name: "eur-bell".into(),
        h_s_initial: h.clone(),
        h_s_final: h,
        system_temperature: 1.0,
        reservoirs: vec![HamiltonianTerm::qubit("R1", 1.0, Some(1.0))?],
        rho_ab_initial: bell_state(),
        u1: ComplexMatrix::identity(4),
        u2: ComplexMatrix::identity(4),
        basis: MeasurementBasis::computational(ANCILLA, 2),
        feedback: vec![ComplexMatrix::identity(4); 2],
        kb: 1.0,
        seed: 0,
    };
    let mut m = k.clone();
    m.basis = MeasurementBasis::hadamard(ANCILLA);
    k.validate()?;
    m.validate()?;
    Ok((k, m))
}

/// Qubit S (gap 1) and one reservoir qubit, all unitaries identity, A and
/// B in |0⟩.
pub fn do_nothing() -> Result<EngineScenario> {
    let h = qubit_system(1.0)?;
    let s = EngineScenario {
        name: "do-nothing".into(),
        h_s_initial: h.clone(),
        h_s_final: h,
        system_temperature: 1.0,
        reservoirs: vec![HamiltonianTerm::qubit("R1", 1.0, Some(1.0))?],
        rho_ab_initial: pure_ab_zero()?,
        u1: ComplexMatrix::identity(4),
        u2: ComplexMatrix::identity(4),
        basis: MeasurementBasis::computational(ANCILLA, 2),
        feedback: vec![ComplexMatrix::identity(4); 2],
        kb: 1.0,
        seed: 0,
    };
    s.validate()?;
    Ok(s)
}

fn wrap(name: &str, mode: Mode, engine: EngineScenario, second: Option<EngineScenario>, seed: u64) -> Scenario {
    Scenario {
        name: name.into(),
        mode,
        engine: Some(engine),
        second_engine: second,
        sweep: SweepSettings::default(),
        optimize: OptimizeOptions {
            seed,
            ..OptimizeOptions::default()
        },
        output: None,
    }
}

/// Look up a built-in scenario; `seed` only affects `carnot2`.
pub fn builtin(name: &str, seed: u64) -> Result<Scenario> {
    Ok(match name {
        "szilard" => wrap(name, Mode::Single, szilard()?, None, seed),
        "carnot2" => wrap(name, Mode::Carnot, carnot2(seed)?, None, seed),
        "eur-bell" => {
            let (k, m) = eur_bell()?;
            wrap(name, Mode::TwoEngine, k, Some(m), seed)
        }
        "do-nothing" => wrap(name, Mode::Single, do_nothing()?, None, seed),
        other => {
            return Err(Error::InvalidScenario(format!(
                "unknown builtin `{other}`; available: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_unitary;

    const MINIMAL: &str = r#"{
        "schema_version": "1",
        "name": "file-szilard",
        "mode": "single",
        "system": { "h_initial": [[[0,0],[0,0]],[[0,0],[0,0]]], "temperature": 1.0 },
        "ancilla_memory": { "dims": [2, 2], "state": [
            [[1,0],[0,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]]] },
        "u2": { "gate": "cnot", "control": "S", "target": "A" },
        "basis": { "named": "computational" },
        "feedback": [ { "gate": "identity" }, { "gate": "x", "on": "S" } ]
    }"#;

    #[test]
    fn gates_are_unitary() {
        for g in [cnot(), hadamard(), pauli_x(), shift(3), swap(2), swap(3)] {
            assert!(is_unitary(&g, 1e-12));
        }
    }

    #[test]
    fn swap_exchanges_factors() {
        let s = swap(3);
        // |1⟩|2⟩ → |2⟩|1⟩
        assert_eq!(s[(2 * 3 + 1, 3 + 2)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn minimal_file_matches_szilard_builtin() {
        let parsed = parse_scenario_str(MINIMAL).unwrap();
        let e = parsed.engine().unwrap();
        let b = szilard().unwrap();
        assert_eq!(parsed.mode, Mode::Single);
        assert!(e.u2.max_abs_diff(&b.u2) < 1e-15);
        assert!(e.feedback[1].max_abs_diff(&b.feedback[1]) < 1e-15);
        assert!(e.rho_ab_initial.matrix().max_abs_diff(b.rho_ab_initial.matrix()) < 1e-15);
    }

    #[test]
    fn unknown_field_is_rejected_with_position() {
        let text = MINIMAL.replace("\"mode\": \"single\",", "\"mode\": \"single\", \"colour\": 3,");
        match parse_scenario_str(&text).unwrap_err() {
            Error::ScenarioFile { line, message, .. } => {
                assert_eq!(line, Some(4));
                assert!(message.contains("colour"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn non_square_matrix_names_field() {
        let text = MINIMAL.replace("[[[0,0],[0,0]],[[0,0],[0,0]]]", "[[[0,0],[0,0]],[[0,0]]]");
        match parse_scenario_str(&text).unwrap_err() {
            Error::ScenarioFile {
                field, line, message, ..
            } => {
                assert_eq!(field, "system.h_initial");
                assert!(line.is_some());
                assert!(message.contains("not square"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_field() {
        let text = MINIMAL.replace(
            "{ \"gate\": \"x\", \"on\": \"S\" }",
            "{ \"gate\": \"x\", \"on\": \"Q\" }",
        );
        match parse_scenario_str(&text).unwrap_err() {
            Error::ScenarioFile { field, .. } => assert_eq!(field, "feedback[1]"),
            e => panic!("unexpected {e:?}"),
        }
        let text = MINIMAL.replace("\"named\": \"computational\"", "\"named\": \"diagonal\"");
        match parse_scenario_str(&text).unwrap_err() {
            Error::ScenarioFile { field, .. } => assert_eq!(field, "basis"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn missing_required_field_in_single_mode() {
        let text = MINIMAL.replace("\"basis\": { \"named\": \"computational\" },", "");
        match parse_scenario_str(&text).unwrap_err() {
            Error::ScenarioFile { field, .. } => assert_eq!(field, "basis"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_NAMES {
            let s = builtin(name, 3).unwrap();
            s.engine().unwrap().validate().unwrap();
        }
        assert!(builtin("maxwell", 0).is_err());
        assert_eq!(builtin("eur-bell", 0).unwrap().mode, Mode::TwoEngine);
    }

    #[test]
    fn carnot2_depends_on_seed() {
        let a = carnot2(1).unwrap();
        let b = carnot2(2).unwrap();
        let c = carnot2(1).unwrap();
        assert!(a.u1.max_abs_diff(&b.u1) > 1e-3);
        assert_eq!(a.u1, c.u1);
    }
}
