//! Entropy functionals in nats: von Neumann and Shannon entropy, relative
//! entropy, mutual and conditional information, measured conditional
//! entropy, and the classical-correlation / discord split.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{embed_operator, herm_eig, herm_eigenvalues, partial_trace, ComplexMatrix, SubsystemLayout};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::states::DensityMatrix;

/// Eigenvalues below this contribute nothing to −λ ln λ.
pub const LAMBDA_CLIP: f64 = 1e-12;
/// Contractually nonnegative quantities within this of zero are clipped to zero.
pub const NONNEG_TOL: f64 = 1e-9;
/// Orthonormality tolerance for measurement bases.
pub const BASIS_TOL: f64 = 1e-9;

const DISCORD_GRID: usize = 64;

/// Complete rank-1 projective measurement on one named factor, given by
/// orthonormal vectors |k⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis {
    pub label: String,
    pub factor: String,
    vectors: Vec<Vec<Complex64>>,
}

impl MeasurementBasis {
    pub fn new(label: impl Into<String>, factor: impl Into<String>, vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::InvalidBasis("no basis vectors".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(Error::InvalidBasis(format!(
                "{d} vectors of length {} do not form a complete basis",
                v.len()
            )));
        }
        for i in 0..d {
            for j in i..d {
                let ip: Complex64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (ip - want).norm() > BASIS_TOL {
                    return Err(Error::InvalidBasis(format!(
                        "vectors {i} and {j} have inner product {ip}, expected {want}"
                    )));
                }
            }
        }
        Ok(Self {
            label: label.into(),
            factor: factor.into(),
            vectors,
        })
    }

    pub fn computational(factor: impl Into<String>, dim: usize) -> Self {
        let vectors = (0..dim)
            .map(|k| {
                let mut v = vec![Complex64::new(0.0, 0.0); dim];
                v[k] = Complex64::new(1.0, 0.0);
                v
            })
            .collect();
        Self {
            label: "computational".into(),
            factor: factor.into(),
            vectors,
        }
    }

    /// Eigenbasis of Pauli-X: |±⟩ = (|0⟩ ± |1⟩)/√2.
    pub fn hadamard(factor: impl Into<String>) -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            label: "hadamard".into(),
            factor: factor.into(),
            vectors: vec![vec![s, s], vec![s, -s]],
        }
    }

    /// Qubit basis {|n⟩, |−n⟩} for the Bloch direction (θ, φ).
    pub fn bloch(factor: impl Into<String>, theta: f64, phi: f64) -> Self {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let e = Complex64::from_polar(1.0, phi);
        Self {
            label: format!("bloch({theta:.6},{phi:.6})"),
            factor: factor.into(),
            vectors: vec![
                vec![Complex64::new(c, 0.0), e * s],
                vec![-e.conj() * s, Complex64::new(c, 0.0)],
            ],
        }
    }

    /// Columns of a unitary matrix.
    pub fn from_unitary(label: impl Into<String>, factor: impl Into<String>, u: &ComplexMatrix) -> Result<Self> {
        let vectors = (0..u.cols()).map(|j| u.column(j)).collect();
        Self::new(label, factor, vectors)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// |k⟩⟨k| for each basis vector.
    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        self.vectors.iter().map(|v| ComplexMatrix::outer(v, v)).collect()
    }

    /// Same vectors on a differently named factor.
    pub fn on_factor(&self, factor: impl Into<String>) -> Self {
        Self {
            factor: factor.into(),
            ..self.clone()
        }
    }
}

/// −Σ λ ln λ over a spectrum, ignoring λ < [`LAMBDA_CLIP`].
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    values.iter().filter(|&&l| l >= LAMBDA_CLIP).map(|&l| -l * l.ln()).sum()
}

pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    spectrum_entropy(&rho.eigenvalues())
}

/// Entropy of a Hermitian PSD matrix that need not have unit trace
/// (e.g. an unnormalized branch); evaluated on its raw spectrum.
pub fn matrix_entropy(m: &ComplexMatrix) -> Result<f64> {
    Ok(spectrum_entropy(&herm_eigenvalues(m)?))
}

pub fn shannon(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(x) = p.iter().find(|&&x| x < -1e-12 || !x.is_finite()) {
        return Err(Error::InvalidProbabilities(format!("entry {x} is negative")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(format!("entries sum to {sum}")));
    }
    let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    Ok(spectrum_entropy(&clipped.iter().map(|x| x / total).collect::<Vec<_>>()))
}

/// Clip a contractually nonnegative quantity, erroring on real negatives.
pub fn clip_nonnegative(quantity: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -NONNEG_TOL {
        Ok(0.0)
    } else {
        Err(Error::NegativeQuantity { quantity, value })
    }
}

/// S(ρ‖σ) = tr ρ ln ρ − tr ρ ln σ; `f64::INFINITY` when supp ρ ⊄ supp σ.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy between dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let eig = herm_eig(sigma.matrix())?;
    let r = rho.matrix();
    let n = rho.dim();
    let mut cross = 0.0;
    for (k, &s) in eig.values.iter().enumerate() {
        let v = eig.vectors.column(k);
        // ⟨v|ρ|v⟩
        let mut w = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                w += v[i].conj() * r[(i, j)] * v[j];
            }
        }
        if s < LAMBDA_CLIP {
            if w.re > 1e-9 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        cross += w.re * s.ln();
    }
    let value = -vn_entropy(rho) - cross;
    clip_nonnegative("relative entropy", value)
}

fn check_partition(rho: &DensityMatrix, x: &[&str], y: &[&str]) -> Result<()> {
    let layout = rho.layout();
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidPartition("both parts must be nonempty".into()));
    }
    for n in x.iter().chain(y) {
        layout.index_of(n)?;
    }
    if let Some(n) = x.iter().find(|n| y.contains(n)) {
        return Err(Error::InvalidPartition(format!("factor `{n}` appears in both parts")));
    }
    let covered = x.len() + y.len();
    if covered != layout.factors().len() {
        let missing = layout.complement(&[x, y].concat());
        return Err(Error::InvalidPartition(format!(
            "parts do not cover the layout; missing {missing:?}"
        )));
    }
    Ok(())
}

/// I(X:Y) = S(ρ_X) + S(ρ_Y) − S(ρ_XY) for a complete bipartition.
pub fn mutual_information(rho: &DensityMatrix, part_x: &[&str], part_y: &[&str]) -> Result<f64> {
    check_partition(rho, part_x, part_y)?;
    let sx = vn_entropy(&rho.reduce(part_x)?);
    let sy = vn_entropy(&rho.reduce(part_y)?);
    clip_nonnegative("mutual information", sx + sy - vn_entropy(rho))
}

/// S(X|Y) = S(ρ_XY) − S(ρ_Y); negative values witness entanglement.
pub fn conditional_entropy(rho: &DensityMatrix, of: &[&str], given: &[&str]) -> Result<f64> {
    check_partition(rho, of, given)?;
    Ok(vn_entropy(rho) - vn_entropy(&rho.reduce(given)?))
}

/// One outcome of a projective measurement.
#[derive(Debug, Clone)]
pub struct MeasuredBranch {
    pub probability: f64,
    /// tr_A(Π_k ρ Π_k), on the unmeasured factors.
    pub unnormalized: ComplexMatrix,
    /// Normalized conditional state; `None` for zero-probability outcomes.
    pub conditional: Option<DensityMatrix>,
}

/// Probability below which an outcome is treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-12;

fn check_basis_factor(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<()> {
    let d = rho.layout().factor_dim(&basis.factor)?;
    if d != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis `{}` has dimension {} but factor `{}` has dimension {d}",
            basis.label,
            basis.dim(),
            basis.factor
        )));
    }
    Ok(())
}

/// Outcome probabilities and post-measurement states of the unmeasured
/// factors. The measured factor must not be the only factor.
pub fn measurement_branches(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<Vec<MeasuredBranch>> {
    check_basis_factor(rho, basis)?;
    let layout = rho.layout();
    let rest = layout.complement(&[basis.factor.as_str()]);
    if rest.is_empty() {
        return Err(Error::InvalidPartition(
            "nothing left after measuring the only factor".into(),
        ));
    }
    let rest_layout = layout.restrict(&rest)?;
    basis
        .projectors()
        .iter()
        .map(|p| {
            let full = embed_operator(p, layout, &[basis.factor.as_str()])?;
            let projected = rho.matrix().conjugate_by(&full)?;
            let unnormalized = partial_trace(&projected, layout, &rest)?;
            let probability = unnormalized.trace().re;
            let conditional = if probability >= ZERO_PROBABILITY {
                Some(DensityMatrix::new(
                    unnormalized.scale_real(1.0 / probability),
                    rest_layout.clone(),
                )?)
            } else {
                None
            };
            Ok(MeasuredBranch {
                probability,
                unnormalized,
                conditional,
            })
        })
        .collect()
}

/// Σ_k (Π_k ⊗ I) ρ (Π_k ⊗ I).
pub fn dephase(rho: &DensityMatrix, basis: &MeasurementBasis) -> Result<DensityMatrix> {
    check_basis_factor(rho, basis)?;
    let layout = rho.layout();
    let mut acc = ComplexMatrix::zeros(rho.dim(), rho.dim());
    for p in basis.projectors() {
        let full = embed_operator(&p, layout, &[basis.factor.as_str()])?;
        acc = &acc + &rho.matrix().conjugate_by(&full)?;
    }
    DensityMatrix::new(acc, layout.clone())
}

/// S(K|B): conditional entropy of the rest given nothing but the
/// measurement record, i.e. S(Σ_k Π_k ρ Π_k) − S(ρ_rest).
pub fn measured_conditional_entropy(rho_ab: &DensityMatrix, basis: &MeasurementBasis) -> Result<f64> {
    let post = dephase(rho_ab, basis)?;
    let rest = rho_ab.layout().complement(&[basis.factor.as_str()]);
    Ok(vn_entropy(&post) - vn_entropy(&rho_ab.reduce(&rest)?))
}

/// Σ_k p_k S(ρ_B^k): average entropy left in the unmeasured part.
fn average_conditional_entropy(rho_ab: &DensityMatrix, basis: &MeasurementBasis) -> Result<f64> {
    Ok(measurement_branches(rho_ab, basis)?
        .iter()
        .filter_map(|b| b.conditional.as_ref().map(|c| b.probability * vn_entropy(c)))
        .sum())
}

/// Mutual information split into classical correlation and discord, with
/// the measurement on the first factor of a bipartite state.
#[derive(Debug, Clone)]
pub struct DiscordReport {
    pub mutual_information: f64,
    pub classical_correlation: f64,
    pub discord: f64,
    pub basis: MeasurementBasis,
    /// False when J was evaluated at a supplied basis only, in which case J
    /// is a lower bound and δ an upper bound.
    pub optimized: bool,
}

pub fn discord_decomposition(
    rho_ab: &DensityMatrix,
    optimize: bool,
    basis_hint: Option<&MeasurementBasis>,
) -> Result<DiscordReport> {
    let names = rho_ab.layout().names();
    if names.len() != 2 {
        return Err(Error::InvalidPartition(format!(
            "discord needs a bipartite state, got layout {}",
            rho_ab.layout()
        )));
    }
    let (a, b) = (names[0], names[1]);
    let dim_a = rho_ab.layout().factor_dim(a)?;
    if let Some(h) = basis_hint {
        if h.factor != a {
            return Err(Error::InvalidBasis(format!(
                "basis acts on `{}` but the measured factor is `{a}`",
                h.factor
            )));
        }
    }
    let mutual = mutual_information(rho_ab, &[a], &[b])?;
    let s_b = vn_entropy(&rho_ab.reduce(&[b])?);

    let (basis, cost) = if optimize {
        if dim_a != 2 {
            return Err(Error::Unsupported(format!(
                "discord optimization requires a qubit measured factor, `{a}` has dimension {dim_a}"
            )));
        }
        optimize_qubit_basis(rho_ab, a, basis_hint)?
    } else {
        let basis = basis_hint
            .cloned()
            .unwrap_or_else(|| MeasurementBasis::computational(a, dim_a));
        let cost = average_conditional_entropy(rho_ab, &basis)?;
        (basis, cost)
    };

    let classical = clip_nonnegative("classical correlation", s_b - cost)?;
    let discord = clip_nonnegative("discord", mutual - classical)?;
    Ok(DiscordReport {
        mutual_information: mutual,
        classical_correlation: classical,
        discord,
        basis,
        optimized: optimize,
    })
}

/// The blocks ⟨a|ρ_AB|c⟩ of a state whose measured factor is a qubit, so that
/// tr_A[(|v⟩⟨v| ⊗ I) ρ] = Σ_{a,c} v_a v̄_c ⟨c|ρ|a⟩ costs one small sum.
struct QubitBranches {
    blocks: [[ComplexMatrix; 2]; 2],
}

impl QubitBranches {
    fn new(rho_ab: &DensityMatrix, factor: &str) -> Result<Self> {
        let layout = rho_ab.layout();
        if layout.index_of(factor)? != 0 || layout.factor_dim(factor)? != 2 {
            return Err(Error::Unsupported(format!(
                "`{factor}` must be the leading qubit factor"
            )));
        }
        let d = rho_ab.dim() / 2;
        let m = rho_ab.matrix();
        let block = |c: usize, a: usize| ComplexMatrix::from_fn(d, d, |i, j| m[(c * d + i, a * d + j)]);
        Ok(Self {
            blocks: [[block(0, 0), block(0, 1)], [block(1, 0), block(1, 1)]],
        })
    }

    /// Σ_k p_k S(ρ_B^k) for the given basis.
    fn cost(&self, basis: &MeasurementBasis) -> Result<f64> {
        let d = self.blocks[0][0].rows();
        let mut total = 0.0;
        for v in basis.vectors() {
            let mut branch = ComplexMatrix::zeros(d, d);
            for (c, row) in self.blocks.iter().enumerate() {
                for (a, blk) in row.iter().enumerate() {
                    branch = &branch + &blk.scale(v[a] * v[c].conj());
                }
            }
            let p = branch.trace().re;
            if p >= ZERO_PROBABILITY {
                total += p * spectrum_entropy(&herm_eigenvalues(&branch.scale_real(1.0 / p))?);
            }
        }
        Ok(total)
    }
}

/// Minimize Σ p_k S(ρ_B^k) over qubit bases: a 64×64 grid on the Bloch
/// sphere, then simplex refinement from the best grid point.
fn optimize_qubit_basis(
    rho_ab: &DensityMatrix,
    factor: &str,
    hint: Option<&MeasurementBasis>,
) -> Result<(MeasurementBasis, f64)> {
    let branches = QubitBranches::new(rho_ab, factor)?;
    let cost = |theta: f64, phi: f64| -> Result<f64> { branches.cost(&MeasurementBasis::bloch(factor, theta, phi)) };
    let mut best = (0.0, 0.0, f64::INFINITY);
    for i in 0..DISCORD_GRID {
        let theta = PI * i as f64 / (DISCORD_GRID - 1) as f64;
        for j in 0..DISCORD_GRID {
            let phi = 2.0 * PI * j as f64 / DISCORD_GRID as f64;
            let c = cost(theta, phi)?;
            if c < best.2 {
                best = (theta, phi, c);
            }
        }
    }

    let mut failure = None;
    let opts = NelderMeadOptions {
        max_evaluations: 2000,
        x_tolerance: 1e-9,
        f_tolerance: 1e-10,
    };
    let steps = [PI / (DISCORD_GRID - 1) as f64, 2.0 * PI / DISCORD_GRID as f64];
    let refined = nelder_mead(
        |x: &[f64]| match cost(x[0], x[1]) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        &[best.0, best.1],
        &steps,
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }

    let mut out = if refined.value < best.2 {
        (
            MeasurementBasis::bloch(factor, refined.point[0], refined.point[1]),
            refined.value,
        )
    } else {
        (MeasurementBasis::bloch(factor, best.0, best.1), best.2)
    };
    if let Some(h) = hint {
        let c = average_conditional_entropy(rho_ab, h)?;
        if c < out.1 {
            out = (h.clone(), c);
        }
    }
    Ok(out)
}

/// Layout helper for tests and callers building two-factor states.
pub fn bipartite_layout(a: (&str, usize), b: (&str, usize)) -> Result<SubsystemLayout> {
    SubsystemLayout::new([a, b])
}
