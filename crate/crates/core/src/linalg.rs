//! Dense complex linear algebra on row-major matrices.
//!
//! Everything the engine needs is here: Kronecker products, partial traces
//! over named tensor factors, embedding of local operators into a larger
//! register, Hermitian eigendecomposition and functional calculus.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance (max-abs norm) for accepting a matrix as Hermitian.
pub const TAU_HERM: f64 = 1e-9;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Square matrix with the given real diagonal.
    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Build from real row slices, panicking on ragged input. Test and builtin helper.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| Complex64::new(rows[i][j], 0.0))
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if cols == 0 || rows == 0 || columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch(
                "columns must be nonempty and of equal length".into(),
            ));
        }
        Ok(Self::from_fn(rows, cols, |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare(self.rows, self.cols))
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-abs distance to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                let row_out = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `U · self · U†`.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        u.matmul(self)?.matmul(&u.dagger())
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        if self.cols != other.rows || self.rows != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "trace of {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        Ok(acc)
    }

    /// Hermitian part (m + m†)/2.
    pub fn hermitian_part(&self) -> Self {
        let d = self.dagger();
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + d[(i, j)]) * 0.5)
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Panics on shape mismatch; use [`ComplexMatrix::matmul`] for a fallible product.
impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ai in 0..a.rows {
        for aj in 0..a.cols {
            let s = a[(ai, aj)];
            for bi in 0..b.rows {
                for bj in 0..b.cols {
                    out[(ai * b.rows + bi, aj * b.cols + bj)] = s * b[(bi, bj)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a sequence, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, m| kron(&acc, m))
}

/// One named tensor factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub dim: usize,
}

/// Ordered tensor-product structure of a Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    factors: Vec<Factor>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(factors: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(name, dim)| Factor { name: name.into(), dim })
            .collect();
        if factors.is_empty() {
            return Err(Error::InvalidLayout("layout has no factors".into()));
        }
        let mut seen = HashSet::new();
        for f in &factors {
            if f.dim == 0 {
                return Err(Error::InvalidLayout(format!("factor `{}` has dimension 0", f.name)));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidLayout(format!("duplicate factor `{}`", f.name)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn names(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.name.as_str()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    /// Total Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factors.iter().any(|f| f.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    pub fn factor_dim(&self, name: &str) -> Result<usize> {
        Ok(self.factors[self.index_of(name)?].dim)
    }

    /// Layout restricted to `names`, keeping this layout's factor order.
    pub fn restrict(&self, names: &[&str]) -> Result<Self> {
        for n in names {
            self.index_of(n)?;
        }
        let kept = self
            .factors
            .iter()
            .filter(|f| names.contains(&f.name.as_str()))
            .map(|f| (f.name.clone(), f.dim));
        Self::new(kept)
    }

    /// Names of every factor not in `names`, in layout order.
    pub fn complement(&self, names: &[&str]) -> Vec<&str> {
        self.factors
            .iter()
            .map(|f| f.name.as_str())
            .filter(|n| !names.contains(n))
            .collect()
    }

    /// Row-major strides of each factor in the full index.
    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.factors.len()];
        for k in (0..self.factors.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.factors[k + 1].dim;
        }
        strides
    }

    /// Full-index offsets enumerating the joint index of `which` (factor
    /// positions, in the given order, row-major over that order).
    fn offsets(&self, which: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut offsets = vec![0usize];
        for &k in which {
            let d = self.factors[k].dim;
            let mut next = Vec::with_capacity(offsets.len() * d);
            for &o in &offsets {
                for x in 0..d {
                    next.push(o + x * strides[k]);
                }
            }
            offsets = next;
        }
        offsets
    }

    fn positions(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        names
            .iter()
            .map(|n| {
                if !seen.insert(*n) {
                    return Err(Error::InvalidLayout(format!("factor `{n}` listed twice")));
                }
                self.index_of(n)
            })
            .collect()
    }
}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|x| format!("{}:{}", x.name, x.dim)).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn check_layout_dim(m: &ComplexMatrix, layout: &SubsystemLayout) -> Result<()> {
    let n = m.require_square()?;
    if n != layout.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix dimension {n} does not match layout {layout} of dimension {}",
            layout.dim()
        )));
    }
    Ok(())
}

/// Trace out every factor not named in `keep`. The result is ordered as the
/// kept factors appear in `layout`.
pub fn partial_trace(m: &ComplexMatrix, layout: &SubsystemLayout, keep: &[&str]) -> Result<ComplexMatrix> {
    check_layout_dim(m, layout)?;
    if keep.is_empty() {
        return Err(Error::InvalidPartition("keep set is empty".into()));
    }
    let mut kept = layout.positions(keep)?;
    kept.sort_unstable();
    let traced: Vec<usize> = (0..layout.factors.len()).filter(|k| !kept.contains(k)).collect();
    let kept_off = layout.offsets(&kept);
    let traced_off = layout.offsets(&traced);
    let d = kept_off.len();
    let mut out = ComplexMatrix::zeros(d, d);
    for (a, &oa) in kept_off.iter().enumerate() {
        for (b, &ob) in kept_off.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += m[(oa + t, ob + t)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Lift `op`, acting on `targets` (in the order given), to the whole register
/// described by `layout`, tensoring identity on every other factor.
pub fn embed_operator(op: &ComplexMatrix, layout: &SubsystemLayout, targets: &[&str]) -> Result<ComplexMatrix> {
    let n = op.require_square()?;
    let pos = layout.positions(targets)?;
    let target_off = layout.offsets(&pos);
    if target_off.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {n} cannot act on factors {targets:?} of joint dimension {}",
            target_off.len()
        )));
    }
    let rest: Vec<usize> = (0..layout.factors.len()).filter(|k| !pos.contains(k)).collect();
    let rest_off = layout.offsets(&rest);
    let mut out = ComplexMatrix::zeros(layout.dim(), layout.dim());
    for &r in &rest_off {
        for (a, &oa) in target_off.iter().enumerate() {
            for (b, &ob) in target_off.iter().enumerate() {
                out[(r + oa, r + ob)] = op[(a, b)];
            }
        }
    }
    Ok(out)
}

/// Spectrum and eigenvectors of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: ComplexMatrix,
}

/// Max-abs deviation of `m` from Hermiticity.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.rows;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn herm_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    h.require_square()?;
    let dev = hermitian_deviation(h);
    if dev > TAU_HERM {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eig_unchecked(&h.hermitian_part()))
}

fn eig_unchecked(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.rows;
    let eig = SymmetricEigen::new(h.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Eigenvalues only, ascending. Closed form up to 2×2.
pub fn herm_eigenvalues(h: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = h.require_square()?;
    let dev = hermitian_deviation(h);
    if dev > TAU_HERM {
        return Err(Error::NotHermitian(dev));
    }
    match n {
        0 => Ok(vec![]),
        1 => Ok(vec![h[(0, 0)].re]),
        2 => {
            let (a, d) = (h[(0, 0)].re, h[(1, 1)].re);
            let b = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
            Ok(vec![mean - r, mean + r])
        }
        _ => {
            let mut values: Vec<f64> = h
                .hermitian_part()
                .to_nalgebra()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .collect();
            values.sort_by(f64::total_cmp);
            Ok(values)
        }
    }
}

/// Functional calculus `V · diag(f(λ)) · V†` for Hermitian `h`.
pub fn herm_func<T, F>(h: &ComplexMatrix, f: F) -> Result<ComplexMatrix>
where
    T: Into<Complex64>,
    F: Fn(f64) -> T,
{
    let eig = herm_eig(h)?;
    Ok(reassemble(&eig, |x| f(x).into()))
}

/// `V · diag(g(λ)) · V†` from a precomputed decomposition.
pub fn reassemble(eig: &HermitianEigen, g: impl Fn(f64) -> Complex64) -> ComplexMatrix {
    let v = &eig.vectors;
    let n = v.rows;
    let weights: Vec<Complex64> = eig.values.iter().map(|&x| g(x)).collect();
    ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] * weights[k] * v[(j, k)].conj()).sum()
    })
}

/// `exp(i·g)` for Hermitian generator `g`; always unitary.
pub fn unitary_from_generator(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    herm_func(g, |x| Complex64::from_polar(1.0, x))
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    m.is_square() && hermitian_deviation(m) <= tol
}

/// Max-abs deviation of `u†u` from the identity.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let p = &u.dagger() * u;
    p.max_abs_diff(&ComplexMatrix::identity(u.rows))
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    unitarity_deviation(m) <= tol
}

/// Hermitian (within `tol`) with smallest eigenvalue ≥ −tol.
pub fn is_psd(m: &ComplexMatrix, tol: f64) -> bool {
    if !is_hermitian(m, tol.max(TAU_HERM)) {
        return false;
    }
    herm_eigenvalues(&m.hermitian_part())
        .map(|v| v.first().is_none_or(|&x| x >= -tol))
        .unwrap_or(false)
}
