//! Dense complex linear algebra: the matrix type every other module builds on,
//! tensor products, partial trace over the cavity mode and a Hermitian
//! eigensolver.
//!
//! Joint-space ordering is fixed once here: `atom1 ⊗ atom2 ⊗ field`, with the
//! excited level of each atom at index 0 and the ground level at index 1.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest `|A - A†|` entry accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Largest `|tr ρ - 1|` accepted for a density matrix.
pub const TRACE_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    /// Builds a matrix from row-major entries, rejecting a length mismatch or
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must have at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("matrix entries must be finite".into()));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Convenience constructor from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    /// The projector `|ψ⟩⟨ψ|`.
    pub fn outer(ket: &[C64]) -> Self {
        Self::from_fn(ket.len(), ket.len(), |r, c| ket[r] * ket[c].conj())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn transpose(&self) -> ComplexMatrix {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Entrywise complex conjugate (not the adjoint).
    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn dagger(&self) -> ComplexMatrix {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        self.scale(C64::new(s, 0.0))
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> ComplexMatrix {
        assert!(self.is_square());
        Self::from_fn(self.rows, self.cols, |r, c| 0.5 * (self[(r, c)] + self[(c, r)].conj()))
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `AB - BA`
    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        &self.matmul(other) - &other.matmul(self)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
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

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
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

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

/// Tensor-factor dimensions of the joint space, in the fixed order
/// `atom1 ⊗ atom2 ⊗ field`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FactorDims {
    pub atom1: usize,
    pub atom2: usize,
    pub field: usize,
}

impl FactorDims {
    /// Two qubits and a Fock space truncated to `cutoff` levels.
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock cutoff must be at least 2, got {cutoff}"
            )));
        }
        Ok(FactorDims {
            atom1: 2,
            atom2: 2,
            field: cutoff,
        })
    }

    pub fn joint(&self) -> usize {
        self.atom1 * self.atom2 * self.field
    }

    pub fn atoms(&self) -> usize {
        self.atom1 * self.atom2
    }

    pub fn factors(&self) -> Vec<usize> {
        vec![self.atom1, self.atom2, self.field]
    }

    /// Joint index of `|a1, a2, n⟩`.
    pub fn index(&self, a1: usize, a2: usize, n: usize) -> usize {
        (a1 * self.atom2 + a2) * self.field + n
    }

    /// Inverse of [`FactorDims::index`].
    pub fn split(&self, j: usize) -> (usize, usize, usize) {
        let n = j % self.field;
        let atoms = j / self.field;
        (atoms / self.atom2, atoms % self.atom2, n)
    }
}

/// A density matrix together with its tensor-factor dimensions.
///
/// Construction checks unit trace and Hermiticity. Positivity is not checked
/// on construction (it costs a diagonalization); see
/// [`DensityState::min_eigenvalue`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    matrix: ComplexMatrix,
    factors: Vec<usize>,
}

impl DensityState {
    pub fn new(matrix: ComplexMatrix, factors: Vec<usize>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "density matrix must be square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let product: usize = factors.iter().product();
        if product != matrix.rows() {
            return Err(Error::Dimension(format!(
                "factor dimensions {factors:?} do not multiply to {}",
                matrix.rows()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        let asym = matrix.hermiticity_error();
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let tr = trace(&matrix)?;
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        Ok(DensityState { matrix, factors })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, factors: Vec<usize>) -> Self {
        debug_assert_eq!(factors.iter().product::<usize>(), matrix.rows());
        DensityState { matrix, factors }
    }

    /// `|ψ⟩⟨ψ|` for a normalized ket.
    pub fn pure(ket: &[C64], factors: Vec<usize>) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("ket has squared norm {norm}, expected 1")));
        }
        Self::new(ComplexMatrix::outer(ket), factors)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = herm_eigen(&self.matrix)?;
        Ok(*eig.values.last().expect("non-empty matrix"))
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

pub fn dagger(a: &ComplexMatrix) -> ComplexMatrix {
    a.dagger()
}

pub fn trace(a: &ComplexMatrix) -> Result<C64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "trace of a non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    Ok(a.diagonal().into_iter().sum())
}

/// Traces out the cavity mode, leaving the 4x4 two-atom state in the basis
/// `{|ee⟩, |eg⟩, |ge⟩, |gg⟩}`.
pub fn partial_trace_field(rho: &DensityState, dims: FactorDims) -> Result<DensityState> {
    if rho.dim() != dims.joint() {
        return Err(Error::Dimension(format!(
            "state has dimension {} but factors {:?} give {}",
            rho.dim(),
            dims.factors(),
            dims.joint()
        )));
    }
    let n = dims.field;
    let m = rho.matrix();
    let atoms = dims.atoms();
    let reduced = ComplexMatrix::from_fn(atoms, atoms, |a, b| (0..n).map(|k| m[(a * n + k, b * n + k)]).sum());
    Ok(DensityState::new_unchecked(reduced, vec![dims.atom1, dims.atom2]))
}

/// Eigendecomposition `A = V diag(values) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: ComplexMatrix,
}

impl HermEigen {
    /// `V f(Λ) V†`
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<C64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |r, c| (0..n).map(|k| v[(r, k)] * fv[k] * v[(c, k)].conj()).sum())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| C64::new(x, 0.0))
    }
}

/// Cyclic complex Jacobi diagonalization of a Hermitian matrix.
///
/// Entries that are exactly zero are never rotated, so block structure in the
/// input survives into the eigenvectors untouched.
pub fn herm_eigen(a: &ComplexMatrix) -> Result<HermEigen> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a non-square {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let asymmetry = a.hermiticity_error();
    if asymmetry > HERMITIAN_TOL || asymmetry.is_nan() {
        return Err(Error::NotHermitian { asymmetry });
    }
    let n = a.rows();
    let mut m = a.hermitian_part();
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let threshold = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let negligible = 100.0 * mag;
                if sweep > 3 && app.abs() + negligible == app.abs() && aqq.abs() + negligible == aqq.abs() {
                    m[(p, q)] = ZERO;
                    m[(q, p)] = ZERO;
                    continue;
                }
                if mag <= threshold {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s, apq / mag);
                m[(p, p)] = C64::new(app - t * mag, 0.0);
                m[(q, q)] = C64::new(aqq + t * mag, 0.0);
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermEigen { values, vectors })
}

/// Applies `J` on columns and `J†` on rows `p, q`, where `J` is the real
/// rotation `(c, s)` preceded by the phase that makes `m[p][q]` real.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let n = m.rows();
    let back = phase.conj();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * back * mkq;
        m[(k, q)] = s * mkp + c * back * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * phase * mqk;
        m[(q, k)] = s * mpk + c * phase * mqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * back * vkq;
        v[(k, q)] = s * vkp + c * back * vkq;
    }
}
