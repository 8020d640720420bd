//! Dense complex vectors and matrices with the handful of operations the
//! criterion needs: Kronecker products, bilinear forms `x†·A·y` and density
//! matrix diagnostics.

use std::fmt;
use std::ops::{Deref, Index};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default tolerance for Hermiticity, trace and eigenvalue-floor checks.
pub const DENSITY_TOL: f64 = 1e-9;

/// Tolerance on `‖v‖ − 1` for vectors that must be unit norm.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A dense complex vector of amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVec(Vec<Complex64>);

impl ComplexVec {
    /// Wraps `entries`, rejecting empty vectors and non-finite amplitudes.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("empty vector".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite vector entry".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Parameter(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = vec![ZERO; dim];
        v[index] = Complex64::new(1.0, 0.0);
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    /// Returns `self / ‖self‖`. Fails on the zero vector.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Normalization("cannot normalize zero vector".into()));
        }
        Ok(Self(self.0.iter().map(|z| z / n).collect()))
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        Self(self.0.iter().map(|z| z * c).collect())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &ComplexVec) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "inner product of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }
}

impl Deref for ComplexVec {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl Serialize for ComplexVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter().map(|z| [z.re, z.im]))
    }
}

impl<'de> Deserialize<'de> for ComplexVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        ComplexVec::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .map_err(serde::de::Error::custom)
    }
}

/// Kronecker product `a ⊗ b`, with `result[i·dim(b) + j] = a[i]·b[j]`.
pub fn kron(a: &ComplexVec, b: &ComplexVec) -> ComplexVec {
    let mut out = Vec::with_capacity(a.dim() * b.dim());
    for &x in a.iter() {
        out.extend(b.iter().map(|&y| x * y));
    }
    ComplexVec(out)
}

/// Kronecker product of a sequence of factors, first factor most significant.
pub fn kron_all<'a, I>(factors: I) -> ComplexVec
where
    I: IntoIterator<Item = &'a ComplexVec>,
{
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.dim());
        for &x in &acc {
            next.extend(f.iter().map(|&y| x * y));
        }
        acc = next;
    }
    ComplexVec(acc)
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMat {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Outer product `|x⟩⟨x|`.
    pub fn outer(x: &ComplexVec) -> Self {
        let n = x.dim();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            data.extend(x.iter().map(|xj| x[i] * xj.conj()));
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
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

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).conj());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Adds `c·other` into `self` in place.
    pub fn add_scaled(&mut self, other: &ComplexMat, c: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "adding {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * c;
        }
        Ok(())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|A_ij − conj(A_ji)|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part `(A + A†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.rows;
        let m = DMatrix::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        eig
    }
}

impl Index<(usize, usize)> for ComplexMat {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

/// `x† · rho · y`.
pub fn bilinear(rho: &ComplexMat, x: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    if !rho.is_square() || x.len() != rho.rows() || y.len() != rho.rows() {
        return Err(Error::Dimension(format!(
            "bilinear form of a {}x{} matrix with vectors of length {} and {}",
            rho.rows(),
            rho.cols(),
            x.len(),
            y.len()
        )));
    }
    Ok(bilinear_unchecked(rho, x, y))
}

pub(crate) fn bilinear_unchecked(rho: &ComplexMat, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let mut acc = ZERO;
    for (i, xi) in x.iter().enumerate() {
        if *xi == ZERO {
            continue;
        }
        let row = rho.row(i);
        let mut s = ZERO;
        for (r, yj) in row.iter().zip(y) {
            s += r * yj;
        }
        acc += xi.conj() * s;
    }
    acc
}

/// Pivoted Cholesky factor `A ≈ L L†` of a positive semidefinite matrix.
///
/// Pivoting stops once every remaining diagonal entry is at most `tol`
/// times the largest diagonal entry of `A`, so
/// the rank follows the numerical rank of `A`. Quadratic forms evaluated
/// through the factor are sums of squares and never come out negative.
#[derive(Debug, Clone, PartialEq)]
pub struct GramFactor {
    dim: usize,
    rank: usize,
    // row q holds conj(L[:, q])
    rows: Vec<Complex64>,
}

impl GramFactor {
    pub fn new(a: &ComplexMat, tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "factoring a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut d: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
        let floor = tol * d.iter().copied().fold(0.0, f64::max);
        let mut pivoted = vec![false; n];
        let mut rows: Vec<Complex64> = Vec::new();
        let mut rank = 0;
        loop {
            let mut p = None;
            for i in (0..n).filter(|&i| !pivoted[i]) {
                if d[i] > floor && p.is_none_or(|q: usize| d[i] > d[q]) {
                    p = Some(i);
                }
            }
            let Some(p) = p else { break };
            pivoted[p] = true;
            let s = d[p].sqrt();
            let mut row = vec![ZERO; n];
            for i in 0..n {
                if pivoted[i] && i != p {
                    continue;
                }
                let mut l = a.get(i, p);
                for q in 0..rank {
                    let prev = &rows[q * n..(q + 1) * n];
                    l -= prev[i].conj() * prev[p];
                }
                let l = if i == p { Complex64::new(s, 0.0) } else { l / s };
                d[i] -= l.norm_sqr();
                row[i] = l.conj();
            }
            d[p] = 0.0;
            rows.extend(row);
            rank += 1;
        }
        Ok(Self { dim: n, rank, rows })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `L† x`.
    pub fn coefficients(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .chunks_exact(self.dim.max(1))
            .take(self.rank)
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x† A x` as `‖L† x‖²`.
    pub fn quadratic(&self, x: &[Complex64]) -> f64 {
        self.coefficients(x).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `x† A y` as `(L† x)† (L† y)`.
    pub fn bilinear(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        let cx = self.coefficients(x);
        let cy = self.coefficients(y);
        cx.iter().zip(&cy).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Result of checking a matrix against the density-operator invariants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
    pub accepted: bool,
}

impl fmt::Display for DensityDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hermiticity defect {:.3e}, trace defect {:.3e}, min eigenvalue {:.3e} (tol {:.1e})",
            self.hermiticity_defect, self.trace_defect, self.min_eigenvalue, self.tolerance
        )
    }
}

/// Reports Hermiticity, trace and eigenvalue-floor defects of `rho`.
///
/// The eigensolve runs on the Hermitian part, so a non-Hermitian input still
/// gets a meaningful (if secondary) eigenvalue figure. Non-square input is
/// reported as rejected with infinite defects.
pub fn check_density(rho: &ComplexMat, tol: f64) -> DensityDiagnostics {
    if !rho.is_square() || rho.rows() == 0 {
        return DensityDiagnostics {
            hermiticity_defect: f64::INFINITY,
            trace_defect: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            tolerance: tol,
            accepted: false,
        };
    }
    let hermiticity_defect = rho.hermiticity_defect();
    let trace_defect = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
    let min_eigenvalue = rho
        .hermitian_eigenvalues()
        .first()
        .copied()
        .unwrap_or(f64::NEG_INFINITY);
    DensityDiagnostics {
        hermiticity_defect,
        trace_defect,
        min_eigenvalue,
        tolerance: tol,
        accepted: hermiticity_defect <= tol && trace_defect <= tol && min_eigenvalue >= -tol,
    }
}
