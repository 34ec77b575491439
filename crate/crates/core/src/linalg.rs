//! Dense complex linear algebra on tensor-product spaces.
//!
//! Everything here works on row-major dense matrices. Eigensolving and
//! least squares are delegated to `faer`; the rest is small enough to write
//! out directly.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default cap on the number of entries of any matrix built by [`kron`].
pub const MAX_ENTRIES: usize = 1 << 24;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real-valued rows; convenient for Pauli matrices and tests.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cdim = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, cdim, |i, j| cr(rows[i][j]))
    }

    pub fn diag(d: &[C64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
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

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &CMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Checked product.
    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        for i in 0..n {
            let orow = &mut out[i * m..(i + 1) * m];
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[l * m..(l + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(CMatrix { rows: n, cols: m, data: out })
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn pow(&self, k: u32) -> CMatrix {
        let mut out = CMatrix::identity(self.rows);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn to_faer(&self) -> Mat<C64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }

    pub fn from_faer(m: MatRef<'_, C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out.axpy(ONE, rhs);
        out
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut out = self.clone();
        out.axpy(-ONE, rhs);
        out
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        self.axpy(ONE, rhs);
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        self.axpy(-ONE, rhs);
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-ONE)
    }
}

/// Panics on a shape mismatch, like the other operator impls; use
/// [`CMatrix::matmul`] for a checked product.
impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<C64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, s: C64) -> CMatrix {
        self.scale(s)
    }
}

pub mod pauli {
    use super::{cr, CMatrix};

    pub fn sx() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }
    pub fn sz() -> CMatrix {
        CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }
    pub fn sy() -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = super::c(0.0, -1.0);
        m[(1, 0)] = super::c(0.0, 1.0);
        m
    }
    /// σ⁺ = |0⟩⟨1| with |0⟩ spin up.
    pub fn sp() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])
    }
    pub fn sm() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]])
    }
    /// Matrix unit |a⟩⟨b| on C².
    pub fn unit(a: usize, b: usize) -> CMatrix {
        let mut m = CMatrix::zeros(2, 2);
        m[(a, b)] = cr(1.0);
        m
    }
}

pub fn kron_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<CMatrix> {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let entries = rows.checked_mul(cols).unwrap_or(usize::MAX);
    if entries > cap {
        return Err(Error::SizeLimit { entries, cap });
    }
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..b.rows {
                let base = (i * b.rows + k) * cols + j * b.cols;
                for l in 0..b.cols {
                    out.data[base + l] = x * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product with the default cap of [`MAX_ENTRIES`].
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_cap(a, b, MAX_ENTRIES)
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on site `m` (1-based, site 1 leftmost).
pub fn embed_site(op: &CMatrix, m: usize, len: usize) -> Result<CMatrix> {
    if op.rows != 2 || op.cols != 2 {
        return Err(Error::Shape(format!("site operator must be 2x2, got {}x{}", op.rows, op.cols)));
    }
    if m == 0 || m > len {
        return Err(Error::SiteOutOfRange { site: m, len });
    }
    let left = CMatrix::identity(1 << (m - 1));
    let right = CMatrix::identity(1 << (len - m));
    kron(&kron(&left, op)?, &right)
}

/// Total S^z = ½ Σ σᶻ as a diagonal list of 2S^z values (integers).
pub fn two_sz_diag(len: usize) -> Vec<i64> {
    (0..1usize << len).map(|s| len as i64 - 2 * s.count_ones() as i64).collect()
}

/// ‖AB − BA‖_F / max(1, ‖A‖_F ‖B‖_F).
pub fn commutator_residual(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if !a.is_square() || a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Shape("commutator needs equal square matrices".into()));
    }
    let d = &a.matmul(b)? - &b.matmul(a)?;
    Ok(d.norm() / f64::max(1.0, a.norm() * b.norm()))
}

/// ‖diff‖ / max ‖term‖, falling back to the absolute norm when every term
/// is negligible (an identity of the form 0 = 0).
pub fn relative_residual(diff: f64, term_norms: &[f64]) -> f64 {
    let scale = term_norms.iter().copied().fold(0.0, f64::max);
    if scale > 1e-10 {
        diff / scale
    } else {
        diff
    }
}

/// Grid of quantum-space blocks indexed by auxiliary states.
#[derive(Clone, Debug)]
pub struct BlockMonodromy {
    aux_dim: usize,
    blocks: Vec<CMatrix>,
    band: usize,
}

impl BlockMonodromy {
    pub fn new(aux_dim: usize, blocks: Vec<CMatrix>, band: usize) -> Result<Self> {
        if blocks.len() != aux_dim * aux_dim {
            return Err(Error::LengthMismatch { expected: aux_dim * aux_dim, got: blocks.len() });
        }
        let d = blocks[0].rows();
        if blocks.iter().any(|b| b.rows() != d || b.cols() != d) {
            return Err(Error::Shape("monodromy blocks must share their dimension".into()));
        }
        Ok(Self { aux_dim, blocks, band })
    }

    pub fn aux_dim(&self) -> usize {
        self.aux_dim
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn quantum_dim(&self) -> usize {
        self.blocks[0].rows()
    }

    pub fn block(&self, i: usize, j: usize) -> &CMatrix {
        &self.blocks[i * self.aux_dim + j]
    }
}

/// Σ_n weights[n] · blocks[n][n].
pub fn aux_trace(q: &BlockMonodromy, weights: &[C64]) -> Result<CMatrix> {
    if weights.len() != q.aux_dim {
        return Err(Error::LengthMismatch { expected: q.aux_dim, got: weights.len() });
    }
    let d = q.quantum_dim();
    let mut out = CMatrix::zeros(d, d);
    for (n, &w) in weights.iter().enumerate() {
        if w != ZERO {
            out.axpy(w, q.block(n, n));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: C64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &mut [C64]) -> f64 {
    let n = vec_norm(v);
    if n > 0.0 {
        for z in v.iter_mut() {
            *z /= n;
        }
    }
    n
}

/// ⟨u, v⟩ with the first argument conjugated.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// ‖A v − λ v‖₂ for a given value λ.
pub fn eigen_residual(a: &CMatrix, v: &[C64], value: C64) -> f64 {
    let av = a.mul_vec(v);
    av.iter().zip(v).map(|(x, y)| (x - value * y).norm_sqr()).sum::<f64>().sqrt()
}

/// Best Rayleigh-type eigenvalue estimate and residual for a vector.
pub fn eigen_estimate(a: &CMatrix, v: &[C64]) -> (C64, f64) {
    let av = a.mul_vec(v);
    let value = inner(v, &av) / inner(v, v);
    let res = av.iter().zip(v).map(|(x, y)| (x - value * y).norm_sqr()).sum::<f64>().sqrt()
        / vec_norm(v);
    (value, res)
}

/// Full eigendecomposition with unit vectors; every pair must meet `tol`.
pub fn eigenpairs(a: &CMatrix, tol: f64) -> Result<Vec<EigenPair>> {
    if !a.is_square() {
        return Err(Error::Shape("eigenpairs needs a square matrix".into()));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let evd = a
        .to_faer()
        .eigen()
        .map_err(|e| Error::NonConvergence(format!("{e:?} at dimension {n}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut v: Vec<C64> = (0..n).map(|i| u[(i, k)]).collect();
        normalize(&mut v);
        let value = s[k];
        let residual = eigen_residual(a, &v, value);
        if !(residual <= tol) {
            return Err(Error::EigenResidual { index: k, residual, tol });
        }
        out.push(EigenPair { value, vector: v, residual });
    }
    Ok(out)
}

pub fn eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::Shape("eigenvalues needs a square matrix".into()));
    }
    if a.rows() == 0 {
        return Ok(Vec::new());
    }
    a.to_faer()
        .eigenvalues()
        .map_err(|e| Error::NonConvergence(format!("{e:?} at dimension {}", a.rows())))
}

/// Solves the square system `a x = b`.
pub fn solve_linear(a: &CMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::Shape("solve_linear needs a square system".into()));
    }
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.to_faer().partial_piv_lu().solve(&rhs);
    let out: Vec<C64> = (0..b.len()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularArgument("singular linear system".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PolySamples {
    pub points: Vec<C64>,
    pub values: Vec<C64>,
    pub degree_bound: usize,
}

impl PolySamples {
    pub fn new(points: Vec<C64>, values: Vec<C64>, degree_bound: usize) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::LengthMismatch { expected: points.len(), got: values.len() });
        }
        if points.len() < degree_bound + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} samples cannot fix a degree-{} polynomial",
                points.len(),
                degree_bound
            )));
        }
        for i in 0..points.len() {
            for j in 0..i {
                let s = points[i].norm().max(points[j].norm()).max(1e-300);
                if (points[i] - points[j]).norm() <= 1e-14 * s {
                    return Err(Error::InvalidParameter("sample points must be distinct".into()));
                }
            }
        }
        Ok(Self { points, values, degree_bound })
    }
}

/// Ascending coefficients of the interpolating polynomial of degree ≤ bound.
pub fn poly_from_samples(s: &PolySamples) -> Result<Vec<C64>> {
    let d = s.degree_bound;
    let n = s.points.len();
    let scale = s.points.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let v = Mat::from_fn(n, d + 1, |i, k| (s.points[i] / scale).powu(k as u32));
    let rhs = Mat::from_fn(n, 1, |i, _| s.values[i]);
    let sol = if n == d + 1 { v.partial_piv_lu().solve(&rhs) } else { v.qr().solve_lstsq(&rhs) };
    let coeffs: Vec<C64> = (0..=d).map(|k| sol[(k, 0)] / scale.powi(k as i32)).collect();
    if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InconsistentSamples { degree: d, deviation: f64::INFINITY });
    }
    if n > d + 1 {
        let vmax = s.values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        let dev = s
            .points
            .iter()
            .zip(&s.values)
            .map(|(&z, &y)| (poly_eval(&coeffs, z) - y).norm())
            .fold(0.0, f64::max)
            / vmax;
        if dev > 1e-8 {
            return Err(Error::InconsistentSamples { degree: d, deviation: dev });
        }
    }
    Ok(coeffs)
}

/// Horner evaluation of ascending coefficients.
pub fn poly_eval(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
}

/// Product of two ascending coefficient lists.
pub fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots of an ascending coefficient list via the companion matrix.
/// Leading coefficients below `1e-13` of the largest are dropped first.
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let cmax = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if cmax == 0.0 {
        return Err(Error::InvalidParameter("zero polynomial has no finite root set".into()));
    }
    let mut deg = coeffs.len() - 1;
    while deg > 0 && coeffs[deg].norm() <= 1e-13 * cmax {
        deg -= 1;
    }
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let comp = CMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -coeffs[deg - 1 - j] / lead
        } else if j + 1 == i {
            ONE
        } else {
            ZERO
        }
    });
    eigenvalues(&comp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rand_matrix(seed: u64, r: usize, cdim: usize) -> CMatrix {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(r, cdim, |_, _| c(next(), next()))
    }

    #[test]
    fn kron_identities() {
        let i4 = kron(&CMatrix::identity(2), &CMatrix::identity(2)).unwrap();
        assert_eq!(i4, CMatrix::identity(4));
        let zz = kron(&pauli::sz(), &pauli::sz()).unwrap();
        assert_eq!(zz, CMatrix::diag(&[ONE, -ONE, -ONE, ONE]));
    }

    #[test]
    fn kron_index_formula() {
        let (a, b) = (pauli::sp(), pauli::sm());
        let k = kron(&a, &b).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for l in 0..2 {
                        assert_eq!(k[(i * 2 + p, j * 2 + l)], a[(i, j)] * b[(p, l)]);
                    }
                }
            }
        }
    }

    #[test]
    fn kron_cap() {
        let a = CMatrix::identity(64);
        assert!(matches!(kron_with_cap(&a, &a, 1000), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn embed_site_convention() {
        let z1 = embed_site(&pauli::sz(), 1, 2).unwrap();
        assert_eq!(z1, kron(&pauli::sz(), &CMatrix::identity(2)).unwrap());
        let z2 = embed_site(&pauli::sz(), 2, 2).unwrap();
        assert_eq!(z2, kron(&CMatrix::identity(2), &pauli::sz()).unwrap());
        assert!(matches!(embed_site(&pauli::sz(), 3, 2), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_site(&pauli::sz(), 0, 2), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn total_sz_spectrum() {
        let mut tot = CMatrix::zeros(8, 8);
        for m in 1..=3 {
            tot += &embed_site(&pauli::sz(), m, 3).unwrap();
        }
        let mut d: Vec<f64> = tot.diagonal().iter().map(|z| z.re).collect();
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(d, vec![3.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -3.0]);
        assert_eq!(two_sz_diag(3), vec![3, 1, 1, -1, 1, -1, -1, -3]);
    }

    #[test]
    fn commutator_examples() {
        let a = rand_matrix(3, 4, 4);
        assert_eq!(commutator_residual(&CMatrix::identity(4), &a).unwrap(), 0.0);
        let r = commutator_residual(&pauli::sx(), &pauli::sz()).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn aux_trace_examples() {
        let b = rand_matrix(1, 3, 3);
        let m = BlockMonodromy::new(1, vec![b.clone()], 0).unwrap();
        assert_eq!(aux_trace(&m, &[ONE]).unwrap(), b);
        assert_eq!(aux_trace(&m, &[ZERO]).unwrap(), CMatrix::zeros(3, 3));
        assert!(matches!(aux_trace(&m, &[ONE, ONE]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn eigenpairs_small() {
        let d = CMatrix::diag(&[cr(1.0), cr(2.0), cr(3.0)]);
        let mut v: Vec<f64> = eigenpairs(&d, 1e-12).unwrap().iter().map(|p| p.value.re).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
        let pairs = eigenpairs(&pauli::sx(), 1e-12).unwrap();
        for p in pairs {
            let s = p.value.re;
            assert!((s.abs() - 1.0).abs() < 1e-14);
            let ratio = p.vector[1] / p.vector[0];
            assert!((ratio - cr(s)).norm() < 1e-14);
            assert!((vec_norm(&p.vector) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn poly_examples() {
        let s = PolySamples::new(vec![ZERO, ONE], vec![ONE, cr(2.0)], 1).unwrap();
        let cf = poly_from_samples(&s).unwrap();
        assert!((cf[0] - ONE).norm() < 1e-15 && (cf[1] - ONE).norm() < 1e-15);
        let pts: Vec<C64> = (0..5).map(|k| c(0.3 * k as f64, 0.1)).collect();
        let s = PolySamples::new(pts.clone(), vec![cr(2.5); 5], 0).unwrap();
        assert!((poly_from_samples(&s).unwrap()[0] - cr(2.5)).norm() < 1e-14);
        let bad: Vec<C64> = pts.iter().map(|z| z * z * z).collect();
        assert!(matches!(
            poly_from_samples(&PolySamples::new(pts, bad, 1).unwrap()),
            Err(Error::InconsistentSamples { .. })
        ));
    }

    #[test]
    fn poly_product_recovered() {
        // P_B(z) P_B(z q²) for two roots, sampled at 2 n_B + 1 points.
        let q = C64::from_polar(1.0, std::f64::consts::PI / 5.0);
        let roots = [c(0.7, 0.2), c(-1.1, 0.4)];
        let pb = |z: C64| roots.iter().fold(ONE, |acc, &r| acc * (ONE - z / r));
        let mut a = vec![ONE];
        for &r in &roots {
            a = poly_mul(&a, &[ONE, -ONE / r]);
        }
        let b: Vec<C64> = a.iter().enumerate().map(|(k, &x)| x * (q * q).powu(k as u32)).collect();
        let want = poly_mul(&a, &b);
        let pts: Vec<C64> = (0..5).map(|k| C64::from_polar(1.3, 0.9 * k as f64 + 0.2)).collect();
        let vals: Vec<C64> = pts.iter().map(|&z| pb(z) * pb(z * q * q)).collect();
        let got = poly_from_samples(&PolySamples::new(pts, vals, 4).unwrap()).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
        let mut r = poly_roots(&a).unwrap();
        r.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert!((r[0] - roots[1]).norm() < 1e-12 && (r[1] - roots[0]).norm() < 1e-12);
    }

    #[test]
    fn solve_linear_roundtrip() {
        let a = rand_matrix(9, 5, 5);
        let x: Vec<C64> = (0..5).map(|k| c(k as f64, 1.0)).collect();
        let b = a.mul_vec(&x);
        let got = solve_linear(&a, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn kron_associative(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
            let a = rand_matrix(s1, 2, 3);
            let b = rand_matrix(s2, 3, 2);
            let cm = rand_matrix(s3, 2, 2);
            let l = kron(&kron(&a, &b).unwrap(), &cm).unwrap();
            let r = kron(&a, &kron(&b, &cm).unwrap()).unwrap();
            prop_assert!((&l - &r).max_abs() < 1e-14);
        }

        #[test]
        fn kron_trace_factorizes(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = rand_matrix(s1, 3, 3);
            let b = rand_matrix(s2, 4, 4);
            let t = kron(&a, &b).unwrap().trace();
            let want = a.trace() * b.trace();
            prop_assert!((t - want).norm() <= 1e-14 * want.norm().max(1.0) * 10.0);
        }

        #[test]
        fn aux_trace_linear(s1 in 0u64..1000, wr in -2.0f64..2.0, wi in -2.0f64..2.0) {
            let blocks: Vec<CMatrix> = (0..4).map(|k| rand_matrix(s1 + k, 2, 2)).collect();
            let m = BlockMonodromy::new(2, blocks, 1).unwrap();
            let w1 = [c(wr, wi), ONE];
            let w2 = [ONE, c(wi, -wr)];
            let sum = [w1[0] + w2[0], w1[1] + w2[1]];
            let lhs = aux_trace(&m, &sum).unwrap();
            let rhs = &aux_trace(&m, &w1).unwrap() + &aux_trace(&m, &w2).unwrap();
            prop_assert!((&lhs - &rhs).norm() < 1e-14);
        }

        #[test]
        fn eigenpairs_meet_residual(seed in 0u64..500) {
            let a = rand_matrix(seed, 6, 6);
            for p in eigenpairs(&a, 1e-10).unwrap() {
                prop_assert!(p.residual <= 1e-10);
                prop_assert!((eigen_residual(&a, &p.vector, p.value) - p.residual).abs() < 1e-15);
            }
        }
    }
}
