//! Small dense real linear algebra.
//!
//! Everything here targets matrices of a few dozen rows at most: the Newton
//! systems in the experiments are 11×11. Storage is row-major `Vec<f64>`,
//! factorizations are textbook (partial-pivoting LU, unpivoted Cholesky) and
//! spectral quantities come from cyclic Jacobi rotations, which are
//! deterministic and accurate at this scale.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative pivot threshold for [`lu_solve`].
pub const LU_PIVOT_TOL: f64 = 1e-14;
/// Smallest Cholesky pivot still counted as positive.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;
/// Componentwise tolerance for the symmetry precondition of [`cholesky_check`].
pub const SYMMETRY_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.as_ref().len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    /// `(I_rows, 0)` with `cols ≥ rows` columns.
    pub fn identity_padded(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                axpy(vi, self.row(i), &mut out);
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s · other`
    pub fn add_scaled(&self, s: f64, other: &DenseMatrix) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// Writes `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Largest componentwise asymmetry `|a_ij − a_ji|`; infinite if not square.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Spectral norm `‖a‖₂` (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        singular_values(self).first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix{:?}", self.to_rows())
    }
}

// Serialized as nested row arrays; a `rows x 0` matrix keeps its row count.
impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `y += a · x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solves `a · x = b` by LU factorization with partial pivoting.
///
/// A pivot whose magnitude falls below `1e-14 × max_i ‖a_i,:‖₂` (largest
/// Euclidean row norm of the input) is reported as [`Error::SingularMatrix`].
pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "lu_solve needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {}, expected {n}",
            b.len()
        )));
    }
    let scale = (0..n).map(|i| norm2(a.row(i))).fold(0.0, f64::max);
    let threshold = LU_PIVOT_TOL * scale;

    let mut lu = a.data.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[i * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= threshold || pivot == 0.0 {
            return Err(Error::SingularMatrix { pivot, column: k });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let akk = lu[k * n + k];
        for i in k + 1..n {
            let factor = lu[i * n + k] / akk;
            if factor == 0.0 {
                continue;
            }
            lu[i * n + k] = factor;
            for j in k + 1..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
            x[i] -= factor * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= lu[k * n + j] * x[j];
        }
        x[k] = s / lu[k * n + k];
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyCheck {
    pub pd: bool,
    /// Smallest pivot `a_jj − Σ_k l_jk²` seen before the factorization
    /// completed or stopped at the first non-positive pivot.
    pub min_pivot: f64,
}

/// Attempts a Cholesky factorization and reports whether `a` is positive definite.
pub fn cholesky_check(a: &DenseMatrix) -> Result<CholeskyCheck> {
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.rows;
    let mut l = vec![0.0; n * n];
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let pivot = a[(j, j)] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        min_pivot = min_pivot.min(pivot);
        if pivot <= CHOLESKY_PIVOT_TOL {
            return Ok(CholeskyCheck {
                pd: false,
                min_pivot,
            });
        }
        let d = pivot.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / d;
        }
    }
    Ok(CholeskyCheck { pd: true, min_pivot })
}

/// Singular values in descending order via one-sided (Hestenes) Jacobi.
///
/// Column pairs are rotated until mutually orthogonal; the singular values
/// are then the column norms. This keeps high relative accuracy for the
/// small singular values, which is what the Jacobian bounds need.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let work = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (m, n) = (work.rows, work.cols);
    if m == 0 || n == 0 {
        return Vec::new();
    }
    // column-major copy so rotations touch contiguous memory
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| work[(i, j)]).collect()).collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for (up, uq) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (vp, vq) = (*up, *uq);
                    *up = c * vp - s * vq;
                    *uq = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Smallest singular value `σ_min(a) ≥ 0`.
pub fn min_singular_value(a: &DenseMatrix) -> f64 {
    if a.rows < a.cols {
        // wide: nontrivial null space
        return 0.0;
    }
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.rows;
    let mut m = a.clone();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= f64::EPSILON * f64::EPSILON * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0; 3]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            DenseMatrix::new(2, 2, vec![1.0, f64::NAN, 0.0, 1.0]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn lu_solve_examples() {
        let x = lu_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);

        let x = lu_solve(&DenseMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);

        let x = lu_solve(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), &[3.0, 5.0]).unwrap();
        assert_eq!(x, vec![5.0, 3.0]);
    }

    #[test]
    fn lu_solve_detects_singularity() {
        let a = mat(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            lu_solve(&a, &[1.0, 1.0]),
            Err(Error::SingularMatrix { column: 1, .. })
        ));
        assert!(matches!(
            lu_solve(&DenseMatrix::zeros(2, 2), &[0.0, 0.0]),
            Err(Error::SingularMatrix { column: 0, .. })
        ));
        assert!(matches!(
            lu_solve(&DenseMatrix::zeros(2, 3), &[0.0, 0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn cholesky_examples() {
        let c = cholesky_check(&DenseMatrix::from_diag(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!(c.pd);
        assert_eq!(c.min_pivot, 1.0);

        let c = cholesky_check(&DenseMatrix::from_diag(&[1.0, -1.0])).unwrap();
        assert!(!c.pd);

        // pivots 2 and 2 - 1/2
        let c = cholesky_check(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!(c.pd);
        assert!((c.min_pivot - 1.5).abs() < 1e-15);

        assert!(matches!(
            cholesky_check(&mat(&[&[1.0, 1.0], &[0.0, 1.0]])),
            Err(Error::NotSymmetric(_))
        ));
    }

    /// Smallest root of λ² − tr·λ + det for a 2×2 Gram matrix, by bisection.
    fn gram_min_eig_bisection(a: &DenseMatrix) -> f64 {
        let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
        let g00 = p * p + r * r;
        let g01 = p * q + r * s;
        let g11 = q * q + s * s;
        let charpoly = |l: f64| (g00 - l) * (g11 - l) - g01 * g01;
        // charpoly(0) = det(G) ≥ 0 and charpoly(g00) = −g01² ≤ 0
        let (mut lo, mut hi) = (0.0, g00.min(g11));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if charpoly(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn min_singular_value_examples() {
        assert!((min_singular_value(&DenseMatrix::identity(2)) - 1.0).abs() < 1e-15);
        assert!((min_singular_value(&DenseMatrix::from_diag(&[3.0, 0.5])) - 0.5).abs() < 1e-15);

        let a = mat(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let oracle = gram_min_eig_bisection(&a).sqrt();
        assert!((oracle - ((3.0 - 5f64.sqrt()) / 2.0).sqrt()).abs() < 1e-14);
        let got = min_singular_value(&a);
        assert!((got - oracle).abs() <= 1e-8 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn singular_values_of_wide_matrix() {
        let a = mat(&[&[3.0, 0.0, 0.0], &[0.0, 2.0, 0.0]]);
        assert_eq!(singular_values(&a), vec![3.0, 2.0]);
        assert!((a.spectral_norm() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_eigenvalues_known() {
        let ev = symmetric_eigenvalues(&mat(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    fn matrix_strategy(n: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-1.0..1.0f64, n * n)
            .prop_map(move |d| DenseMatrix::new(n, n, d).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cholesky_agrees_with_eigen_sign(a in matrix_strategy(4), shift in 0.0..1.5f64) {
            // the shift spreads samples across definite and indefinite cases
            let sym = a
                .add_scaled(1.0, &a.transpose())
                .scaled(0.5)
                .add_scaled(shift, &DenseMatrix::identity(4));
            let ev = symmetric_eigenvalues(&sym).unwrap();
            // skip matrices too close to the PD boundary to classify reliably
            prop_assume!(ev[0].abs() > 1e-6);
            let c = cholesky_check(&sym).unwrap();
            prop_assert_eq!(c.pd, ev[0] > 0.0);
        }
    }

    proptest! {
        #[test]
        fn lu_solve_small_relative_residual(
            a in matrix_strategy(6),
            b in proptest::collection::vec(-1.0..1.0f64, 6),
        ) {
            // shift toward diagonal dominance keeps the condition number moderate
            let a = a.add_scaled(4.0, &DenseMatrix::identity(6));
            let x = lu_solve(&a, &b).unwrap();
            let r = sub(&a.mul_vec(&x), &b);
            prop_assert!(norm2(&r) <= 1e-9 * norm2(&b).max(1e-300));
        }

        #[test]
        fn min_singular_value_is_lower_bound(
            a in matrix_strategy(5),
            v in proptest::collection::vec(-1.0..1.0f64, 5),
        ) {
            prop_assume!(norm2(&v) > 1e-6);
            let smin = min_singular_value(&a);
            prop_assert!(smin >= 0.0);
            prop_assert!(smin <= norm2(&a.mul_vec(&v)) / norm2(&v) * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn singular_values_match_gram_eigenvalues(a in matrix_strategy(4)) {
            let gram = a.transpose().matmul(&a);
            let gram = gram.add_scaled(1.0, &gram.transpose()).scaled(0.5);
            let mut ev = symmetric_eigenvalues(&gram).unwrap();
            ev.reverse();
            let sv = singular_values(&a);
            for (s, l) in sv.iter().zip(&ev) {
                prop_assert!((s * s - l).abs() <= 1e-10 * (1.0 + ev[0]));
            }
        }
    }
}
