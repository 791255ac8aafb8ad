//! Small dense linear algebra used as a reference oracle.
//!
//! Everything here is O(n^3) and guarded by size caps at the call sites.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            m.data[i * c..(i + 1) * c].copy_from_slice(row);
        }
        m
    }

    /// Builds an `n x m` matrix column by column.
    pub fn from_cols(n: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                m[(i, j)] = c[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
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

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `(M + M^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    /// Submatrix with the given row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second matrix.
pub fn eig_sym(m: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if m.rows != m.cols {
        return Err(Error::InvalidArgument("eig_sym needs a square matrix".into()));
    }
    let n = m.rows;
    let mut a = m.symmetrized();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let mut converged = n <= 1;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi eigensolver did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, new)] = v[(k, old)];
        }
    }
    Ok((vals, vecs))
}

/// Eigenvalues only, ascending.
pub fn eigvals_sym(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(eig_sym(m)?.0)
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite matrix.
/// Eigenvalues below `1e-10 * lambda_max` are treated as zero.
pub fn pinv_sym(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (vals, vecs) = eig_sym(m)?;
    let n = m.rows;
    let lmax = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = 1e-10 * lmax;
    let mut out = DenseMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam.abs() <= cut || lam == 0.0 {
            continue;
        }
        let inv = 1.0 / lam;
        for i in 0..n {
            let vi = vecs[(i, k)] * inv;
            if vi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += vi * vecs[(j, k)];
            }
        }
    }
    Ok(out)
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.rows;
    let mut l = DenseMatrix::zeros(n, n);
    let dmax = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 1e-13 * dmax.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!("matrix not positive definite (pivot {d:e} at {j})")));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `M X = B` for symmetric positive definite `M`.
pub fn spd_solve(m: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let l = cholesky(m)?;
    let y = forward_sub(&l, b);
    Ok(backward_sub_t(&l, &y))
}

/// `L^{-1} B` for lower-triangular `L`.
fn forward_sub(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows;
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// `L^{-T} B` for lower-triangular `L`.
fn backward_sub_t(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows;
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves a general square system by LU with partial pivoting.
pub fn lu_solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows;
    let mut a = m.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap();
        if a[(p, k)].abs() <= 1e-14 * scale {
            return Err(Error::Numerical("singular matrix in LU solve".into()));
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= a[(i, j)] * x[j];
        }
        x[i] = s / a[(i, i)];
    }
    Ok(x)
}

/// Householder QR. Returns the full orthogonal `Q` (`m x m`) and `R` (`m x n`).
pub fn householder_qr(m: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (rows, cols) = (m.rows, m.cols);
    let mut r = m.clone();
    let mut q = DenseMatrix::identity(rows);
    for k in 0..cols.min(rows) {
        let norm: f64 = (k..rows).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut w = vec![0.0; rows];
        for i in k..rows {
            w[i] = r[(i, k)];
        }
        w[k] -= alpha;
        let wn: f64 = w.iter().map(|x| x * x).sum();
        if wn == 0.0 {
            continue;
        }
        for j in 0..cols {
            let s: f64 = (k..rows).map(|i| w[i] * r[(i, j)]).sum::<f64>() * 2.0 / wn;
            for i in k..rows {
                r[(i, j)] -= s * w[i];
            }
        }
        for i in 0..rows {
            let s: f64 = (k..rows).map(|t| q[(i, t)] * w[t]).sum::<f64>() * 2.0 / wn;
            for t in k..rows {
                q[(i, t)] -= s * w[t];
            }
        }
    }
    (q, r)
}

/// Orthonormal basis (as columns) of the complement of `span(deflate)`.
pub fn complement_basis(n: usize, deflate: &[Vec<f64>]) -> DenseMatrix {
    if deflate.is_empty() {
        return DenseMatrix::identity(n);
    }
    let k = DenseMatrix::from_cols(n, deflate);
    let (q, _) = householder_qr(&k);
    let keep: Vec<usize> = (deflate.len()..n).collect();
    let all: Vec<usize> = (0..n).collect();
    q.select(&all, &keep)
}

/// Least-squares solution of `M x ~ b` via Householder QR (full column rank).
pub fn lstsq(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let (q, r) = householder_qr(m);
    let qtb = q.transpose().matvec(b);
    let n = m.cols;
    let scale = r.max_abs().max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        if r[(i, i)].abs() <= 1e-13 * scale {
            return Err(Error::Numerical("rank-deficient least-squares system".into()));
        }
        let mut s = qtb[i];
        for j in i + 1..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    Ok(x)
}

/// `S = P^T A P - P^T A Y (Y^T A Y)^{-1} Y^T A P`.
pub fn schur_dense(a: &DenseMatrix, y: &DenseMatrix, p: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows > 64 {
        return Err(Error::TooLarge(format!("schur_dense is capped at n=64, got {}", a.rows)));
    }
    let ap = a.matmul(p);
    let ptap = p.transpose().matmul(&ap);
    if y.cols == 0 {
        return Ok(ptap);
    }
    let ytay = y.transpose().matmul(&a.matmul(y));
    let ytap = y.transpose().matmul(&ap);
    let sol = spd_solve(&ytay, &ytap)?;
    Ok(ptap.sub(&ytap.transpose().matmul(&sol)).symmetrized())
}

/// Extreme generalized Rayleigh quotients of `(num v, v) / (den v, v)` over
/// `v` orthogonal to every vector in `deflate`.
pub fn rayleigh_range(num: &DenseMatrix, den: &DenseMatrix, deflate: &[Vec<f64>]) -> Result<(f64, f64)> {
    let vals = pencil_eigenvalues(num, den, deflate)?;
    match (vals.first(), vals.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::InvalidArgument("empty deflated subspace".into())),
    }
}

pub fn rayleigh_sup(num: &DenseMatrix, den: &DenseMatrix, deflate: &[Vec<f64>]) -> Result<f64> {
    Ok(rayleigh_range(num, den, deflate)?.1)
}

/// All eigenvalues of the pencil `(num, den)` restricted to the complement of
/// `deflate`, ascending. `den` must be definite there.
pub fn pencil_eigenvalues(num: &DenseMatrix, den: &DenseMatrix, deflate: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = num.rows;
    let z = complement_basis(n, deflate);
    let zt = z.transpose();
    let nd = zt.matmul(&num.matmul(&z)).symmetrized();
    let dd = zt.matmul(&den.matmul(&z)).symmetrized();
    let l = cholesky(&dd).map_err(|_| Error::Numerical("denominator singular on deflated subspace".into()))?;
    // C = L^{-1} Nd L^{-T}
    let x = forward_sub(&l, &nd);
    let c = forward_sub(&l, &x.transpose());
    eigvals_sym(&c.symmetrized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_sym(n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn eig_small_cases() {
        let (v, _) = eig_sym(&DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]])).unwrap();
        assert!((v[0]).abs() < 1e-12 && (v[1] - 2.0).abs() < 1e-12);
        let (v, _) = eig_sym(&DenseMatrix::identity(4)).unwrap();
        assert!(v.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        // path-3 Laplacian: eigenvalues 0, 1, 3
        let l = DenseMatrix::from_rows(&[vec![1., -1., 0.], vec![-1., 2., -1.], vec![0., -1., 1.]]);
        let (v, _) = eig_sym(&l).unwrap();
        for (a, b) in v.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eig_reconstruction() {
        let m = random_sym(10, 3);
        let (vals, v) = eig_sym(&m).unwrap();
        let mut lam = DenseMatrix::zeros(10, 10);
        for i in 0..10 {
            lam[(i, i)] = vals[i];
        }
        let res = m.matmul(&v).sub(&v.matmul(&lam)).frobenius();
        assert!(res <= 1e-10 * m.frobenius());
        let orth = v.transpose().matmul(&v).sub(&DenseMatrix::identity(10)).frobenius();
        assert!(orth <= 1e-10);
    }

    #[test]
    fn pinv_examples() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let p = pinv_sym(&a).unwrap();
        let want = a.scale(0.25);
        assert!(p.sub(&want).max_abs() < 1e-14);
    }

    #[test]
    fn penrose_identities() {
        for seed in 0..5 {
            let b = random_sym(12, seed);
            // rank-deficient PSD: B B^T with one column zeroed
            let mut bb = b.clone();
            for i in 0..12 {
                bb[(i, 0)] = 0.0;
            }
            let m = bb.matmul(&bb.transpose());
            let p = pinv_sym(&m).unwrap();
            assert!(m.matmul(&p).matmul(&m).sub(&m).max_abs() < 1e-9);
            assert!(p.matmul(&m).matmul(&p).sub(&p).max_abs() < 1e-9 * p.max_abs().max(1.0));
            let mp = m.matmul(&p);
            assert!(mp.sub(&mp.transpose()).max_abs() < 1e-9);
            let pm = p.matmul(&m);
            assert!(pm.sub(&pm.transpose()).max_abs() < 1e-9);
        }
    }

    #[test]
    fn rayleigh_scaling() {
        let l = DenseMatrix::from_rows(&[vec![1., -1., 0.], vec![-1., 2., -1.], vec![0., -1., 1.]]);
        let one = vec![vec![1.0; 3]];
        let (lo, hi) = rayleigh_range(&l, &l, &one).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        assert!((rayleigh_sup(&l.scale(2.0), &l, &one).unwrap() - 2.0).abs() < 1e-12);
        assert!(rayleigh_sup(&l, &l, &[]).is_err());
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let m = DenseMatrix::from_rows(&[vec![1., 0.], vec![1., 1.], vec![1., 2.]]);
        let x = lstsq(&m, &[1.0, 2.0, 2.0]).unwrap();
        // normal equations: [[3,3],[3,5]] x = [5,6]
        assert!((x[0] - 7.0 / 6.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lu_solves() {
        let m = DenseMatrix::from_rows(&[vec![0., 2.], vec![3., 1.]]);
        let x = lu_solve(&m, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }
}
