//! CSR storage, sparse LDL^T factorizations (via `sprs-ldl`) and plain CG.

use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result};
use crate::graph::{dot, Graph};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    mat: CsMat<f64>,
}

impl CsrMatrix {
    /// Sums duplicate triplets.
    pub fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut t = TriMat::with_capacity((n, n), trip.len());
        for &(i, j, v) in trip {
            t.add_triplet(i, j, v);
        }
        CsrMatrix { mat: t.to_csr() }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn inner(&self) -> &CsMat<f64> {
        &self.mat
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut s = 0.0;
            for (j, &v) in row.iter() {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec_into(x, &mut y);
        y
    }

    /// Induced l1 norm (max absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.mat.cols()];
        for row in self.mat.outer_iterator() {
            for (j, &v) in row.iter() {
                col[j] += v.abs();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let n = self.dim();
        let mut d = crate::dense::DenseMatrix::zeros(n, n);
        for (i, row) in self.mat.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                d[(i, j)] += v;
            }
        }
        d
    }
}

/// Sparse `L D L^T` factorization with reverse Cuthill-McKee ordering.
pub struct SparseLdl {
    // `sprs-ldl` cannot factor 1x1 systems; those keep the scalar instead.
    num: Option<LdlNumeric<f64, usize>>,
    scalar: f64,
    n: usize,
}

impl std::fmt::Debug for SparseLdl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLdl").field("n", &self.n).finish()
    }
}

impl SparseLdl {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.dim() <= 1 {
            let d = a.to_dense();
            let scalar = if a.dim() == 1 { d[(0, 0)] } else { 1.0 };
            if scalar.is_nan() || scalar <= 0.0 {
                return Err(Error::Numerical("matrix is not positive definite".into()));
            }
            return Ok(SparseLdl { num: None, scalar, n: a.dim() });
        }
        let num = Ldl::new()
            .fill_in_reduction(sprs::FillInReduction::ReverseCuthillMcKee)
            .numeric(a.mat.view())
            .map_err(|e| Error::Numerical(format!("LDL factorization failed: {e}")))?;
        if num.d().iter().any(|&d| d.is_nan() || d <= 0.0) {
            return Err(Error::Numerical("matrix is not positive definite".into()));
        }
        Ok(SparseLdl { num: Some(num), scalar: 0.0, n: a.dim() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.num {
            Some(num) => num.solve(b),
            None => b.iter().map(|v| v / self.scalar).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Flops of one solve: two triangular sweeps plus the diagonal.
    pub fn solve_flops(&self) -> u64 {
        (4 * self.num.as_ref().map_or(0, |l| l.nnz()) + self.n) as u64
    }
}

/// Exact `A^dagger` on the complement of constants for a connected graph:
/// ground vertex 0, factor the remaining block, and remove the mean.
#[derive(Debug)]
pub struct GroundedSolver {
    n: usize,
    ldl: Option<SparseLdl>,
}

impl GroundedSolver {
    pub fn new(g: &Graph) -> Result<Self> {
        let n = g.num_vertices();
        if !g.is_connected() {
            return Err(Error::InvalidArgument("grounded solve needs a connected graph".into()));
        }
        if n == 1 {
            return Ok(GroundedSolver { n, ldl: None });
        }
        let mut trip = Vec::with_capacity(n + 2 * g.num_edges());
        for v in 1..n {
            trip.push((v - 1, v - 1, g.degree(v) as f64));
        }
        for &(i, j) in g.edges() {
            if i > 0 {
                trip.push((i - 1, j - 1, -1.0));
                trip.push((j - 1, i - 1, -1.0));
            }
        }
        let m = CsrMatrix::from_triplets(n - 1, &trip);
        Ok(GroundedSolver { n, ldl: Some(SparseLdl::factor(&m)?) })
    }

    /// `A^dagger b` for `b` orthogonal to constants (the mean of `b` is removed first).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Some(ldl) = &self.ldl else {
            return vec![0.0; self.n];
        };
        let mut rhs: Vec<f64> = b[1..].to_vec();
        let mean = b.iter().sum::<f64>() / self.n as f64;
        rhs.iter_mut().for_each(|x| *x -= mean);
        let y = ldl.solve(&rhs);
        let mut x = Vec::with_capacity(self.n);
        x.push(0.0);
        x.extend(y);
        crate::graph::project_out_constant(&mut x);
        x
    }

    pub fn solve_flops(&self) -> u64 {
        self.ldl.as_ref().map_or(0, |l| l.solve_flops()) + 3 * self.n as u64
    }
}

/// Outcome of [`cg`].
#[derive(Clone, Debug)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub flops: u64,
}

/// Unpreconditioned CG from zero until `||b - A x|| <= tol ||b||`.
pub fn cg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> CgResult {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return CgResult { x, iterations: 0, relative_residual: 0.0, flops: 0 };
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut flops = 0u64;
    let per_iter = (2 * a.nnz() + 10 * n) as u64;
    let mut it = 0;
    while it < max_iter && rr.sqrt() > tol * bnorm {
        a.matvec_into(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_new;
        flops += per_iter;
        it += 1;
    }
    CgResult { x, iterations: it, relative_residual: rr.sqrt() / bnorm, flops }
}
