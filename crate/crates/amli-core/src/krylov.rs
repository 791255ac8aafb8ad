//! Preconditioned CG on the complement of constants, with the Lanczos
//! tridiagonal recovered from the CG coefficients.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::dense::{eigvals_sym, DenseMatrix};
use crate::error::{invalid, Error, Result};
use crate::graph::{dot, project_out_constant};

pub const DEFAULT_LANCZOS_STEPS: usize = 60;

#[derive(Clone, Copy, Debug)]
pub struct PcgOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub lanczos_steps: usize,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions { tol: 1e-10, max_iter: 500, lanczos_steps: DEFAULT_LANCZOS_STEPS }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// `||x_k - x*||_A`, starting with the initial error. Empty without `x*`.
    pub error_a_norm_history: Vec<f64>,
    /// `sqrt((r_k, B^{-1} r_k))`, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub lanczos_extremes: Option<(f64, f64)>,
    pub r_a: Option<f64>,
    pub r_e: Option<f64>,
    pub r_k: Option<f64>,
    #[serde(skip)]
    pub solution: Vec<f64>,
    #[serde(skip)]
    alphas: Vec<f64>,
    #[serde(skip)]
    betas: Vec<f64>,
}

impl SolveReport {
    /// CG step lengths and direction-update coefficients.
    pub fn coefficients(&self) -> (&[f64], &[f64]) {
        (&self.alphas, &self.betas)
    }
}

/// `(sqrt(kappa) - 1) / (sqrt(kappa) + 1)`.
pub fn rate_from_kappa(kappa: f64) -> f64 {
    let s = kappa.max(1.0).sqrt();
    (s - 1.0) / (s + 1.0)
}

fn a_norm(apply_a: &dyn Fn(&[f64]) -> Vec<f64>, e: &[f64]) -> f64 {
    dot(&apply_a(e), e).max(0.0).sqrt()
}

/// PCG from `x_0 = 0` for `A x = f` with `f`, iterates and preconditioned
/// residuals kept orthogonal to constants.
///
/// With `x_true` the stopping test is the relative A-norm error; otherwise
/// the relative preconditioned residual.
pub fn pcg_solve(
    apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_b: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    f: &[f64],
    x_true: Option<&[f64]>,
    opts: &PcgOptions,
) -> Result<SolveReport> {
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return invalid("tolerance must lie in (0, 1)");
    }
    let n = f.len();
    let mut r = f.to_vec();
    project_out_constant(&mut r);
    let xt = x_true.map(|x| {
        let mut x = x.to_vec();
        project_out_constant(&mut x);
        x
    });
    if let Some(x) = &xt {
        if x.len() != n {
            return invalid("x_true has the wrong length");
        }
    }
    let mut x = vec![0.0; n];
    let mut z = apply_b(&r)?;
    project_out_constant(&mut z);
    let mut rz = dot(&r, &z);
    let rnorm = dot(&r, &r).sqrt();
    if rz < -1e-12 * rnorm * dot(&z, &z).sqrt() {
        return Err(Error::Indefinite(format!("(B r, r) = {rz:e} at iteration 0")));
    }
    let mut err_hist = Vec::new();
    let e0 = xt.as_ref().map(|t| a_norm(apply_a, t));
    if let Some(e) = e0 {
        err_hist.push(e);
    }
    let mut res_hist = vec![rz.max(0.0).sqrt()];
    let mut p = z.clone();
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut converged = rnorm == 0.0 || e0 == Some(0.0);
    let mut it = 0;
    let mut e = vec![0.0; n];
    while !converged && it < opts.max_iter {
        let q = apply_a(&p);
        let pq = dot(&p, &q);
        if pq.is_nan() || pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        project_out_constant(&mut x);
        alphas.push(alpha);
        it += 1;
        z = apply_b(&r)?;
        project_out_constant(&mut z);
        let rz_new = dot(&r, &z);
        if rz_new < -1e-12 * dot(&r, &r).sqrt() * dot(&z, &z).sqrt() {
            return Err(Error::Indefinite(format!("(B r, r) = {rz_new:e} at iteration {it}")));
        }
        res_hist.push(rz_new.max(0.0).sqrt());
        if let (Some(t), Some(e0)) = (&xt, e0) {
            for k in 0..n {
                e[k] = x[k] - t[k];
            }
            let en = a_norm(apply_a, &e);
            err_hist.push(en);
            converged = en <= opts.tol * e0;
        } else {
            converged = res_hist[it] <= opts.tol * res_hist[0];
        }
        // exhausted Krylov space: residual is at roundoff level
        if res_hist[it] <= 1e-15 * res_hist[0] {
            converged = true;
        }
        if converged {
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
        rz = rz_new;
    }
    let lanczos_extremes = lanczos_from_cg(&alphas, &betas, opts.lanczos_steps)?;
    let r_a = match (err_hist.first(), err_hist.last()) {
        (Some(&a), Some(&b)) if it > 0 && a > 0.0 => Some((b / a).powf(1.0 / it as f64)),
        _ => None,
    };
    let r_e = lanczos_extremes.map(|(lo, hi)| rate_from_kappa(hi / lo));
    Ok(SolveReport {
        iterations: it,
        converged,
        error_a_norm_history: err_hist,
        residual_history: res_hist,
        lanczos_extremes,
        r_a,
        r_e,
        r_k: None,
        solution: x,
        alphas,
        betas,
    })
}

/// Extreme eigenvalues of the Lanczos tridiagonal built from the first
/// `steps` CG coefficients.
pub fn lanczos_from_cg(alphas: &[f64], betas: &[f64], steps: usize) -> Result<Option<(f64, f64)>> {
    let m = steps.min(alphas.len()).min(betas.len() + 1);
    if m == 0 {
        return Ok(None);
    }
    let mut t = DenseMatrix::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < m {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let v = eigvals_sym(&t)?;
    Ok(Some((v[0], v[m - 1])))
}

/// Extreme eigenvalues of `B^{-1} A` on the complement of constants from
/// `iters` PCG steps on a seeded random right-hand side.
pub fn lanczos_extremes(
    apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
    apply_b: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    n: usize,
    iters: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if iters < 2 {
        return invalid("Lanczos needs at least 2 iterations");
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let opts = PcgOptions { tol: 1e-300_f64.max(f64::MIN_POSITIVE), max_iter: iters, lanczos_steps: iters };
    let rep = pcg_solve(apply_a, apply_b, &f, None, &opts)?;
    rep.lanczos_extremes.ok_or_else(|| Error::Numerical("no Lanczos steps were taken".into()))
}

/// Average factor `r_a`, Lanczos rate `r_e` and the rate `r_k` implied by
/// `kappa = zeta`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Rates {
    pub r_a: Option<f64>,
    pub r_e: Option<f64>,
    pub r_k: f64,
}

pub fn rates(report: &SolveReport, zeta: f64) -> Rates {
    Rates { r_a: report.r_a, r_e: report.r_e, r_k: rate_from_kappa(zeta) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;

    #[test]
    fn rate_examples() {
        assert!((rate_from_kappa(13.9) - 0.577).abs() < 1e-3);
        assert_eq!(rate_from_kappa(1.0), 0.0);
        let drop: f64 = 1e-10;
        assert!((drop.powf(1.0 / 30.0) - 0.464).abs() < 1e-3);
    }

    #[test]
    fn identity_preconditioner_terminates() {
        let g = path_graph(20);
        let a = |v: &[f64]| g.laplacian_apply(v).unwrap();
        let b = |v: &[f64]| Ok(v.to_vec());
        let mut xt: Vec<f64> = (0..20).map(|i| (i as f64 * 1.3).sin()).collect();
        project_out_constant(&mut xt);
        let f = a(&xt);
        let rep = pcg_solve(&a, &b, &f, Some(&xt), &PcgOptions::default()).unwrap();
        assert!(rep.converged && rep.iterations <= 20);
        for w in rep.error_a_norm_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(rep.solution.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn exact_preconditioner_one_step() {
        let g = path_graph(10);
        let pinv = crate::dense::pinv_sym(&g.laplacian_dense()).unwrap();
        let a = |v: &[f64]| g.laplacian_apply(v).unwrap();
        let b = |v: &[f64]| Ok(pinv.matvec(v));
        let mut xt: Vec<f64> = (0..10).map(|i| i as f64).collect();
        project_out_constant(&mut xt);
        let rep = pcg_solve(&a, &b, &a(&xt), Some(&xt), &PcgOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let (lo, hi) = lanczos_extremes(&a, &b, 10, 5, 1).unwrap_or((1.0, 1.0));
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lanczos_recovers_diagonal_spectrum() {
        // A = diag(0, 1..10) behaves like a Laplacian with a one-dimensional
        // kernel after conjugating by an orthogonal matrix sending e_0 to 1.
        let n = 11;
        let z = crate::dense::complement_basis(n, &[vec![1.0; n]]);
        let mut d = DenseMatrix::zeros(n - 1, n - 1);
        for i in 0..n - 1 {
            d[(i, i)] = (i + 1) as f64;
        }
        let a_mat = z.matmul(&d).matmul(&z.transpose());
        let a = |v: &[f64]| a_mat.matvec(v);
        let b = |v: &[f64]| Ok(v.to_vec());
        let (lo, hi) = lanczos_extremes(&a, &b, n, 20, 3).unwrap();
        assert!((lo - 1.0).abs() < 1e-6 && (hi - 10.0).abs() < 1e-6, "{lo} {hi}");
        assert!(lanczos_extremes(&a, &b, n, 1, 3).is_err());
    }

    #[test]
    fn detects_indefinite() {
        let g = path_graph(6);
        let a = |v: &[f64]| g.laplacian_apply(v).unwrap();
        let b = |v: &[f64]| Ok(v.iter().map(|x| -x).collect());
        let f = vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0];
        assert!(matches!(pcg_solve(&a, &b, &f, None, &PcgOptions::default()), Err(Error::Indefinite(_))));
    }
}
