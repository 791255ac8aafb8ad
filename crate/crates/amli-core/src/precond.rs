//! Two-level blocks and the recursive AMLI W-cycle preconditioner.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::{check_len, project_out_constant, Graph};
use crate::hierarchy::{amli_poly, Coarsening, Hierarchy, HierarchyLevel, Variant};
use crate::sparse::{cg, CsrMatrix, SparseLdl};

/// Pair-count limit below which `Auto` factors `Y^T A Y` directly.
pub const DIRECT_LIMIT: usize = 4096;
const INNER_CG_MAX_ITER: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SmootherConfig {
    /// Sparse direct solve on every level.
    Exact,
    /// Unpreconditioned CG to the given relative residual.
    Cg { tol: f64 },
    /// `sweeps` Richardson steps with weight `1 / ||Y^T A Y||_1`.
    Richardson { sweeps: usize },
    /// Direct below [`DIRECT_LIMIT`] pairs, CG to `tol` above.
    Auto { tol: f64 },
}

impl SmootherConfig {
    pub fn for_variant(v: Variant) -> Self {
        match v {
            Variant::Ordinary => SmootherConfig::Auto { tol: 1e-6 },
            Variant::Modified => SmootherConfig::Richardson { sweeps: 1 },
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SmootherConfig::Cg { tol } | SmootherConfig::Auto { tol } if tol.is_nan() || tol <= 0.0 => {
                invalid("smoother tolerance must be positive")
            }
            SmootherConfig::Richardson { sweeps: 0 } => invalid("Richardson needs at least one sweep"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug)]
enum SmootherImpl {
    Direct(Box<SparseLdl>),
    Cg { tol: f64 },
    Richardson { omega: f64, sweeps: usize },
}

/// Approximate inverse of `X = Y^T A Y` on one level.
#[derive(Debug)]
pub struct LevelSmoother {
    x: CsrMatrix,
    kind: SmootherImpl,
}

impl LevelSmoother {
    pub fn new(x: CsrMatrix, cfg: SmootherConfig) -> Result<Self> {
        cfg.validate()?;
        let kind = match cfg {
            SmootherConfig::Exact => SmootherImpl::Direct(Box::new(SparseLdl::factor(&x)?)),
            SmootherConfig::Auto { tol } if x.dim() > DIRECT_LIMIT => SmootherImpl::Cg { tol },
            SmootherConfig::Auto { .. } => SmootherImpl::Direct(Box::new(SparseLdl::factor(&x)?)),
            SmootherConfig::Cg { tol } => SmootherImpl::Cg { tol },
            SmootherConfig::Richardson { sweeps } => {
                let norm = x.one_norm();
                if norm <= 0.0 {
                    return Err(Error::Numerical("Y^T A Y has zero l1 norm".into()));
                }
                SmootherImpl::Richardson { omega: 1.0 / norm, sweeps }
            }
        };
        Ok(LevelSmoother { x, kind })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.x
    }

    /// Richardson weight, if this is a Richardson smoother.
    pub fn omega(&self) -> Option<f64> {
        match self.kind {
            SmootherImpl::Richardson { omega, .. } => Some(omega),
            _ => None,
        }
    }

    pub fn solve(&self, b: &[f64], flops: &mut u64) -> Vec<f64> {
        let n = b.len();
        match &self.kind {
            SmootherImpl::Direct(l) => {
                *flops += l.solve_flops();
                l.solve(b)
            }
            SmootherImpl::Cg { tol } => {
                let res = cg(&self.x, b, *tol, INNER_CG_MAX_ITER);
                *flops += res.flops;
                res.x
            }
            SmootherImpl::Richardson { omega, sweeps } => {
                let mut x: Vec<f64> = b.iter().map(|v| omega * v).collect();
                *flops += n as u64;
                let mut t = vec![0.0; n];
                for _ in 1..*sweeps {
                    self.x.matvec_into(&x, &mut t);
                    for k in 0..n {
                        x[k] += omega * (b[k] - t[k]);
                    }
                    *flops += (2 * self.x.nnz() + 3 * n) as u64;
                }
                x
            }
        }
    }
}

fn laplacian_flops(g: &Graph) -> u64 {
    (2 * (g.num_vertices() + 2 * g.num_edges())) as u64
}

/// `Y^T A Y x` by two sparse products, without assembling the block.
pub fn ytay_apply(level: &HierarchyLevel, x: &[f64]) -> Result<Vec<f64>> {
    let c = level.coarsening.as_ref().ok_or_else(|| Error::InvalidArgument("coarsest level has no Y".into()))?;
    check_len("pair vector", x.len(), c.pairs.len())?;
    let yx = y_apply(c, level.n(), x);
    let ayx = level.graph.laplacian_apply(&yx)?;
    Ok(yt_apply(c, &ayx))
}

/// Solves `Y^T A Y x = b` with the given smoother configuration.
pub fn ytay_solve(level: &HierarchyLevel, b: &[f64], cfg: SmootherConfig) -> Result<Vec<f64>> {
    let x = level.ytay().ok_or_else(|| Error::InvalidArgument("coarsest level has no Y".into()))?;
    check_len("pair vector", b.len(), x.dim())?;
    let s = LevelSmoother::new(x, cfg)?;
    Ok(s.solve(b, &mut 0))
}

fn y_apply(c: &Coarsening, n: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&(i, j), &v) in c.pairs.iter().zip(x) {
        out[i] = v;
        out[j] = -v;
    }
    out
}

fn yt_apply(c: &Coarsening, r: &[f64]) -> Vec<f64> {
    c.pairs.iter().map(|&(i, j)| r[i] - r[j]).collect()
}

fn pt_apply(c: &Coarsening, r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.partition.num_aggregates()];
    for (v, &a) in c.partition.vertex_to_aggregate().iter().enumerate() {
        out[a] += r[v];
    }
    out
}

/// One symmetric two-level sweep: smooth on `range(Y)`, correct through `P`
/// with `sigma^{-1} coarse(P^T r)`, smooth again.
pub fn two_level_apply(
    level: &HierarchyLevel,
    smoother: &LevelSmoother,
    r: &[f64],
    coarse: &mut dyn FnMut(&[f64], &mut u64) -> Vec<f64>,
    flops: &mut u64,
) -> Result<Vec<f64>> {
    let c = level.coarsening.as_ref().ok_or_else(|| Error::InvalidArgument("coarsest level has no Y".into()))?;
    let n = level.n();
    check_len("residual", r.len(), n)?;
    let g = &level.graph;
    let np = c.pairs.len();
    let af = laplacian_flops(g);

    let mut z = y_apply(c, n, &smoother.solve(&yt_apply(c, r), flops));
    let mut t = vec![0.0; n];
    g.laplacian_apply_into(&z, &mut t);
    for k in 0..n {
        t[k] = r[k] - t[k];
    }
    let rc = pt_apply(c, &t);
    let wc = coarse(&rc, flops);
    let inv_sigma = 1.0 / c.sigma;
    for (v, &a) in c.partition.vertex_to_aggregate().iter().enumerate() {
        z[v] += inv_sigma * wc[a];
    }
    g.laplacian_apply_into(&z, &mut t);
    for k in 0..n {
        t[k] = r[k] - t[k];
    }
    let post = smoother.solve(&yt_apply(c, &t), flops);
    for (&(i, j), &v) in c.pairs.iter().zip(&post) {
        z[i] += v;
        z[j] -= v;
    }
    *flops += 2 * af + (6 * n + 6 * np + rc.len()) as u64;
    Ok(z)
}

/// The AMLI W-cycle `B_J^{-1}` over a hierarchy.
#[derive(Debug)]
pub struct AmliPreconditioner {
    hierarchy: Hierarchy,
    smoothers: Vec<Option<LevelSmoother>>,
    polys: Vec<(f64, f64)>,
    config: SmootherConfig,
}

impl AmliPreconditioner {
    pub fn new(hierarchy: Hierarchy, config: SmootherConfig) -> Result<Self> {
        let smoothers = hierarchy
            .levels
            .iter()
            .map(|l| l.ytay().map(|x| LevelSmoother::new(x, config)).transpose())
            .collect::<Result<Vec<_>>>()?;
        let polys = hierarchy.levels.iter().map(|l| amli_poly(l.theta)).collect::<Result<Vec<_>>>()?;
        Ok(AmliPreconditioner { hierarchy, smoothers, polys, config })
    }

    /// Uses the default smoother of the hierarchy's variant.
    pub fn with_default_smoother(hierarchy: Hierarchy) -> Result<Self> {
        let cfg = SmootherConfig::for_variant(hierarchy.variant);
        Self::new(hierarchy, cfg)
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn smoother(&self, level: usize) -> Option<&LevelSmoother> {
        self.smoothers[level].as_ref()
    }

    pub fn config(&self) -> SmootherConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.hierarchy.finest().n()
    }

    /// `z = B_J^{-1} r` on the finest level. `r` is projected onto the
    /// complement of constants first.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_counted(r)?.0)
    }

    /// Like [`Self::apply`], also returning the floating-point operation count.
    pub fn apply_counted(&self, r: &[f64]) -> Result<(Vec<f64>, u64)> {
        check_len("residual", r.len(), self.n())?;
        let mut rr = r.to_vec();
        project_out_constant(&mut rr);
        let mut flops = rr.len() as u64;
        let z = self.apply_level(0, &rr, &mut flops)?;
        Ok((z, flops))
    }

    /// `B_i^{-1} r` on level `i` (finest is 0).
    fn apply_level(&self, i: usize, r: &[f64], flops: &mut u64) -> Result<Vec<f64>> {
        let level = &self.hierarchy.levels[i];
        let Some(smoother) = &self.smoothers[i] else {
            *flops += self.hierarchy.coarsest.solve_flops();
            return Ok(self.hierarchy.coarsest.solve(r));
        };
        let mut err = None;
        let mut coarse = |v: &[f64], f: &mut u64| -> Vec<f64> {
            match self.coarse_action(i + 1, v, f) {
                Ok(x) => x,
                Err(e) => {
                    err = Some(e);
                    vec![0.0; v.len()]
                }
            }
        };
        let z = two_level_apply(level, smoother, r, &mut coarse, flops)?;
        match err {
            Some(e) => Err(e),
            None => Ok(z),
        }
    }

    /// `B_j^{-1} q_j(A_j B_j^{-1}) v`: two visits of level `j`, or one when
    /// `j` is the coarsest (exact) level.
    fn coarse_action(&self, j: usize, v: &[f64], flops: &mut u64) -> Result<Vec<f64>> {
        if self.smoothers[j].is_none() {
            return self.apply_level(j, v, flops);
        }
        let (a, b) = self.polys[j];
        let g = &self.hierarchy.levels[j].graph;
        let y1 = self.apply_level(j, v, flops)?;
        let mut t = vec![0.0; y1.len()];
        g.laplacian_apply_into(&y1, &mut t);
        let y2 = self.apply_level(j, &t, flops)?;
        *flops += laplacian_flops(g) + 3 * y1.len() as u64;
        Ok(y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect())
    }

    /// Flops of one application, measured by running it on a fixed vector.
    pub fn operation_count(&self) -> Result<u64> {
        let n = self.n();
        let r: Vec<f64> = (0..n).map(|i| ((i * 7919) % 104729) as f64 / 104729.0 - 0.5).collect();
        Ok(self.apply_counted(&r)?.1)
    }

    /// Dense matrix of `B_J^{-1}` restricted to the complement of constants
    /// (columns are images of projected unit vectors). Small `n` only.
    pub fn to_dense(&self, cap: usize) -> Result<DenseMatrix> {
        let n = self.n();
        if n > cap {
            return Err(Error::TooLarge(format!("n={n} exceeds dense cap {cap}")));
        }
        let mut cols = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            project_out_constant(&mut e);
            let mut z = self.apply(&e)?;
            project_out_constant(&mut z);
            cols.push(z);
        }
        Ok(DenseMatrix::from_cols(n, &cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::hierarchy::{build_hierarchy, HierarchyOptions, Strategy};
    use crate::mesh::{grid_graph, GridSpec, Lattice};

    fn path_hierarchy(n: usize, variant: Variant) -> Hierarchy {
        let lat = Lattice { dims: vec![n], coords: (0..n).map(|i| vec![i]).collect() };
        build_hierarchy(&path_graph(n), Some(&lat), &HierarchyOptions::new(Strategy::Structured, variant)).unwrap()
    }

    fn pinv_path(n: usize) -> DenseMatrix {
        crate::dense::pinv_sym(&path_graph(n).laplacian_dense()).unwrap()
    }

    #[test]
    fn single_edge_is_exact() {
        let h = path_hierarchy(2, Variant::Ordinary);
        assert_eq!(h.num_levels(), 1);
        let pre = AmliPreconditioner::with_default_smoother(h).unwrap();
        let z = pre.apply(&[1.0, -1.0]).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-15 && (z[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_level_on_single_pair_is_exact() {
        // one matching of a 2-vertex graph: coarse space is the kernel
        let g = path_graph(2);
        let lat = Lattice { dims: vec![2], coords: vec![vec![0], vec![1]] };
        let mut opts = HierarchyOptions::new(Strategy::Random { seed: 0 }, Variant::Ordinary);
        opts.max_matchings = Some(1);
        let h = build_hierarchy(&g, Some(&lat), &opts).unwrap();
        assert_eq!(h.num_levels(), 1);
        let x = crate::hierarchy::assemble_ytay(&g, &[(0, 1)]);
        assert_eq!(x.to_dense()[(0, 0)], 4.0);
        let s = LevelSmoother::new(x, SmootherConfig::Exact).unwrap();
        assert_eq!(s.solve(&[4.0], &mut 0), vec![1.0]);
    }

    #[test]
    fn ytay_examples() {
        let h = path_hierarchy(8, Variant::Ordinary);
        let l = &h.levels[0];
        let x = vec![0.3, -1.0, 2.0, 0.5];
        let y = vec![1.0, 0.25, -0.5, 2.0];
        let ax = ytay_apply(l, &x).unwrap();
        let ay = ytay_apply(l, &y).unwrap();
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-13);
        let assembled = l.ytay().unwrap().matvec(&x);
        assert!(ax.iter().zip(&assembled).all(|(p, q)| (p - q).abs() < 1e-14));
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let xs = ytay_solve(l, &b, SmootherConfig::Exact).unwrap();
        let back = ytay_apply(l, &xs).unwrap();
        assert!(back.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
        let one = ytay_solve(l, &b, SmootherConfig::Richardson { sweeps: 1 }).unwrap();
        let w = 1.0 / l.ytay().unwrap().one_norm();
        assert!(one.iter().zip(&b).all(|(p, q)| (p - w * q).abs() < 1e-15));
    }

    #[test]
    fn cg_smoother_tolerance() {
        let (g, lat) = grid_graph(&GridSpec::new(vec![8, 8])).unwrap();
        let h =
            build_hierarchy(&g, Some(&lat), &HierarchyOptions::new(Strategy::Structured, Variant::Ordinary)).unwrap();
        let l = &h.levels[0];
        let b: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).cos()).collect();
        let x = ytay_solve(l, &b, SmootherConfig::Cg { tol: 1e-6 }).unwrap();
        let r = ytay_apply(l, &x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-6 * bn);
    }

    #[test]
    fn matches_block_formula_with_exact_blocks() {
        // two-level with exact coarse solve equals T Ghat^+ T^T on 1-perp
        let h = path_hierarchy(4, Variant::Ordinary);
        assert_eq!(h.num_levels(), 2);
        let l0 = &h.levels[0];
        let sigma = l0.coarsening.as_ref().unwrap().sigma;
        let pre = AmliPreconditioner::new(h, SmootherConfig::Exact).unwrap();
        let b = pre.to_dense(64).unwrap();
        let l0 = &pre.hierarchy().levels[0];
        let y = l0.y_dense().unwrap();
        let p = l0.p_dense().unwrap();
        let a = path_graph(4).laplacian_dense();
        let x = y.transpose().matmul(&a).matmul(&y);
        let xinv = crate::dense::pinv_sym(&x).unwrap();
        let ac = pre.hierarchy().levels[1].graph.laplacian_dense();
        let acp = crate::dense::pinv_sym(&ac.scale(sigma)).unwrap();
        // (I - Y X^-1 Y^T A) P
        let proj = DenseMatrix::identity(4).sub(&y.matmul(&xinv).matmul(&y.transpose()).matmul(&a));
        let pc = proj.matmul(&p);
        let want = y.matmul(&xinv).matmul(&y.transpose()).add(&pc.matmul(&acp).matmul(&pc.transpose()));
        let q = DenseMatrix::identity(4).sub(&DenseMatrix::from_rows(&vec![vec![0.25; 4]; 4]));
        let want = q.matmul(&want).matmul(&q);
        assert!(b.sub(&want).max_abs() < 1e-12, "{:?}", b.sub(&want).max_abs());
        let _ = pinv_path(4);
    }

    #[test]
    fn linear_and_symmetric() {
        let h = path_hierarchy(32, Variant::Ordinary);
        let pre = AmliPreconditioner::with_default_smoother(h).unwrap();
        let r1: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let r2: Vec<f64> = (0..32).map(|i| (i as f64 * 0.3).cos()).collect();
        let z1 = pre.apply(&r1).unwrap();
        let z2 = pre.apply(&r2).unwrap();
        let comb: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let zc = pre.apply(&comb).unwrap();
        for k in 0..32 {
            assert!((zc[k] - (2.0 * z1[k] - 0.5 * z2[k])).abs() < 1e-12);
        }
        let mut p1 = r1.clone();
        let mut p2 = r2.clone();
        project_out_constant(&mut p1);
        project_out_constant(&mut p2);
        let s1: f64 = pre.apply(&p1).unwrap().iter().zip(&p2).map(|(a, b)| a * b).sum();
        let s2: f64 = pre.apply(&p2).unwrap().iter().zip(&p1).map(|(a, b)| a * b).sum();
        assert!((s1 - s2).abs() < 1e-10);
    }

    #[test]
    fn flops_grow() {
        let a = AmliPreconditioner::with_default_smoother(path_hierarchy(64, Variant::Ordinary)).unwrap();
        let b = AmliPreconditioner::with_default_smoother(path_hierarchy(128, Variant::Ordinary)).unwrap();
        let (fa, fb) = (a.operation_count().unwrap(), b.operation_count().unwrap());
        assert!(fb > 2 * fa);
        let one = AmliPreconditioner::with_default_smoother(path_hierarchy(2, Variant::Ordinary)).unwrap();
        assert!(one.operation_count().unwrap() > 0);
    }
}
