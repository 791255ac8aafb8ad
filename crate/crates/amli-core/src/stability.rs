//! The projection `Q` onto aggregate-wise constants and the edge operator
//! `Pi` with `B Q = Pi B`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::dense::{self, DenseMatrix};
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::matching::Partition;

pub const DEFAULT_AGGREGATE_CAP: usize = 8;
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Sparse `|E| x |E|` operator stored by rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PiOperator {
    rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PiNorms {
    pub inf_norm: f64,
    pub one_norm: f64,
    pub product_bound: f64,
    pub gershgorin_bound: f64,
}

impl PiOperator {
    pub fn identity(m: usize) -> Self {
        PiOperator { rows: (0..m).map(|k| vec![(k, 1.0)]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[(usize, f64)] {
        &self.rows[k]
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * w[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.dim();
        let mut d = DenseMatrix::zeros(m, m);
        for (k, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                d[(k, c)] += v;
            }
        }
        d
    }

    fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.dim()];
        for (k, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                cols[c].push((k, v));
            }
        }
        cols
    }

    /// Exact `||Pi||_inf`, `||Pi||_1`, their product, and the largest absolute
    /// row sum of `Pi Pi^T`.
    pub fn norm_bounds(&self) -> PiNorms {
        let inf_norm = self.rows.iter().map(|r| r.iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max);
        let cols = self.columns();
        let one_norm = cols.iter().map(|c| c.iter().map(|e| e.1.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut acc = vec![0.0; self.dim()];
        let mut touched = Vec::new();
        let mut gershgorin_bound: f64 = 0.0;
        for r in &self.rows {
            for &(c, v) in r {
                for &(j, w) in &cols[c] {
                    if acc[j] == 0.0 {
                        touched.push(j);
                    }
                    acc[j] += v * w;
                }
            }
            let s: f64 = touched.iter().map(|&j| acc[j].abs()).sum();
            gershgorin_bound = gershgorin_bound.max(s);
            for &j in &touched {
                acc[j] = 0.0;
            }
            touched.clear();
        }
        PiNorms { inf_norm, one_norm, product_bound: inf_norm * one_norm, gershgorin_bound }
    }

    /// `rho(Pi Pi^T)` by dense eigensolve.
    pub fn spectral_norm_sq(&self) -> Result<f64> {
        if self.dim() > DEFAULT_DENSE_CAP {
            return Err(Error::TooLarge(format!("{} edges exceeds the dense cap", self.dim())));
        }
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let d = self.to_dense();
        let vals = dense::eigvals_sym(&d.matmul(&d.transpose()))?;
        Ok(*vals.last().unwrap())
    }
}

/// `(Qv)_i` is the mean of `v` over the aggregate containing `i`.
pub fn project_q(p: &Partition, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for a in p.aggregates() {
        let m = a.iter().map(|&i| v[i]).sum::<f64>() / a.len() as f64;
        for &i in a {
            out[i] = m;
        }
    }
    out
}

pub fn q_dense(p: &Partition) -> DenseMatrix {
    let n = p.num_vertices();
    let mut q = DenseMatrix::zeros(n, n);
    for a in p.aggregates() {
        let w = 1.0 / a.len() as f64;
        for &i in a {
            for &j in a {
                q[(i, j)] = w;
            }
        }
    }
    q
}

/// Closed-form `Pi` for a partition into pairs and singletons.
pub fn build_pi_matching(g: &Graph, p: &Partition) -> Result<PiOperator> {
    if !p.is_pairwise() {
        return invalid("partition has aggregates larger than two");
    }
    if p.num_vertices() != g.num_vertices() {
        return invalid("partition and graph sizes differ");
    }
    let pair_edge = |v: usize| -> Result<Option<(usize, bool)>> {
        let a = &p.aggregates()[p.aggregate_of(v)];
        if a.len() < 2 {
            return Ok(None);
        }
        let k = g
            .edge_index(a[0], a[1])
            .ok_or_else(|| Error::InvalidArgument(format!("pair ({},{}) is not an edge", a[0], a[1])))?;
        Ok(Some((k, v == a[0])))
    };
    let mut rows = Vec::with_capacity(g.num_edges());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        if p.aggregate_of(i) == p.aggregate_of(j) {
            rows.push(Vec::new());
            continue;
        }
        let mut r = vec![(k, 1.0)];
        if let Some((l, i_is_small)) = pair_edge(i)? {
            r.push((l, if i_is_small { -0.5 } else { 0.5 }));
        }
        if let Some((l, j_is_small)) = pair_edge(j)? {
            r.push((l, if j_is_small { 0.5 } else { -0.5 }));
        }
        r.sort_unstable_by_key(|e| e.0);
        rows.push(r);
    }
    Ok(PiOperator { rows })
}

/// Local data of one aggregate: global edge ids of its internal edges and the
/// per-vertex vectors `C_m` (indexed by internal edge) for each choice of `l`.
struct LocalTaylor {
    edge_ids: Vec<usize>,
    c: Vec<Vec<f64>>,
}

fn local_taylor(g: &Graph, agg: &[usize]) -> Result<LocalTaylor> {
    let sub = g.induced(agg);
    if !sub.is_connected() {
        return invalid(format!("aggregate starting at {} is not connected", agg[0]));
    }
    let edge_ids =
        sub.edges().iter().map(|&(a, b)| g.edge_index(agg[a], agg[b]).expect("induced edge exists")).collect();
    let nm = agg.len();
    let am = sub.laplacian_dense();
    let mut c = Vec::with_capacity(nm);
    for l in 0..nm {
        let mut m = am.clone();
        m[(l, l)] += 1.0;
        let x = dense::lu_solve(&m, &vec![1.0; nm])?;
        let bx = sub.incidence_apply(&x)?;
        c.push(bx.into_iter().map(|v| v / nm as f64).collect());
    }
    Ok(LocalTaylor { edge_ids, c })
}

/// `Pi` for an arbitrary partition into connected aggregates, built from the
/// local mean-recovery identity `<u>_m = u_l + (C_m, B_m u)`.
pub fn build_pi_general(g: &Graph, p: &Partition) -> Result<PiOperator> {
    build_pi_general_capped(g, p, DEFAULT_AGGREGATE_CAP)
}

pub fn build_pi_general_capped(g: &Graph, p: &Partition, cap: usize) -> Result<PiOperator> {
    if p.num_vertices() != g.num_vertices() {
        return invalid("partition and graph sizes differ");
    }
    if let Some(a) = p.aggregates().iter().find(|a| a.len() > cap) {
        return Err(Error::TooLarge(format!("aggregate of size {} exceeds cap {cap}", a.len())));
    }
    let local: Vec<LocalTaylor> = p.aggregates().iter().map(|a| local_taylor(g, a)).collect::<Result<_>>()?;
    let local_index = |v: usize| -> usize {
        let a = &p.aggregates()[p.aggregate_of(v)];
        a.binary_search(&v).unwrap()
    };
    let mut rows = Vec::with_capacity(g.num_edges());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let (m1, m2) = (p.aggregate_of(i), p.aggregate_of(j));
        if m1 == m2 {
            rows.push(Vec::new());
            continue;
        }
        let mut r = vec![(k, 1.0)];
        let t1 = &local[m1];
        for (e, &cv) in t1.edge_ids.iter().zip(&t1.c[local_index(i)]) {
            r.push((*e, cv));
        }
        let t2 = &local[m2];
        for (e, &cv) in t2.edge_ids.iter().zip(&t2.c[local_index(j)]) {
            r.push((*e, -cv));
        }
        r.retain(|e| e.1 != 0.0);
        r.sort_unstable_by_key(|e| e.0);
        rows.push(r);
    }
    Ok(PiOperator { rows })
}

/// `max_v ||B Q v - Pi B v||_inf` over `trials` random `v` with entries in `[-1, 1]`.
pub fn check_commutation(g: &Graph, p: &Partition, pi: &PiOperator, trials: usize, seed: u64) -> Result<f64> {
    if pi.dim() != g.num_edges() {
        return invalid("Pi dimension does not match edge count");
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let v: Vec<f64> = (0..g.num_vertices()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let lhs = g.incidence_apply(&project_q(p, &v))?;
        let rhs = pi.apply(&g.incidence_apply(&v)?);
        for (a, b) in lhs.iter().zip(&rhs) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// `|Q|_A^2 = sup (A Q v, Q v) / (A v, v)` over `v` orthogonal to constants.
pub fn q_energy_norm(g: &Graph, p: &Partition) -> Result<f64> {
    q_energy_norm_capped(g, p, DEFAULT_DENSE_CAP)
}

pub fn q_energy_norm_capped(g: &Graph, p: &Partition, cap: usize) -> Result<f64> {
    let n = g.num_vertices();
    if n > cap {
        return Err(Error::TooLarge(format!("n={n} exceeds the dense cap {cap}; use the Pi norm bounds instead")));
    }
    if !g.is_connected() {
        return invalid("graph is not connected");
    }
    if n < 2 {
        return Ok(0.0);
    }
    let a = g.laplacian_dense();
    let q = q_dense(p);
    let num = q.matmul(&a).matmul(&q);
    let sup = dense::rayleigh_sup(&num, &a, &[vec![1.0; n]])?;
    Ok(sup.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::matching::random_maximal_matching;
    use crate::mesh::{grid_graph, GridSpec};

    #[test]
    fn q_examples() {
        let p = Partition::from_pairs(2, &[(0, 1)]).unwrap();
        assert_eq!(project_q(&p, &[1.0, 3.0]), vec![2.0, 2.0]);
        let p = Partition::from_pairs(5, &[(0, 1), (2, 4)]).unwrap();
        assert_eq!(project_q(&p, &[7.0; 5]), vec![7.0; 5]);
        let v = [0.3, -1.0, 2.0, 5.0, 0.25];
        let qv = project_q(&p, &v);
        assert_eq!(project_q(&p, &qv), qv);
    }

    #[test]
    fn pi_matching_path4_row() {
        let g = path_graph(4);
        let p = Partition::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let pi = build_pi_matching(&g, &p).unwrap();
        assert!(pi.row(0).is_empty() && pi.row(2).is_empty());
        // edge (1,2): vertex 1 is the larger end of (0,1), vertex 2 the
        // smaller end of (2,3); commutation forces +1/2 on both.
        assert_eq!(pi.row(1), &[(0, 0.5), (1, 1.0), (2, 0.5)]);
        assert!(check_commutation(&g, &p, &pi, 100, 1).unwrap() <= 1e-12);
    }

    #[test]
    fn singleton_partition_is_identity() {
        let g = path_graph(5);
        let p = Partition::from_pairs(5, &[]).unwrap();
        assert_eq!(build_pi_matching(&g, &p).unwrap(), PiOperator::identity(4));
        assert_eq!(build_pi_general(&g, &p).unwrap(), PiOperator::identity(4));
        let pi = build_pi_general(&g, &p).unwrap();
        assert_eq!(check_commutation(&g, &p, &pi, 10, 0).unwrap(), 0.0);
    }

    #[test]
    fn general_matches_matching() {
        let (g, _) = grid_graph(&GridSpec::new(vec![5, 4])).unwrap();
        for seed in 0..5 {
            let p = random_maximal_matching(&g, seed);
            let a = build_pi_matching(&g, &p).unwrap().to_dense();
            let b = build_pi_general(&g, &p).unwrap().to_dense();
            assert!(a.sub(&b).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn general_path3_aggregate() {
        // aggregate {0,1,2} (a path) plus singleton 3 attached to vertex 2
        let g = path_graph(4);
        let p = Partition::from_aggregates(4, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let pi = build_pi_general(&g, &p).unwrap();
        // local solve with l = 2: (A_m + e_2 e_2^T) x = 1 gives x = (6, 5, 3),
        // so C = B_m x / 3 = (1/3, 2/3)
        let row = pi.row(2);
        assert_eq!(row.len(), 3);
        assert!((row[0].1 - 1.0 / 3.0).abs() < 1e-14);
        assert!((row[1].1 - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(row[2], (2, 1.0));
        assert!(check_commutation(&g, &p, &pi, 50, 3).unwrap() <= 1e-12);
    }

    #[test]
    fn general_rejects_disconnected_aggregate() {
        let g = path_graph(4);
        let p = Partition::from_aggregates(4, vec![vec![0, 2], vec![1], vec![3]]).unwrap();
        assert!(build_pi_general(&g, &p).is_err());
        assert!(build_pi_matching(&g, &p).is_err());
    }

    #[test]
    fn norms_on_grid() {
        let (g, _) = grid_graph(&GridSpec::new(vec![6, 6])).unwrap();
        let p = random_maximal_matching(&g, 9);
        let nb = build_pi_matching(&g, &p).unwrap().norm_bounds();
        assert_eq!(nb.inf_norm, 2.0);
        assert!(nb.one_norm <= 3.0);
        assert!(nb.gershgorin_bound <= 4.0);
    }

    #[test]
    fn q_energy_examples() {
        let g = path_graph(2);
        let p = Partition::from_pairs(2, &[(0, 1)]).unwrap();
        assert!(q_energy_norm(&g, &p).unwrap().abs() < 1e-12);
        let g = path_graph(16);
        let pairs: Vec<_> = (0..8).map(|k| (2 * k, 2 * k + 1)).collect();
        let p = Partition::from_pairs(16, &pairs).unwrap();
        assert!(q_energy_norm(&g, &p).unwrap() <= 2.0 + 1e-10);
        assert!(q_energy_norm_capped(&g, &p, 10).is_err());
    }
}
