//! Multilevel hierarchies built from repeated pairwise matching, plus the
//! polynomial parameters of the W-cycle.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::matching::{
    aligned_matching, coarse_graph_with_multiplicity, coarse_lattice, random_maximal_matching, Partition,
};
use crate::mesh::Lattice;
use crate::sparse::{CsrMatrix, GroundedSolver};
use crate::stability::build_pi_matching;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Exact `Y^T A Y` solves and the full theta recursion.
    Ordinary,
    /// One l1-weighted Richardson sweep and `theta_k = 1 / (2k - 1)`.
    Modified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMode {
    TheoryGrid,
    TheoryGeneral,
    ModifiedGrid,
    Ratio,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Strategy {
    /// Aligned matchings along lattice dimensions; needs coordinates.
    Structured,
    /// Random maximal matchings on `floor(log2(N) / 2)` levels.
    Random { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct HierarchyOptions {
    pub strategy: Strategy,
    pub variant: Variant,
    /// `None` picks the variant/strategy default.
    pub sigma_mode: Option<SigmaMode>,
    /// Overrides the number of matchings for the random strategy.
    pub max_matchings: Option<usize>,
}

impl HierarchyOptions {
    pub fn new(strategy: Strategy, variant: Variant) -> Self {
        HierarchyOptions { strategy, variant, sigma_mode: None, max_matchings: None }
    }

    pub fn resolved_sigma_mode(&self) -> SigmaMode {
        self.sigma_mode.unwrap_or(match (self.strategy, self.variant) {
            (Strategy::Random { .. }, _) => SigmaMode::Ratio,
            (Strategy::Structured, Variant::Ordinary) => SigmaMode::TheoryGrid,
            (Strategy::Structured, Variant::Modified) => SigmaMode::ModifiedGrid,
        })
    }
}

/// How one level is coarsened into the next.
#[derive(Clone, Debug)]
pub struct Coarsening {
    pub partition: Partition,
    pub pairs: Vec<(usize, usize)>,
    /// Fine-edge count behind each coarse edge, in coarse edge order.
    pub multiplicity: Vec<usize>,
    pub sigma: f64,
    /// Bound used for `|Q|_A^2` when forming `c_g = sigma * qbound`.
    pub qbound: f64,
    /// Lattice dimension matched along (structured strategy only).
    pub dim: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct HierarchyLevel {
    pub graph: Graph,
    pub lattice: Option<Lattice>,
    /// `None` on the coarsest level.
    pub coarsening: Option<Coarsening>,
    pub theta: f64,
}

impl HierarchyLevel {
    pub fn n(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn c_g(&self) -> Option<f64> {
        self.coarsening.as_ref().map(|c| c.sigma * c.qbound)
    }

    /// Assembled `X = Y^T A Y` over the matched pairs of this level.
    pub fn ytay(&self) -> Option<CsrMatrix> {
        self.coarsening.as_ref().map(|c| assemble_ytay(&self.graph, &c.pairs))
    }

    /// Dense `P` (columns `e_i + e_j` or `e_i`).
    pub fn p_dense(&self) -> Option<DenseMatrix> {
        let c = self.coarsening.as_ref()?;
        let mut p = DenseMatrix::zeros(self.n(), c.partition.num_aggregates());
        for (k, a) in c.partition.aggregates().iter().enumerate() {
            for &v in a {
                p[(v, k)] = 1.0;
            }
        }
        Some(p)
    }

    /// Dense `Y` (columns `e_i - e_j`, `i < j`).
    pub fn y_dense(&self) -> Option<DenseMatrix> {
        let c = self.coarsening.as_ref()?;
        let mut y = DenseMatrix::zeros(self.n(), c.pairs.len());
        for (k, &(i, j)) in c.pairs.iter().enumerate() {
            y[(i, k)] = 1.0;
            y[(j, k)] = -1.0;
        }
        Some(y)
    }
}

/// `Y^T A Y` for pairs `(i, j)`. Diagonal entries are `d_i + d_j + 2`; an edge
/// `x - y` between two pairs adds `-s(x) s(y)` with `s = +1` on the smaller
/// member of a pair and `-1` on the larger.
pub fn assemble_ytay(g: &Graph, pairs: &[(usize, usize)]) -> CsrMatrix {
    let n = g.num_vertices();
    let mut owner = vec![usize::MAX; n];
    let mut sign = vec![0.0; n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        owner[i] = k;
        owner[j] = k;
        sign[i] = 1.0;
        sign[j] = -1.0;
    }
    let mut trip = Vec::with_capacity(pairs.len() + 2 * g.num_edges());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        trip.push((k, k, (g.degree(i) + g.degree(j) + 2) as f64));
    }
    for &(x, y) in g.edges() {
        let (p, q) = (owner[x], owner[y]);
        if p != usize::MAX && q != usize::MAX && p != q {
            let v = -sign[x] * sign[y];
            trip.push((p, q, v));
            trip.push((q, p, v));
        }
    }
    CsrMatrix::from_triplets(pairs.len(), &trip)
}

/// Level stack, finest first. Paper-style level numbers run the other way:
/// the coarsest level is 1 and the finest is `num_levels()`.
#[derive(Debug)]
pub struct Hierarchy {
    pub levels: Vec<HierarchyLevel>,
    pub variant: Variant,
    pub sigma_mode: SigmaMode,
    /// Constant fed to the theta recursion (ordinary variant).
    pub c_schedule: f64,
    /// `theta_1..theta_J`, coarsest first.
    pub schedule: Vec<f64>,
    pub coarsest: GroundedSolver,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub n: usize,
    pub edges: usize,
    pub pairs: usize,
    pub singletons: usize,
    pub sigma: Option<f64>,
    pub theta: f64,
    pub c_g: Option<f64>,
    pub max_multiplicity: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchySummary {
    pub variant: Variant,
    pub sigma_mode: SigmaMode,
    pub num_levels: usize,
    pub c_schedule: f64,
    pub zeta: f64,
    pub levels: Vec<LevelSummary>,
}

impl Hierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &HierarchyLevel {
        &self.levels[0]
    }

    /// `zeta_J = 1 / theta_J` of the finest level.
    pub fn zeta(&self) -> f64 {
        1.0 / self.levels[0].theta
    }

    pub fn summary(&self) -> HierarchySummary {
        let j = self.num_levels();
        HierarchySummary {
            variant: self.variant,
            sigma_mode: self.sigma_mode,
            num_levels: j,
            c_schedule: self.c_schedule,
            zeta: self.zeta(),
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, l)| LevelSummary {
                    level: j - i,
                    n: l.n(),
                    edges: l.graph.num_edges(),
                    pairs: l.coarsening.as_ref().map_or(0, |c| c.pairs.len()),
                    singletons: l.coarsening.as_ref().map_or(0, |c| c.partition.singletons().len()),
                    sigma: l.coarsening.as_ref().map(|c| c.sigma),
                    theta: l.theta,
                    c_g: l.c_g(),
                    max_multiplicity: l.coarsening.as_ref().and_then(|c| c.multiplicity.iter().copied().max()),
                })
                .collect(),
        }
    }
}

/// `theta_1 = 1`, `theta_{k+1} = 4 theta_k / (c (theta_k + 1)^2)`.
pub fn theta_schedule(c: f64, levels: usize) -> Result<Vec<f64>> {
    if !(1.0..=4.0).contains(&c) {
        return invalid(format!("c = {c} must lie in [1, 4]"));
    }
    let mut th = Vec::with_capacity(levels);
    let mut t = 1.0;
    for _ in 0..levels {
        th.push(t);
        t = 4.0 * t / (c * (t + 1.0) * (t + 1.0));
    }
    Ok(th)
}

/// `theta_k = 1 / (2k - 1)`: the c = 4 recursion without its logarithmic term.
pub fn modified_schedule(levels: usize) -> Vec<f64> {
    (1..=levels).map(|k| 1.0 / (2 * k - 1) as f64).collect()
}

/// Coefficients `(a, b)` of `q(t; theta) = a + b t = 4/(theta+1) (1 - t/(theta+1))`.
pub fn amli_poly(theta: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta <= 1.0) {
        return invalid(format!("theta = {theta} must lie in (0, 1]"));
    }
    let s = theta + 1.0;
    Ok((4.0 / s, -4.0 / (s * s)))
}

pub fn sigma_estimate(mode: SigmaMode, multiplicity: &[usize], finest_n: usize) -> f64 {
    match mode {
        SigmaMode::TheoryGrid => 2.0,
        SigmaMode::TheoryGeneral => 4.0,
        SigmaMode::ModifiedGrid => {
            let l = (finest_n.max(2) as f64).log2();
            2.0 - 1.0 / (2.0 * l)
        }
        SigmaMode::Ratio => multiplicity.iter().copied().max().unwrap_or(1).max(1) as f64,
    }
}

fn structured_dim(lat: &Lattice, started_1d: bool) -> Option<usize> {
    let active = lat.active_dims();
    if active == 0 || (!started_1d && active <= 1) {
        return None;
    }
    let d = lat.dims.iter().position(|&s| s > 1 && s % 2 == 0)?;
    if lat.dims[d] == 2 && active == 1 {
        // would leave a single vertex
        return None;
    }
    Some(d)
}

/// Builds the level stack for a connected graph.
pub fn build_hierarchy(g: &Graph, lattice: Option<&Lattice>, opts: &HierarchyOptions) -> Result<Hierarchy> {
    if !g.is_connected() {
        return invalid("graph is not connected");
    }
    let mode = opts.resolved_sigma_mode();
    let finest_n = g.num_vertices();
    let mut levels: Vec<HierarchyLevel> = Vec::new();
    let mut cur = g.clone();
    let mut cur_lat = lattice.cloned();
    let started_1d = lattice.is_some_and(|l| l.active_dims() <= 1);
    if matches!(opts.strategy, Strategy::Structured) && lattice.is_none() {
        return invalid("structured strategy needs lattice coordinates");
    }
    let random_levels = opts.max_matchings.unwrap_or_else(|| ((finest_n.max(1) as f64).log2() / 2.0).floor() as usize);
    let mut step = 0usize;
    loop {
        let (partition, dim) = match opts.strategy {
            Strategy::Structured => {
                let lat = cur_lat.as_ref().unwrap();
                match structured_dim(lat, started_1d) {
                    Some(d) if opts.max_matchings.is_none_or(|m| step < m) => {
                        (aligned_matching(&cur, lat, d)?, Some(d))
                    }
                    _ => break,
                }
            }
            Strategy::Random { seed } => {
                if step >= random_levels || cur.num_vertices() <= 2 {
                    break;
                }
                let s = seed.wrapping_add((step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                (random_maximal_matching(&cur, s), None)
            }
        };
        let pairs = partition.matched_pairs();
        if pairs.is_empty() {
            return Err(Error::Build(format!("coarsening stalled at level {step}: no matched pair")));
        }
        if partition.num_aggregates() < 2 {
            break;
        }
        let (coarse, multiplicity) = coarse_graph_with_multiplicity(&cur, &partition)?;
        let sigma = sigma_estimate(mode, &multiplicity, finest_n);
        let qbound = match opts.strategy {
            Strategy::Structured => 2.0,
            Strategy::Random { .. } => build_pi_matching(&cur, &partition)?.norm_bounds().gershgorin_bound,
        };
        let next_lat = match (dim, cur_lat.as_ref()) {
            (Some(d), Some(l)) => Some(coarse_lattice(l, &partition, d)),
            _ => None,
        };
        let fine = std::mem::replace(&mut cur, coarse);
        let fine_lat = std::mem::replace(&mut cur_lat, next_lat);
        levels.push(HierarchyLevel {
            graph: fine,
            lattice: fine_lat,
            coarsening: Some(Coarsening { partition, pairs, multiplicity, sigma, qbound, dim }),
            theta: 1.0,
        });
        step += 1;
    }
    levels.push(HierarchyLevel { graph: cur, lattice: cur_lat, coarsening: None, theta: 1.0 });
    let nl = levels.len();
    if levels[nl - 1].n() < 2 && nl > 1 {
        return Err(Error::Build("coarsest level has a single vertex".into()));
    }

    let raw_c = levels.iter().filter_map(|l| l.c_g()).fold(1.0, f64::max);
    let c_schedule = if raw_c > 4.0 {
        if opts.variant == Variant::Ordinary {
            log::warn!("c_g = {raw_c:.3} exceeds 4; the theta recursion uses c = 4");
        }
        4.0
    } else {
        raw_c
    };
    let schedule = match opts.variant {
        Variant::Ordinary => theta_schedule(c_schedule, nl)?,
        Variant::Modified => modified_schedule(nl),
    };
    for (i, l) in levels.iter_mut().enumerate() {
        l.theta = schedule[nl - 1 - i];
    }
    let coarsest = GroundedSolver::new(&levels[nl - 1].graph)?;
    Ok(Hierarchy { levels, variant: opts.variant, sigma_mode: mode, c_schedule, schedule, coarsest })
}
