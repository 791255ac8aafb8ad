//! Pairwise aggregation: aligned and random maximal matchings, quotient graphs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::Graph;
use crate::mesh::Lattice;

/// Disjoint vertex aggregates covering `0..n`, ordered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    aggregates: Vec<Vec<usize>>,
    #[serde(skip)]
    vertex_to_aggregate: Vec<usize>,
}

impl Partition {
    /// Validates coverage and disjointness; members are sorted and aggregates
    /// reordered by their smallest vertex.
    pub fn from_aggregates(n: usize, aggregates: Vec<Vec<usize>>) -> Result<Self> {
        let mut aggs: Vec<Vec<usize>> = aggregates
            .into_iter()
            .map(|mut a| {
                a.sort_unstable();
                a
            })
            .collect();
        if aggs.iter().any(|a| a.is_empty()) {
            return invalid("empty aggregate");
        }
        aggs.sort_unstable_by_key(|a| a[0]);
        let mut owner = vec![usize::MAX; n];
        for (k, a) in aggs.iter().enumerate() {
            for &v in a {
                if v >= n {
                    return invalid(format!("vertex {v} out of range"));
                }
                if owner[v] != usize::MAX {
                    return invalid(format!("vertex {v} appears in two aggregates"));
                }
                owner[v] = k;
            }
        }
        if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
            return invalid(format!("vertex {v} is not covered"));
        }
        Ok(Partition { aggregates: aggs, vertex_to_aggregate: owner })
    }

    /// Pairs become aggregates; every other vertex is a singleton.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut used = vec![false; n];
        let mut aggs = Vec::with_capacity(n - pairs.len());
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return invalid("pair out of range");
            }
            if used[a] || used[b] || a == b {
                return invalid(format!("pair ({a},{b}) overlaps another pair"));
            }
            used[a] = true;
            used[b] = true;
            aggs.push(vec![a, b]);
        }
        aggs.extend((0..n).filter(|&v| !used[v]).map(|v| vec![v]));
        Self::from_aggregates(n, aggs)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_to_aggregate.len()
    }

    pub fn num_aggregates(&self) -> usize {
        self.aggregates.len()
    }

    pub fn aggregates(&self) -> &[Vec<usize>] {
        &self.aggregates
    }

    pub fn aggregate_of(&self, v: usize) -> usize {
        self.vertex_to_aggregate[v]
    }

    pub fn vertex_to_aggregate(&self) -> &[usize] {
        &self.vertex_to_aggregate
    }

    /// Size-two aggregates as `(i, j)`, `i < j`, in aggregate order.
    pub fn matched_pairs(&self) -> Vec<(usize, usize)> {
        self.aggregates.iter().filter(|a| a.len() == 2).map(|a| (a[0], a[1])).collect()
    }

    pub fn singletons(&self) -> Vec<usize> {
        self.aggregates.iter().filter(|a| a.len() == 1).map(|a| a[0]).collect()
    }

    /// True when every aggregate has one or two vertices.
    pub fn is_pairwise(&self) -> bool {
        self.aggregates.iter().all(|a| a.len() <= 2)
    }

    /// Checks the partition against `g`: sizes agree and every aggregate is
    /// connected in `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.num_vertices() != g.num_vertices() {
            return invalid("partition and graph sizes differ");
        }
        for a in &self.aggregates {
            if a.len() > 1 && !g.induced(a).is_connected() {
                return invalid(format!("aggregate starting at {} is not connected", a[0]));
            }
        }
        Ok(())
    }

    /// Restores the inverse map after deserialization.
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Partition = serde_json::from_str(s).map_err(|e| crate::error::Error::Format(e.to_string()))?;
        let n = p.aggregates.iter().map(|a| a.len()).sum();
        Self::from_aggregates(n, p.aggregates)
    }
}

/// Pairs `(v, v + e_dim)` for every retained `v` whose coordinate along `dim`
/// is even (0-based). Unpaired vertices of masked grids become singletons.
pub fn aligned_matching(g: &Graph, lattice: &Lattice, dim: usize) -> Result<Partition> {
    if dim >= lattice.ndim() {
        return invalid(format!("dimension {dim} out of range"));
    }
    if !lattice.dims[dim].is_multiple_of(2) {
        return invalid(format!("extent {} along dimension {dim} is odd", lattice.dims[dim]));
    }
    if lattice.coords.len() != g.num_vertices() {
        return invalid("lattice does not match graph");
    }
    let mut index = std::collections::HashMap::with_capacity(lattice.coords.len());
    for (v, c) in lattice.coords.iter().enumerate() {
        index.insert(c.as_slice(), v);
    }
    let mut pairs = Vec::new();
    for (v, c) in lattice.coords.iter().enumerate() {
        if c[dim] % 2 == 0 {
            let mut up = c.clone();
            up[dim] += 1;
            if let Some(&w) = index.get(up.as_slice()) {
                pairs.push((v, w));
            }
        }
    }
    Partition::from_pairs(g.num_vertices(), &pairs)
}

/// Lattice of the quotient graph after [`aligned_matching`] along `dim`.
pub fn coarse_lattice(lattice: &Lattice, p: &Partition, dim: usize) -> Lattice {
    let mut dims = lattice.dims.clone();
    dims[dim] /= 2;
    let coords = p
        .aggregates()
        .iter()
        .map(|a| {
            let mut c = lattice.coords[a[0]].clone();
            c[dim] /= 2;
            c
        })
        .collect();
    Lattice { dims, coords }
}

/// Greedy maximal matching over a seed-shuffled edge order.
pub fn random_maximal_matching(g: &Graph, seed: u64) -> Partition {
    let mut order: Vec<usize> = (0..g.num_edges()).collect();
    let mut rng = SplitMix64::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut used = vec![false; g.num_vertices()];
    let mut pairs = Vec::new();
    for k in order {
        let (i, j) = g.edges()[k];
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
    }
    Partition::from_pairs(g.num_vertices(), &pairs).expect("greedy matching is disjoint")
}

/// Quotient graph (one unweighted edge per pair of adjacent aggregates) and
/// the number of fine edges behind each coarse edge.
pub fn coarse_graph_with_multiplicity(g: &Graph, p: &Partition) -> Result<(Graph, Vec<usize>)> {
    if p.num_vertices() != g.num_vertices() {
        return invalid("partition and graph sizes differ");
    }
    let mut cross: Vec<(usize, usize)> = g
        .edges()
        .iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (p.aggregate_of(i), p.aggregate_of(j));
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect();
    cross.sort_unstable();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for e in cross {
        if edges.last() == Some(&e) {
            *mult.last_mut().unwrap() += 1;
        } else {
            edges.push(e);
            mult.push(1);
        }
    }
    Ok((Graph::new(p.num_aggregates(), edges)?, mult))
}

pub fn coarse_graph(g: &Graph, p: &Partition) -> Result<Graph> {
    Ok(coarse_graph_with_multiplicity(g, p)?.0)
}

pub fn edge_multiplicity(g: &Graph, p: &Partition) -> Result<Vec<usize>> {
    Ok(coarse_graph_with_multiplicity(g, p)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::path_graph;
    use crate::mesh::{grid_graph, GridSpec};

    fn cycle4() -> Graph {
        Graph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap()
    }

    #[test]
    fn aligned_examples() {
        let (g, lat) = grid_graph(&GridSpec::new(vec![4])).unwrap();
        let p = aligned_matching(&g, &lat, 0).unwrap();
        assert_eq!(p.matched_pairs(), vec![(0, 1), (2, 3)]);
        let (g, lat) = grid_graph(&GridSpec::new(vec![4, 4])).unwrap();
        for dim in 0..2 {
            let p = aligned_matching(&g, &lat, dim).unwrap();
            assert_eq!(p.matched_pairs().len(), 8);
            assert!(p.singletons().is_empty());
            for (i, j) in p.matched_pairs() {
                let (a, b) = (&lat.coords[i], &lat.coords[j]);
                assert_eq!(b[dim], a[dim] + 1);
                assert_eq!(a[1 - dim], b[1 - dim]);
            }
        }
        let (g, lat) = grid_graph(&GridSpec::new(vec![3, 2])).unwrap();
        assert!(aligned_matching(&g, &lat, 0).is_err());
    }

    #[test]
    fn random_examples() {
        let k3 = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        for seed in 0..10 {
            let p = random_maximal_matching(&k3, seed);
            assert_eq!((p.matched_pairs().len(), p.singletons().len()), (1, 1));
            let p5 = random_maximal_matching(&path_graph(5), seed);
            assert_eq!((p5.matched_pairs().len(), p5.singletons().len()), (2, 1));
        }
        let g = path_graph(30);
        assert_eq!(random_maximal_matching(&g, 4), random_maximal_matching(&g, 4));
    }

    #[test]
    fn quotient_examples() {
        let p = Partition::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let (c, m) = coarse_graph_with_multiplicity(&path_graph(4), &p).unwrap();
        assert_eq!((c.num_vertices(), c.edges(), m), (2, &[(0, 1)][..], vec![1]));
        let p = Partition::from_pairs(4, &[(0, 1), (2, 3)]).unwrap();
        let (c, m) = coarse_graph_with_multiplicity(&cycle4(), &p).unwrap();
        assert_eq!((c.num_edges(), m), (1, vec![2]));
        let (g, lat) = grid_graph(&GridSpec::new(vec![4, 4])).unwrap();
        let p = aligned_matching(&g, &lat, 0).unwrap();
        let c = coarse_graph(&g, &p).unwrap();
        assert_eq!((c.num_vertices(), c.num_edges()), (8, 10));
        let cl = coarse_lattice(&lat, &p, 0);
        let (gg, _) = grid_graph(&GridSpec::new(cl.dims.clone())).unwrap();
        assert_eq!(gg, c);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::from_aggregates(3, vec![vec![0, 1]]).is_err());
        assert!(Partition::from_aggregates(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(Partition::from_aggregates(2, vec![vec![0, 1], vec![]]).is_err());
        let p = Partition::from_aggregates(4, vec![vec![0, 3], vec![1], vec![2]]).unwrap();
        assert!(p.validate(&path_graph(4)).is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(Partition::from_json(&json).unwrap(), p);
    }
}
