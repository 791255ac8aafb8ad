//! Unweighted undirected graphs and their Laplacian / incidence operators.

use crate::error::{invalid, Error, Result};

/// Immutable undirected graph with edges oriented `i < j`.
///
/// Adjacency is stored in CSR form together with the index of the edge that
/// realises each neighbour entry, so edge lookups are O(degree).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    xadj: Vec<usize>,
    adj: Vec<usize>,
    adj_edge: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list. Edges may come in either orientation
    /// but must not repeat or form self-loops. The stored list is sorted.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return invalid("graph needs at least one vertex");
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return invalid(format!("self-loop at vertex {a}"));
            }
            if a >= n || b >= n {
                return invalid(format!("edge ({a},{b}) out of range for n={n}"));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return invalid(format!("duplicate edge ({},{})", w[0].0, w[0].1));
        }
        Ok(Self::from_sorted(n, list))
    }

    /// Like [`Graph::new`] but silently drops duplicates (both orientations).
    pub fn from_edges_dedup(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return invalid(format!("self-loop at vertex {a}"));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        Self::new(n, list)
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j) in &edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        let mut xadj = vec![0usize; n + 1];
        for v in 0..n {
            xadj[v + 1] = xadj[v] + deg[v];
        }
        let mut fill = xadj[..n].to_vec();
        let mut adj = vec![0usize; 2 * edges.len()];
        let mut adj_edge = vec![0usize; 2 * edges.len()];
        for (k, &(i, j)) in edges.iter().enumerate() {
            adj[fill[i]] = j;
            adj_edge[fill[i]] = k;
            fill[i] += 1;
            adj[fill[j]] = i;
            adj_edge[fill[j]] = k;
            fill[j] += 1;
        }
        for v in 0..n {
            let (lo, hi) = (xadj[v], xadj[v + 1]);
            let mut pairs: Vec<(usize, usize)> =
                adj[lo..hi].iter().copied().zip(adj_edge[lo..hi].iter().copied()).collect();
            pairs.sort_unstable();
            for (t, (a, e)) in pairs.into_iter().enumerate() {
                adj[lo + t] = a;
                adj_edge[lo + t] = e;
            }
        }
        Graph { n, edges, xadj, adj, adj_edge }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }

    /// Edge indices parallel to [`Graph::neighbors`].
    pub fn neighbor_edges(&self, v: usize) -> &[usize] {
        &self.adj_edge[self.xadj[v]..self.xadj[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.xadj[v + 1] - self.xadj[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// Index of edge `{a, b}` if present.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let nb = self.neighbors(a);
        nb.binary_search(&b).ok().map(|p| self.neighbor_edges(a)[p])
    }

    /// `y = A u` where `A = D - adjacency`.
    pub fn laplacian_apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("node vector", u.len(), self.n)?;
        let mut y = vec![0.0; self.n];
        self.laplacian_apply_into(u, &mut y);
        Ok(y)
    }

    /// Unchecked variant writing into `y`; lengths must equal `n`.
    pub fn laplacian_apply_into(&self, u: &[f64], y: &mut [f64]) {
        for v in 0..self.n {
            let nb = self.neighbors(v);
            let mut s = nb.len() as f64 * u[v];
            for &w in nb {
                s -= u[w];
            }
            y[v] = s;
        }
    }

    /// `(Bu)_k = u_i - u_j` for edge `k = (i, j)`.
    pub fn incidence_apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("node vector", u.len(), self.n)?;
        Ok(self.edges.iter().map(|&(i, j)| u[i] - u[j]).collect())
    }

    pub fn incidence_transpose_apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("edge vector", w.len(), self.edges.len())?;
        let mut y = vec![0.0; self.n];
        for (&(i, j), &x) in self.edges.iter().zip(w) {
            y[i] += x;
            y[j] -= x;
        }
        Ok(y)
    }

    /// Component label per vertex, labels numbered in order of first vertex.
    pub fn connected_components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in self.neighbors(v) {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().iter().all(|&c| c == 0)
    }

    /// Dense Laplacian, row-major. Intended for small oracle checks.
    pub fn laplacian_dense(&self) -> crate::dense::DenseMatrix {
        let mut a = crate::dense::DenseMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, i)] += 1.0;
            a[(j, j)] += 1.0;
            a[(i, j)] -= 1.0;
            a[(j, i)] -= 1.0;
        }
        a
    }

    /// Induced subgraph on `verts` (local numbering follows the slice order).
    pub fn induced(&self, verts: &[usize]) -> Graph {
        let mut local = std::collections::HashMap::with_capacity(verts.len());
        for (t, &v) in verts.iter().enumerate() {
            local.insert(v, t);
        }
        let mut e = Vec::new();
        for (t, &v) in verts.iter().enumerate() {
            for &w in self.neighbors(v) {
                if let Some(&s) = local.get(&w) {
                    if t < s {
                        e.push((t, s));
                    }
                }
            }
        }
        e.sort_unstable();
        Graph::from_sorted(verts.len(), e)
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidArgument(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Subtracts the mean, projecting onto the orthogonal complement of constants.
pub fn project_out_constant(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn path_graph(n: usize) -> Graph {
    Graph::from_sorted(n, (1..n).map(|i| (i - 1, i)).collect())
}
