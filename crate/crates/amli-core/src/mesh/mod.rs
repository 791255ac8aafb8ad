//! Test-graph generators: hypercubic grids, L-shape, Fichera and perturbed
//! Delaunay meshes.

mod delaunay;

pub use delaunay::delaunay_edges;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;

/// Integer lattice coordinates of every vertex of a (possibly masked) grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub dims: Vec<usize>,
    pub coords: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of dimensions with extent greater than one.
    pub fn active_dims(&self) -> usize {
        self.dims.iter().filter(|&&s| s > 1).count()
    }
}

pub type Mask<'a> = Box<dyn Fn(&[usize]) -> bool + 'a>;

/// Per-dimension sizes plus an optional retention predicate.
pub struct GridSpec<'a> {
    pub dims: Vec<usize>,
    pub mask: Option<Mask<'a>>,
}

impl<'a> GridSpec<'a> {
    pub fn new(dims: Vec<usize>) -> Self {
        GridSpec { dims, mask: None }
    }

    pub fn with_mask(dims: Vec<usize>, mask: impl Fn(&[usize]) -> bool + 'a) -> Self {
        GridSpec { dims, mask: Some(Box::new(mask)) }
    }
}

/// Lattice graph; vertices numbered with the first coordinate fastest.
pub fn grid_graph(spec: &GridSpec) -> Result<(Graph, Lattice)> {
    let dims = &spec.dims;
    if dims.is_empty() || dims.contains(&0) {
        return invalid(format!("grid dims must be nonempty and positive, got {dims:?}"));
    }
    let total: usize = dims.iter().product();
    let mut id = vec![usize::MAX; total];
    let mut coords = Vec::new();
    let mut c = vec![0usize; dims.len()];
    for (lin, slot) in id.iter_mut().enumerate() {
        let mut rem = lin;
        for (d, &s) in dims.iter().enumerate() {
            c[d] = rem % s;
            rem /= s;
        }
        if spec.mask.as_ref().is_none_or(|m| m(&c)) {
            *slot = coords.len();
            coords.push(c.clone());
        }
    }
    if coords.is_empty() {
        return Err(Error::Generation("mask removes every vertex".into()));
    }
    let mut edges = Vec::new();
    let mut stride = 1;
    for &s in dims.iter() {
        for lin in 0..total {
            let x = (lin / stride) % s;
            if x + 1 < s && id[lin] != usize::MAX && id[lin + stride] != usize::MAX {
                edges.push((id[lin], id[lin + stride]));
            }
        }
        stride *= s;
    }
    let g = Graph::new(coords.len(), edges)?;
    if !g.is_connected() {
        return Err(Error::Generation("masked grid is disconnected".into()));
    }
    Ok((g, Lattice { dims: dims.clone(), coords }))
}

pub fn square_graph(n: usize) -> Result<(Graph, Lattice)> {
    grid_graph(&GridSpec::new(vec![n, n]))
}

pub fn cube_graph(n: usize) -> Result<(Graph, Lattice)> {
    grid_graph(&GridSpec::new(vec![n, n, n]))
}

/// Square of side `n` with the upper quadrant (all coordinates `>= n/2`) removed.
pub fn lshape_graph(n: usize) -> Result<(Graph, Lattice)> {
    corner_removed(n, 2)
}

/// Cube of side `n` with the upper octant removed.
pub fn fichera_graph(n: usize) -> Result<(Graph, Lattice)> {
    corner_removed(n, 3)
}

fn corner_removed(n: usize, m: usize) -> Result<(Graph, Lattice)> {
    if n == 0 || n % 2 == 1 {
        return invalid(format!("n must be even and positive, got {n}"));
    }
    let h = n / 2;
    grid_graph(&GridSpec::with_mask(vec![n; m], move |c: &[usize]| !c.iter().all(|&x| x >= h)))
}

/// `n x n` lattice points on the unit square, each moved by a random vector
/// of length `h/2`, then Delaunay-triangulated.
pub fn unstructured_2d(n: usize, seed: u64) -> Result<(Graph, Vec<[f64; 2]>)> {
    if n < 2 {
        return invalid("unstructured_2d needs n >= 2");
    }
    let h = 1.0 / (n - 1) as f64;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let r = 0.5 * h;
            pts.push([i as f64 * h + r * phi.cos(), j as f64 * h + r * phi.sin()]);
        }
    }
    let edges = delaunay_edges(&pts)?;
    let g = Graph::new(pts.len(), edges)?;
    if !g.is_connected() {
        return Err(Error::Generation("triangulation is disconnected".into()));
    }
    Ok((g, pts))
}
