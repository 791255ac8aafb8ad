//! Incremental Bowyer-Watson triangulation.
//!
//! The enclosing triangle has its vertices "at infinity": each is `R * u_k`
//! for unit directions `u_k` and a symbolic `R -> inf`, so predicates that
//! touch them are decided by the leading coefficient in `R`.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

// Arbitrary offset so no lattice direction lines up with a far vertex.
const SUPER_ANGLE: f64 = std::f64::consts::FRAC_1_PI;

#[derive(Clone, Copy)]
struct SymPoint {
    q: [f64; 2],
    d: [f64; 2],
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Sign of `det[b - a, c - a]` as a polynomial in `R`.
fn orient(a: SymPoint, b: SymPoint, c: SymPoint) -> f64 {
    let (x0, x1) = (sub(b.q, a.q), sub(b.d, a.d));
    let (y0, y1) = (sub(c.q, a.q), sub(c.d, a.d));
    let r2 = cross(x1, y1);
    if r2 != 0.0 {
        return r2;
    }
    let r1 = cross(x0, y1) + cross(x1, y0);
    if r1 != 0.0 {
        return r1;
    }
    cross(x0, y0)
}

fn incircle_real(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> bool {
    let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
    let (bx, by) = (b[0] - p[0], b[1] - p[1]);
    let (cx, cy) = (c[0] - p[0], c[1] - p[1]);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by) - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    det > 0.0
}

struct Triangulation {
    pts: Vec<SymPoint>,
    n_real: usize,
    tris: Vec<[usize; 3]>,
    // nbr[t][i] is the triangle across the edge opposite vertex i.
    nbr: Vec<[usize; 3]>,
    alive: Vec<bool>,
}

const NONE: usize = usize::MAX;

impl Triangulation {
    fn is_super(&self, v: usize) -> bool {
        v >= self.n_real
    }

    /// Strict interior test of `p` against the circumcircle of triangle `t`;
    /// cocircular points count as outside.
    fn in_circumcircle(&self, t: usize, p: usize) -> bool {
        let tri = self.tris[t];
        let nsup = tri.iter().filter(|&&v| self.is_super(v)).count();
        let pp = self.pts[p].q;
        match nsup {
            0 => incircle_real(self.pts[tri[0]].q, self.pts[tri[1]].q, self.pts[tri[2]].q, pp),
            1 => {
                let k = tri.iter().position(|&v| self.is_super(v)).unwrap();
                let a = self.pts[tri[(k + 1) % 3]].q;
                let b = self.pts[tri[(k + 2) % 3]].q;
                let o = cross(sub(b, a), sub(pp, a));
                if o != 0.0 {
                    return o > 0.0;
                }
                let ab = sub(b, a);
                let t = dot(sub(pp, a), ab);
                t > 0.0 && t < dot(ab, ab)
            }
            2 => {
                let k = tri.iter().position(|&v| !self.is_super(v)).unwrap();
                let a = self.pts[tri[k]].q;
                let i = tri[(k + 1) % 3];
                let j = tri[(k + 2) % 3];
                let w = [self.pts[i].d[0] + self.pts[j].d[0], self.pts[i].d[1] + self.pts[j].d[1]];
                dot(sub(pp, a), w) > 0.0
            }
            _ => true,
        }
    }

    fn contains(&self, t: usize, p: usize) -> Option<usize> {
        let tri = self.tris[t];
        let pp = self.pts[p];
        (0..3).find(|&i| orient(self.pts[tri[(i + 1) % 3]], self.pts[tri[(i + 2) % 3]], pp) < 0.0)
    }

    fn locate(&self, start: usize, p: usize) -> usize {
        let mut t = start;
        let limit = 4 * self.tris.len() + 16;
        for _ in 0..limit {
            match self.contains(t, p) {
                None => return t,
                Some(i) => {
                    let nx = self.nbr[t][i];
                    if nx == NONE {
                        break;
                    }
                    t = nx;
                }
            }
        }
        (0..self.tris.len())
            .find(|&t| self.alive[t] && self.contains(t, p).is_none())
            .expect("point outside the symbolic enclosing triangle")
    }

    fn insert(&mut self, p: usize, hint: usize) -> usize {
        let start = self.locate(hint, p);
        let mut bad = HashSet::new();
        let mut stack = vec![start];
        bad.insert(start);
        while let Some(t) = stack.pop() {
            for &nx in &self.nbr[t] {
                if nx != NONE && !bad.contains(&nx) && self.in_circumcircle(nx, p) {
                    bad.insert(nx);
                    stack.push(nx);
                }
            }
        }
        // Boundary edges of the cavity, oriented as in their (CCW) bad triangle.
        let mut boundary = Vec::new();
        for &t in &bad {
            let tri = self.tris[t];
            for i in 0..3 {
                let nx = self.nbr[t][i];
                if nx == NONE || !bad.contains(&nx) {
                    boundary.push((tri[(i + 1) % 3], tri[(i + 2) % 3], nx));
                }
            }
        }
        for &t in &bad {
            self.alive[t] = false;
        }
        let mut by_start = HashMap::with_capacity(boundary.len());
        let mut by_end = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, outer) in &boundary {
            let t = self.tris.len();
            self.tris.push([a, b, p]);
            self.nbr.push([NONE, NONE, outer]);
            self.alive.push(true);
            if outer != NONE {
                let slot = (0..3)
                    .find(|&i| {
                        let o = self.tris[outer];
                        o[(i + 1) % 3] == b && o[(i + 2) % 3] == a
                    })
                    .expect("cavity neighbour lost its shared edge");
                self.nbr[outer][slot] = t;
            }
            by_start.insert(a, t);
            by_end.insert(b, t);
            created.push(t);
        }
        for &t in &created {
            let [a, b, _] = self.tris[t];
            self.nbr[t][0] = by_start[&b];
            self.nbr[t][1] = by_end[&a];
        }
        *created.last().unwrap()
    }
}

/// Delaunay edges of a planar point set, each as `(i, j)` with `i < j`.
///
/// Points are inserted in lexicographic order, which also fixes how exact
/// cocircular ties resolve.
pub fn delaunay_edges(points: &[[f64; 2]]) -> Result<Vec<(usize, usize)>> {
    let n = points.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::Generation("non-finite point coordinates".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])));
    if order.windows(2).any(|w| points[w[0]] == points[w[1]]) {
        return Err(Error::Generation("duplicate points".into()));
    }
    let mut pts: Vec<SymPoint> = points.iter().map(|&q| SymPoint { q, d: [0.0, 0.0] }).collect();
    for k in 0..3 {
        let ang = SUPER_ANGLE + k as f64 * std::f64::consts::TAU / 3.0;
        pts.push(SymPoint { q: [0.0, 0.0], d: [ang.cos(), ang.sin()] });
    }
    let mut tr =
        Triangulation { pts, n_real: n, tris: vec![[n, n + 1, n + 2]], nbr: vec![[NONE; 3]], alive: vec![true] };
    let mut hint = 0;
    for &p in &order {
        hint = tr.insert(p, hint);
    }
    let mut edges = HashSet::new();
    for (t, tri) in tr.tris.iter().enumerate() {
        if !tr.alive[t] {
            continue;
        }
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            if a < n && b < n {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    Ok(edges)
}
