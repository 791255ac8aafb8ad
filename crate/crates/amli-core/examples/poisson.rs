//! Solves a Laplacian system on a square grid with the AMLI preconditioner.
//!
//! `cargo run --release --example poisson -- 256`

use amli_core::hierarchy::{build_hierarchy, HierarchyOptions, Strategy, Variant};
use amli_core::krylov::{pcg_solve, PcgOptions};
use amli_core::mesh::square_graph;
use amli_core::precond::AmliPreconditioner;

fn main() -> amli_core::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    let (g, lattice) = square_graph(n)?;
    let h = build_hierarchy(&g, Some(&lattice), &HierarchyOptions::new(Strategy::Structured, Variant::Ordinary))?;
    println!("{} unknowns, {} levels, zeta = {:.2}", g.num_vertices(), h.num_levels(), h.zeta());
    let pre = AmliPreconditioner::with_default_smoother(h)?;

    let f: Vec<f64> = (0..g.num_vertices()).map(|i| if i % 7 == 0 { 1.0 } else { -0.1 }).collect();
    let apply_a = |v: &[f64]| g.laplacian_apply(v).expect("sizes match");
    let apply_b = |v: &[f64]| pre.apply(v);
    let rep = pcg_solve(&apply_a, &apply_b, &f, None, &PcgOptions::default())?;
    println!("converged: {} after {} iterations", rep.converged, rep.iterations);
    if let Some((lo, hi)) = rep.lanczos_extremes {
        println!("spectrum of B^-1 A within [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}
