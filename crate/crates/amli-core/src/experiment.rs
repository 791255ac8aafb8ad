//! End-to-end runs: mesh, hierarchy, AMLI-preconditioned CG over several
//! right-hand sides, and table output.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{path_graph, project_out_constant, Graph};
use crate::hierarchy::{build_hierarchy, HierarchyOptions, SigmaMode, Strategy, Variant};
use crate::krylov::{pcg_solve, rate_from_kappa, PcgOptions};
use crate::mesh::{cube_graph, fichera_graph, lshape_graph, square_graph, unstructured_2d, Lattice};
use crate::precond::{AmliPreconditioner, SmootherConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Square,
    Lshape,
    Cube,
    Fichera,
    #[value(name = "unstructured2d")]
    Unstructured2d,
    Path,
}

impl Family {
    pub fn is_structured(self) -> bool {
        !matches!(self, Family::Unstructured2d)
    }
}

/// Builds the graph of a family, with lattice coordinates when structured.
pub fn family_graph(family: Family, n: usize, seed: u64) -> Result<(Graph, Option<Lattice>)> {
    let with = |r: Result<(Graph, Lattice)>| r.map(|(g, l)| (g, Some(l)));
    match family {
        Family::Square => with(square_graph(n)),
        Family::Lshape => with(lshape_graph(n)),
        Family::Cube => with(cube_graph(n)),
        Family::Fichera => with(fichera_graph(n)),
        Family::Unstructured2d => unstructured_2d(n, seed).map(|(g, _)| (g, None)),
        Family::Path => {
            if n < 2 {
                return invalid("path needs n >= 2");
            }
            let lat = Lattice { dims: vec![n], coords: (0..n).map(|i| vec![i]).collect() };
            Ok((path_graph(n), Some(lat)))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    pub variant: Variant,
    pub sigma_mode: Option<SigmaMode>,
    pub seed: u64,
    pub tol: f64,
    pub rhs_count: usize,
    pub max_iter: usize,
    pub smoother: Option<SmootherConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::Square,
            n: 32,
            variant: Variant::Ordinary,
            sigma_mode: None,
            seed: 0,
            tol: 1e-10,
            rhs_count: 5,
            max_iter: 500,
            smoother: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return invalid("tol must lie in (0, 1)");
        }
        if self.rhs_count == 0 {
            return invalid("rhs_count must be at least 1");
        }
        Ok(())
    }

    pub fn hierarchy_options(&self) -> HierarchyOptions {
        let strategy =
            if self.family.is_structured() { Strategy::Structured } else { Strategy::Random { seed: self.seed } };
        let mut o = HierarchyOptions::new(strategy, self.variant);
        o.sigma_mode = self.sigma_mode;
        o
    }
}

/// One table line; `r_a`, `r_e` and `iters` are worst cases over the
/// right-hand sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub n: usize,
    pub levels: usize,
    pub k: f64,
    pub r_k: f64,
    pub r_e: f64,
    pub r_a: f64,
    pub iters: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub row: TableRow,
    pub converged: bool,
    pub unknowns: usize,
    pub per_rhs: Vec<RhsResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RhsResult {
    pub iterations: usize,
    pub converged: bool,
    pub r_a: f64,
    pub r_e: Option<f64>,
    pub lanczos_extremes: Option<(f64, f64)>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Build(format!("[{name}] {e}")))
}

/// Mesh, hierarchy, preconditioner, then PCG on `rhs_count` systems
/// `A x = A x*` with seeded random `x*`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let (g, lat) = stage("mesh", family_graph(cfg.family, cfg.n, cfg.seed))?;
    let h = stage("hierarchy", build_hierarchy(&g, lat.as_ref(), &cfg.hierarchy_options()))?;
    let levels = h.num_levels();
    let zeta = h.zeta();
    let smoother = cfg.smoother.unwrap_or_else(|| SmootherConfig::for_variant(cfg.variant));
    let pre = stage("preconditioner", AmliPreconditioner::new(h, smoother))?;
    let opts = PcgOptions { tol: cfg.tol, max_iter: cfg.max_iter, ..PcgOptions::default() };
    let nv = g.num_vertices();
    let per_rhs: Vec<RhsResult> = (0..cfg.rhs_count)
        .into_par_iter()
        .map(|i| -> Result<RhsResult> {
            let mut rng = SplitMix64::seed_from_u64(cfg.seed.wrapping_mul(1000).wrapping_add(i as u64));
            let mut xt: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
            project_out_constant(&mut xt);
            let apply_a = |v: &[f64]| g.laplacian_apply(v).expect("length checked");
            let apply_b = |v: &[f64]| pre.apply(v);
            let f = apply_a(&xt);
            let rep = stage("solve", pcg_solve(&apply_a, &apply_b, &f, Some(&xt), &opts))?;
            Ok(RhsResult {
                iterations: rep.iterations,
                converged: rep.converged,
                r_a: rep.r_a.unwrap_or(0.0),
                r_e: rep.r_e,
                lanczos_extremes: rep.lanczos_extremes,
            })
        })
        .collect::<Result<_>>()?;
    let worst = |f: &dyn Fn(&RhsResult) -> f64| per_rhs.iter().map(f).fold(0.0, f64::max);
    let row = TableRow {
        n: cfg.n,
        levels,
        k: zeta,
        r_k: rate_from_kappa(zeta),
        r_e: worst(&|r| r.r_e.unwrap_or(0.0)),
        r_a: worst(&|r| r.r_a),
        iters: per_rhs.iter().map(|r| r.iterations).max().unwrap_or(0),
        seed: cfg.seed,
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        row,
        converged: per_rhs.iter().all(|r| r.converged),
        unknowns: nv,
        per_rhs,
    })
}

pub const CSV_HEADER: &str = "n,levels,k,r_k,r_e,r_a,iters,seed";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

pub fn emit_table(rows: &[TableRow], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.n, r.levels, r.k, r.r_k, r.r_e, r.r_a, r.iters, r.seed
                ));
            }
        }
        TableFormat::Markdown => {
            out.push_str("| n | k | r_k | r_e | r_a |\n|---:|---:|---:|---:|---:|\n");
            for r in rows {
                out.push_str(&format!("| {} | {:.1} | {:.2} | {:.2} | {:.2} |\n", r.n, r.k, r.r_k, r.r_e, r.r_a));
            }
        }
        TableFormat::Json => {
            out = serde_json::to_string_pretty(rows).expect("rows serialize");
            out.push('\n');
        }
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Format("missing CSV header".into()));
    }
    let bad = |l: &str| Error::Format(format!("bad CSV row: {l}"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad(l));
            }
            let u = |s: &str| s.parse::<usize>().map_err(|_| bad(l));
            let x = |s: &str| s.parse::<f64>().map_err(|_| bad(l));
            Ok(TableRow {
                n: u(f[0])?,
                levels: u(f[1])?,
                k: x(f[2])?,
                r_k: x(f[3])?,
                r_e: x(f[4])?,
                r_a: x(f[5])?,
                iters: u(f[6])?,
                seed: f[7].parse().map_err(|_| bad(l))?,
            })
        })
        .collect()
}

/// Band on a row's `r_a` (and optionally `r_e`), carried in sweep configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub family: Family,
    pub n: usize,
    pub variant: Variant,
    pub r_a: Option<[f64; 2]>,
    pub r_e: Option<[f64; 2]>,
}

impl Expectation {
    pub fn matches(&self, cfg: &ExperimentConfig) -> bool {
        self.family == cfg.family && self.n == cfg.n && self.variant == cfg.variant
    }

    pub fn check(&self, row: &TableRow) -> bool {
        let inside = |b: Option<[f64; 2]>, v: f64| b.is_none_or(|[lo, hi]| v >= lo && v <= hi);
        inside(self.r_a, row.r_a) && inside(self.r_e, row.r_e)
    }
}

/// A sweep file: shared defaults, one entry per row, optional bands.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub defaults: ExperimentConfig,
    pub rows: Vec<serde_json::Value>,
    pub expectations: Vec<Expectation>,
}

impl SweepConfig {
    /// Each row object is layered over `defaults`.
    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let base = serde_json::to_value(&self.defaults).map_err(|e| Error::Format(e.to_string()))?;
        if self.rows.is_empty() {
            return Ok(vec![self.defaults.clone()]);
        }
        self.rows
            .iter()
            .map(|r| {
                let mut v = base.clone();
                if let (Some(obj), Some(over)) = (v.as_object_mut(), r.as_object()) {
                    for (k, x) in over {
                        obj.insert(k.clone(), x.clone());
                    }
                }
                serde_json::from_value(v).map_err(|e| Error::Format(e.to_string()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize) -> TableRow {
        TableRow { n, levels: 3, k: 6.25, r_k: 0.428, r_e: 0.3, r_a: 0.25, iters: 12, seed: 4 }
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(emit_table(&[], TableFormat::Csv), format!("{CSV_HEADER}\n"));
        assert_eq!(emit_table(&[row(8)], TableFormat::Csv).lines().count(), 2);
        let rows = vec![row(8), row(16)];
        assert_eq!(parse_csv(&emit_table(&rows, TableFormat::Csv)).unwrap(), rows);
        assert!(emit_table(&rows, TableFormat::Markdown).contains("| 16 | 6.2 |"));
    }

    #[test]
    fn small_run_is_deterministic() {
        let cfg = ExperimentConfig { family: Family::Square, n: 16, ..Default::default() };
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert!(a.converged);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.row.r_a < a.row.r_k);
    }

    #[test]
    fn sweep_expansion() {
        let s: SweepConfig = serde_json::from_str(
            r#"{"defaults": {"family": "path", "n": 64}, "rows": [{"n": 128}, {"variant": "modified"}],
                "expectations": [{"family": "path", "n": 128, "variant": "ordinary", "r_a": [0.0, 0.5], "r_e": null}]}"#,
        )
        .unwrap();
        let cfgs = s.expand().unwrap();
        assert_eq!(cfgs.len(), 2);
        assert_eq!((cfgs[0].n, cfgs[0].variant), (128, Variant::Ordinary));
        assert_eq!((cfgs[1].n, cfgs[1].variant), (64, Variant::Modified));
        assert!(s.expectations[0].matches(&cfgs[0]));
        assert!(s.expectations[0].check(&row(128)));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = ExperimentConfig { tol: 2.0, ..Default::default() };
        assert!(run_experiment(&cfg).is_err());
        let cfg = ExperimentConfig { rhs_count: 0, ..Default::default() };
        assert!(run_experiment(&cfg).is_err());
    }
}
