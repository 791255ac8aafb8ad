use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use amli_core::experiment::{
    emit_table, family_graph, run_experiment, ExperimentConfig, Family, SweepConfig, TableFormat,
};
use amli_core::graph::Graph;
use amli_core::hierarchy::{build_hierarchy, SigmaMode, Variant};
use amli_core::matching::{aligned_matching, random_maximal_matching, Partition};
use amli_core::mesh::Lattice;
use amli_core::stability::{build_pi_general, check_commutation, q_energy_norm_capped};
use amli_core::{io, Error, Result};

#[derive(Parser)]
#[command(name = "amli", version, about = "Matching-based AMLI solver for graph Laplacians")]
struct Cli {
    /// JSON config; explicit flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone, Default)]
struct Source {
    /// Matrix Market graph file (instead of a generated family).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// JSON lattice coordinates for --graph.
    #[arg(long)]
    coords: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct SolveFlags {
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long, value_enum)]
    sigma_mode: Option<SigmaMode>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    rhs_count: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchStrategy {
    Aligned,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test graph as Matrix Market, with a JSON coordinate sidecar.
    Mesh {
        #[command(flatten)]
        src: Source,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        coords_out: Option<PathBuf>,
    },
    /// Compute a matching and print its aggregates as JSON.
    Match {
        #[command(flatten)]
        src: Source,
        #[arg(long, value_enum, default_value = "random")]
        strategy: MatchStrategy,
        #[arg(long, default_value_t = 0)]
        dim: usize,
    },
    /// Norm bounds of Pi, |Q|_A^2 and the commutation residual for one matching.
    Analyze {
        #[command(flatten)]
        src: Source,
        #[arg(long, value_enum, default_value = "random")]
        strategy: MatchStrategy,
        #[arg(long, default_value_t = 0)]
        dim: usize,
        #[arg(long, default_value_t = 2000)]
        dense_cap: usize,
    },
    /// Build a hierarchy and print its per-level summary.
    Build {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Run one experiment row.
    Solve {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        flags: SolveFlags,
        #[arg(long, value_enum, default_value = "json")]
        format: TableFormat,
    },
    /// Run every row of a sweep config and print a table.
    Sweep {
        #[command(flatten)]
        flags: SolveFlags,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn base_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => load_json(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn merge(mut cfg: ExperimentConfig, src: &Source, flags: &SolveFlags) -> ExperimentConfig {
    if let Some(f) = src.family {
        cfg.family = f;
    }
    if let Some(n) = src.n {
        cfg.n = n;
    }
    if let Some(s) = src.seed {
        cfg.seed = s;
    }
    if let Some(v) = flags.variant {
        cfg.variant = v;
    }
    if flags.sigma_mode.is_some() {
        cfg.sigma_mode = flags.sigma_mode;
    }
    if let Some(t) = flags.tol {
        cfg.tol = t;
    }
    if let Some(r) = flags.rhs_count {
        cfg.rhs_count = r;
    }
    cfg
}

fn load_source(src: &Source, cfg: &ExperimentConfig) -> Result<(Graph, Option<Lattice>)> {
    match &src.graph {
        Some(p) => {
            let g = io::load_graph(p)?;
            let lat = src.coords.as_ref().map(load_json::<Lattice>).transpose()?;
            Ok((g, lat))
        }
        None => family_graph(cfg.family, cfg.n, cfg.seed),
    }
}

fn make_partition(
    g: &Graph,
    lat: Option<&Lattice>,
    strategy: MatchStrategy,
    dim: usize,
    seed: u64,
) -> Result<Partition> {
    match strategy {
        MatchStrategy::Random => Ok(random_maximal_matching(g, seed)),
        MatchStrategy::Aligned => {
            let lat = lat.ok_or_else(|| Error::InvalidArgument("aligned matching needs lattice coordinates".into()))?;
            aligned_matching(g, lat, dim)
        }
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.cmd {
        Command::Mesh { src, out, coords_out } => {
            let cfg = merge(base_config(&cli.config)?, src, &SolveFlags::default());
            let (g, lat) = family_graph(cfg.family, cfg.n, cfg.seed)?;
            match out {
                Some(p) => io::save_graph(&g, p)?,
                None => io::write_graph(&g, &mut std::io::stdout().lock())?,
            }
            if let (Some(p), Some(l)) = (coords_out, lat) {
                fs::write(p, serde_json::to_string(&l).expect("serializable"))?;
            }
            Ok(true)
        }
        Command::Match { src, strategy, dim } => {
            let cfg = merge(base_config(&cli.config)?, src, &SolveFlags::default());
            let (g, lat) = load_source(src, &cfg)?;
            let p = make_partition(&g, lat.as_ref(), *strategy, *dim, cfg.seed)?;
            print_json(&json!({
                "aggregates": p.aggregates(),
                "pairs": p.matched_pairs().len(),
                "singletons": p.singletons().len(),
            }));
            Ok(true)
        }
        Command::Analyze { src, strategy, dim, dense_cap } => {
            let cfg = merge(base_config(&cli.config)?, src, &SolveFlags::default());
            let (g, lat) = load_source(src, &cfg)?;
            let p = make_partition(&g, lat.as_ref(), *strategy, *dim, cfg.seed)?;
            let pi = build_pi_general(&g, &p)?;
            let nb = pi.norm_bounds();
            let q = q_energy_norm_capped(&g, &p, *dense_cap).ok();
            let res = check_commutation(&g, &p, &pi, 20, cfg.seed)?;
            print_json(&json!({
                "inf_norm": nb.inf_norm,
                "one_norm": nb.one_norm,
                "product_bound": nb.product_bound,
                "gershgorin_bound": nb.gershgorin_bound,
                "q_energy_sq": q,
                "commutation_residual": res,
            }));
            Ok(true)
        }
        Command::Build { src, flags } => {
            let cfg = merge(base_config(&cli.config)?, src, flags);
            let (g, lat) = load_source(src, &cfg)?;
            let h = build_hierarchy(&g, lat.as_ref(), &cfg.hierarchy_options())?;
            print_json(&h.summary());
            Ok(true)
        }
        Command::Solve { src, flags, format } => {
            let cfg = merge(base_config(&cli.config)?, src, flags);
            let rep = run_experiment(&cfg)?;
            match format {
                TableFormat::Json => print_json(&rep),
                f => print!("{}", emit_table(std::slice::from_ref(&rep.row), *f)),
            }
            Ok(rep.converged)
        }
        Command::Sweep { flags, format, out } => {
            let sweep: SweepConfig = match &cli.config {
                Some(p) => load_json(p)?,
                None => SweepConfig::default(),
            };
            let cfgs: Vec<ExperimentConfig> =
                sweep.expand()?.into_iter().map(|c| merge(c, &Source::default(), flags)).collect();
            let reports: Vec<_> = cfgs.par_iter().map(run_experiment).collect::<Result<_>>()?;
            let mut rows = Vec::with_capacity(reports.len());
            let mut all_converged = true;
            for (c, rep) in cfgs.iter().zip(reports) {
                all_converged &= rep.converged;
                for e in sweep.expectations.iter().filter(|e| e.matches(c)) {
                    let verdict = if e.check(&rep.row) { "PASS" } else { "FAIL" };
                    eprintln!(
                        "{verdict} {:?} n={} {:?}: r_a={:.3} r_e={:.3}",
                        c.family, c.n, c.variant, rep.row.r_a, rep.row.r_e
                    );
                }
                rows.push(rep.row);
            }
            let table = emit_table(&rows, *format);
            match out {
                Some(p) => fs::write(p, table)?,
                None => std::io::stdout().lock().write_all(table.as_bytes())?,
            }
            Ok(all_converged)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: not every solve converged within the iteration cap");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
