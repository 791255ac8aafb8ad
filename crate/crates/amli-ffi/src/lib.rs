//! C ABI over `amli-core`.
//!
//! Every function returns an [`AmliStatus`]; on failure the message is
//! available from [`amli_last_error_message`] on the calling thread. Handles
//! are opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use amli_core::graph::project_out_constant;
use amli_core::hierarchy::{build_hierarchy, HierarchyOptions, Strategy, Variant};
use amli_core::krylov::{pcg_solve, PcgOptions};
use amli_core::mesh::{grid_graph, GridSpec, Lattice};
use amli_core::precond::AmliPreconditioner;
use amli_core::{io, Error, Graph};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmliStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Generation = 5,
    Build = 6,
    Numerical = 7,
    TooLarge = 8,
    Indefinite = 9,
    NotConverged = 10,
    Panic = 11,
}

/// Recursion variant for [`amli_solver_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmliVariant {
    Ordinary = 0,
    Modified = 1,
}

/// A graph, optionally carrying lattice coordinates.
pub struct AmliGraph {
    graph: Graph,
    lattice: Option<Lattice>,
}

/// A built AMLI preconditioner bound to its graph.
pub struct AmliSolver {
    graph: Graph,
    precond: AmliPreconditioner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> AmliStatus {
    match err {
        Error::InvalidArgument(_) => AmliStatus::InvalidArgument,
        Error::Format(_) => AmliStatus::Format,
        Error::Generation(_) => AmliStatus::Generation,
        Error::Build(_) => AmliStatus::Build,
        Error::Numerical(_) => AmliStatus::Numerical,
        Error::TooLarge(_) => AmliStatus::TooLarge,
        Error::Indefinite(_) => AmliStatus::Indefinite,
        Error::Io(_) => AmliStatus::Io,
    }
}

enum Fail {
    Core(Error),
    Status(AmliStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(AmliStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AmliStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AmliStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            AmliStatus::Panic
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn path_in(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Status(AmliStatus::InvalidArgument, "path is not UTF-8".into()))
}

fn check_len(got: usize, want: usize) -> Result<(), Fail> {
    if got != want {
        return Err(Fail::Status(
            AmliStatus::InvalidArgument,
            format!("vector length {got} does not match {want} vertices"),
        ));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn amli_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a graph from `m` edges given as parallel endpoint arrays.
///
/// # Safety
/// `src` and `dst` must point to `m` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_new(
    n: usize,
    src: *const usize,
    dst: *const usize,
    m: usize,
    out: *mut *mut AmliGraph,
) -> AmliStatus {
    guard(|| {
        let s = slice_in(src, m, "src")?;
        let d = slice_in(dst, m, "dst")?;
        let graph = Graph::new(n, s.iter().copied().zip(d.iter().copied()))?;
        put(out, AmliGraph { graph, lattice: None })
    })
}

/// Builds a tensor grid with `ndim` extents and attaches its coordinates.
///
/// # Safety
/// `dims` must point to `ndim` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_grid(dims: *const usize, ndim: usize, out: *mut *mut AmliGraph) -> AmliStatus {
    guard(|| {
        let d = slice_in(dims, ndim, "dims")?;
        let (graph, lattice) = grid_graph(&GridSpec::new(d.to_vec()))?;
        put(out, AmliGraph { graph, lattice: Some(lattice) })
    })
}

/// Reads a Matrix Market file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_load(path: *const c_char, out: *mut *mut AmliGraph) -> AmliStatus {
    guard(|| {
        let p = path_in(path)?;
        let graph = io::load_graph(p)?;
        put(out, AmliGraph { graph, lattice: None })
    })
}

/// Writes a Matrix Market file.
///
/// # Safety
/// `g` must come from this library; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_save(g: *const AmliGraph, path: *const c_char) -> AmliStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let p = path_in(path)?;
        io::save_graph(&g.graph, p)?;
        Ok(())
    })
}

/// Number of vertices, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_num_vertices(g: *const AmliGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.num_vertices())
}

/// Number of edges, or 0 for NULL.
///
/// # Safety
/// `g` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_num_edges(g: *const AmliGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.num_edges())
}

/// `y = A x` for the graph Laplacian.
///
/// # Safety
/// `x` and `y` must hold `n` values each.
#[no_mangle]
pub unsafe extern "C" fn amli_laplacian_apply(g: *const AmliGraph, x: *const f64, y: *mut f64, n: usize) -> AmliStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        check_len(n, g.graph.num_vertices())?;
        let x = slice_in(x, n, "x")?;
        let y = slice_out(y, n, "y")?;
        g.graph.laplacian_apply_into(x, y);
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn amli_graph_free(g: *mut AmliGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Builds the preconditioner. Graphs with coordinates use aligned matchings;
/// others use random maximal matchings drawn from `seed`.
///
/// # Safety
/// `g` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amli_solver_new(
    g: *const AmliGraph,
    variant: AmliVariant,
    seed: u64,
    out: *mut *mut AmliSolver,
) -> AmliStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("graph"))?;
        let opts = HierarchyOptions {
            strategy: if g.lattice.is_some() { Strategy::Structured } else { Strategy::Random { seed } },
            variant: match variant {
                AmliVariant::Ordinary => Variant::Ordinary,
                AmliVariant::Modified => Variant::Modified,
            },
            sigma_mode: None,
            max_matchings: None,
        };
        let h = build_hierarchy(&g.graph, g.lattice.as_ref(), &opts)?;
        let precond = AmliPreconditioner::with_default_smoother(h)?;
        put(out, AmliSolver { graph: g.graph.clone(), precond })
    })
}

/// Number of levels including the coarsest, or 0 for NULL.
///
/// # Safety
/// `s` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn amli_solver_num_levels(s: *const AmliSolver) -> usize {
    s.as_ref().map_or(0, |s| s.precond.hierarchy().num_levels())
}

/// `z = B^{-1} r`, with `r` projected onto mean-zero vectors first.
///
/// # Safety
/// `r` and `z` must hold `n` values each.
#[no_mangle]
pub unsafe extern "C" fn amli_solver_apply(s: *const AmliSolver, r: *const f64, z: *mut f64, n: usize) -> AmliStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solver"))?;
        check_len(n, s.graph.num_vertices())?;
        let r = slice_in(r, n, "r")?;
        let z = slice_out(z, n, "z")?;
        z.copy_from_slice(&s.precond.apply(r)?);
        Ok(())
    })
}

/// Solves `A x = f` by preconditioned CG from zero, to relative
/// preconditioned residual `tol`. The mean of `f` is discarded and `x` has
/// zero mean. Returns `NotConverged` when `max_iter` is reached; `x` then
/// holds the last iterate.
///
/// # Safety
/// `f` and `x` must hold `n` values; `iterations` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn amli_solver_solve(
    s: *const AmliSolver,
    f: *const f64,
    x: *mut f64,
    n: usize,
    tol: f64,
    max_iter: usize,
    iterations: *mut usize,
) -> AmliStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("solver"))?;
        check_len(n, s.graph.num_vertices())?;
        let mut rhs = slice_in(f, n, "f")?.to_vec();
        let x = slice_out(x, n, "x")?;
        project_out_constant(&mut rhs);
        let opts = PcgOptions { tol, max_iter, ..PcgOptions::default() };
        let apply_a = |v: &[f64]| s.graph.laplacian_apply(v).expect("length checked");
        let apply_b = |v: &[f64]| s.precond.apply(v);
        let rep = pcg_solve(&apply_a, &apply_b, &rhs, None, &opts)?;
        x.copy_from_slice(&rep.solution);
        if let Some(it) = iterations.as_mut() {
            *it = rep.iterations;
        }
        if !rep.converged {
            return Err(Fail::Status(
                AmliStatus::NotConverged,
                format!("no convergence in {} iterations", rep.iterations),
            ));
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn amli_solver_free(s: *mut AmliSolver) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
