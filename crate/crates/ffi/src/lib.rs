//! C ABI over `avsfe`. Meshes are opaque handles owned by the caller and
//! released with [`avsfe_mesh_free`]. Every fallible call returns an
//! [`AvsfeStatus`]; on failure [`avsfe_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use avsfe::avs::Discretization;
use avsfe::bench::by_name;
use avsfe::cli::{run, validate_config};
use avsfe::goal::{estimate, Approach};
use avsfe::mesh::{ElementType, Mesh, Rect};
use avsfe::spaces::FluxFamily;
use avsfe::Error;

/// Opaque mesh handle.
pub struct AvsfeMesh {
    inner: Mesh,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvsfeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMesh = 3,
    Unsupported = 4,
    NotPositiveDefinite = 5,
    SolverFailure = 6,
    ConfigError = 7,
    IoError = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvsfeElementType {
    Quadrilateral = 0,
    Triangle = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvsfeFlux {
    Lagrange = 0,
    RaviartThomas = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvsfeApproach {
    Classical = 0,
    Alternative = 1,
}

/// Result of [`avsfe_estimate`]. `qoi_error` and `eff` are NaN when the
/// exact value is unknown or the error vanishes.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct AvsfeReport {
    pub elements: usize,
    pub primal_dofs: usize,
    pub dual_dofs: usize,
    pub qoi_value: f64,
    pub qoi_error: f64,
    pub estimate: f64,
    pub eff: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> AvsfeStatus {
    match e {
        Error::InvalidMesh(_) => AvsfeStatus::InvalidMesh,
        Error::InvalidArgument(_) => AvsfeStatus::InvalidArgument,
        Error::Unsupported(_) => AvsfeStatus::Unsupported,
        Error::GramNotSpd { .. } => AvsfeStatus::NotPositiveDefinite,
        Error::DofMap(_) | Error::Solver(_) => AvsfeStatus::SolverFailure,
        Error::Config { .. } => AvsfeStatus::ConfigError,
        Error::Io(_) => AvsfeStatus::IoError,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (AvsfeStatus, String)>) -> AvsfeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AvsfeStatus::Ok
        }
        Ok(Err((s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            AvsfeStatus::Panic
        }
    }
}

fn lift(e: Error) -> (AvsfeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (AvsfeStatus, String) {
    (AvsfeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (AvsfeStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (AvsfeStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn mesh_arg<'a>(p: *const AvsfeMesh) -> Result<&'a Mesh, (AvsfeStatus, String)> {
    p.as_ref().map(|m| &m.inner).ok_or_else(|| null("mesh"))
}

fn hand_out(mesh: Mesh, out: *mut *mut AvsfeMesh) {
    // SAFETY: callers check `out` for null before building the mesh.
    unsafe { *out = Box::into_raw(Box::new(AvsfeMesh { inner: mesh })) };
}

/// Message of the last failed call on this thread; empty after success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn avsfe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Structured `n × n` mesh of the unit square.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_structured(
    element_type: AvsfeElementType,
    n: usize,
    out: *mut *mut AvsfeMesh,
) -> AvsfeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let et = match element_type {
            AvsfeElementType::Quadrilateral => ElementType::Quadrilateral,
            AvsfeElementType::Triangle => ElementType::Triangle,
        };
        hand_out(Mesh::build_structured(et, n, Rect::UNIT).map_err(lift)?, out);
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_free(mesh: *mut AvsfeMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_num_cells(mesh: *const AvsfeMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_cells())
}

/// Number of vertices, or 0 for a null handle.
///
/// # Safety
/// `mesh` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_num_vertices(mesh: *const AvsfeMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_vertices())
}

/// Uniform refinement into a new handle.
///
/// # Safety
/// `mesh` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_refine_uniform(mesh: *const AvsfeMesh, out: *mut *mut AvsfeMesh) -> AvsfeStatus {
    guard(|| {
        let m = mesh_arg(mesh)?;
        if out.is_null() {
            return Err(null("out"));
        }
        hand_out(m.uniform_refine(), out);
        Ok(())
    })
}

/// Conforming bisection of the `len` cells listed in `marked` (triangles
/// only) into a new handle.
///
/// # Safety
/// `mesh` must be a live handle, `marked` must point to `len` indices and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avsfe_mesh_bisect(
    mesh: *const AvsfeMesh,
    marked: *const usize,
    len: usize,
    out: *mut *mut AvsfeMesh,
) -> AvsfeStatus {
    guard(|| {
        let m = mesh_arg(mesh)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let marked: &[usize] = if len == 0 {
            &[]
        } else if marked.is_null() {
            return Err(null("marked"));
        } else {
            std::slice::from_raw_parts(marked, len)
        };
        hand_out(m.bisect_marked(marked).map_err(lift)?, out);
        Ok(())
    })
}

/// Solves the named benchmark on `mesh` and estimates the error in a QoI.
/// `qoi` may be null for the benchmark default. When `indicators` is
/// non-null it receives one value per cell and `indicators_len` must equal
/// the cell count.
///
/// # Safety
/// String arguments must be null-terminated; `mesh` must be a live handle;
/// `report` must be writable; `indicators` must hold `indicators_len`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn avsfe_estimate(
    benchmark: *const c_char,
    qoi: *const c_char,
    mesh: *const AvsfeMesh,
    flux: AvsfeFlux,
    p_primal: usize,
    p_dual: usize,
    approach: AvsfeApproach,
    report: *mut AvsfeReport,
    indicators: *mut f64,
    indicators_len: usize,
) -> AvsfeStatus {
    guard(|| {
        let name = str_arg(benchmark, "benchmark")?;
        let m = mesh_arg(mesh)?;
        if report.is_null() {
            return Err(null("report"));
        }
        if !indicators.is_null() && indicators_len != m.num_cells() {
            return Err((
                AvsfeStatus::InvalidArgument,
                format!("indicator buffer holds {indicators_len} values, mesh has {} cells", m.num_cells()),
            ));
        }
        let bench = by_name(name).map_err(lift)?;
        let q = if qoi.is_null() { bench.default_qoi().clone() } else { bench.qoi(str_arg(qoi, "qoi")?).map_err(lift)?.clone() };
        let exact = bench.exact_qoi(&q).map_err(lift)?.value;
        let family = match flux {
            AvsfeFlux::Lagrange => FluxFamily::Lagrange,
            AvsfeFlux::RaviartThomas => FluxFamily::RaviartThomas,
        };
        let approach = match approach {
            AvsfeApproach::Classical => Approach::Classical,
            AvsfeApproach::Alternative => Approach::Alternative,
        };
        let problem = bench.problem().map_err(lift)?;
        let est = estimate(&problem, m, &q, Discretization::new(family, p_primal), p_dual, approach, Some(exact))
            .map_err(lift)?;
        let r = &est.report;
        *report = AvsfeReport {
            elements: r.elements,
            primal_dofs: r.primal_dofs,
            dual_dofs: r.dual_dofs,
            qoi_value: r.qoi_value,
            qoi_error: r.qoi_error.unwrap_or(f64::NAN),
            estimate: r.estimate,
            eff: r.eff.unwrap_or(f64::NAN),
        };
        if !indicators.is_null() {
            std::slice::from_raw_parts_mut(indicators, indicators_len).copy_from_slice(&r.indicators);
        }
        Ok(())
    })
}

/// Validates and runs a configuration given as text, writing into `out_dir`.
///
/// # Safety
/// Both arguments must be null-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn avsfe_run_config(config: *const c_char, out_dir: *const c_char) -> AvsfeStatus {
    guard(|| {
        let text = str_arg(config, "config")?;
        let dir = str_arg(out_dir, "out_dir")?;
        let cfg = validate_config(text).map_err(lift)?;
        run(&cfg, Path::new(dir)).map_err(lift)?;
        Ok(())
    })
}
