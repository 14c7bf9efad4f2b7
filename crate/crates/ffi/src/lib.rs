//! C ABI for `lod-stokes`.
//!
//! Objects are opaque handles created by `*_new`/`lod_solve` and released by
//! the matching `*_free`. Every fallible call returns a [`LodStatus`]; the
//! message of the last failure on the calling thread is available through
//! [`lod_last_error_message`]. Panics are caught at the boundary and
//! reported as `LOD_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lod_stokes::coefficient::{gen_coefficient, CoefficientSpec};
use lod_stokes::experiment::{run_convergence_study, saturating_ell, write_csv, ExperimentConfig, Source};
use lod_stokes::fem::{
    error_norms, solve_reference, stiffness_matrix, velocity_mass_matrix, CoefficientField, FineSpace,
};
use lod_stokes::lod::LodContext;
use lod_stokes::mesh::MeshHierarchy;
use lod_stokes::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    MeshStructure = 3,
    Solver = 4,
    Construction = 5,
    Io = 6,
    Parse = 7,
    CellFailed = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Source term callback: writes `f(x, y)` to `out[0..2]`. May be called
/// concurrently from several threads.
pub type LodSourceFn = Option<unsafe extern "C" fn(x: f64, y: f64, out: *mut f64, user_data: *mut c_void)>;

/// Problem setup: mesh hierarchy, fine space and viscosity field.
pub struct LodProblem {
    space: FineSpace,
    coeff: CoefficientField,
}

/// Multiscale solution in fine degrees of freedom.
pub struct LodSolution {
    velocity: Vec<f64>,
    coarse_pressure: Vec<f64>,
    oscillatory_pressure: Vec<f64>,
    ell: usize,
    num_basis: usize,
    errors: Option<LodErrors>,
}

/// Errors against the fine reference solution.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LodErrors {
    pub err_u_h1: f64,
    pub err_u_l2: f64,
    pub err_p_pp_l2: f64,
    pub err_pihp_l2: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> LodStatus {
    match e {
        Error::Structure(_) => LodStatus::MeshStructure,
        Error::Validation(_) => LodStatus::InvalidInput,
        Error::Solver { .. } => LodStatus::Solver,
        Error::Construction(_) => LodStatus::Construction,
        Error::Io(_) => LodStatus::Io,
        Error::Parse(_) => LodStatus::Parse,
        Error::Cell(_) => LodStatus::CellFailed,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LodStatus, String)>) -> LodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LodStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(msg);
            LodStatus::Panic
        }
    }
}

fn lift(e: Error) -> (LodStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LodStatus, String) {
    (LodStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LodStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LodStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lod_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a problem on the unit square with coarse size `2^-coarse_level`
/// and fine level `fine_level` (barycentric refinement applied). The
/// viscosity starts as the constant 1.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn lod_problem_new(coarse_level: u32, fine_level: u32, out: *mut *mut LodProblem) -> LodStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let h = MeshHierarchy::new(coarse_level as usize, fine_level as usize, true).map_err(lift)?;
        let space = FineSpace::new(h);
        let coeff = CoefficientField::constant(space.num_fine_triangles(), 1.0, 0.0);
        *out = Box::into_raw(Box::new(LodProblem { space, coeff }));
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from [`lod_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lod_problem_free(problem: *mut LodProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Sets a constant viscosity `nu > 0`.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_problem_set_constant_viscosity(problem: *mut LodProblem, nu: f64) -> LodStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        let coeff = CoefficientField::constant(p.space.num_fine_triangles(), nu, 0.0);
        coeff.validate(p.space.num_fine_triangles()).map_err(lift)?;
        p.coeff = coeff;
        Ok(())
    })
}

/// Sets the random viscosity: uniform in `[nu_min, nu_max]` on the mesh of
/// size `2^-eps_level`, `inclusion_value` near the default parabola.
///
/// # Safety
/// `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lod_problem_set_random_viscosity(
    problem: *mut LodProblem,
    eps_level: u32,
    seed: u64,
    nu_min: f64,
    nu_max: f64,
    inclusion_value: f64,
) -> LodStatus {
    guard(|| {
        let p = problem.as_mut().ok_or_else(|| null("problem"))?;
        let spec = CoefficientSpec {
            eps_level: eps_level as usize,
            seed,
            nu_min,
            nu_max,
            inclusion_value,
            ..Default::default()
        };
        p.coeff = gen_coefficient(&spec, p.space.hierarchy()).map_err(lift)?;
        Ok(())
    })
}

/// Number of velocity and pressure degrees of freedom of the fine space.
///
/// # Safety
/// `problem` must be a live handle; the outputs must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn lod_problem_dofs(problem: *const LodProblem, velocity: *mut usize, pressure: *mut usize) -> LodStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if let Some(v) = velocity.as_mut() {
            *v = p.space.num_velocity_dofs();
        }
        if let Some(q) = pressure.as_mut() {
            *q = p.space.num_pressure_dofs();
        }
        Ok(())
    })
}

struct Callback {
    f: unsafe extern "C" fn(f64, f64, *mut f64, *mut c_void),
    user: *mut c_void,
}

// the caller promises a thread-safe callback
unsafe impl Sync for Callback {}
unsafe impl Send for Callback {}

/// Solves with method order `m` and patch order `ell` (`0` selects patches
/// covering the domain). A null `source` uses `f = (-y, x^4)`. With
/// `compute_errors != 0` the fine reference is solved as well.
///
/// # Safety
/// `problem` must be a live handle, `out` valid for one pointer, and
/// `source` (if set) callable from any thread with `user_data`.
#[no_mangle]
pub unsafe extern "C" fn lod_solve(
    problem: *const LodProblem,
    m: u32,
    ell: u32,
    source: LodSourceFn,
    user_data: *mut c_void,
    compute_errors: i32,
    out: *mut *mut LodSolution,
) -> LodStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cb = source.map(|f| Callback { f, user: user_data });
        let f = move |x: [f64; 2]| -> [f64; 2] {
            match &cb {
                Some(c) => {
                    let mut v = [0.0; 2];
                    unsafe { (c.f)(x[0], x[1], v.as_mut_ptr(), c.user) };
                    v
                }
                None => Source::Default.eval(x),
            }
        };
        let ell = match ell {
            0 => saturating_ell(p.space.hierarchy().coarse()).map_err(lift)?,
            l => l as usize,
        };
        let ctx = LodContext::new(&p.space, &p.coeff, m as usize).map_err(lift)?;
        let basis = ctx.build_basis(ell).map_err(lift)?;
        let mut sol = ctx.assemble_and_solve_coarse(&basis, &f).map_err(lift)?;
        let num_basis = basis.len();
        drop(basis);
        ctx.postprocess_pressure(&mut sol, &f).map_err(lift)?;
        let errors = if compute_errors != 0 {
            let r = solve_reference(&p.space, &p.coeff, &f).map_err(lift)?;
            let (h1, l2) = error_norms(
                &stiffness_matrix(&p.space),
                &velocity_mass_matrix(&p.space),
                &r.u,
                &sol.velocity,
            )
            .map_err(lift)?;
            Some(LodErrors {
                err_u_h1: h1,
                err_u_l2: l2,
                err_p_pp_l2: ctx.pressure_error(&sol, &r.p),
                err_pihp_l2: ctx.coarse_pressure_error(&sol, &r.p),
            })
        } else {
            None
        };
        *out = Box::into_raw(Box::new(LodSolution {
            velocity: sol.velocity,
            coarse_pressure: sol.coarse_pressure,
            oscillatory_pressure: sol.oscillatory_pressure,
            ell,
            num_basis,
            errors,
        }));
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle from [`lod_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_free(solution: *mut LodSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Patch order used and number of basis functions.
///
/// # Safety
/// `solution` must be a live handle; outputs valid or null.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_info(solution: *const LodSolution, ell: *mut u32, num_basis: *mut usize) -> LodStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if let Some(e) = ell.as_mut() {
            *e = s.ell as u32;
        }
        if let Some(n) = num_basis.as_mut() {
            *n = s.num_basis;
        }
        Ok(())
    })
}

/// Errors against the fine reference; `LOD_STATUS_INVALID_INPUT` if the
/// solve ran without `compute_errors`.
///
/// # Safety
/// `solution` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_errors(solution: *const LodSolution, out: *mut LodErrors) -> LodStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = s
            .errors
            .ok_or_else(|| (LodStatus::InvalidInput, "solved without compute_errors".to_string()))?;
        Ok(())
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize, written: *mut usize) -> Result<(), (LodStatus, String)> {
    if let Some(w) = written.as_mut() {
        *w = src.len();
    }
    if buf.is_null() {
        return if len == 0 { Ok(()) } else { Err(null("buf")) };
    }
    if len < src.len() {
        return Err((LodStatus::BufferTooSmall, format!("need {} values, got {len}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Which field [`lod_solution_copy`] returns.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LodField {
    /// Fine velocity degrees of freedom.
    Velocity = 0,
    /// One value per coarse element.
    CoarsePressure = 1,
    /// Fine discontinuous P1 pressure, three values per fine triangle.
    OscillatoryPressure = 2,
}

/// Copies a field into `buf`. `written` receives the field length; call
/// with `buf = NULL, len = 0` to query it.
///
/// # Safety
/// `solution` must be a live handle, `buf` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn lod_solution_copy(
    solution: *const LodSolution,
    field: LodField,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> LodStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let src = match field {
            LodField::Velocity => &s.velocity,
            LodField::CoarsePressure => &s.coarse_pressure,
            LodField::OscillatoryPressure => &s.oscillatory_pressure,
        };
        copy_out(src, buf, len, written)
    })
}

/// Runs a convergence study from `key = value` configuration text and
/// writes the CSV to `csv_path`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lod_run_study(config: *const c_char, csv_path: *const c_char) -> LodStatus {
    guard(|| {
        let text = str_arg(config, "config")?;
        let path = str_arg(csv_path, "csv_path")?;
        let cfg = ExperimentConfig::from_kv(text).map_err(lift)?;
        let result = run_convergence_study(&cfg).map_err(lift)?;
        let file = std::fs::File::create(path).map_err(|e| lift(e.into()))?;
        let mut out = std::io::BufWriter::new(file);
        write_csv(&result.records, &mut out).map_err(lift)?;
        out.flush().map_err(|e| lift(e.into()))?;
        match result.failures.first() {
            Some(f) => Err((LodStatus::CellFailed, format!("{} cell(s) failed; first: {}", result.failures.len(), f.message))),
            None => Ok(()),
        }
    })
}
