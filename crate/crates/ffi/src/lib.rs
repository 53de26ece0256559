//! C ABI over `hmflow`.
//!
//! Every function returns an [`HmStatus`]; results go through out-pointers.
//! Points and tangent vectors are passed as arrays of `ambient_dim` doubles
//! (3 on the sphere, 2 on the Poincaré disk, `n` on flat space). Handles are
//! opaque and must be released with their `_free` function. After a failed
//! call, `hm_last_error_message` describes the failure on the calling
//! thread.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::slice;

use hmflow::cli::{emit_report, parse_scenario, run_scenario, ParseOptions, RunOptions, Scenario};
use hmflow::convex::{Constraint, ConvexBody};
use hmflow::level_geometry::mu;
use hmflow::manifold::{ModelManifold, Point, Tangent};
use hmflow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    NonUniqueGeodesic = 4,
    OutsideTube = 5,
    InvalidBody = 6,
    SolverFailure = 7,
    Scenario = 8,
    Io = 9,
    Unsupported = 10,
    Panic = 11,
}

pub struct HmManifold {
    inner: ModelManifold,
}

pub struct HmBodyBuilder {
    manifold: ModelManifold,
    constraints: Vec<Constraint>,
}

pub struct HmBody {
    inner: ConvexBody,
}

pub struct HmScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HmStatus {
    match e {
        Error::OutOfRange { .. } => HmStatus::OutOfRange,
        Error::NonUniqueGeodesic => HmStatus::NonUniqueGeodesic,
        Error::OutsideTube { .. } => HmStatus::OutsideTube,
        Error::InvalidBody(_) => HmStatus::InvalidBody,
        Error::SolverFailure { .. } | Error::FlowAborted { .. } => HmStatus::SolverFailure,
        Error::Scenario { .. } => HmStatus::Scenario,
        Error::Io(_) => HmStatus::Io,
        Error::Unsupported(_) => HmStatus::Unsupported,
        _ => HmStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> HmStatus
where
    F: FnOnce() -> Result<(), (HmStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            HmStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            HmStatus::Panic
        }
    }
}

fn lift(e: Error) -> (HmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HmStatus, String) {
    (HmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (HmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn array<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (HmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write_array(out: *mut f64, values: &[f64]) -> Result<(), (HmStatus, String)> {
    if out.is_null() {
        return Err(null("output array"));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (HmStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn point(m: &ModelManifold, p: *const f64) -> Result<Point, (HmStatus, String)> {
    m.point(array(p, m.ambient_dim(), "point")?).map_err(lift)
}

unsafe fn tangent(m: &ModelManifold, base: &Point, v: *const f64) -> Result<Tangent, (HmStatus, String)> {
    m.tangent(base, array(v, m.ambient_dim(), "tangent")?).map_err(lift)
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (HmStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (HmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn hm_manifold_flat(dim: usize, out: *mut *mut HmManifold) -> HmStatus {
    guard(|| {
        let inner = ModelManifold::flat(dim).map_err(lift)?;
        write(out, Box::into_raw(Box::new(HmManifold { inner })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_manifold_sphere2(out: *mut *mut HmManifold) -> HmStatus {
    guard(|| {
        write(out, Box::into_raw(Box::new(HmManifold { inner: ModelManifold::Sphere2 })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_manifold_poincare(out: *mut *mut HmManifold) -> HmStatus {
    guard(|| {
        write(
            out,
            Box::into_raw(Box::new(HmManifold {
                inner: ModelManifold::PoincareDisk,
            })),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_manifold_free(m: *mut HmManifold) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Length of the coordinate arrays for points and tangents; 0 for null.
#[no_mangle]
pub unsafe extern "C" fn hm_manifold_ambient_dim(m: *const HmManifold) -> usize {
    m.as_ref().map_or(0, |m| m.inner.ambient_dim())
}

#[no_mangle]
pub unsafe extern "C" fn hm_exp(
    m: *const HmManifold,
    p: *const f64,
    v: *const f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = &deref(m, "manifold")?.inner;
        let p = point(m, p)?;
        let v = tangent(m, &p, v)?;
        write_array(out, m.exp(&p, &v).map_err(lift)?.coords())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_log(
    m: *const HmManifold,
    p: *const f64,
    q: *const f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = &deref(m, "manifold")?.inner;
        let (p, q) = (point(m, p)?, point(m, q)?);
        write_array(out, m.log(&p, &q).map_err(lift)?.components())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_dist(
    m: *const HmManifold,
    p: *const f64,
    q: *const f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = &deref(m, "manifold")?.inner;
        let (p, q) = (point(m, p)?, point(m, q)?);
        write(out, m.dist(&p, &q))
    })
}

/// `μ(w, t)` for the unit tangent `w` at `y`.
#[no_mangle]
pub unsafe extern "C" fn hm_mu(
    m: *const HmManifold,
    y: *const f64,
    w: *const f64,
    t: f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = &deref(m, "manifold")?.inner;
        let y = point(m, y)?;
        let w = tangent(m, &y, w)?;
        write(out, mu(m, &w, t).map_err(lift)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_builder_new(
    m: *const HmManifold,
    out: *mut *mut HmBodyBuilder,
) -> HmStatus {
    guard(|| {
        let manifold = deref(m, "manifold")?.inner;
        write(
            out,
            Box::into_raw(Box::new(HmBodyBuilder {
                manifold,
                constraints: Vec::new(),
            })),
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_builder_add_ball(
    b: *mut HmBodyBuilder,
    center: *const f64,
    radius: f64,
) -> HmStatus {
    guard(|| {
        let b = b.as_mut().ok_or_else(|| null("builder"))?;
        let c = point(&b.manifold, center)?;
        b.constraints.push(Constraint::ball(c, radius));
        Ok(())
    })
}

/// Adds `{x : <normal, x> <= offset}` (flat targets only).
#[no_mangle]
pub unsafe extern "C" fn hm_body_builder_add_half_space(
    b: *mut HmBodyBuilder,
    normal: *const f64,
    offset: f64,
) -> HmStatus {
    guard(|| {
        let b = b.as_mut().ok_or_else(|| null("builder"))?;
        let n = array(normal, b.manifold.ambient_dim(), "normal")?;
        b.constraints
            .push(Constraint::half_space(n, offset).map_err(lift)?);
        Ok(())
    })
}

/// Validates the accumulated constraints with tube width `epsilon`. The
/// builder is left intact.
#[no_mangle]
pub unsafe extern "C" fn hm_body_builder_build(
    b: *const HmBodyBuilder,
    epsilon: f64,
    out: *mut *mut HmBody,
) -> HmStatus {
    guard(|| {
        let b = deref(b, "builder")?;
        let inner = ConvexBody::new(b.manifold, b.constraints.clone(), epsilon).map_err(lift)?;
        write(out, Box::into_raw(Box::new(HmBody { inner })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_builder_free(b: *mut HmBodyBuilder) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_free(b: *mut HmBody) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_contains(
    b: *const HmBody,
    p: *const f64,
    out: *mut bool,
) -> HmStatus {
    guard(|| {
        let body = &deref(b, "body")?.inner;
        let p = point(body.manifold(), p)?;
        write(out, body.contains(&p))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_distance(
    b: *const HmBody,
    p: *const f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let body = &deref(b, "body")?.inner;
        let p = point(body.manifold(), p)?;
        write(out, body.distance(&p).map_err(lift)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_body_project(
    b: *const HmBody,
    p: *const f64,
    out: *mut f64,
) -> HmStatus {
    guard(|| {
        let body = &deref(b, "body")?.inner;
        let p = point(body.manifold(), p)?;
        write_array(out, body.project(&p).map_err(lift)?.coords())
    })
}

/// Parses scenario text (UTF-8, NUL-terminated).
#[no_mangle]
pub unsafe extern "C" fn hm_scenario_parse(
    text: *const c_char,
    override_convexity_check: bool,
    out: *mut *mut HmScenario,
) -> HmStatus {
    guard(|| {
        let text = c_str(text, "scenario text")?;
        let inner = parse_scenario(
            text,
            ParseOptions {
                override_convexity_check,
            },
        )
        .map_err(lift)?;
        write(out, Box::into_raw(Box::new(HmScenario { inner })))
    })
}

#[no_mangle]
pub unsafe extern "C" fn hm_scenario_free(s: *mut HmScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Runs a scenario. Reports are written to `out_dir` unless it is null.
/// `exit_code` receives the command-line exit status of the run (0 when all
/// checks pass).
#[no_mangle]
pub unsafe extern "C" fn hm_scenario_run(
    s: *const HmScenario,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> HmStatus {
    guard(|| {
        let s = &deref(s, "scenario")?.inner;
        let outcome = run_scenario(s, &RunOptions::default()).map_err(lift)?;
        if !out_dir.is_null() {
            let dir = c_str(out_dir, "output directory")?;
            emit_report(&outcome, Path::new(dir)).map_err(lift)?;
        }
        write(exit_code, outcome.status.code())
    })
}
