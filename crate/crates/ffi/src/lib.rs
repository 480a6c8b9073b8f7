//! C ABI over the `doublephase` library.
//!
//! A model is created from the text of a TOML config and handed out as an
//! opaque `DpModel*`. Every fallible call returns a [`DpStatus`]; on failure
//! the message is available from [`dp_last_error_message`] on the same
//! thread. Nodal vectors are plain `double` arrays of length
//! [`dp_model_node_count`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use doublephase::energy::energy;
use doublephase::fibering::{
    classify_nehari, fiber_roots, fiber_terms, FiberRoots, NehariKind, NEHARI_TOL,
};
use doublephase::solver::BranchReport;
use doublephase::space::{norm_1p, norm_circ, norm_custom, norm_star};
use doublephase::{solve_two, Config, DiscreteFunction, Model, SolveOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    LengthMismatch = 4,
    Numerical = 5,
    NotConverged = 6,
    Panic = 7,
}

/// Opaque handle.
pub struct DpModel {
    model: Model,
    solver: SolveOptions,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpNorms {
    pub custom: f64,
    pub one_p: f64,
    pub circ: f64,
    pub star: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpRootKind {
    Two = 0,
    Tangent = 1,
    None = 2,
}

/// `t1` and `t2` are NaN unless `kind` is `Two`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpFiberRoots {
    pub kind: DpRootKind,
    pub t1: f64,
    pub t_circ: f64,
    pub t2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpNehariKind {
    NotOnNehari = 0,
    Plus = 1,
    Zero = 2,
    Minus = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpBranchSummary {
    pub energy: f64,
    pub residual: f64,
    pub min_value: f64,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSolveSummary {
    pub lambda: f64,
    pub plus: DpBranchSummary,
    pub minus: DpBranchSummary,
    pub sign_pattern_ok: bool,
    pub positive: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(DpStatus, String);

fn fail<T>(status: DpStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DpStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DpStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(model: *const DpModel) -> Result<&'a DpModel, Fail> {
    match model.as_ref() {
        Some(m) => Ok(m),
        None => fail(DpStatus::NullPointer, "model is null"),
    }
}

unsafe fn out_ref<'a, T>(out: *mut T) -> Result<&'a mut T, Fail> {
    match out.as_mut() {
        Some(o) => Ok(o),
        None => fail(DpStatus::NullPointer, "output pointer is null"),
    }
}

unsafe fn nodal(m: &DpModel, values: *const f64, len: usize) -> Result<DiscreteFunction, Fail> {
    if values.is_null() {
        return fail(DpStatus::NullPointer, "values is null");
    }
    let n = m.model.node_count();
    if len != n {
        return fail(
            DpStatus::LengthMismatch,
            format!("expected {n} values, got {len}"),
        );
    }
    Ok(DiscreteFunction::new(
        std::slice::from_raw_parts(values, len).to_vec(),
    ))
}

fn numerical<E: std::fmt::Display>(e: E) -> Fail {
    Fail(DpStatus::Numerical, e.to_string())
}

/// Message of the last failed call on this thread, or "" after a success.
/// The pointer stays valid until the next `dp_*` call on the same thread.
#[no_mangle]
pub extern "C" fn dp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a model from TOML config text and stores it in `*out`.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_model_new(
    config_toml: *const c_char,
    out: *mut *mut DpModel,
) -> DpStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = ptr::null_mut();
        if config_toml.is_null() {
            return fail(DpStatus::NullPointer, "config is null");
        }
        let text = match CStr::from_ptr(config_toml).to_str() {
            Ok(t) => t,
            Err(e) => return fail(DpStatus::InvalidUtf8, e.to_string()),
        };
        let config = Config::parse(text).map_err(|e| Fail(DpStatus::Config, e.to_string()))?;
        let model = config
            .build_model()
            .map_err(|e| Fail(DpStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(DpModel {
            model,
            solver: config.solver,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`dp_model_new`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dp_model_free(model: *mut DpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of mesh nodes, 0 for a null model.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dp_model_node_count(model: *const DpModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.node_count())
}

/// Writes the node coordinates as `x0, y0, x1, y1, ...` into `xy`, which
/// must hold `2 * node_count` values.
///
/// # Safety
/// `model` must be a live handle and `xy` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_model_nodes(
    model: *const DpModel,
    xy: *mut f64,
    len: usize,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let nodes = m.model.mesh().nodes();
        if xy.is_null() {
            return fail(DpStatus::NullPointer, "xy is null");
        }
        if len != 2 * nodes.len() {
            return fail(
                DpStatus::LengthMismatch,
                format!("expected {} values, got {len}", 2 * nodes.len()),
            );
        }
        let dst = std::slice::from_raw_parts_mut(xy, len);
        for (chunk, node) in dst.chunks_exact_mut(2).zip(nodes) {
            chunk.copy_from_slice(node);
        }
        Ok(())
    })
}

/// Θ_λ of the nodal function `values`.
///
/// # Safety
/// `model` must be a live handle, `values` must point to `len` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dp_energy(
    model: *const DpModel,
    values: *const f64,
    len: usize,
    lambda: f64,
    out: *mut f64,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let u = nodal(m, values, len)?;
        *out_ref(out)? = energy(&m.model, &u, lambda).total;
        Ok(())
    })
}

/// # Safety
/// As for [`dp_energy`].
#[no_mangle]
pub unsafe extern "C" fn dp_norms(
    model: *const DpModel,
    values: *const f64,
    len: usize,
    out: *mut DpNorms,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let u = nodal(m, values, len)?;
        let out = out_ref(out)?;
        *out = DpNorms {
            custom: norm_custom(&m.model, &u).map_err(numerical)?,
            one_p: norm_1p(&m.model, &u),
            circ: norm_circ(&m.model, &u).map_err(numerical)?,
            star: norm_star(&m.model, &u).map_err(numerical)?,
        };
        Ok(())
    })
}

/// # Safety
/// As for [`dp_energy`].
#[no_mangle]
pub unsafe extern "C" fn dp_fiber_roots(
    model: *const DpModel,
    values: *const f64,
    len: usize,
    lambda: f64,
    out: *mut DpFiberRoots,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let u = nodal(m, values, len)?;
        let out = out_ref(out)?;
        let roots = fiber_roots(&fiber_terms(&m.model, &u), lambda).map_err(numerical)?;
        *out = match roots {
            FiberRoots::Two { t1, t_circ, t2 } => DpFiberRoots {
                kind: DpRootKind::Two,
                t1,
                t_circ,
                t2,
            },
            FiberRoots::Tangent { t_circ } => DpFiberRoots {
                kind: DpRootKind::Tangent,
                t1: f64::NAN,
                t_circ,
                t2: f64::NAN,
            },
            FiberRoots::None { t_circ } => DpFiberRoots {
                kind: DpRootKind::None,
                t1: f64::NAN,
                t_circ,
                t2: f64::NAN,
            },
        };
        Ok(())
    })
}

/// Nehari classification at the default tolerance.
///
/// # Safety
/// As for [`dp_energy`].
#[no_mangle]
pub unsafe extern "C" fn dp_classify(
    model: *const DpModel,
    values: *const f64,
    len: usize,
    lambda: f64,
    out: *mut DpNehariKind,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let u = nodal(m, values, len)?;
        let out = out_ref(out)?;
        let class = classify_nehari(&m.model, &u, lambda, NEHARI_TOL).map_err(numerical)?;
        *out = match class.kind {
            NehariKind::NotOnNehari => DpNehariKind::NotOnNehari,
            NehariKind::Nplus => DpNehariKind::Plus,
            NehariKind::Nzero => DpNehariKind::Zero,
            NehariKind::Nminus => DpNehariKind::Minus,
        };
        Ok(())
    })
}

fn branch_summary(r: &BranchReport) -> DpBranchSummary {
    match &r.best {
        Some(b) => DpBranchSummary {
            energy: b.energy,
            residual: b.residual.residual_norm,
            min_value: b.min_value,
            converged: b.converged,
        },
        None => DpBranchSummary {
            energy: f64::NAN,
            residual: f64::NAN,
            min_value: f64::NAN,
            converged: false,
        },
    }
}

/// Computes both solutions at the configured λ. The nodal values are written
/// to `plus` and `minus` (each `len` doubles, either may be null) and the
/// summary to `*out`. Returns `NotConverged` when the sign pattern or
/// positivity fails; the outputs are filled in that case too.
///
/// # Safety
/// `model` must be a live handle, `plus`/`minus` null or valid for `len`
/// writes, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_solve_two(
    model: *const DpModel,
    plus: *mut f64,
    minus: *mut f64,
    len: usize,
    out: *mut DpSolveSummary,
) -> DpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out)?;
        let n = m.model.node_count();
        if (!plus.is_null() || !minus.is_null()) && len != n {
            return fail(
                DpStatus::LengthMismatch,
                format!("expected {n} values, got {len}"),
            );
        }
        let two = solve_two(&m.model, &m.solver);
        for (dst, report) in [(plus, &two.plus), (minus, &two.minus)] {
            if dst.is_null() {
                continue;
            }
            let dst = std::slice::from_raw_parts_mut(dst, n);
            match &report.best {
                Some(b) => dst.copy_from_slice(b.u.values()),
                None => dst.fill(f64::NAN),
            }
        }
        *out = DpSolveSummary {
            lambda: two.lambda,
            plus: branch_summary(&two.plus),
            minus: branch_summary(&two.minus),
            sign_pattern_ok: two.sign_pattern_ok,
            positive: two.positive,
        };
        if two.sign_pattern_ok && two.positive {
            Ok(())
        } else {
            fail(
                DpStatus::NotConverged,
                "solve did not produce two converged positive solutions",
            )
        }
    })
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
