//! C ABI over `credyn`: an opaque model handle for scoring and TreeSHAP,
//! the evaluation metrics, the paired t-test and the synthetic generator.
//!
//! Every function returns a [`CredynStatus`]. On failure the message is
//! available from [`credyn_last_error`] on the same thread. Panics are
//! caught and reported as `CREDYN_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use credyn::boost::BoostedModel;
use credyn::error::Error;
use credyn::eval;
use credyn::io::{write_cohort, write_edges, write_panel};
use credyn::shap::tree_shap;
use credyn::synth::{generate_population, PopulationConfig};

#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CredynStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Schema = 5,
    UndefinedMetric = 6,
    Config = 7,
    Internal = 8,
}

/// Opaque scoring model.
pub struct CredynModel {
    model: BoostedModel,
    names: Vec<CString>,
}

/// Outcome of a paired t-test. `relative_increment` is NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CredynComparison {
    pub delta_mean: f64,
    pub relative_increment: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CredynStatus {
    match e {
        Error::Io { .. } | Error::MissingInput(_) => CredynStatus::Io,
        Error::Parse { .. } | Error::Serde(_) => CredynStatus::Parse,
        Error::Schema(_) | Error::Assembly(_) => CredynStatus::Schema,
        Error::UndefinedMetric(_) => CredynStatus::UndefinedMetric,
        Error::Config { .. } => CredynStatus::Config,
        _ => CredynStatus::InvalidArgument,
    }
}

fn fail(status: CredynStatus, msg: &str) -> CredynStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), CredynStatus>) -> CredynStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CredynStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(CredynStatus::Internal, "internal panic"),
    }
}

fn check(e: Error) -> CredynStatus {
    fail(status_of(&e), &e.to_string())
}

fn null(what: &str) -> CredynStatus {
    fail(CredynStatus::NullArgument, &format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CredynStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CredynStatus::InvalidArgument, &format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], CredynStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn credyn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn credyn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn wrap(model: BoostedModel, out: *mut *mut CredynModel) -> Result<(), CredynStatus> {
    let names = model
        .feature_names()
        .into_iter()
        .map(|n| CString::new(n).map_err(|_| fail(CredynStatus::Schema, "feature name contains NUL")))
        .collect::<Result<Vec<_>, _>>()?;
    let handle = Box::new(CredynModel { model, names });
    unsafe { *out = Box::into_raw(handle) };
    Ok(())
}

/// Loads a model from a JSON file. Free it with [`credyn_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_load(path: *const c_char, out: *mut *mut CredynModel) -> CredynStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let model = BoostedModel::load(Path::new(path)).map_err(check)?;
        wrap(model, out)
    })
}

/// Parses a model from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_from_json(json: *const c_char, out: *mut *mut CredynModel) -> CredynStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        let model = BoostedModel::from_json(json).map_err(check)?;
        wrap(model, out)
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_free(model: *mut CredynModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn model_ref<'a>(m: *const CredynModel) -> Result<&'a CredynModel, CredynStatus> {
    m.as_ref().ok_or_else(|| null("model"))
}

/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_num_features(model: *const CredynModel, out: *mut usize) -> CredynStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.model.n_features();
        Ok(())
    })
}

/// Name of feature `index`, owned by the model handle.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_feature_name(
    model: *const CredynModel,
    index: usize,
    out: *mut *const c_char,
) -> CredynStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let name = m
            .names
            .get(index)
            .ok_or_else(|| fail(CredynStatus::InvalidArgument, &format!("feature index {index} out of range")))?;
        *out = name.as_ptr();
        Ok(())
    })
}

unsafe fn predict_rows(
    model: *const CredynModel,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
    proba: bool,
) -> CredynStatus {
    guard(|| {
        let m = model_ref(model)?;
        if n_features != m.model.n_features() {
            return Err(fail(
                CredynStatus::Schema,
                &format!("model expects {} features, got {n_features}", m.model.n_features()),
            ));
        }
        let x = slice_arg(rows, n_rows * n_features, "rows")?;
        if n_rows > 0 && out.is_null() {
            return Err(null("out"));
        }
        for i in 0..n_rows {
            let row = &x[i * n_features..(i + 1) * n_features];
            let v = if proba {
                m.model.predict_proba(row)
            } else {
                m.model.predict_margin(row)
            };
            *out.add(i) = v.map_err(check)?;
        }
        Ok(())
    })
}

/// Default probabilities for `n_rows` row-major rows. NaN marks a missing value.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` doubles and `out` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_predict_proba(
    model: *const CredynModel,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> CredynStatus {
    predict_rows(model, rows, n_rows, n_features, out, true)
}

/// Raw margins (log-odds) for `n_rows` row-major rows.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` doubles and `out` `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_predict_margin(
    model: *const CredynModel,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> CredynStatus {
    predict_rows(model, rows, n_rows, n_features, out, false)
}

/// TreeSHAP values of one row; `base_value` plus their sum is the margin.
///
/// # Safety
/// `row` and `values` must each hold `n_features` doubles; `base_value`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn credyn_model_shap(
    model: *const CredynModel,
    row: *const f64,
    n_features: usize,
    values: *mut f64,
    base_value: *mut f64,
) -> CredynStatus {
    guard(|| {
        let m = model_ref(model)?;
        let row = slice_arg(row, n_features, "row")?;
        if values.is_null() || base_value.is_null() {
            return Err(null("values or base_value"));
        }
        let s = tree_shap(&m.model, row).map_err(check)?;
        ptr::copy_nonoverlapping(s.values.as_ptr(), values, s.values.len());
        *base_value = s.base_value;
        Ok(())
    })
}

unsafe fn metric(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
    f: fn(&[f64], &[bool]) -> credyn::Result<f64>,
) -> CredynStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&b| b != 0).collect();
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(s, &l).map_err(check)?;
        Ok(())
    })
}

/// ROC AUC of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn credyn_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> CredynStatus {
    metric(scores, labels, n, out, eval::auc)
}

/// Kolmogorov-Smirnov statistic of `scores` between the two label classes.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn credyn_ks(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> CredynStatus {
    metric(scores, labels, n, out, eval::ks)
}

/// Two-sided paired t-test of `b` against `a` at the 0.05 level.
///
/// # Safety
/// `a` and `b` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn credyn_paired_ttest(
    a: *const f64,
    b: *const f64,
    n: usize,
    out: *mut CredynComparison,
) -> CredynStatus {
    guard(|| {
        let a = slice_arg(a, n, "a")?;
        let b = slice_arg(b, n, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = eval::paired_ttest(a, b).map_err(check)?;
        *out = CredynComparison {
            delta_mean: r.delta_mean,
            relative_increment: r.relative_increment.unwrap_or(f64::NAN),
            t_statistic: r.t_statistic,
            p_value: r.p_value,
            significant: u8::from(r.significant),
        };
        Ok(())
    })
}

/// Generates a synthetic population scaled by `scale` (1.0 = default size)
/// and writes `panel.csv`, `cohort.csv`, `eownet.csv` and `familynet.csv`
/// into `out_dir`.
///
/// # Safety
/// `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn credyn_generate(out_dir: *const c_char, seed: u64, scale: f64) -> CredynStatus {
    guard(|| {
        let dir = Path::new(str_arg(out_dir, "out_dir")?);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(fail(CredynStatus::Config, "scale must be positive"));
        }
        let cfg = PopulationConfig {
            seed,
            ..PopulationConfig::scaled(scale)
        };
        let pop = generate_population(&cfg).map_err(check)?;
        write_panel(&dir.join("panel.csv"), &pop.panel).map_err(check)?;
        write_cohort(&dir.join("cohort.csv"), &pop.cohort).map_err(check)?;
        write_edges(&dir.join("eownet.csv"), &pop.eownet).map_err(check)?;
        write_edges(&dir.join("familynet.csv"), &pop.familynet).map_err(check)
    })
}
