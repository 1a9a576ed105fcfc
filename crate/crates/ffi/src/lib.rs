//! C ABI over `sdcnet`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style calls and released with the matching `*_free`. Every fallible call
//! returns an [`SdcStatus`]; on failure a description is available from
//! [`sdc_last_error`] on the same thread. Strings handed out by the library
//! are released with [`sdc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::ArrayView2;
use sdcnet::align::{self, KernelBank};
use sdcnet::datamodel::{self, make_synthetic_dataset, split_for_subject};
use sdcnet::eval;
use sdcnet::net::Checkpoint;
use sdcnet::{features, trainer, Error, FeatureTable, RunConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdcStatus {
    Ok = 0,
    /// Bad arguments, malformed files, invalid configuration.
    Invalid = 1,
    /// The filesystem refused a read or write.
    Io = 2,
    /// A required pointer was null.
    NullPointer = 3,
    /// The library panicked. This is a bug.
    Panic = 4,
}

/// A feature table.
pub struct SdcTable(FeatureTable);

/// A run configuration.
pub struct SdcConfig(RunConfig);

/// A trained model.
pub struct SdcModel(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SdcStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_io() {
            SdcStatus::Io
        } else {
            SdcStatus::Invalid
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SdcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SdcStatus::Invalid, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SdcStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SdcStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn matrix<'a>(
    data: *const f64,
    rows: usize,
    cols: usize,
    what: &str,
) -> Result<ArrayView2<'a, f64>, Failure> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| invalid(format!("{what}: {rows}x{cols} overflows")))?;
    if len == 0 {
        return Ok(ArrayView2::from_shape((rows, cols), &[]).expect("empty view"));
    }
    if data.is_null() {
        return Err(null(what));
    }
    let slice = std::slice::from_raw_parts(data, len);
    Ok(ArrayView2::from_shape((rows, cols), slice).expect("length checked"))
}

unsafe fn write_out(
    dst: *mut f64,
    capacity: usize,
    values: &[f64],
    what: &str,
) -> Result<(), Failure> {
    if values.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(null(what));
    }
    if capacity < values.len() {
        return Err(invalid(format!(
            "{what} holds {capacity} values, {} needed",
            values.len()
        )));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), dst, values.len());
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("nul bytes removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn sdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sdc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn sdc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- tables ----

/// Generates the synthetic multi-subject benchmark.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_synthetic(
    subjects: usize,
    trials: usize,
    windows: usize,
    dim: usize,
    classes: usize,
    shift: f64,
    noise: f64,
    seed: u64,
    out: *mut *mut SdcTable,
) -> SdcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t =
            make_synthetic_dataset(subjects, trials, windows, dim, classes, shift, noise, seed)?;
        *out = Box::into_raw(Box::new(SdcTable(t)));
        Ok(())
    })
}

/// Reads a feature table CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_load(path: *const c_char, out: *mut *mut SdcTable) -> SdcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let t = datamodel::load_feature_table(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SdcTable(t)));
        Ok(())
    })
}

/// Writes a feature table CSV.
///
/// # Safety
/// `table` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_save(table: *const SdcTable, path: *const c_char) -> SdcStatus {
    guard(|| {
        let t = handle(table, "table")?;
        datamodel::save_feature_table(&t.0, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of records; 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_len(table: *const SdcTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Feature width; 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_dim(table: *const SdcTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.dim())
}

/// Number of classes; 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_num_classes(table: *const SdcTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.num_classes())
}

/// Copies the `len × dim` feature matrix, row-major, into `dst`.
///
/// # Safety
/// `table` must be a live handle; `dst` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_features(
    table: *const SdcTable,
    dst: *mut f64,
    capacity: usize,
) -> SdcStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let m = t.0.feature_matrix();
        write_out(dst, capacity, m.as_slice().expect("standard layout"), "dst")
    })
}

/// Copies the labels into `dst`; unlabeled records read as -1.
///
/// # Safety
/// `table` must be a live handle; `dst` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_labels(
    table: *const SdcTable,
    dst: *mut i64,
    capacity: usize,
) -> SdcStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let n = t.0.len();
        if n == 0 {
            return Ok(());
        }
        if dst.is_null() {
            return Err(null("dst"));
        }
        if capacity < n {
            return Err(invalid(format!("dst holds {capacity} values, {n} needed")));
        }
        let out = std::slice::from_raw_parts_mut(dst, n);
        for (o, r) in out.iter_mut().zip(t.0.records()) {
            *o = r.label.map_or(-1, |l| l as i64);
        }
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdc_table_free(table: *mut SdcTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

// ---- configuration ----

/// Configuration with every field at its default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_config_default(out: *mut *mut SdcConfig) -> SdcStatus {
    guard(|| {
        *out_ptr(out, "out")? = Box::into_raw(Box::new(SdcConfig(RunConfig::default())));
        Ok(())
    })
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_config_load(
    path: *const c_char,
    out: *mut *mut SdcConfig,
) -> SdcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = RunConfig::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SdcConfig(c)));
        Ok(())
    })
}

/// Sets one field by name, e.g. `("epochs", "50")`. The configuration is
/// left unchanged if the value is rejected.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sdc_config_set(
    config: *mut SdcConfig,
    key: *const c_char,
    value: *const c_char,
) -> SdcStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let mut next = c.0.clone();
        next.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        next.validate()?;
        c.0 = next;
        Ok(())
    })
}

/// The configuration rendered as `key = value` lines. Free with
/// [`sdc_string_free`].
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_config_to_text(
    config: *const SdcConfig,
    out: *mut *mut c_char,
) -> SdcStatus {
    guard(|| {
        let c = handle(config, "config")?;
        *out_ptr(out, "out")? = into_c_string(c.0.to_text());
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdc_config_free(config: *mut SdcConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

// ---- training and evaluation ----

/// Trains with `target_subject` held out as the unlabeled target domain.
/// Writes the model handle and the held-out accuracy.
///
/// # Safety
/// `table` and `config` must be live handles; `out_model` must be writable;
/// `out_accuracy` may be null.
#[no_mangle]
pub unsafe extern "C" fn sdc_fit_fold(
    table: *const SdcTable,
    config: *const SdcConfig,
    target_subject: u32,
    out_model: *mut *mut SdcModel,
    out_accuracy: *mut f64,
) -> SdcStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let c = handle(config, "config")?;
        let out_model = out_ptr(out_model, "out_model")?;
        let split = split_for_subject(&t.0, target_subject)?;
        let outcome = trainer::fit(&split, &c.0)?;
        if let Some(acc) = out_accuracy.as_mut() {
            *acc = outcome.target_accuracy;
        }
        *out_model = Box::into_raw(Box::new(SdcModel(outcome.checkpoint)));
        Ok(())
    })
}

/// Leave-one-subject-out over every subject; writes the report as JSON.
/// Free with [`sdc_string_free`].
///
/// # Safety
/// `table` and `config` must be live handles; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_loso_json(
    table: *const SdcTable,
    config: *const SdcConfig,
    jobs: usize,
    out_json: *mut *mut c_char,
) -> SdcStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let c = handle(config, "config")?;
        let out = out_ptr(out_json, "out_json")?;
        let report = eval::loso_run(&t.0, &c.0, jobs)?;
        *out = into_c_string(report.to_json());
        Ok(())
    })
}

// ---- models ----

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_model_load(path: *const c_char, out: *mut *mut SdcModel) -> SdcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = Checkpoint::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(SdcModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sdc_model_save(model: *const SdcModel, path: *const c_char) -> SdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        m.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Input width, embedding width and class count. Any out pointer may be null.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_model_dims(
    model: *const SdcModel,
    input_dim: *mut usize,
    embedding_dim: *mut usize,
    num_classes: *mut usize,
) -> SdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if let Some(v) = input_dim.as_mut() {
            *v = m.0.params.input_dim();
        }
        if let Some(v) = embedding_dim.as_mut() {
            *v = m.0.params.embedding_dim();
        }
        if let Some(v) = num_classes.as_mut() {
            *v = m.0.params.num_classes();
        }
        Ok(())
    })
}

/// Class probabilities `[rows × classes]` for raw features `[rows × cols]`.
///
/// # Safety
/// `model` must be a live handle; `features` must hold `rows·cols` doubles
/// and `dst` `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sdc_model_predict(
    model: *const SdcModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    dst: *mut f64,
    capacity: usize,
) -> SdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = matrix(features, rows, cols, "features")?;
        let out = m.0.forward_eval(x)?;
        write_out(
            dst,
            capacity,
            out.probs.as_slice().expect("standard layout"),
            "dst",
        )
    })
}

/// Embeddings `[rows × embedding_dim]` for raw features `[rows × cols]`.
///
/// # Safety
/// As for [`sdc_model_predict`].
#[no_mangle]
pub unsafe extern "C" fn sdc_model_embed(
    model: *const SdcModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    dst: *mut f64,
    capacity: usize,
) -> SdcStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = matrix(features, rows, cols, "features")?;
        let out = m.0.forward_eval(x)?;
        write_out(
            dst,
            capacity,
            out.embedding.as_slice().expect("standard layout"),
            "dst",
        )
    })
}

/// # Safety
/// `model` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sdc_model_free(model: *mut SdcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---- primitives ----

/// Differential entropy of a Gaussian with the given variance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_differential_entropy(variance: f64, out: *mut f64) -> SdcStatus {
    guard(|| {
        *out_ptr(out, "out")? = features::differential_entropy(variance)?;
        Ok(())
    })
}

/// Multi-kernel MMD² between `source [n × dim]` and `target [m × dim]` with
/// `kernel_count` bandwidths around `sigma`. A `sigma` of 0 or less uses the
/// median pairwise distance of the source rows.
///
/// # Safety
/// `source` and `target` must hold `n·dim` and `m·dim` doubles; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn sdc_mmd2(
    source: *const f64,
    n: usize,
    target: *const f64,
    m: usize,
    dim: usize,
    sigma: f64,
    kernel_count: usize,
    out: *mut f64,
) -> SdcStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let x = matrix(source, n, dim, "source")?;
        let y = matrix(target, m, dim, "target")?;
        let sigma = if sigma > 0.0 {
            sigma
        } else {
            align::median_heuristic(x)?
        };
        let bank = KernelBank::around(sigma, kernel_count)?;
        *out = align::mmd2(x, y, &bank)?.value;
        Ok(())
    })
}
