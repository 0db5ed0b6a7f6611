//! C ABI for `biqrank`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every function returns a
//! [`BiqStatus`]; on failure a message is kept per thread and can be read
//! with [`biq_last_error_message`]. Indices are 0-based. Strings returned
//! to the caller are freed with [`biq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use biqrank::graphs::{zarankiewicz, BipartiteGraph, SearchOptions, MAX_SEARCH_LONG_SIDE};
use biqrank::sosrank::{certify_sos, simple_rank_exact, sos_rank_search, SosCertificate, SosConfig, SosStatus};
use biqrank::{BiqError, BiquadraticForm, ChoiVariant};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    SizeLimit = 4,
    NotCertified = 5,
    NotC4Free = 6,
    SearchFailed = 7,
    Numerical = 8,
    Panic = 9,
}

/// Outcome of a certification.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiqSosStatus {
    Sos = 0,
    NotSos = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BiqChoi {
    Classical = 0,
    Printed = 1,
}

/// Opaque biquadratic form.
pub struct BiqForm {
    inner: BiquadraticForm,
}

/// Opaque bipartite graph.
pub struct BiqGraph {
    inner: BipartiteGraph,
}

/// Opaque SOS certificate.
pub struct BiqCertificate {
    inner: SosCertificate,
}

/// Written to `r_lower` when no lower bound applies.
pub const BIQ_NO_RANK: usize = !0;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BiqStatus, String);

impl From<BiqError> for Failure {
    fn from(e: BiqError) -> Self {
        let status = match e {
            BiqError::SizeLimit { .. } => BiqStatus::SizeLimit,
            BiqError::NotCertified(_) => BiqStatus::NotCertified,
            BiqError::NotC4Free => BiqStatus::NotC4Free,
            BiqError::RankSearchFailed { .. } => BiqStatus::SearchFailed,
            BiqError::Json(_) => BiqStatus::ParseError,
            BiqError::InvalidIndex(_)
            | BiqError::InvalidGraph(_)
            | BiqError::InvalidRank { .. }
            | BiqError::DimensionMismatch { .. }
            | BiqError::NotSimpleForm(_) => BiqStatus::InvalidArgument,
            _ => BiqStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> BiqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BiqStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal error: {message}"));
            BiqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(BiqStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes NULL or a live pointer from this library
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes NULL or a writable pointer
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(BiqStatus::ParseError, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes `len` readable elements
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(BiqStatus::Numerical, "string contains NUL".into()))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn biq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Free with
/// [`biq_string_free`].
#[no_mangle]
pub extern "C" fn biq_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(ptr::null_mut(), CString::into_raw))
}

/// # Safety
/// `s` is NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biq_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by CString::into_raw in this library
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Form from the JSON file format (1-based indices).
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_form_from_json(json: *const c_char, out_form: *mut *mut BiqForm) -> BiqStatus {
    guard(|| {
        let slot = unsafe { out(out_form, "out_form") }?;
        let text = unsafe { text(json, "json") }?;
        let inner = BiquadraticForm::from_json(text)?;
        *slot = boxed(BiqForm { inner });
        Ok(())
    })
}

/// Form from `count` tensor entries: `indices` holds `4 * count` values
/// `i, j, k, l` (0-based) and `values` the matching coefficients.
///
/// # Safety
/// `indices` has `4 * count` and `values` has `count` readable elements.
#[no_mangle]
pub unsafe extern "C" fn biq_form_new(
    m: usize,
    n: usize,
    indices: *const usize,
    values: *const f64,
    count: usize,
    out_form: *mut *mut BiqForm,
) -> BiqStatus {
    guard(|| {
        let slot = unsafe { out(out_form, "out_form") }?;
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Failure(BiqStatus::InvalidArgument, "count overflows".into()))?;
        let idx = unsafe { slice(indices, len, "indices") }?;
        let vals = unsafe { slice(values, count, "values") }?;
        let entries = idx.chunks_exact(4).zip(vals).map(|(q, &v)| (q[0], q[1], q[2], q[3], v));
        let inner = BiquadraticForm::new(m, n, entries)?;
        *slot = boxed(BiqForm { inner });
        Ok(())
    })
}

/// # Safety
/// `out_form` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_form_choi(variant: BiqChoi, out_form: *mut *mut BiqForm) -> BiqStatus {
    guard(|| {
        let slot = unsafe { out(out_form, "out_form") }?;
        let v = match variant {
            BiqChoi::Classical => ChoiVariant::Classical,
            BiqChoi::Printed => ChoiVariant::Printed,
        };
        *slot = boxed(BiqForm {
            inner: BiquadraticForm::choi(v),
        });
        Ok(())
    })
}

/// The simple form `Σ_{(i,j) ∈ E} x_i² y_j²` of a graph.
///
/// # Safety
/// `graph` is a live handle; `out_form` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_form_from_graph(graph: *const BiqGraph, out_form: *mut *mut BiqForm) -> BiqStatus {
    guard(|| {
        let g = unsafe { borrow(graph, "graph") }?;
        let slot = unsafe { out(out_form, "out_form") }?;
        *slot = boxed(BiqForm {
            inner: BiquadraticForm::from_graph(&g.inner)?,
        });
        Ok(())
    })
}

/// `P(x, y)` with `x` of length `m` and `y` of length `n`.
///
/// # Safety
/// `form` is a live handle; `x`, `y` have the given lengths; `value` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_form_evaluate(
    form: *const BiqForm,
    x: *const f64,
    x_len: usize,
    y: *const f64,
    y_len: usize,
    value: *mut f64,
) -> BiqStatus {
    guard(|| {
        let f = unsafe { borrow(form, "form") }?;
        let slot = unsafe { out(value, "value") }?;
        let x = unsafe { slice(x, x_len, "x") }?;
        let y = unsafe { slice(y, y_len, "y") }?;
        *slot = f.inner.evaluate(x, y)?;
        Ok(())
    })
}

/// JSON file format of the form. Free the string with [`biq_string_free`].
///
/// # Safety
/// `form` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_form_to_json(form: *const BiqForm, out_json: *mut *mut c_char) -> BiqStatus {
    guard(|| {
        let f = unsafe { borrow(form, "form") }?;
        let slot = unsafe { out(out_json, "out_json") }?;
        *slot = into_c_string(f.inner.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `form` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biq_form_free(form: *mut BiqForm) {
    if !form.is_null() {
        // SAFETY: allocated by Box::into_raw in this library
        drop(unsafe { Box::from_raw(form) });
    }
}

/// Graph from the JSON file format (1-based indices).
///
/// # Safety
/// `json` is a NUL-terminated string; `out_graph` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_graph_from_json(json: *const c_char, out_graph: *mut *mut BiqGraph) -> BiqStatus {
    guard(|| {
        let slot = unsafe { out(out_graph, "out_graph") }?;
        let text = unsafe { text(json, "json") }?;
        *slot = boxed(BiqGraph {
            inner: BipartiteGraph::from_json(text)?,
        });
        Ok(())
    })
}

/// Graph from `count` 0-based edges stored as pairs `i, j` in `edges`.
///
/// # Safety
/// `edges` has `2 * count` readable elements; `out_graph` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_graph_new(
    m: usize,
    n: usize,
    edges: *const usize,
    count: usize,
    out_graph: *mut *mut BiqGraph,
) -> BiqStatus {
    guard(|| {
        let slot = unsafe { out(out_graph, "out_graph") }?;
        let len = count
            .checked_mul(2)
            .ok_or_else(|| Failure(BiqStatus::InvalidArgument, "count overflows".into()))?;
        let e = unsafe { slice(edges, len, "edges") }?;
        *slot = boxed(BiqGraph {
            inner: BipartiteGraph::new(m, n, e.chunks_exact(2).map(|p| (p[0], p[1])))?,
        });
        Ok(())
    })
}

/// # Safety
/// `graph` is a live handle; the outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn biq_graph_info(
    graph: *const BiqGraph,
    out_m: *mut usize,
    out_n: *mut usize,
    out_edges: *mut usize,
    out_c4_free: *mut bool,
) -> BiqStatus {
    guard(|| {
        let g = unsafe { borrow(graph, "graph") }?;
        *unsafe { out(out_m, "out_m") }? = g.inner.m();
        *unsafe { out(out_n, "out_n") }? = g.inner.n();
        *unsafe { out(out_edges, "out_edges") }? = g.inner.num_edges();
        *unsafe { out(out_c4_free, "out_c4_free") }? = g.inner.is_c4_free();
        Ok(())
    })
}

/// JSON file format of the graph. Free the string with [`biq_string_free`].
///
/// # Safety
/// `graph` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_graph_to_json(graph: *const BiqGraph, out_json: *mut *mut c_char) -> BiqStatus {
    guard(|| {
        let g = unsafe { borrow(graph, "graph") }?;
        let slot = unsafe { out(out_json, "out_json") }?;
        *slot = into_c_string(g.inner.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `graph` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biq_graph_free(graph: *mut BiqGraph) {
    if !graph.is_null() {
        // SAFETY: allocated by Box::into_raw in this library
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// Exact `z(m, n)`. `out_witness` may be NULL; otherwise it receives an
/// extremal graph to free with [`biq_graph_free`]. `limit` caps both sides.
///
/// # Safety
/// `out_z` is writable; `out_witness` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn biq_zarankiewicz(
    m: usize,
    n: usize,
    limit: usize,
    jobs: usize,
    out_z: *mut usize,
    out_witness: *mut *mut BiqGraph,
) -> BiqStatus {
    guard(|| {
        let z_slot = unsafe { out(out_z, "out_z") }?;
        let opts = SearchOptions {
            limit: limit.min(MAX_SEARCH_LONG_SIDE),
            jobs: jobs.max(1),
            symmetry_breaking: false,
        };
        let r = zarankiewicz(m, n, &opts)?;
        *z_slot = r.z;
        // SAFETY: caller passes NULL or a writable pointer
        if let Some(w) = unsafe { out_witness.as_mut() } {
            *w = boxed(BiqGraph { inner: r.witness });
        }
        Ok(())
    })
}

/// SOS rank `|E|` of the simple form of a 4-cycle-free graph.
///
/// # Safety
/// `graph` is a live handle; `out_rank` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_simple_rank_exact(graph: *const BiqGraph, out_rank: *mut usize) -> BiqStatus {
    guard(|| {
        let g = unsafe { borrow(graph, "graph") }?;
        let slot = unsafe { out(out_rank, "out_rank") }?;
        *slot = simple_rank_exact(&g.inner)?;
        Ok(())
    })
}

fn config(seed: u64) -> SosConfig {
    SosConfig {
        seed,
        ..SosConfig::default()
    }
}

/// Certifies SOS with the default tolerances.
///
/// # Safety
/// `form` is a live handle; `out_cert` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_certify(form: *const BiqForm, seed: u64, out_cert: *mut *mut BiqCertificate) -> BiqStatus {
    guard(|| {
        let f = unsafe { borrow(form, "form") }?;
        let slot = unsafe { out(out_cert, "out_cert") }?;
        *slot = boxed(BiqCertificate {
            inner: certify_sos(&f.inner, &config(seed))?,
        });
        Ok(())
    })
}

/// # Safety
/// `cert` is a live handle; the outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn biq_certificate_result(
    cert: *const BiqCertificate,
    out_status: *mut BiqSosStatus,
    out_lambda_star: *mut f64,
) -> BiqStatus {
    guard(|| {
        let c = unsafe { borrow(cert, "cert") }?;
        *unsafe { out(out_status, "out_status") }? = match c.inner.status {
            SosStatus::Sos => BiqSosStatus::Sos,
            SosStatus::NotSos => BiqSosStatus::NotSos,
            SosStatus::Inconclusive => BiqSosStatus::Inconclusive,
        };
        *unsafe { out(out_lambda_star, "out_lambda_star") }? = c.inner.lambda_star;
        Ok(())
    })
}

/// Certificate as JSON. Free the string with [`biq_string_free`].
///
/// # Safety
/// `cert` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn biq_certificate_to_json(cert: *const BiqCertificate, out_json: *mut *mut c_char) -> BiqStatus {
    guard(|| {
        let c = unsafe { borrow(cert, "cert") }?;
        let slot = unsafe { out(out_json, "out_json") }?;
        let json = serde_json::to_string(&c.inner).map_err(|e| Failure(BiqStatus::Numerical, e.to_string()))?;
        *slot = into_c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `cert` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn biq_certificate_free(cert: *mut BiqCertificate) {
    if !cert.is_null() {
        // SAFETY: allocated by Box::into_raw in this library
        drop(unsafe { Box::from_raw(cert) });
    }
}

/// Rank-capped search for the SOS rank over caps `r_min..=r_max`.
/// `out_r_lower` receives [`BIQ_NO_RANK`] when no lower bound applies.
///
/// # Safety
/// `form` is a live handle; the outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn biq_sos_rank(
    form: *const BiqForm,
    r_min: usize,
    r_max: usize,
    seed: u64,
    out_r_upper: *mut usize,
    out_r_lower: *mut usize,
    out_residual: *mut f64,
) -> BiqStatus {
    guard(|| {
        let f = unsafe { borrow(form, "form") }?;
        let upper = unsafe { out(out_r_upper, "out_r_upper") }?;
        let lower = unsafe { out(out_r_lower, "out_r_lower") }?;
        let residual = unsafe { out(out_residual, "out_residual") }?;
        let r = sos_rank_search(&f.inner, r_min, r_max, &config(seed))?;
        *upper = r.r_upper;
        *lower = r.r_lower.unwrap_or(BIQ_NO_RANK);
        *residual = r.residual;
        Ok(())
    })
}
