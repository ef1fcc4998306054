//! C ABI for mts-core.
//!
//! Handles are opaque and owned by the caller once returned; release them with
//! the matching `*_free` function. Every fallible call returns an
//! [`MtsStatus`]; on failure the message is available from
//! [`mts_last_error_message`] on the same thread.
//!
//! Matrices cross the boundary column-major. A dataset with `p` dimensions and
//! `n` observations is `p * n` doubles, observation `j` at `data[j*p .. j*p+p]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::{DMatrix, DVector};

use mts_core::qp::{solve, LinearConstraint, QpProblem};
use mts_core::{mts_cov, mts_mean, CovMtsOptions, Dataset, MeanMtsOptions, MtsError, SymMatrix, TargetSpec, WhitenMode};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// Eigen, whitening or singular-matrix failure.
    Numerical = 4,
    Infeasible = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Structured covariance targets.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtsTarget {
    Identity = 0,
    Diagonal = 1,
    ConstCorr = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtsWhiten {
    None = 0,
    Full = 1,
    /// Uses the `partial_rank` argument as k.
    Partial = 2,
}

/// A p × n data matrix.
pub struct MtsDataset(Dataset);

/// Output of a mean or covariance estimate.
pub struct MtsResult {
    estimate: Vec<f64>,
    lambda: Vec<f64>,
    a_hat: Vec<f64>,
    b_hat: Vec<f64>,
    objective: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &MtsError) -> MtsStatus {
    match err {
        MtsError::DimensionMismatch { .. } => MtsStatus::DimensionMismatch,
        MtsError::Infeasible(_) => MtsStatus::Infeasible,
        MtsError::EigenNoConvergence(_)
        | MtsError::EigenvalueBelowFloor { .. }
        | MtsError::NotPsd(_)
        | MtsError::Singular(_)
        | MtsError::ZeroVariance(_)
        | MtsError::NonPositiveVariance(_) => MtsStatus::Numerical,
        _ => MtsStatus::InvalidArgument,
    }
}

struct Failure(MtsStatus, String);

impl From<MtsError> for Failure {
    fn from(e: MtsError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn fail(status: MtsStatus, msg: &str) -> Failure {
    Failure(status, msg.to_string())
}

/// Runs `f`, records any error or panic, and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MtsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MtsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MtsStatus::Panic
        }
    }
}

unsafe fn slice_in<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MtsStatus::NullPointer, &format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn datasets<'a>(p: *const *const MtsDataset, k: usize, what: &str) -> Result<Vec<&'a Dataset>, Failure> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(fail(MtsStatus::NullPointer, &format!("{what} is null")));
    }
    slice::from_raw_parts(p, k)
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            d.as_ref()
                .map(|d| &d.0)
                .ok_or_else(|| fail(MtsStatus::NullPointer, &format!("{what}[{i}] is null")))
        })
        .collect()
}

fn whiten_mode(w: MtsWhiten, partial_rank: usize) -> Option<WhitenMode> {
    match w {
        MtsWhiten::None => None,
        MtsWhiten::Full => Some(WhitenMode::Full),
        MtsWhiten::Partial => Some(WhitenMode::Partial(partial_rank)),
    }
}

fn sym_to_vec(m: &SymMatrix) -> Vec<f64> {
    m.as_matrix().as_slice().to_vec()
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(MtsStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies `data` (p·n doubles, column-major) into a new dataset.
///
/// # Safety
/// `data` must point to `p * n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mts_dataset_new(data: *const f64, p: usize, n: usize, out: *mut *mut MtsDataset) -> MtsStatus {
    guard(|| {
        let len = p
            .checked_mul(n)
            .ok_or_else(|| fail(MtsStatus::InvalidArgument, "p * n overflows"))?;
        let values = slice_in(data, len, "data")?;
        let ds = Dataset::new(DMatrix::from_column_slice(p, n, values))?;
        write_out(out, MtsDataset(ds))
    })
}

/// # Safety
/// `ds` must be null or a handle from [`mts_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mts_dataset_free(ds: *mut MtsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of dimensions, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_dataset_dim(ds: *const MtsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.p())
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_dataset_len(ds: *const MtsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Shrinks the mean of `x` toward the means of `k` auxiliary datasets.
///
/// # Safety
/// `x` must be a live handle, `aux` must point to `k` live handles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn mts_mean_estimate(
    x: *const MtsDataset,
    aux: *const *const MtsDataset,
    k: usize,
    weight_constraint: bool,
    whiten: MtsWhiten,
    partial_rank: usize,
    out: *mut *mut MtsResult,
) -> MtsStatus {
    guard(|| {
        let x = &x.as_ref().ok_or_else(|| fail(MtsStatus::NullPointer, "x is null"))?.0;
        let aux: Vec<Dataset> = datasets(aux, k, "aux")?.into_iter().cloned().collect();
        let opts = MeanMtsOptions {
            weight_constraint,
            whiten: whiten_mode(whiten, partial_rank),
            ..MeanMtsOptions::default()
        };
        let r = mts_mean(x, &aux, &opts)?;
        write_out(
            out,
            MtsResult {
                estimate: r.estimate.as_slice().to_vec(),
                lambda: r.lambda.as_slice().to_vec(),
                a_hat: sym_to_vec(&r.a_hat),
                b_hat: r.b_hat.as_slice().to_vec(),
                objective: r.objective,
            },
        )
    })
}

/// Shrinks the sample covariance of `x` toward structured targets followed
/// by the sample covariances of auxiliary datasets, in that order.
///
/// # Safety
/// `targets` must point to `n_targets` values, `aux` to `n_aux` live handles,
/// and `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn mts_cov_estimate(
    x: *const MtsDataset,
    targets: *const MtsTarget,
    n_targets: usize,
    aux: *const *const MtsDataset,
    n_aux: usize,
    whiten: MtsWhiten,
    partial_rank: usize,
    assume_zero_mean: bool,
    out: *mut *mut MtsResult,
) -> MtsStatus {
    guard(|| {
        let x = &x.as_ref().ok_or_else(|| fail(MtsStatus::NullPointer, "x is null"))?.0;
        let mut specs: Vec<TargetSpec> = if n_targets == 0 {
            Vec::new()
        } else if targets.is_null() {
            return Err(fail(MtsStatus::NullPointer, "targets is null"));
        } else {
            slice::from_raw_parts(targets, n_targets)
                .iter()
                .map(|t| match t {
                    MtsTarget::Identity => TargetSpec::IdentityScaled,
                    MtsTarget::Diagonal => TargetSpec::Diagonal,
                    MtsTarget::ConstCorr => TargetSpec::ConstCorr,
                })
                .collect()
        };
        specs.extend(datasets(aux, n_aux, "aux")?.into_iter().map(|d| TargetSpec::AuxDataset(d.clone())));
        let opts = CovMtsOptions {
            whiten: whiten_mode(whiten, partial_rank),
            assume_zero_mean,
        };
        let r = mts_cov(x, &specs, &opts)?;
        write_out(
            out,
            MtsResult {
                estimate: sym_to_vec(&r.estimate),
                lambda: r.lambda.as_slice().to_vec(),
                a_hat: sym_to_vec(&r.a_hat),
                b_hat: r.b_hat.as_slice().to_vec(),
                objective: r.objective,
            },
        )
    })
}

/// # Safety
/// `r` must be null or a live result handle.
#[no_mangle]
pub unsafe extern "C" fn mts_result_free(r: *mut MtsResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of targets K, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_result_num_targets(r: *const MtsResult) -> usize {
    r.as_ref().map_or(0, |r| r.lambda.len())
}

/// Length of the estimate: p for a mean, p·p for a covariance.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_result_estimate_len(r: *const MtsResult) -> usize {
    r.as_ref().map_or(0, |r| r.estimate.len())
}

/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mts_result_objective(r: *const MtsResult) -> f64 {
    r.as_ref().map_or(f64::NAN, |r| r.objective)
}

unsafe fn copy_field(r: *const MtsResult, buf: *mut f64, len: usize, field: fn(&MtsResult) -> &[f64]) -> MtsStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| fail(MtsStatus::NullPointer, "result is null"))?;
        let src = field(r);
        if len < src.len() {
            return Err(Failure(
                MtsStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} needed", src.len()),
            ));
        }
        if !src.is_empty() {
            if buf.is_null() {
                return Err(fail(MtsStatus::NullPointer, "buffer is null"));
            }
            ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        }
        Ok(())
    })
}

/// Copies the estimate (column-major for a covariance) into `buf`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mts_result_estimate(r: *const MtsResult, buf: *mut f64, len: usize) -> MtsStatus {
    copy_field(r, buf, len, |r| &r.estimate)
}

/// Copies the K intensities into `buf`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mts_result_lambda(r: *const MtsResult, buf: *mut f64, len: usize) -> MtsStatus {
    copy_field(r, buf, len, |r| &r.lambda)
}

/// Copies the K × K matrix Â into `buf`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mts_result_a_hat(r: *const MtsResult, buf: *mut f64, len: usize) -> MtsStatus {
    copy_field(r, buf, len, |r| &r.a_hat)
}

/// Copies the K entries of b̂ into `buf`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mts_result_b_hat(r: *const MtsResult, buf: *mut f64, len: usize) -> MtsStatus {
    copy_field(r, buf, len, |r| &r.b_hat)
}

/// Minimizes ½λᵀAλ − bᵀλ over λ ≥ 0, Σλ ≤ 1 and `m` extra rows
/// `rows[i·k .. i·k+k]·λ ≤ rhs[i]`. Writes K values to `lambda_out`.
///
/// # Safety
/// `a` must hold k·k doubles, `b` k, `rows` m·k, `rhs` m; `lambda_out` must
/// have room for k.
#[no_mangle]
pub unsafe extern "C" fn mts_qp_solve(
    a: *const f64,
    b: *const f64,
    k: usize,
    rows: *const f64,
    rhs: *const f64,
    m: usize,
    lambda_out: *mut f64,
) -> MtsStatus {
    guard(|| {
        if k == 0 {
            return Err(fail(MtsStatus::InvalidArgument, "k must be positive"));
        }
        let a = slice_in(a, k * k, "a")?;
        let b = slice_in(b, k, "b")?;
        let rows = slice_in(rows, m * k, "rows")?;
        let rhs = slice_in(rhs, m, "rhs")?;
        if lambda_out.is_null() {
            return Err(fail(MtsStatus::NullPointer, "lambda_out is null"));
        }
        let extra = (0..m)
            .map(|i| LinearConstraint::new(rows[i * k..(i + 1) * k].to_vec(), rhs[i]))
            .collect();
        let prob = QpProblem::new(
            SymMatrix::new(DMatrix::from_column_slice(k, k, a)),
            DVector::from_column_slice(b),
            extra,
        )?;
        let sol = solve(&prob)?;
        ptr::copy_nonoverlapping(sol.lambda.as_ptr(), lambda_out, k);
        Ok(())
    })
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full length including the terminator.
/// Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or have room for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn mts_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mts_version() -> *const c_char {
    const V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}
