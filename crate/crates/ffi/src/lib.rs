//! C ABI over `setkf`.
//!
//! Matrices cross the boundary as row-major `double` arrays whose shape is
//! implied by the model (`n` states, `m` outputs). Every fallible call returns
//! a [`SetkfStatus`]; on failure a message is kept per thread and can be read
//! back with [`setkf_last_error`]. Handles are opaque and owned by the caller,
//! who releases them with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use setkf::analysis::{closed_loop_rate_bounds, open_loop_rate};
use setkf::design::{
    design_search, design_search_closed_loop, feasibility_check, lmi_feasible, DesignProblem,
};
use setkf::estimation::{measurement_update, trigger_decide, FilterKind, FilterState, TriggerPolicy};
use setkf::linalg::{Mat, Vector};
use setkf::model::steady_state;
use setkf::riccati::fixed_point;
use setkf::{Error, SystemModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetkfStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    NotPositiveDefinite = 3,
    InvalidArgument = 4,
    UnstableSystem = 5,
    NoConvergence = 6,
    Infeasible = 7,
    Numerical = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetkfFilterKind {
    /// Plain Kalman filter, every measurement delivered.
    Standard = 0,
    /// Open-loop stochastic trigger, weight `Y`.
    Olset = 1,
    /// Closed-loop stochastic trigger on the innovation, weight `Z`.
    Clset = 2,
}

/// Validated plant.
pub struct SetkfModel {
    inner: SystemModel,
}

/// Estimator state bound to a model and trigger.
pub struct SetkfFilter {
    model: SystemModel,
    kind: FilterKind,
    policy: TriggerPolicy,
    state: FilterState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SetkfStatus {
    match err {
        Error::DimensionMismatch { .. } => SetkfStatus::DimensionMismatch,
        Error::NotPositiveDefinite(_) => SetkfStatus::NotPositiveDefinite,
        Error::UnstableSystem { .. } => SetkfStatus::UnstableSystem,
        Error::NoConvergence { .. } => SetkfStatus::NoConvergence,
        Error::Infeasible(_) => SetkfStatus::Infeasible,
        Error::SingularInnovation | Error::CalibrationFailed(_) => SetkfStatus::Numerical,
        Error::NotDetectable
        | Error::NotStabilizable
        | Error::MissingMeasurement
        | Error::InconsistentArgs(_)
        | Error::InvalidParameter(_)
        | Error::Config(_)
        | Error::Io(_) => SetkfStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SetkfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SetkfStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            SetkfStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SetkfStatus::Panic
        }
    }
}

unsafe fn read_mat(p: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<Mat, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let s = std::slice::from_raw_parts(p, rows * cols);
    Ok(Mat::from_row_slice(rows, cols, s))
}

unsafe fn read_vec(p: *const f64, len: usize, what: &'static str) -> Result<Vector, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(Vector::from_column_slice(std::slice::from_raw_parts(p, len)))
}

unsafe fn write_mat(p: *mut f64, m: &Mat, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let out = std::slice::from_raw_parts_mut(p, m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn write_vec(p: *mut f64, v: &Vector, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    std::slice::from_raw_parts_mut(p, v.len()).copy_from_slice(v.as_slice());
    Ok(())
}

unsafe fn write_scalar<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    *p = v;
    Ok(())
}

unsafe fn model_ref<'a>(p: *const SetkfModel) -> Result<&'a SystemModel, Failure> {
    p.as_ref().map(|m| &m.inner).ok_or(Failure::Null("model"))
}

unsafe fn filter_mut<'a>(p: *mut SetkfFilter) -> Result<&'a mut SetkfFilter, Failure> {
    p.as_mut().ok_or(Failure::Null("filter"))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn setkf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a model from row-major `A` (n x n), `C` (m x n), `Q` (n x n),
/// `R` (m x m) and `Sigma0` (n x n).
///
/// # Safety
/// Every matrix pointer must reference the stated number of doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_model_new(
    n: usize,
    m: usize,
    a: *const f64,
    c: *const f64,
    q: *const f64,
    r: *const f64,
    sigma0: *const f64,
    out: *mut *mut SetkfModel,
) -> SetkfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let model = SystemModel::new(
            read_mat(a, n, n, "A")?,
            read_mat(c, m, n, "C")?,
            read_mat(q, n, n, "Q")?,
            read_mat(r, m, m, "R")?,
            read_mat(sigma0, n, n, "Sigma0")?,
        )?;
        *out = Box::into_raw(Box::new(SetkfModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`setkf_model_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn setkf_model_free(model: *mut SetkfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `n` and `m` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_model_dims(
    model: *const SetkfModel,
    n: *mut usize,
    m: *mut usize,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        write_scalar(n, model.n(), "n")?;
        write_scalar(m, model.m(), "m")
    })
}

/// Stationary state covariance (n x n) and output covariance (m x m) of a
/// stable plant.
///
/// # Safety
/// `model` must be a live handle; outputs must hold n*n and m*m doubles.
#[no_mangle]
pub unsafe extern "C" fn setkf_steady_state(
    model: *const SetkfModel,
    sigma_out: *mut f64,
    pi_out: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let ss = steady_state(model_ref(model)?)?;
        write_mat(sigma_out, &ss.sigma, "sigma_out")?;
        write_mat(pi_out, &ss.pi, "pi_out")
    })
}

/// Fixed point of the prior-covariance Riccati map with measurement noise
/// `w` (m x m).
///
/// # Safety
/// `w` must hold m*m doubles and `out` n*n.
#[no_mangle]
pub unsafe extern "C" fn setkf_riccati_fixed_point(
    model: *const SetkfModel,
    w: *const f64,
    out: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let w = read_mat(w, model.m(), model.m(), "w")?;
        write_mat(out, &fixed_point(model, &w)?, "out")
    })
}

/// Average transmission rate of the open-loop trigger with weight `y`.
///
/// # Safety
/// `y` must hold m*m doubles; `rate` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_open_loop_rate(
    model: *const SetkfModel,
    y: *const f64,
    rate: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let y = read_mat(y, model.m(), model.m(), "y")?;
        let ss = steady_state(model)?;
        write_scalar(rate, open_loop_rate(&ss, &y)?, "rate")
    })
}

/// Asymptotic lower and upper bounds on the closed-loop transmission rate.
///
/// # Safety
/// `z` must hold m*m doubles; `lower` and `upper` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_closed_loop_rate_bounds(
    model: *const SetkfModel,
    z: *const f64,
    lower: *mut f64,
    upper: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let z = read_mat(z, model.m(), model.m(), "z")?;
        let cl = closed_loop_rate_bounds(model, &z)?;
        write_scalar(lower, cl.rate_lower, "lower")?;
        write_scalar(upper, cl.rate_upper, "upper")
    })
}

/// Sensor-side decision of a stochastic trigger. `v` is the measurement
/// (open loop) or the innovation (closed loop), `weight` its m x m weight and
/// `zeta` a uniform draw on [0, 1). Writes 1 to `transmit` when the packet is
/// sent.
///
/// # Safety
/// `weight` must hold m*m doubles, `v` m doubles; `transmit` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_stochastic_trigger(
    m: usize,
    weight: *const f64,
    v: *const f64,
    zeta: f64,
    transmit: *mut bool,
) -> SetkfStatus {
    guard(|| {
        let policy = TriggerPolicy::OpenLoop {
            y: read_mat(weight, m, m, "weight")?,
        };
        policy.validate(m)?;
        let v = read_vec(v, m, "v")?;
        let decision = trigger_decide(&policy, &v, &Vector::zeros(m), zeta, 0);
        write_scalar(transmit, decision, "transmit")
    })
}

/// Creates a filter at `k = 0` with prior `N(0, Sigma0)`. `weight` (m x m) is
/// `Y` for [`SetkfFilterKind::Olset`], `Z` for [`SetkfFilterKind::Clset`] and
/// ignored (may be null) for [`SetkfFilterKind::Standard`].
///
/// # Safety
/// `model` must be a live handle, `weight` as described, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_new(
    model: *const SetkfModel,
    kind: SetkfFilterKind,
    weight: *const f64,
    out: *mut *mut SetkfFilter,
) -> SetkfStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = ptr::null_mut();
        let model = model_ref(model)?.clone();
        let m = model.m();
        let (kind, policy) = match kind {
            SetkfFilterKind::Olset => (
                FilterKind::Olset,
                TriggerPolicy::OpenLoop {
                    y: read_mat(weight, m, m, "weight")?,
                },
            ),
            SetkfFilterKind::Clset => (
                FilterKind::Clset,
                TriggerPolicy::ClosedLoop {
                    z: read_mat(weight, m, m, "weight")?,
                },
            ),
            SetkfFilterKind::Standard => (FilterKind::Standard, TriggerPolicy::Random { probability: 1.0 }),
        };
        policy.validate(m)?;
        let state = FilterState::initial(&model);
        *out = Box::into_raw(Box::new(SetkfFilter {
            model,
            kind,
            policy,
            state,
        }));
        Ok(())
    })
}

/// # Safety
/// `filter` must come from [`setkf_filter_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_free(filter: *mut SetkfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Measurement update at the current step. Pass `arrived = false` and a null
/// `y` when no packet came; the absence is still informative for the
/// stochastic filters.
///
/// # Safety
/// `filter` must be a live handle; `y` null or m doubles.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_measurement_update(
    filter: *mut SetkfFilter,
    arrived: bool,
    y: *const f64,
) -> SetkfStatus {
    guard(|| {
        let f = filter_mut(filter)?;
        let y = if y.is_null() {
            None
        } else {
            Some(read_vec(y, f.model.m(), "y")?)
        };
        f.state = measurement_update(f.kind, &f.policy, &f.state, arrived, y.as_ref(), &f.model)?;
        Ok(())
    })
}

/// Propagates the posterior to the next step's prior.
///
/// # Safety
/// `filter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_time_update(filter: *mut SetkfFilter) -> SetkfStatus {
    guard(|| {
        let f = filter_mut(filter)?;
        f.state = f.state.time_update(&f.model);
        Ok(())
    })
}

/// Predicted measurement `C x_prior` (m doubles); a sensor running the
/// closed-loop trigger subtracts it from `y` to form the innovation.
///
/// # Safety
/// `filter` must be a live handle; `out` must hold m doubles.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_predicted_measurement(
    filter: *const SetkfFilter,
    out: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or(Failure::Null("filter"))?;
        write_vec(out, &f.state.predicted_measurement(&f.model), "out")
    })
}

/// Prior mean (n) and covariance (n x n) at the current step. Either output
/// may be null to skip it.
///
/// # Safety
/// `filter` must be a live handle; non-null outputs sized as stated.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_prior(
    filter: *const SetkfFilter,
    mean: *mut f64,
    cov: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or(Failure::Null("filter"))?;
        if !mean.is_null() {
            write_vec(mean, &f.state.prior_mean, "mean")?;
        }
        if !cov.is_null() {
            write_mat(cov, &f.state.prior_cov, "cov")?;
        }
        Ok(())
    })
}

/// Posterior mean (n) and covariance (n x n) after the last measurement
/// update. Either output may be null to skip it.
///
/// # Safety
/// `filter` must be a live handle; non-null outputs sized as stated.
#[no_mangle]
pub unsafe extern "C" fn setkf_filter_posterior(
    filter: *const SetkfFilter,
    mean: *mut f64,
    cov: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or(Failure::Null("filter"))?;
        if !mean.is_null() {
            write_vec(mean, &f.state.post_mean, "mean")?;
        }
        if !cov.is_null() {
            write_mat(cov, &f.state.post_cov, "cov")?;
        }
        Ok(())
    })
}

/// Whether the open-loop weight `y` keeps the worst-case steady prior
/// covariance strictly below `delta0`. With `use_lmi` the answer comes from
/// the LMI certificate instead of the fixed-point comparison.
///
/// # Safety
/// `y` must hold m*m doubles, `delta0` n*n; `feasible` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_design_feasible(
    model: *const SetkfModel,
    y: *const f64,
    delta0: *const f64,
    use_lmi: bool,
    feasible: *mut bool,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let y = read_mat(y, model.m(), model.m(), "y")?;
        let d = read_mat(delta0, model.n(), model.n(), "delta0")?;
        let ok = if use_lmi {
            lmi_feasible(model, &y, &d)?
        } else {
            feasibility_check(model, &y, &d)?
        };
        write_scalar(feasible, ok, "feasible")
    })
}

/// Smallest `theta` with `theta * I` meeting the covariance bound `delta0`.
/// `rate` receives the achieved rate (closed loop: its upper bound).
///
/// # Safety
/// `delta0` must hold n*n doubles; `theta` and `rate` writable.
#[no_mangle]
pub unsafe extern "C" fn setkf_design_search(
    model: *const SetkfModel,
    delta0: *const f64,
    closed_loop: bool,
    theta: *mut f64,
    rate: *mut f64,
) -> SetkfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let d = read_mat(delta0, model.n(), model.n(), "delta0")?;
        let problem = DesignProblem::new(model.clone(), d);
        let res = if closed_loop {
            design_search_closed_loop(&problem)?
        } else {
            design_search(&problem)?
        };
        write_scalar(theta, res.theta, "theta")?;
        write_scalar(rate, res.rate, "rate")
    })
}
