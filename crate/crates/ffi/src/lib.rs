//! C ABI over the modvar toolkit.
//!
//! Every function returns a [`ModvarStatus`]; results come back through
//! out-pointers. On failure [`modvar_last_error_message`] describes the
//! problem. Two-particle states live behind the opaque [`ModvarState`]
//! handle and must be released with [`modvar_state_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use modvar::criterion::{
    evaluate_criterion, robustness_threshold, visibility_of_admixture, CriterionAxis, GridOptions,
};
use modvar::dynamics::{protocol_visibility, ProtocolSpec};
use modvar::modular::{fringe_function, squeezing_s1, squeezing_s2};
use modvar::spectral::{perturbative_c, solve_c};
use modvar::states::{
    build_classical_correlated, build_mpe, BuiltState, Envelope, MixtureState, ModularStateParams,
    StateDescriptor,
};
use modvar::{Error, ModularScale};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModvarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NonFinite = 3,
    Incommensurate = 4,
    GridTooSmall = 5,
    GridTooCoarse = 6,
    Aliasing = 7,
    Arity = 8,
    BracketFailure = 9,
    NoConvergence = 10,
    Format = 11,
    Io = 12,
    Json = 13,
    Utf8 = 14,
    Panic = 15,
}

impl From<&Error> for ModvarStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::NonFinite(_) => Self::NonFinite,
            Error::InvalidParameter(_) => Self::InvalidParameter,
            Error::Incommensurate { .. } => Self::Incommensurate,
            Error::GridTooSmall(_) => Self::GridTooSmall,
            Error::GridTooCoarse(_) => Self::GridTooCoarse,
            Error::Aliasing(_) => Self::Aliasing,
            Error::Arity { .. } => Self::Arity,
            Error::BracketFailure(_) => Self::BracketFailure,
            Error::NoConvergence(_) => Self::NoConvergence,
            Error::Format(_) => Self::Format,
            Error::Io(_) => Self::Io,
            Error::Json(_) => Self::Json,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(ModvarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), format!("{}: {e}", e.kind()))
    }
}

fn null() -> Failure {
    Failure(ModvarStatus::NullPointer, "null pointer argument".into())
}

/// Runs `body`, records any error or panic, and maps it to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ModvarStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ModvarStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ModvarStatus::Panic
        }
    }
}

fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    // SAFETY: caller guarantees `out` points to writable storage for a T.
    unsafe { out.write(value) };
    Ok(())
}

/// Two-particle state handle.
pub struct ModvarState {
    state: MixtureState,
    scale: ModularScale,
    descriptor: Option<StateDescriptor>,
}

fn boxed(state: ModvarState, out: *mut *mut ModvarState) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    write(out, Box::into_raw(Box::new(state)))
}

fn handle<'a>(state: *const ModvarState) -> Result<&'a ModvarState, Failure> {
    // SAFETY: non-null handles come from `boxed` and are live until freed.
    unsafe { state.as_ref() }.ok_or_else(null)
}

fn params(n: usize, x0: f64, n0: i64, lambda: f64, sigma: f64) -> Result<(ModularStateParams, ModularScale), Failure> {
    let scale = ModularScale::new(lambda)?;
    Ok((ModularStateParams::new(n, x0, n0, lambda, Envelope::gaussian(sigma)?), scale))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn modvar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Squeezing functions S1(N) and S2(N).
#[no_mangle]
pub extern "C" fn modvar_squeezing(n: usize, s1: *mut f64, s2: *mut f64) -> ModvarStatus {
    guard(|| {
        if s1.is_null() || s2.is_null() {
            return Err(null());
        }
        write(s1, squeezing_s1(n)?)?;
        write(s2, squeezing_s2(n)?)
    })
}

/// Fringe function F_N(x).
#[no_mangle]
pub extern "C" fn modvar_fringe(n: usize, x: f64, out: *mut f64) -> ModvarStatus {
    guard(|| write(out, fringe_function(n, x)?))
}

/// Criterion constant c by the shooting solve, to tolerance `tol`.
#[no_mangle]
pub extern "C" fn modvar_solve_c(tol: f64, out: *mut f64) -> ModvarStatus {
    guard(|| write(out, solve_c(tol)?.c))
}

/// First-order estimate 7/90 of c.
#[no_mangle]
pub extern "C" fn modvar_perturbative_c() -> f64 {
    perturbative_c()
}

/// MPE state with a Gaussian envelope of width `sigma`.
#[no_mangle]
pub extern "C" fn modvar_state_new_mpe(
    n: usize,
    x0: f64,
    n0: i64,
    lambda: f64,
    sigma: f64,
    out: *mut *mut ModvarState,
) -> ModvarStatus {
    guard(|| {
        let (p, scale) = params(n, x0, n0, lambda, sigma)?;
        boxed(ModvarState { state: build_mpe(&p)?.into(), scale, descriptor: None }, out)
    })
}

/// Classically correlated counterpart of the MPE state.
#[no_mangle]
pub extern "C" fn modvar_state_new_classical(
    n: usize,
    x0: f64,
    n0: i64,
    lambda: f64,
    sigma: f64,
    out: *mut *mut ModvarState,
) -> ModvarStatus {
    guard(|| {
        let (p, scale) = params(n, x0, n0, lambda, sigma)?;
        boxed(ModvarState { state: build_classical_correlated(&p)?, scale, descriptor: None }, out)
    })
}

/// Two-particle state from a JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn modvar_state_from_json(json: *const c_char, out: *mut *mut ModvarState) -> ModvarStatus {
    guard(|| {
        if json.is_null() {
            return Err(null());
        }
        // SAFETY: checked non-null; caller guarantees NUL termination.
        let text = unsafe { CStr::from_ptr(json) }
            .to_str()
            .map_err(|e| Failure(ModvarStatus::Utf8, format!("utf8: {e}")))?;
        let d = StateDescriptor::from_json(text)?;
        let scale = d.scale()?;
        match d.build()? {
            BuiltState::Pair(state) => boxed(ModvarState { state, scale, descriptor: Some(d) }, out),
            BuiltState::Single(_) => Err(Failure(ModvarStatus::Arity, "arity: descriptor is a single-particle state".into())),
        }
    })
}

/// `w_a·a + w_b·b` with weights renormalized. Both states must share λ.
#[no_mangle]
pub extern "C" fn modvar_state_mix(
    a: *const ModvarState,
    w_a: f64,
    b: *const ModvarState,
    w_b: f64,
    out: *mut *mut ModvarState,
) -> ModvarStatus {
    guard(|| {
        let (a, b) = (handle(a)?, handle(b)?);
        if a.scale != b.scale {
            return Err(Failure(ModvarStatus::InvalidParameter, "invalid parameter: mixed states need the same modular scale".into()));
        }
        let state = MixtureState::combine(vec![(w_a, a.state.clone()), (w_b, b.state.clone())])?;
        boxed(ModvarState { state, scale: a.scale, descriptor: None }, out)
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `state` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modvar_state_free(state: *mut ModvarState) {
    if !state.is_null() {
        // SAFETY: handle came from Box::into_raw and is freed once.
        drop(unsafe { Box::from_raw(state) });
    }
}

/// Serialized state. Handles built from a descriptor return the descriptor;
/// others return the full component list. Free with [`modvar_string_free`].
#[no_mangle]
pub extern "C" fn modvar_state_to_json(state: *const ModvarState, out: *mut *mut c_char) -> ModvarStatus {
    guard(|| {
        let s = handle(state)?;
        let text = match &s.descriptor {
            Some(d) => d.to_json(),
            None => serde_json::to_string(&s.state).map_err(Error::from)?,
        };
        let c = CString::new(text).map_err(|e| Failure(ModvarStatus::Format, format!("format: {e}")))?;
        write(out, c.into_raw())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn modvar_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: string came from CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ModvarCriterion {
    pub var_n_tot: f64,
    pub var_mod_rel: f64,
    pub lhs: f64,
    pub bound: f64,
    pub c: f64,
    pub violated: bool,
    pub marginal: bool,
}

/// Criterion on the integer-momentum axis. `grid_points = 0` picks 2^16.
#[no_mangle]
pub extern "C" fn modvar_evaluate_criterion(
    state: *const ModvarState,
    grid_points: usize,
    out: *mut ModvarCriterion,
) -> ModvarStatus {
    guard(|| {
        let s = handle(state)?;
        let points = if grid_points == 0 { 1 << 16 } else { grid_points };
        let r = evaluate_criterion(&s.state, s.scale, CriterionAxis::MomentumInteger, GridOptions::with_points(points))?;
        write(
            out,
            ModvarCriterion {
                var_n_tot: r.var_n_tot,
                var_mod_rel: r.var_mod_rel,
                lhs: r.lhs,
                bound: r.bound,
                c: r.c,
                violated: r.violated,
                marginal: r.marginal,
            },
        )
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ModvarRobustness {
    pub epsilon_closed_form: f64,
    pub epsilon_bisection: f64,
    pub discrepancy: f64,
    pub visibility_at_threshold: f64,
    pub flagged: bool,
}

/// Admixture threshold for the N-component MPE state. `grid_points = 0` picks 2^14.
#[no_mangle]
pub extern "C" fn modvar_robustness(
    n: usize,
    lambda: f64,
    sigma: f64,
    grid_points: usize,
    out: *mut ModvarRobustness,
) -> ModvarStatus {
    guard(|| {
        let (p, _) = params(n, 0.0, 0, lambda, sigma)?;
        let points = if grid_points == 0 { 1 << 14 } else { grid_points };
        let r = robustness_threshold(&p, GridOptions::with_points(points))?;
        write(
            out,
            ModvarRobustness {
                epsilon_closed_form: r.epsilon_closed_form,
                epsilon_bisection: r.epsilon_bisection,
                discrepancy: r.discrepancy,
                visibility_at_threshold: r.visibility_at_threshold,
                flagged: r.flagged,
            },
        )
    })
}

/// Fringe visibility of `(1−ε)·MPE + ε·classical`.
#[no_mangle]
pub extern "C" fn modvar_visibility(epsilon: f64, n: usize, out: *mut f64) -> ModvarStatus {
    guard(|| write(out, visibility_of_admixture(epsilon, n)?))
}

/// Visibility of N packets emitted `stagger` apart, evaluated at `meeting_time`.
#[no_mangle]
pub extern "C" fn modvar_protocol_visibility(
    n: usize,
    stagger: f64,
    lambda: f64,
    sigma: f64,
    mass: f64,
    meeting_time: f64,
    out: *mut f64,
) -> ModvarStatus {
    guard(|| {
        let spec = ProtocolSpec::uniform(n, stagger, lambda, Envelope::gaussian(sigma)?, mass);
        write(out, protocol_visibility(&spec, meeting_time)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_out_pointer_is_reported() {
        assert_eq!(modvar_fringe(2, 0.1, ptr::null_mut()), ModvarStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(modvar_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("null"));
    }
}
