//! C ABI over the core toolkit.
//!
//! Every fallible call returns a [`StratoStatus`]; on failure the message is
//! kept per thread and can be fetched with [`strato_last_error`]. Handles are
//! opaque and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use strato::sharp_limit::limit_speed;
use strato::stratification::{brunt_vaisala, build_profile, BruntVaisala, DensityProfile, ProfileKind, Variant};
use strato::sturm_liouville::{compute_modes, orthonormality_residual, Basis, ModeSet};
use strato::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratoStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad arguments, unstable stratification or unresolved scales.
    InvalidInput = 2,
    /// Eigen-solve or other numerical failure.
    Numerical = 3,
    /// Output buffer shorter than required.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Density profile with its buoyancy frequency.
pub struct StratoProfile {
    profile: DensityProfile,
    buoyancy: BruntVaisala,
}

/// Computed vertical modes.
pub struct StratoModes {
    modes: ModeSet,
}

pub const STRATO_VARIANT_FULL: i32 = 0;
pub const STRATO_VARIANT_BOUSSINESQ: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> StratoStatus {
    match e.exit_code() {
        4 => StratoStatus::Numerical,
        _ => StratoStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), StratoStatus>) -> StratoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StratoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            StratoStatus::Panic
        }
    }
}

fn fail(e: Error) -> StratoStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn variant(v: i32) -> Result<Variant, StratoStatus> {
    match v {
        STRATO_VARIANT_FULL => Ok(Variant::Full),
        STRATO_VARIANT_BOUSSINESQ => Ok(Variant::Boussinesq),
        _ => {
            set_error(format!("unknown variant {v}"));
            Err(StratoStatus::InvalidInput)
        }
    }
}

fn make_profile(kind: ProfileKind, grid_size: usize, depth: f64, g: f64, v: i32, out: *mut *mut StratoProfile) -> Result<(), StratoStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(StratoStatus::NullPointer);
    }
    let profile = build_profile(&kind, grid_size, depth, g, variant(v)?).map_err(fail)?;
    let buoyancy = brunt_vaisala(&profile).map_err(fail)?;
    // SAFETY: `out` checked non-null above; caller owns the slot.
    unsafe { *out = Box::into_raw(Box::new(StratoProfile { profile, buoyancy })) };
    Ok(())
}

fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), StratoStatus> {
    if dst.is_null() {
        set_error("null output buffer");
        return Err(StratoStatus::NullPointer);
    }
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(StratoStatus::BufferTooSmall);
    }
    // SAFETY: caller guarantees `dst` points to `len >= src.len()` writable doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn modes_ref<'a>(m: *const StratoModes) -> Result<&'a ModeSet, StratoStatus> {
    // SAFETY: non-null handles come from `strato_modes_compute` and are live until freed.
    unsafe { m.as_ref() }.map(|m| &m.modes).ok_or_else(|| {
        set_error("null modes handle");
        StratoStatus::NullPointer
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn strato_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn strato_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Constant-buoyancy profile on `grid_size` uniform points over `[-depth, 0]`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn strato_profile_constant_n(
    n: f64,
    rho0: f64,
    grid_size: usize,
    depth: f64,
    g: f64,
    variant: i32,
    out: *mut *mut StratoProfile,
) -> StratoStatus {
    guard(|| make_profile(ProfileKind::ConstantN { n, rho0 }, grid_size, depth, g, variant, out))
}

/// Profile from `count` samples `(z, rho)` with `z` ascending from `-depth` to 0.
///
/// # Safety
/// `z` and `rho` must point to `count` doubles; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn strato_profile_tabulated(
    z: *const f64,
    rho: *const f64,
    count: usize,
    grid_size: usize,
    depth: f64,
    g: f64,
    variant: i32,
    out: *mut *mut StratoProfile,
) -> StratoStatus {
    guard(|| {
        if z.is_null() || rho.is_null() {
            set_error("null sample pointer");
            return Err(StratoStatus::NullPointer);
        }
        let kind = ProfileKind::Tabulated {
            z: std::slice::from_raw_parts(z, count).to_vec(),
            rho: std::slice::from_raw_parts(rho, count).to_vec(),
        };
        make_profile(kind, grid_size, depth, g, variant, out)
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn strato_profile_free(p: *mut StratoProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// First `modes` vertical modes of a profile.
///
/// # Safety
/// `profile` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_compute(profile: *const StratoProfile, modes: usize, out: *mut *mut StratoModes) -> StratoStatus {
    guard(|| {
        let (Some(p), false) = (profile.as_ref(), out.is_null()) else {
            set_error("null profile or output pointer");
            return Err(StratoStatus::NullPointer);
        };
        let modes = compute_modes(&p.profile, &p.buoyancy, modes).map_err(fail)?;
        *out = Box::into_raw(Box::new(StratoModes { modes }));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_free(m: *mut StratoModes) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of modes, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_count(m: *const StratoModes) -> usize {
    m.as_ref().map_or(0, |m| m.modes.mode_count())
}

/// Number of vertical grid points, 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_grid_len(m: *const StratoModes) -> usize {
    m.as_ref().map_or(0, |m| m.modes.grid_len())
}

/// Writes the speeds `c_1..c_M` into `out`.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_speeds(m: *const StratoModes, out: *mut f64, len: usize) -> StratoStatus {
    guard(|| copy_out(&modes_ref(m)?.speeds, out, len))
}

/// Writes the vertical grid into `out`.
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_grid(m: *const StratoModes, out: *mut f64, len: usize) -> StratoStatus {
    guard(|| copy_out(&modes_ref(m)?.z, out, len))
}

/// Writes the vertical-velocity shape of mode `n` (1-based).
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_w_shape(m: *const StratoModes, n: usize, out: *mut f64, len: usize) -> StratoStatus {
    guard(|| {
        let modes = modes_ref(m)?;
        if n == 0 || n > modes.mode_count() {
            set_error(format!("mode {n} outside 1..={}", modes.mode_count()));
            return Err(StratoStatus::InvalidInput);
        }
        copy_out(&modes.f[n - 1], out, len)
    })
}

/// Writes the horizontal-velocity shape of mode `n` (0-based, 0 is the barotropic one).
///
/// # Safety
/// `m` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_v_shape(m: *const StratoModes, n: usize, out: *mut f64, len: usize) -> StratoStatus {
    guard(|| {
        let modes = modes_ref(m)?;
        if n > modes.mode_count() {
            set_error(format!("mode {n} outside 0..={}", modes.mode_count()));
            return Err(StratoStatus::InvalidInput);
        }
        copy_out(&modes.g[n], out, len)
    })
}

/// Largest entry of the Gram-minus-identity matrix of the vertical-velocity basis.
///
/// # Safety
/// `m` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn strato_modes_orthonormality(m: *const StratoModes, out: *mut f64) -> StratoStatus {
    guard(|| {
        let modes = modes_ref(m)?;
        if out.is_null() {
            set_error("null output pointer");
            return Err(StratoStatus::NullPointer);
        }
        let res = orthonormality_residual(modes, Basis::FBasis).map_err(fail)?;
        *out = res.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        Ok(())
    })
}

/// Interfacial wave speed of the two-layer limit.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn strato_two_layer_speed(rho_plus: f64, rho_minus: f64, z0: f64, g: f64, out: *mut f64) -> StratoStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(StratoStatus::NullPointer);
        }
        *out = limit_speed(rho_plus, rho_minus, z0, g).map_err(fail)?;
        Ok(())
    })
}
