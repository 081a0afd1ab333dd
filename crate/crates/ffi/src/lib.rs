//! C interface to `toeplitz-asymptotics`.
//!
//! Symbols and factorizations cross the boundary as opaque handles. Every
//! fallible call returns a [`TaStatus`]; on failure the message is kept per
//! thread and can be read with [`ta_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use toeplitz_asymptotics::asymptotics::{default_section, szego_constant_e};
use toeplitz_asymptotics::error::Error;
use toeplitz_asymptotics::factor::{canonical_wh, WHFactors};
use toeplitz_asymptotics::symbol::format::{symbol_from_json, symbol_to_json};
use toeplitz_asymptotics::symbol::{zygmund_test_symbol, LaurentMatrixSeries};
use toeplitz_asymptotics::toeplitz::log_det_direct;

/// Status codes. Nonzero values other than the two negative ones match the
/// exit codes of the `toeplitz-asym` binary.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaStatus {
    Ok = 0,
    NullPointer = -1,
    Panic = -2,
    ConfigInvalid = 2,
    Io = 3,
    Json = 4,
    Csv = 5,
    CutoffTooLarge = 10,
    SingularSymbol = 11,
    BlockSizeMismatch = 12,
    GridTooCoarse = 13,
    NonZeroWinding = 14,
    TruncationTooSmall = 20,
    NumericallySingularSection = 21,
    EigFailure = 22,
    NonCanonical = 30,
    IllConditionedSection = 31,
    SpectrumTooClose = 32,
    NoConvergence = 40,
    ContourTooTight = 41,
    FNotAnalyticAtSample = 42,
    FitDegenerate = 50,
}

impl From<&Error> for TaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ConfigInvalid(_) => TaStatus::ConfigInvalid,
            Error::Io(_) => TaStatus::Io,
            Error::Json(_) => TaStatus::Json,
            Error::Csv(_) => TaStatus::Csv,
            Error::CutoffTooLarge { .. } => TaStatus::CutoffTooLarge,
            Error::SingularSymbol { .. } => TaStatus::SingularSymbol,
            Error::BlockSizeMismatch { .. } => TaStatus::BlockSizeMismatch,
            Error::GridTooCoarse { .. } => TaStatus::GridTooCoarse,
            Error::NonZeroWinding(_) => TaStatus::NonZeroWinding,
            Error::TruncationTooSmall { .. } => TaStatus::TruncationTooSmall,
            Error::NumericallySingularSection { .. } => TaStatus::NumericallySingularSection,
            Error::EigFailure(_) => TaStatus::EigFailure,
            Error::NonCanonical(_) => TaStatus::NonCanonical,
            Error::IllConditionedSection { .. } => TaStatus::IllConditionedSection,
            Error::SpectrumTooClose { .. } => TaStatus::SpectrumTooClose,
            Error::NoConvergence(_) => TaStatus::NoConvergence,
            Error::ContourTooTight { .. } => TaStatus::ContourTooTight,
            Error::FNotAnalyticAtSample(_) => TaStatus::FNotAnalyticAtSample,
            Error::FitDegenerate(_) => TaStatus::FitDegenerate,
        }
    }
}

/// Which factor to extract from a [`TaFactors`] handle.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaFactor {
    /// `u₋` of the right factorization `a = u₋u₊`.
    UMinus = 0,
    /// `u₊` of the right factorization.
    UPlus = 1,
    /// `v₊` of the left factorization `a = v₊v₋`.
    VPlus = 2,
    /// `v₋` of the left factorization.
    VMinus = 3,
}

/// Opaque matrix Laurent series.
pub struct TaSymbol(LaurentMatrixSeries);

/// Opaque Wiener-Hopf factorization.
pub struct TaFactors(WHFactors);

/// Residual diagnostics of a factorization.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TaResiduals {
    pub product_residual_right: f64,
    pub product_residual_left: f64,
    pub leakage: f64,
    pub inverse_margin: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), TaStatus>) -> TaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside library call".into());
            TaStatus::Panic
        }
    }
}

fn fail(e: Error) -> TaStatus {
    set_error(format!("{}: {e}", e.name()));
    TaStatus::from(&e)
}

fn null(what: &str) -> TaStatus {
    set_error(format!("null pointer: {what}"));
    TaStatus::NullPointer
}

unsafe fn symbol_ref<'a>(s: *const TaSymbol) -> Result<&'a LaurentMatrixSeries, TaStatus> {
    s.as_ref().map(|s| &s.0).ok_or_else(|| null("symbol"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), TaStatus> {
    if out.is_null() {
        return Err(null("output"));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. The pointer stays valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn ta_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a symbol from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_symbol_from_json(json: *const c_char, out: *mut *mut TaSymbol) -> TaStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| fail(Error::ConfigInvalid(format!("json text is not UTF-8: {e}"))))?;
        let a = symbol_from_json(text).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(TaSymbol(a))))
    })
}

/// Builds the lacunary test symbol with smoothness `gamma` and `levels`
/// dyadic levels. Phases are random when `use_seed` is nonzero.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_symbol_zygmund(
    gamma: f64,
    levels: u32,
    use_seed: i32,
    seed: u64,
    out: *mut *mut TaSymbol,
) -> TaStatus {
    guard(|| {
        let a = zygmund_test_symbol(gamma, levels, (use_seed != 0).then_some(seed)).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(TaSymbol(a))))
    })
}

/// Serializes a symbol to JSON. Release the string with [`ta_string_free`].
///
/// # Safety
/// `symbol` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_symbol_to_json(symbol: *const TaSymbol, out: *mut *mut c_char) -> TaStatus {
    guard(|| {
        let text = symbol_to_json(symbol_ref(symbol)?).map_err(fail)?;
        let c = CString::new(text).map_err(|e| fail(Error::ConfigInvalid(e.to_string())))?;
        write_out(out, c.into_raw())
    })
}

/// Block size of a symbol, or 0 for NULL.
///
/// # Safety
/// `symbol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ta_symbol_block_size(symbol: *const TaSymbol) -> usize {
    symbol.as_ref().map_or(0, |s| s.0.block_size())
}

/// # Safety
/// `symbol` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_symbol_free(symbol: *mut TaSymbol) {
    if !symbol.is_null() {
        drop(Box::from_raw(symbol));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ta_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `log det T_n(a)` of the `(n+1)N`-square section, imaginary part wrapped
/// to `(−π, π]`.
///
/// # Safety
/// `symbol` must be a live handle; `re` and `im` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn ta_log_det(symbol: *const TaSymbol, n: usize, re: *mut f64, im: *mut f64) -> TaStatus {
    guard(|| {
        let z = log_det_direct(symbol_ref(symbol)?, n).map_err(fail)?;
        write_out(re, z.re)?;
        write_out(im, z.im)
    })
}

/// The constant `E(a)` of the strong Szegő limit. `m = 0` picks the
/// default section.
///
/// # Safety
/// `symbol` must be a live handle; `re` and `im` writable pointers.
#[no_mangle]
pub unsafe extern "C" fn ta_szego_constant(symbol: *const TaSymbol, m: usize, re: *mut f64, im: *mut f64) -> TaStatus {
    guard(|| {
        let a = symbol_ref(symbol)?;
        let m = if m == 0 { default_section(a) } else { m };
        let z = szego_constant_e(a, m).map_err(fail)?;
        write_out(re, z.re)?;
        write_out(im, z.im)
    })
}

/// Canonical right and left Wiener-Hopf factorization with section or cap
/// `m` (`m = 0` picks the default).
///
/// # Safety
/// `symbol` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_factorize(symbol: *const TaSymbol, m: usize, out: *mut *mut TaFactors) -> TaStatus {
    guard(|| {
        let a = symbol_ref(symbol)?;
        let m = if m == 0 { default_section(a) } else { m };
        let w = canonical_wh(a, m).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(TaFactors(w))))
    })
}

/// Copies one factor into a new symbol handle.
///
/// # Safety
/// `factors` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_factors_get(
    factors: *const TaFactors,
    which: TaFactor,
    out: *mut *mut TaSymbol,
) -> TaStatus {
    guard(|| {
        let w = &factors.as_ref().ok_or_else(|| null("factors"))?.0;
        let s = match which {
            TaFactor::UMinus => &w.u_minus,
            TaFactor::UPlus => &w.u_plus,
            TaFactor::VPlus => &w.v_plus,
            TaFactor::VMinus => &w.v_minus,
        };
        write_out(out, Box::into_raw(Box::new(TaSymbol(s.clone()))))
    })
}

/// # Safety
/// `factors` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ta_factors_residuals(factors: *const TaFactors, out: *mut TaResiduals) -> TaStatus {
    guard(|| {
        let r = factors.as_ref().ok_or_else(|| null("factors"))?.0.residuals;
        write_out(
            out,
            TaResiduals {
                product_residual_right: r.product_residual_right,
                product_residual_left: r.product_residual_left,
                leakage: r.leakage,
                inverse_margin: r.inverse_margin,
            },
        )
    })
}

/// # Safety
/// `factors` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ta_factors_free(factors: *mut TaFactors) {
    if !factors.is_null() {
        drop(Box::from_raw(factors));
    }
}
