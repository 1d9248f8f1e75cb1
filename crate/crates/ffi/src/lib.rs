//! C ABI over the `symham` core: load an expression tree from JSON, evaluate
//! it and its partial derivatives, render it, and integrate trajectories.
//!
//! Every function returns a [`SymhamStatus`]. On failure a message is kept
//! per thread and can be read with [`symham_last_error_message`]. Trees are
//! opaque handles owned by the caller and released with [`symham_tree_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;
use std::slice;

use symham::expr::ExpressionTree;
use symham::integrate::{rollout_eval, Scheme, State, TimeGrid};
use symham::Error;

/// Result codes shared by every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymhamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed input: bad JSON, wrong lengths or operator kinds.
    Invalid = 3,
    /// Evaluation or integration produced a non-finite value.
    Numerical = 4,
    /// The output buffer is too small; the required size was reported.
    BufferTooSmall = 5,
    Panic = 6,
}

/// Integrator selector for [`symham_rollout`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymhamScheme {
    Leapfrog = 0,
    Rk2 = 1,
}

/// Opaque handle to an expression tree.
pub struct SymhamTree {
    tree: ExpressionTree,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> SymhamStatus {
    if e.is_numerical() {
        SymhamStatus::Numerical
    } else {
        SymhamStatus::Invalid
    }
}

fn guard(f: impl FnOnce() -> Result<(), SymhamStatus> + UnwindSafe) -> SymhamStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => SymhamStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            SymhamStatus::Panic
        }
    }
}

fn fail(e: Error) -> SymhamStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), SymhamStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        Err(SymhamStatus::NullPointer)
    } else {
        Ok(())
    }
}

unsafe fn tree_ref<'a>(tree: *const SymhamTree) -> Result<&'a ExpressionTree, SymhamStatus> {
    non_null(tree, "tree")?;
    Ok(&(*tree).tree)
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], SymhamStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], SymhamStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn symham_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn symham_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a tree from its JSON form (template, sequence, weights).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer. On
/// success `*out` owns a tree that must be released with
/// [`symham_tree_free`].
#[no_mangle]
pub unsafe extern "C" fn symham_tree_from_json(json: *const c_char, out: *mut *mut SymhamTree) -> SymhamStatus {
    guard(|| {
        non_null(json, "json")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(e.to_string());
            SymhamStatus::InvalidUtf8
        })?;
        let tree = ExpressionTree::from_json(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(SymhamTree { tree }));
        Ok(())
    })
}

/// Releases a tree. Null is ignored.
///
/// # Safety
/// `tree` must come from [`symham_tree_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn symham_tree_free(tree: *mut SymhamTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Momentum and position dimensions expected by the tree.
///
/// # Safety
/// `tree` must be a live handle; `p_dim` and `q_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn symham_tree_dims(
    tree: *const SymhamTree,
    p_dim: *mut usize,
    q_dim: *mut usize,
) -> SymhamStatus {
    guard(|| {
        let t = tree_ref(tree)?;
        non_null(p_dim, "p_dim")?;
        non_null(q_dim, "q_dim")?;
        *p_dim = t.template().momentum_dim();
        *q_dim = t.template().position_dim();
        Ok(())
    })
}

/// Evaluates `H(p, q)`.
///
/// # Safety
/// `p` and `q` must point to `p_len` and `q_len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn symham_tree_evaluate(
    tree: *const SymhamTree,
    p: *const f64,
    p_len: usize,
    q: *const f64,
    q_len: usize,
    out: *mut f64,
) -> SymhamStatus {
    guard(|| {
        let t = tree_ref(tree)?;
        let p = input(p, p_len, "p")?;
        let q = input(q, q_len, "q")?;
        non_null(out, "out")?;
        *out = t.evaluate(p, q).map_err(fail)?;
        Ok(())
    })
}

/// Writes `∂H/∂p` into `dp` (length `p_len`) and `∂H/∂q` into `dq`
/// (length `q_len`).
///
/// # Safety
/// All pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn symham_tree_partials(
    tree: *const SymhamTree,
    p: *const f64,
    p_len: usize,
    q: *const f64,
    q_len: usize,
    dp: *mut f64,
    dq: *mut f64,
) -> SymhamStatus {
    guard(|| {
        let t = tree_ref(tree)?;
        let p = input(p, p_len, "p")?;
        let q = input(q, q_len, "q")?;
        let (gp, gq) = t.partials(p, q).map_err(fail)?;
        output(dp, p_len, "dp")?.copy_from_slice(&gp);
        output(dq, q_len, "dq")?.copy_from_slice(&gq);
        Ok(())
    })
}

/// Renders the tree as text, folded (`folded != 0`) or raw. Writes at most
/// `capacity` bytes including the terminating NUL and stores the required
/// capacity in `needed`.
///
/// # Safety
/// `buf` must have room for `capacity` bytes (it may be null when
/// `capacity` is 0); `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn symham_tree_render(
    tree: *const SymhamTree,
    folded: i32,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> SymhamStatus {
    guard(|| {
        let t = tree_ref(tree)?;
        non_null(needed, "needed")?;
        let text = if folded != 0 { t.fold().render() } else { t.render() };
        let bytes = text.as_bytes();
        *needed = bytes.len() + 1;
        if capacity < bytes.len() + 1 {
            set_error(format!("render needs {} bytes", bytes.len() + 1));
            return Err(SymhamStatus::BufferTooSmall);
        }
        non_null(buf, "buf")?;
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Integrates the tree's Hamiltonian from `(p0, q0)` for `steps` steps of
/// size `dt`, each split into `substeps` substeps. Writes `steps + 1` rows of
/// `(p, q)` into `out`, which must hold `(steps + 1) · 2 · dim` doubles.
///
/// # Safety
/// `p0` and `q0` must hold `dim` doubles each; `out` as stated above.
#[no_mangle]
pub unsafe extern "C" fn symham_rollout(
    tree: *const SymhamTree,
    scheme: SymhamScheme,
    p0: *const f64,
    q0: *const f64,
    dim: usize,
    dt: f64,
    steps: usize,
    substeps: usize,
    out: *mut f64,
) -> SymhamStatus {
    guard(|| {
        let t = tree_ref(tree)?;
        let p = input(p0, dim, "p0")?;
        let q = input(q0, dim, "q0")?;
        let rows = steps.checked_add(1).ok_or(SymhamStatus::Invalid)?;
        let len = rows.checked_mul(2 * dim).ok_or(SymhamStatus::Invalid)?;
        let out = output(out, len, "out")?;
        let scheme = match scheme {
            SymhamScheme::Leapfrog => Scheme::Leapfrog,
            SymhamScheme::Rk2 => Scheme::Rk2,
        };
        let grid = TimeGrid::new(0.0, dt, steps)
            .and_then(|g| g.with_substeps(substeps))
            .map_err(fail)?;
        let init = State::new(p.to_vec(), q.to_vec());
        let traj = rollout_eval(t, t.weights(), &init, &grid, scheme).map_err(fail)?;
        for (row, s) in out.chunks_mut(2 * dim).zip(&traj.states) {
            row[..dim].copy_from_slice(&s.p);
            row[dim..].copy_from_slice(&s.q);
        }
        Ok(())
    })
}
