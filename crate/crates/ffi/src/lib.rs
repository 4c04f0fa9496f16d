//! C ABI for `lsjm-core`.
//!
//! Every function returns an [`LsjmStatus`]; on failure a description is
//! available from [`lsjm_last_error_message`] on the same thread. Handles
//! are opaque and must be released with the matching `_free` function.
//! No function panics across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lsjm_core::io::{fingerprint, parse_edge_list, ModelArtifact};
use lsjm_core::lsjm::FusedPosterior;
use lsjm_core::predict::link_probability;
use lsjm_core::{
    build_multiplex, fit_lsjm, fit_lsm, Error, FitConfig, MultiplexNetwork, PriorConfig,
    ViewVariationalState,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsjmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidInput = 4,
    Numerical = 5,
    Io = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Fit options; obtain defaults from [`lsjm_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LsjmOptions {
    pub prior_xi: c_double,
    pub prior_psi2: c_double,
    pub sigma2: c_double,
    pub dim: usize,
    pub tol: c_double,
    pub min_iters: usize,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
}

/// A multiplex network: one node set, one or more views.
pub struct LsjmNetwork {
    inner: MultiplexNetwork,
    fingerprint: String,
}

/// A fitted single-view or joint model.
pub struct LsjmModel {
    artifact: ModelArtifact,
    states: Vec<ViewVariationalState>,
    fused: Option<FusedPosterior>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> LsjmStatus {
    match e {
        Error::MalformedLine { .. }
        | Error::SelfLoop { .. }
        | Error::UnknownNode { .. }
        | Error::Artifact(_) => LsjmStatus::Parse,
        Error::SingularMatrix
        | Error::NonPositiveDefinite(_)
        | Error::FusedPrecisionNotPd
        | Error::DegenerateSvd => LsjmStatus::Numerical,
        Error::Io { .. } => LsjmStatus::Io,
        _ => LsjmStatus::InvalidInput,
    }
}

struct Fail(LsjmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsjmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LsjmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LsjmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(LsjmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LsjmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn split(opts: &LsjmOptions) -> (PriorConfig, FitConfig) {
    (
        PriorConfig {
            xi: opts.prior_xi,
            psi2: opts.prior_psi2,
            sigma2: opts.sigma2,
            dim: opts.dim,
        },
        FitConfig {
            tol: opts.tol,
            min_iters: opts.min_iters,
            max_iters: opts.max_iters,
            restarts: opts.restarts,
            seed: opts.seed,
            ..FitConfig::default()
        },
    )
}

/// Default options: N(0, 2) intercept prior, unit latent variance, two
/// dimensions, ten restarts.
#[no_mangle]
pub extern "C" fn lsjm_options_default() -> LsjmOptions {
    let p = PriorConfig::default();
    let c = FitConfig::default();
    LsjmOptions {
        prior_xi: p.xi,
        prior_psi2: p.psi2,
        sigma2: p.sigma2,
        dim: p.dim,
        tol: c.tol,
        min_iters: c.min_iters,
        max_iters: c.max_iters,
        restarts: c.restarts,
        seed: c.seed,
    }
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn lsjm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a network from `count` NUL-terminated edge-list texts, one per
/// view. All views must resolve to the same node set.
///
/// # Safety
/// `texts` must point to `count` valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_network_from_edge_lists(
    texts: *const *const c_char,
    count: usize,
    out: *mut *mut LsjmNetwork,
) -> LsjmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if texts.is_null() {
            return Err(null("texts"));
        }
        if count == 0 {
            return Err(Fail(
                LsjmStatus::InvalidInput,
                "at least one view is required".into(),
            ));
        }
        let mut raw = Vec::with_capacity(count);
        let mut views = Vec::with_capacity(count);
        let mut nodes = None;
        for k in 0..count {
            let text = str_arg(*texts.add(k), "edge list")?;
            let mut doc = parse_edge_list(text)?;
            match &nodes {
                None => nodes = Some(doc.nodes.clone()),
                Some(n) if *n != doc.nodes => {
                    return Err(Fail(
                        LsjmStatus::InvalidInput,
                        format!("view {k} has a different node set than view 0"),
                    ))
                }
                Some(_) => {}
            }
            if doc.view.label().is_empty() {
                doc.view.set_label(format!("view{}", k + 1));
            }
            raw.push(text.as_bytes());
            views.push(doc.view);
        }
        let inner = build_multiplex(nodes.expect("count > 0"), views)?;
        let handle = LsjmNetwork {
            inner,
            fingerprint: fingerprint(raw),
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `network` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn lsjm_network_free(network: *mut LsjmNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// `network` must be a live handle; `n` and `k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_network_shape(
    network: *const LsjmNetwork,
    n: *mut usize,
    k: *mut usize,
) -> LsjmStatus {
    guard(|| {
        let net = deref(network, "network")?;
        if n.is_null() || k.is_null() {
            return Err(null("output"));
        }
        *n = net.inner.n();
        *k = net.inner.k();
        Ok(())
    })
}

/// Fits the single-view model to view `view` of `network`.
///
/// # Safety
/// Pointers must be valid; `out` receives a new model handle.
#[no_mangle]
pub unsafe extern "C" fn lsjm_fit_lsm(
    network: *const LsjmNetwork,
    view: usize,
    options: *const LsjmOptions,
    out: *mut *mut LsjmModel,
) -> LsjmStatus {
    guard(|| {
        let net = deref(network, "network")?;
        let opts = deref(options, "options")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if view >= net.inner.k() {
            return Err(Fail(
                LsjmStatus::OutOfRange,
                format!("view {view} out of range"),
            ));
        }
        let (prior, config) = split(opts);
        let v = net.inner.view(view);
        let (state, report) = fit_lsm(v, &prior, &config)?;
        let artifact = ModelArtifact::from_lsm(
            net.inner.nodes(),
            v.label(),
            &state,
            &prior,
            &config,
            &report,
            net.fingerprint.clone(),
        );
        *out = Box::into_raw(Box::new(LsjmModel {
            artifact,
            states: vec![state],
            fused: None,
        }));
        Ok(())
    })
}

/// Fits the joint model to all views of `network`, with the same prior for
/// every view.
///
/// # Safety
/// Pointers must be valid; `out` receives a new model handle.
#[no_mangle]
pub unsafe extern "C" fn lsjm_fit_lsjm(
    network: *const LsjmNetwork,
    options: *const LsjmOptions,
    out: *mut *mut LsjmModel,
) -> LsjmStatus {
    guard(|| {
        let net = deref(network, "network")?;
        let opts = deref(options, "options")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (prior, config) = split(opts);
        let priors = vec![prior; net.inner.k()];
        let fit = fit_lsjm(&net.inner, &priors, &config)?;
        let labels: Vec<&str> = net.inner.views().iter().map(|v| v.label()).collect();
        let artifact = ModelArtifact::from_lsjm(
            net.inner.nodes(),
            &labels,
            &fit,
            &config,
            net.fingerprint.clone(),
        );
        *out = Box::into_raw(Box::new(LsjmModel {
            artifact,
            states: fit.view_states,
            fused: Some(fit.fused),
        }));
        Ok(())
    })
}

/// Loads a model written by [`lsjm_model_write`] or the `lsjm` tool.
///
/// # Safety
/// `path` must be a C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_read(
    path: *const c_char,
    out: *mut *mut LsjmModel,
) -> LsjmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let artifact = ModelArtifact::read(path)?;
        let states = artifact.view_states()?;
        let fused = artifact.fused_posterior()?;
        *out = Box::into_raw(Box::new(LsjmModel {
            artifact,
            states,
            fused,
        }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_free(model: *mut LsjmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of nodes, views and latent dimensions of a model.
///
/// # Safety
/// `model` must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_shape(
    model: *const LsjmModel,
    n: *mut usize,
    k: *mut usize,
    dim: *mut usize,
) -> LsjmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if n.is_null() || k.is_null() || dim.is_null() {
            return Err(null("output"));
        }
        *n = m.states[0].n();
        *k = m.states.len();
        *dim = m.states[0].dim();
        Ok(())
    })
}

/// Whether the selected restart met the stopping rule.
///
/// # Safety
/// `model` must be live; `converged` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_converged(
    model: *const LsjmModel,
    converged: *mut bool,
) -> LsjmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if converged.is_null() {
            return Err(null("converged"));
        }
        *converged = m.artifact.report.converged;
        Ok(())
    })
}

fn state(m: &LsjmModel, view: usize) -> Result<&ViewVariationalState, Fail> {
    m.states
        .get(view)
        .ok_or_else(|| Fail(LsjmStatus::OutOfRange, format!("view {view} out of range")))
}

/// Posterior mean and variance of the intercept of `view`.
///
/// # Safety
/// `model` must be live; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_alpha(
    model: *const LsjmModel,
    view: usize,
    mean: *mut c_double,
    variance: *mut c_double,
) -> LsjmStatus {
    guard(|| {
        let s = state(deref(model, "model")?, view)?;
        if mean.is_null() || variance.is_null() {
            return Err(null("output"));
        }
        *mean = s.xi_tilde;
        *variance = s.psi2_tilde;
        Ok(())
    })
}

/// Copies posterior mean positions, row-major `n × dim`, into `buffer`.
/// `view` equal to the number of views selects the fused positions of a
/// joint model.
///
/// # Safety
/// `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_positions(
    model: *const LsjmModel,
    view: usize,
    buffer: *mut c_double,
    len: usize,
) -> LsjmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let positions = match (&m.fused, view == m.states.len()) {
            (Some(f), true) => &f.positions_bar,
            _ => &state(m, view)?.positions,
        };
        let needed = positions.len();
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        if len < needed {
            return Err(Fail(
                LsjmStatus::BufferTooSmall,
                format!("buffer holds {len} values, {needed} needed"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buffer, needed);
        let cols = positions.ncols();
        for i in 0..positions.nrows() {
            for d in 0..cols {
                out[i * cols + d] = positions[(i, d)];
            }
        }
        Ok(())
    })
}

/// Plug-in probability of a link from `i` to `j` in `view`, using that
/// view's positions and intercept.
///
/// # Safety
/// `model` must be live; `probability` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_link_probability(
    model: *const LsjmModel,
    view: usize,
    i: usize,
    j: usize,
    probability: *mut c_double,
) -> LsjmStatus {
    guard(|| {
        let s = state(deref(model, "model")?, view)?;
        if probability.is_null() {
            return Err(null("probability"));
        }
        if i >= s.n() || j >= s.n() || i == j {
            return Err(Fail(LsjmStatus::OutOfRange, format!("bad dyad ({i}, {j})")));
        }
        let zi: Vec<f64> = s.positions.row(i).iter().copied().collect();
        let zj: Vec<f64> = s.positions.row(j).iter().copied().collect();
        *probability = link_probability(&zi, &zj, s.xi_tilde);
        Ok(())
    })
}

/// Writes the model as a TOML artifact.
///
/// # Safety
/// `model` must be live; `path` must be a C string.
#[no_mangle]
pub unsafe extern "C" fn lsjm_model_write(
    model: *const LsjmModel,
    path: *const c_char,
) -> LsjmStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let path = str_arg(path, "path")?;
        m.artifact.write(path)?;
        Ok(())
    })
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn lsjm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
