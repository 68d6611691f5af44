//! C ABI for the signet toolkit: opaque graph handles, integer error codes,
//! and a thread-local last-error message.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::PathBuf;

use signet::attack::{balance_attack, random_attack, AttackBudget};
use signet::balance::{balance_degree, balance_degree_bruteforce};
use signet::defense::balance_learning_restore;
use signet::graph::{overlap_ratio, perturbation_distance, EdgeListFormat, SignedDiGraph};
use signet::synth::{two_faction_graph, FactionConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SignetStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidConfig = 4,
    NumericError = 5,
    IoError = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &signet::Error) -> SignetStatus {
    use signet::Error as E;
    match err {
        E::MalformedLine { .. }
        | E::DuplicateEdge { .. }
        | E::SelfLoop { .. }
        | E::ZeroRating { .. } => SignetStatus::ParseError,
        E::InvalidConfig(_) => SignetStatus::InvalidConfig,
        E::Io(_) | E::Json(_) | E::BadCheckpoint(_) => SignetStatus::IoError,
        _ => SignetStatus::NumericError,
    }
}

/// Opaque signed directed graph handle.
pub struct SignetGraph {
    graph: SignedDiGraph,
}

/// Balance census of a graph, mirrored as a flat C struct.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SignetBalanceReport {
    pub d3: c_double,
    pub balanced_triangles: u64,
    pub total_triangles: u64,
    pub trace_a3: c_double,
    pub trace_abs_a3: c_double,
    /// 1 when the graph has no directed 3-cycles (d3 is vacuously 1).
    pub degenerate: c_int,
}

/// Last error message for this thread, or NULL when the previous call
/// succeeded. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn signet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// # Safety
/// `text` must point to a NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_parse(
    text: *const c_char,
    rated: c_int,
    out: *mut *mut SignetGraph,
) -> SignetStatus {
    if text.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        set_error("edge list is not valid UTF-8".into());
        return SignetStatus::InvalidUtf8;
    };
    let format = if rated != 0 {
        EdgeListFormat::Rated
    } else {
        EdgeListFormat::Signed
    };
    match SignedDiGraph::parse_edge_list(text, format) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SignetGraph { graph }));
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `path` must be a NUL-terminated file path; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_load(
    path: *const c_char,
    rated: c_int,
    out: *mut *mut SignetGraph,
) -> SignetStatus {
    if path.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        set_error("path is not valid UTF-8".into());
        return SignetStatus::InvalidUtf8;
    };
    let text = match std::fs::read_to_string(PathBuf::from(path)) {
        Ok(t) => t,
        Err(e) => {
            set_error(e.to_string());
            return SignetStatus::IoError;
        }
    };
    let c_text = match CString::new(text) {
        Ok(c) => c,
        Err(_) => {
            set_error("file contains NUL bytes".into());
            return SignetStatus::ParseError;
        }
    };
    signet_graph_parse(c_text.as_ptr(), rated, out)
}

/// Generate a two-faction synthetic graph.
///
/// # Safety
/// `out` must be a valid pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_two_faction(
    n: u64,
    p_in: c_double,
    p_out: c_double,
    sign_noise: c_double,
    seed: u64,
    out: *mut *mut SignetGraph,
) -> SignetStatus {
    if out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let cfg = FactionConfig {
        n: n as usize,
        p_in,
        p_out,
        sign_noise,
        seed,
    };
    match two_faction_graph(&cfg) {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SignetGraph { graph }));
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `g` must be a handle from this library, not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_free(g: *mut SignetGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_node_count(g: *const SignetGraph) -> u64 {
    if g.is_null() {
        return 0;
    }
    (*g).graph.node_count() as u64
}

/// # Safety
/// `g` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_edge_count(g: *const SignetGraph) -> u64 {
    if g.is_null() {
        return 0;
    }
    (*g).graph.edge_count() as u64
}

/// # Safety
/// `g` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_positive_edge_count(g: *const SignetGraph) -> u64 {
    if g.is_null() {
        return 0;
    }
    (*g).graph.positive_edge_count() as u64
}

/// Canonical edge-list serialization. The returned string must be released
/// with `signet_string_free`.
///
/// # Safety
/// `g` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn signet_graph_to_edge_list(g: *const SignetGraph) -> *mut c_char {
    if g.is_null() {
        return std::ptr::null_mut();
    }
    CString::new((*g).graph.to_canonical())
        .map_or(std::ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `s` must have been returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn signet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Balance census via the trace formula.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn signet_balance_degree(
    g: *const SignetGraph,
    out: *mut SignetBalanceReport,
) -> SignetStatus {
    if g.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let r = balance_degree(&(*g).graph.to_adjacency());
    *out = SignetBalanceReport {
        d3: r.d3,
        balanced_triangles: r.balanced_triangles,
        total_triangles: r.total_triangles,
        trace_a3: r.trace_a3,
        trace_abs_a3: r.trace_abs_a3,
        degenerate: c_int::from(r.degenerate),
    };
    SignetStatus::Ok
}

/// Balance census via the brute-force triangle enumeration (node cap 500).
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn signet_balance_degree_bruteforce(
    g: *const SignetGraph,
    out: *mut SignetBalanceReport,
) -> SignetStatus {
    if g.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    match balance_degree_bruteforce(&(*g).graph) {
        Ok(r) => {
            *out = SignetBalanceReport {
                d3: r.d3,
                balanced_triangles: r.balanced_triangles,
                total_triangles: r.total_triangles,
                trace_a3: r.trace_a3,
                trace_abs_a3: r.trace_abs_a3,
                degenerate: c_int::from(r.degenerate),
            };
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Greedy balance attack at `ptb_rate`; writes a new poisoned graph handle.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn signet_balance_attack(
    g: *const SignetGraph,
    ptb_rate: c_double,
    out: *mut *mut SignetGraph,
) -> SignetStatus {
    if g.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let m = (*g).graph.to_adjacency();
    match balance_attack(&m, AttackBudget::Rate(ptb_rate))
        .and_then(|plan| (*g).graph.with_signs_from(&plan.final_matrix))
    {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SignetGraph { graph }));
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Uniform random sign flips at `ptb_rate`, seeded.
///
/// # Safety
/// `g` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn signet_random_attack(
    g: *const SignetGraph,
    ptb_rate: c_double,
    seed: u64,
    out: *mut *mut SignetGraph,
) -> SignetStatus {
    if g.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let m = (*g).graph.to_adjacency();
    match random_attack(&m, AttackBudget::Rate(ptb_rate), seed)
        .and_then(|plan| (*g).graph.with_signs_from(&plan.final_matrix))
    {
        Ok(graph) => {
            *out = Box::into_raw(Box::new(SignetGraph { graph }));
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Balance-learning restoration toward `target_d3` (flip cap = edge count).
/// Writes a new restored graph handle and, optionally, the flip count.
///
/// # Safety
/// `g` and `out` must be valid; `flips_used` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn signet_balance_restore(
    g: *const SignetGraph,
    target_d3: c_double,
    out: *mut *mut SignetGraph,
    flips_used: *mut u64,
) -> SignetStatus {
    if g.is_null() || out.is_null() {
        set_error("null argument".into());
        return SignetStatus::NullArgument;
    }
    let m = (*g).graph.to_adjacency();
    let report = balance_learning_restore(&m, target_d3, m.nnz());
    match (*g).graph.with_signs_from(&report.restored_matrix) {
        Ok(graph) => {
            if !flips_used.is_null() {
                *flips_used = report.flips_used as u64;
            }
            *out = Box::into_raw(Box::new(SignetGraph { graph }));
            SignetStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// Number of edge positions whose signs differ between two same-topology
/// graphs; -1 on mismatch.
///
/// # Safety
/// Both handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn signet_perturbation_distance(
    a: *const SignetGraph,
    b: *const SignetGraph,
) -> i64 {
    if a.is_null() || b.is_null() {
        set_error("null argument".into());
        return -1;
    }
    match perturbation_distance(&(*a).graph.to_adjacency(), &(*b).graph.to_adjacency()) {
        Ok(d) => d as i64,
        Err(e) => {
            set_error(e.to_string());
            -1
        }
    }
}

/// Fraction of edges with agreeing signs; NaN on mismatch.
///
/// # Safety
/// Both handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn signet_overlap_ratio(
    a: *const SignetGraph,
    b: *const SignetGraph,
) -> c_double {
    if a.is_null() || b.is_null() {
        set_error("null argument".into());
        return f64::NAN;
    }
    match overlap_ratio(&(*a).graph.to_adjacency(), &(*b).graph.to_adjacency()) {
        Ok(r) => r,
        Err(e) => {
            set_error(e.to_string());
            f64::NAN
        }
    }
}
