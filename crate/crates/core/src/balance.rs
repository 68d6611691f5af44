//! Triangle balance degree and its gradients.
//!
//! For a sign matrix `A`, the balance degree is
//! `D3 = (Tr(A^3) + Tr(|A|^3)) / (2 Tr(|A|^3))`: the fraction of directed
//! 3-cycles whose sign product is positive. Both traces are accumulated
//! edge-by-edge from `Tr(M^3) = sum_{(i,j)} M_ij (M^2)_ji`, so sparse inputs
//! never materialize a full cube.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{SignedDiGraph, SignedMatrix};

/// Default node cap for the brute-force census.
pub const BRUTE_FORCE_CAP: usize = 500;

/// Denominator guard for gradient evaluation.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// Balance census of a square matrix.
///
/// `d3` and the traces are computed from the actual (possibly real) values;
/// the triangle counts always describe the census of the sign pattern.
/// A graph without directed 3-cycles is vacuously balanced: `d3 = 1` with
/// `degenerate = true`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub d3: f64,
    pub balanced_triangles: u64,
    pub total_triangles: u64,
    pub trace_a3: f64,
    pub trace_abs_a3: f64,
    pub degenerate: bool,
}

/// Which quantities the balance gradient treats as variable.
///
/// `FlipDirectional` treats `|A|` as a constant, which is exact when the only
/// admissible moves are sign flips of existing edges. `FullReal`
/// differentiates numerator and denominator, for matrices whose entry
/// magnitudes genuinely vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    FlipDirectional,
    FullReal,
}

/// Per-edge trace data reused by the attack, the restorer, and the augmenter:
/// for each support entry `(i, j)` (row-major order), the value of
/// `(M^2)_ji` and `(|M|^2)_ji`, plus both traces.
#[derive(Clone, Debug)]
pub(crate) struct EdgeTraces {
    /// `(M^2)_ji` per entry, aligned with `SignedMatrix::entries()` order.
    pub sq: Vec<f64>,
    /// `(|M|^2)_ji` per entry.
    pub sq_abs: Vec<f64>,
    pub trace_a3: f64,
    pub trace_abs_a3: f64,
}

/// Walk products through each edge: `(M^2)_ji = sum_k M_jk M_ki`, i.e. the
/// 2-walks j -> k -> i that close a 3-cycle through edge (i, j).
pub(crate) fn edge_traces(m: &SignedMatrix) -> EdgeTraces {
    let mut sq = Vec::with_capacity(m.nnz());
    let mut sq_abs = Vec::with_capacity(m.nnz());
    let mut trace_a3 = 0.0;
    let mut trace_abs_a3 = 0.0;
    for (i, j, v) in m.entries() {
        let out_j = m.out_row(j);
        let in_i = m.in_col(i);
        let mut s = 0.0;
        let mut s_abs = 0.0;
        let (mut a, mut b) = (0, 0);
        while a < out_j.len() && b < in_i.len() {
            let (k1, v1) = out_j[a];
            let (k2, v2) = in_i[b];
            match k1.cmp(&k2) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += v1 * v2;
                    s_abs += v1.abs() * v2.abs();
                    a += 1;
                    b += 1;
                }
            }
        }
        trace_a3 += v * s;
        trace_abs_a3 += v.abs() * s_abs;
        sq.push(s);
        sq_abs.push(s_abs);
    }
    EdgeTraces {
        sq,
        sq_abs,
        trace_a3,
        trace_abs_a3,
    }
}

/// Structural census: number of directed 3-cycles on the support and how many
/// are balanced under the sign pattern of `m`.
fn sign_census(m: &SignedMatrix) -> (u64, u64) {
    let signs = m.map_values(|_, _, v| v.signum());
    let t = edge_traces(&signs);
    let walks = t.trace_abs_a3.round() as i64;
    let signed = t.trace_a3.round() as i64;
    let total = walks / 3;
    let balanced = (signed + walks) / 6;
    (balanced.max(0) as u64, total.max(0) as u64)
}

fn report_from_traces(trace_a3: f64, trace_abs_a3: f64, census: (u64, u64)) -> BalanceReport {
    let (balanced, total) = census;
    let degenerate = trace_abs_a3 <= 0.0;
    let d3 = if degenerate {
        1.0
    } else {
        (trace_a3 + trace_abs_a3) / (2.0 * trace_abs_a3)
    };
    BalanceReport {
        d3,
        balanced_triangles: balanced,
        total_triangles: total,
        trace_a3,
        trace_abs_a3,
        degenerate,
    }
}

/// Balance degree via the trace formula.
pub fn balance_degree(m: &SignedMatrix) -> BalanceReport {
    let t = edge_traces(m);
    report_from_traces(t.trace_a3, t.trace_abs_a3, sign_census(m))
}

/// Dense-path balance degree; used by oracles and the gradient tests.
pub fn balance_degree_dense(m: &Array2<f64>) -> BalanceReport {
    let m2 = m.dot(m);
    let abs = m.mapv(f64::abs);
    let abs2 = abs.dot(&abs);
    let n = m.nrows();
    let mut trace_a3 = 0.0;
    let mut trace_abs_a3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace_a3 += m2[(i, j)] * m[(j, i)];
            trace_abs_a3 += abs2[(i, j)] * abs[(j, i)];
        }
    }
    let census = sign_census(&SignedMatrix::from_dense(m));
    report_from_traces(trace_a3, trace_abs_a3, census)
}

/// Brute-force oracle: enumerate every directed 3-cycle `i -> j -> k -> i`
/// once and classify it by the parity of its negative edges.
pub fn balance_degree_bruteforce(g: &SignedDiGraph) -> Result<BalanceReport> {
    balance_degree_bruteforce_with_cap(g, BRUTE_FORCE_CAP)
}

pub fn balance_degree_bruteforce_with_cap(g: &SignedDiGraph, cap: usize) -> Result<BalanceReport> {
    if g.node_count() > cap {
        return Err(Error::GraphTooLarge {
            nodes: g.node_count(),
            cap,
        });
    }
    let m = g.to_adjacency();
    let mut balanced: u64 = 0;
    let mut total: u64 = 0;
    for (i, j, v_ij) in m.entries() {
        // count each cycle once: anchor at its minimal node
        for &(k, v_jk) in m.out_row(j) {
            if i < j && i < k {
                let v_ki = m.get(k, i);
                if v_ki != 0.0 {
                    total += 1;
                    if v_ij * v_jk * v_ki > 0.0 {
                        balanced += 1;
                    }
                }
            }
        }
    }
    let trace_abs_a3 = 3.0 * total as f64;
    let trace_a3 = 3.0 * (2.0 * balanced as f64 - total as f64);
    Ok(report_from_traces(
        if total == 0 { 0.0 } else { trace_a3 },
        trace_abs_a3,
        (balanced, total),
    ))
}

/// Analytic gradient of the balance degree of a real square matrix.
///
/// With `T = Tr(M^3)`, `S = Tr(|M|^3)`, `N = |M|`:
/// `dT/dM_ij = 3 (M^2)_ji` and `dS/dM_ij = 3 (N^2)_ji sgn(M_ij)`, `sgn(0) = 0`.
/// `FlipDirectional` returns `dT/dM / (2S)`; `FullReal` applies the quotient
/// rule to `(T + S) / (2S)`, giving `(S dT - T dS) / (2 S^2)`.
pub fn balance_gradient(m: &Array2<f64>, mode: GradientMode) -> Result<Array2<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "gradient needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let m2 = m.dot(m);
    let abs = m.mapv(f64::abs);
    let abs2 = abs.dot(&abs);
    let mut t = 0.0;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            t += m2[(i, j)] * m[(j, i)];
            s += abs2[(i, j)] * abs[(j, i)];
        }
    }
    if s <= DEGENERACY_EPS {
        return Err(Error::DegenerateDenominator {
            eps: DEGENERACY_EPS,
        });
    }
    let mut g = Array2::zeros((n, n));
    match mode {
        GradientMode::FlipDirectional => {
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] = 3.0 * m2[(j, i)] / (2.0 * s);
                }
            }
        }
        GradientMode::FullReal => {
            for i in 0..n {
                for j in 0..n {
                    let dt = 3.0 * m2[(j, i)];
                    let sgn = if m[(i, j)] > 0.0 {
                        1.0
                    } else if m[(i, j)] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    let ds = 3.0 * abs2[(j, i)] * sgn;
                    g[(i, j)] = (s * dt - t * ds) / (2.0 * s * s);
                }
            }
        }
    }
    Ok(g)
}

/// Sparse full-real gradient restricted to the support of `m`, in
/// `entries()` order. Off-support components are not represented.
pub(crate) fn balance_gradient_on_support(m: &SignedMatrix) -> Result<Vec<f64>> {
    let tr = edge_traces(m);
    let (t, s) = (tr.trace_a3, tr.trace_abs_a3);
    if s <= DEGENERACY_EPS {
        return Err(Error::DegenerateDenominator {
            eps: DEGENERACY_EPS,
        });
    }
    let mut out = Vec::with_capacity(m.nnz());
    for (k, (_, _, v)) in m.entries().enumerate() {
        let dt = 3.0 * tr.sq[k];
        let ds = 3.0 * tr.sq_abs[k] * v.signum();
        out.push((s * dt - t * ds) / (2.0 * s * s));
    }
    Ok(out)
}
