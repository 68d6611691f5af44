//! Learnable balance augmentation.
//!
//! A flip-probability matrix with the poisoned graph's support is optimized
//! by projected gradient descent so that the expected augmented matrix
//! `a_ij (1 - 2 delta_ij)` has a high balance degree. A positive view is then
//! sampled by flipping the top-`n_D%` entries of the optimized matrix.

use serde::Serialize;

use crate::balance::{balance_degree, balance_gradient_on_support};
use crate::error::{Error, Result};
use crate::graph::SignedMatrix;

/// Initial probability on every support entry.
pub const DELTA_INIT: f64 = 0.1;

/// Default projected-gradient step size; calibrated so a few hundred steps
/// move probabilities across most of [0, 1] on desk-scale graphs.
pub const DEFAULT_STEP_SIZE: f64 = 20.0;

/// Candidate sampling budgets scanned by [`select_nd_percent`], in percent.
pub const ND_GRID: [f64; 10] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];

/// Balance the sampled view should reach for a budget to be accepted.
pub const ND_TARGET_D3: f64 = 0.9;

/// Flip probabilities on the poisoned graph's support plus the sampling
/// budget and the optimizer's loss trace.
#[derive(Clone, Debug)]
pub struct AugmenterState {
    /// Probabilities in [0, 1]; support equals the poisoned adjacency.
    pub delta: SignedMatrix,
    /// Percentage of edges flipped when sampling the positive view.
    pub nd_percent: f64,
    pub loss_trace: Vec<f64>,
}

impl AugmenterState {
    /// Uniform initialization on the support of `poisoned`.
    pub fn init(poisoned: &SignedMatrix, nd_percent: f64) -> Self {
        AugmenterState {
            delta: poisoned.map_values(|_, _, _| DELTA_INIT),
            nd_percent,
            loss_trace: Vec::new(),
        }
    }

    /// Serializable snapshot: sparse triplets plus metadata.
    pub fn to_json(&self) -> serde_json::Value {
        let triplets: Vec<(u32, u32, f64)> = self.delta.entries().collect();
        serde_json::json!({
            "nd_percent": self.nd_percent,
            "loss_trace": self.loss_trace,
            "delta": triplets,
        })
    }
}

/// Binary sign-perturbation mask on the edge support.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbationMask {
    pub dim: usize,
    /// Edges selected for flipping.
    pub ones: Vec<(u32, u32)>,
}

impl PerturbationMask {
    /// Deterministic top-k mask: the `round(nd_percent/100 * |E|)` entries
    /// with the largest probabilities, ties broken by smallest `(i, j)`.
    pub fn top_k(state: &AugmenterState) -> PerturbationMask {
        let k = mask_size(state.nd_percent, state.delta.nnz());
        let mut ranked: Vec<(f64, u32, u32)> = state
            .delta
            .entries()
            .map(|(i, j, p)| (p, i, j))
            .collect();
        // descending by probability, ascending lexicographic on ties
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
        });
        PerturbationMask {
            dim: state.delta.dim(),
            ones: ranked.into_iter().take(k).map(|(_, i, j)| (i, j)).collect(),
        }
    }

    /// Apply the mask: flip exactly the selected signs.
    pub fn apply(&self, poisoned: &SignedMatrix) -> SignedMatrix {
        let mut out = poisoned.clone();
        for &(i, j) in &self.ones {
            out.flip(i, j);
        }
        out
    }
}

fn mask_size(nd_percent: f64, edges: usize) -> usize {
    (nd_percent / 100.0 * edges as f64).round() as usize
}

/// Expected augmented matrix `a_ij (1 - 2 delta_ij)`.
pub fn expected_view(poisoned: &SignedMatrix, state: &AugmenterState) -> Result<SignedMatrix> {
    if !poisoned.same_support(&state.delta) {
        return Err(Error::SupportMismatch);
    }
    let mut out = poisoned.clone();
    let probs: Vec<f64> = state.delta.entries().map(|(_, _, p)| p).collect();
    let mut k = 0;
    out = out.map_values(|_, _, v| {
        let p = probs[k];
        k += 1;
        v * (1.0 - 2.0 * p)
    });
    Ok(out)
}

/// Negative balance degree of the expected augmented matrix.
pub fn balance_loss(poisoned: &SignedMatrix, state: &AugmenterState) -> Result<f64> {
    let view = expected_view(poisoned, state)?;
    let report = balance_degree(&view);
    if report.degenerate || report.trace_abs_a3 <= crate::balance::DEGENERACY_EPS {
        return Err(Error::DegenerateDenominator {
            eps: crate::balance::DEGENERACY_EPS,
        });
    }
    Ok(-report.d3)
}

/// Gradient of [`balance_loss`] with respect to the probabilities, on the
/// support: chain rule through `m_ij = a_ij (1 - 2 delta_ij)`.
pub fn balance_loss_gradient(
    poisoned: &SignedMatrix,
    state: &AugmenterState,
) -> Result<SignedMatrix> {
    let view = expected_view(poisoned, state)?;
    let d3_grad = balance_gradient_on_support(&view)?;
    let signs: Vec<f64> = poisoned.entries().map(|(_, _, v)| v).collect();
    let mut k = 0;
    let grad = state.delta.map_values(|_, _, _| {
        let g = 2.0 * signs[k] * d3_grad[k];
        k += 1;
        g
    });
    Ok(grad)
}

/// Options for [`optimize_delta_with`].
#[derive(Clone, Copy, Debug)]
pub struct DeltaOptimizer {
    pub steps: usize,
    pub step_size: f64,
    /// Halve the step until the loss does not increase (monotone trace).
    pub line_search: bool,
}

impl DeltaOptimizer {
    pub fn new(steps: usize, step_size: f64) -> Self {
        DeltaOptimizer {
            steps,
            step_size,
            line_search: false,
        }
    }
}

/// Projected gradient descent on the flip probabilities.
///
/// The trace records the loss before any step and after every step
/// (`steps + 1` values). If the plain iteration ends above its starting
/// loss, the best iterate seen is returned instead, so the final loss never
/// exceeds the initial one.
pub fn optimize_delta(
    poisoned: &SignedMatrix,
    steps: usize,
    step_size: f64,
    seed: u64,
) -> Result<AugmenterState> {
    optimize_delta_with(poisoned, DeltaOptimizer::new(steps, step_size), seed)
}

pub fn optimize_delta_with(
    poisoned: &SignedMatrix,
    opt: DeltaOptimizer,
    _seed: u64,
) -> Result<AugmenterState> {
    if opt.steps < 1 {
        return Err(Error::InvalidConfig("optimizer needs steps >= 1".into()));
    }
    let mut state = AugmenterState::init(poisoned, 0.0);
    let mut loss = balance_loss(poisoned, &state)?;
    state.loss_trace.push(loss);
    let mut best = (loss, state.delta.clone());

    for step in 1..=opt.steps {
        let grad = balance_loss_gradient(poisoned, &state)?;
        let g: Vec<f64> = grad.entries().map(|(_, _, v)| v).collect();
        let current: Vec<f64> = state.delta.entries().map(|(_, _, v)| v).collect();

        let mut eta = opt.step_size;
        loop {
            let mut k = 0;
            let candidate = state.delta.map_values(|_, _, _| {
                let v = (current[k] - eta * g[k]).clamp(0.0, 1.0);
                k += 1;
                v
            });
            let trial = AugmenterState {
                delta: candidate,
                nd_percent: state.nd_percent,
                loss_trace: Vec::new(),
            };
            let new_loss = balance_loss(poisoned, &trial)?;
            if !new_loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            if !opt.line_search || new_loss <= loss || eta < 1e-8 {
                state.delta = trial.delta;
                loss = new_loss;
                break;
            }
            eta *= 0.5;
        }
        state.loss_trace.push(loss);
        if loss < best.0 {
            best = (loss, state.delta.clone());
        }
    }

    if loss > state.loss_trace[0] {
        state.delta = best.1;
        let final_loss = best.0;
        state.loss_trace.push(final_loss);
    }
    Ok(state)
}

/// Deterministic positive view: flip the top-`nd_percent` probability edges.
pub fn sample_positive_view(
    poisoned: &SignedMatrix,
    state: &AugmenterState,
    _seed: u64,
) -> Result<SignedMatrix> {
    if !poisoned.same_support(&state.delta) {
        return Err(Error::SupportMismatch);
    }
    Ok(PerturbationMask::top_k(state).apply(poisoned))
}

/// Stochastic variant: Bernoulli draws restricted to the top-`nd_percent`
/// candidates, one draw per candidate in rank order.
pub fn sample_positive_view_bernoulli(
    poisoned: &SignedMatrix,
    state: &AugmenterState,
    seed: u64,
) -> Result<SignedMatrix> {
    use rand::Rng;
    if !poisoned.same_support(&state.delta) {
        return Err(Error::SupportMismatch);
    }
    let mask = PerturbationMask::top_k(state);
    let mut rng = crate::rng::stream(seed);
    let mut out = poisoned.clone();
    for &(i, j) in &mask.ones {
        if rng.random::<f64>() < state.delta.get(i, j) {
            out.flip(i, j);
        }
    }
    Ok(out)
}

/// Smallest budget on [`ND_GRID`] whose deterministic view reaches
/// `d3 >= 0.9`; falls back to the budget with the best balance if none does.
pub fn select_nd_percent(poisoned: &SignedMatrix, state: &AugmenterState) -> f64 {
    let mut best = (f64::NEG_INFINITY, ND_GRID[0]);
    for &nd in ND_GRID.iter() {
        let trial = AugmenterState {
            delta: state.delta.clone(),
            nd_percent: nd,
            loss_trace: Vec::new(),
        };
        let view = PerturbationMask::top_k(&trial).apply(poisoned);
        let d3 = balance_degree(&view).d3;
        if d3 >= ND_TARGET_D3 {
            return nd;
        }
        if d3 > best.0 {
            best = (d3, nd);
        }
    }
    best.1
}
