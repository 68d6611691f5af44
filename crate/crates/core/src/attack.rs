//! Sign-flip poisoning under a budget.
//!
//! The balance attack greedily flips the edge whose gradient most strongly
//! agrees with its current sign, recomputing the gradient after every flip.
//! Because the numerator trace is affine in each off-diagonal entry and
//! `Tr(|A|^3)` is invariant under sign flips, the per-step selection is exact
//! for a single flip; the greedy sequence as a whole remains a heuristic.

use std::collections::HashSet;

use serde::Serialize;

use crate::balance::{balance_degree, edge_traces};
use crate::error::{Error, Result};
use crate::graph::SignedMatrix;
use crate::rng;

/// Exhaustive single-flip search is capped to keep the oracle honest-sized.
pub const EXHAUSTIVE_EDGE_CAP: usize = 5000;

/// Flip budget: an absolute count or a fraction of the edge set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttackBudget {
    Flips(usize),
    Rate(f64),
}

impl AttackBudget {
    /// Number of flips this budget allows on a graph with `edges` edges.
    pub fn resolve(&self, edges: usize) -> Result<usize> {
        let flips = match self {
            AttackBudget::Flips(k) => *k,
            AttackBudget::Rate(r) => {
                if !(0.0..=1.0).contains(r) {
                    return Err(Error::InvalidConfig(format!(
                        "perturbation rate {r} outside [0,1]"
                    )));
                }
                (r * edges as f64).round() as usize
            }
        };
        if flips > edges {
            return Err(Error::BudgetExceedsEdges {
                budget: flips,
                edges,
            });
        }
        Ok(flips)
    }
}

/// One executed flip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlipStep {
    pub src: u32,
    pub dst: u32,
    pub step: usize,
    pub gradient_value: f64,
}

/// Result of an attack run: the flips in order, the balance-degree
/// trajectory (initial value plus one entry per flip), and the poisoned
/// matrix.
#[derive(Clone, Debug, Serialize)]
pub struct AttackPlan {
    pub flips: Vec<FlipStep>,
    pub d3_trajectory: Vec<f64>,
    #[serde(skip)]
    pub final_matrix: SignedMatrix,
}

impl AttackPlan {
    pub fn flips_executed(&self) -> usize {
        self.flips.len()
    }

    pub fn initial_d3(&self) -> f64 {
        self.d3_trajectory[0]
    }

    pub fn final_d3(&self) -> f64 {
        *self.d3_trajectory.last().expect("trajectory never empty")
    }
}

/// Greedy gradient-guided balance attack.
///
/// Per step: candidates are existing edges whose sign matches the sign of
/// their gradient entry; among them the largest `|G_ij|` wins, ties broken
/// by smallest `(i, j)`. Stops early when no candidate remains. No edge is
/// flipped twice, so the L0 distance from the input equals the number of
/// executed flips.
pub fn balance_attack(m: &SignedMatrix, budget: AttackBudget) -> Result<AttackPlan> {
    let flips_budget = budget.resolve(m.nnz())?;
    let mut working = m.clone();
    let mut flipped = vec![false; m.nnz()];
    let mut flips = Vec::with_capacity(flips_budget);
    let mut trajectory = Vec::with_capacity(flips_budget + 1);

    // Tr(|A|^3) is invariant under sign flips; compute it once.
    let initial = edge_traces(&working);
    let s = initial.trace_abs_a3;
    if s <= 0.0 {
        // no directed 3-cycles: every gradient is zero, nothing to attack
        trajectory.push(balance_degree(&working).d3);
        return Ok(AttackPlan {
            flips,
            d3_trajectory: trajectory,
            final_matrix: working,
        });
    }
    let mut t = initial.trace_a3;
    trajectory.push((t + s) / (2.0 * s));

    for step in 1..=flips_budget {
        let tr = edge_traces(&working);
        debug_assert!((tr.trace_a3 - t).abs() < 1e-6 * s.max(1.0));
        // candidate rule: sign(a_ij) == sign((M^2)_ji), maximize |(M^2)_ji|
        let mut best: Option<(f64, u32, u32, usize, f64)> = None;
        for (idx, (i, j, v)) in working.entries().enumerate() {
            if flipped[idx] {
                continue;
            }
            let c = tr.sq[idx];
            if c == 0.0 || v.signum() != c.signum() {
                continue;
            }
            let mag = c.abs();
            if best.as_ref().is_none_or(|b| mag > b.0) {
                best = Some((mag, i, j, idx, c));
            }
        }
        let Some((_, i, j, idx, c)) = best else {
            break;
        };
        let v = working.get(i, j);
        working.flip(i, j);
        flipped[idx] = true;
        // exact trace update: the cube's trace is affine in each entry
        t -= 6.0 * v * c;
        flips.push(FlipStep {
            src: i,
            dst: j,
            step,
            gradient_value: 3.0 * c / (2.0 * s),
        });
        trajectory.push((t + s) / (2.0 * s));
    }

    Ok(AttackPlan {
        flips,
        d3_trajectory: trajectory,
        final_matrix: working,
    })
}

/// Baseline: flip a uniform sample of `budget` distinct edges.
pub fn random_attack(m: &SignedMatrix, budget: AttackBudget, seed: u64) -> Result<AttackPlan> {
    let flips_budget = budget.resolve(m.nnz())?;
    let mut rng = rng::stream(seed);
    let mut picked = rand::seq::index::sample(&mut rng, m.nnz(), flips_budget).into_vec();
    picked.sort_unstable();
    let picked: HashSet<usize> = picked.into_iter().collect();

    let entries: Vec<(u32, u32)> = m.entries().map(|(i, j, _)| (i, j)).collect();
    let mut working = m.clone();
    let initial = edge_traces(&working);
    let s = initial.trace_abs_a3;
    let mut t = initial.trace_a3;
    let degenerate = s <= 0.0;
    let mut trajectory = vec![if degenerate { 1.0 } else { (t + s) / (2.0 * s) }];
    let mut flips = Vec::with_capacity(flips_budget);

    let mut step = 0;
    for (idx, &(i, j)) in entries.iter().enumerate() {
        if !picked.contains(&idx) {
            continue;
        }
        step += 1;
        let v = working.get(i, j);
        let c = square_entry(&working, j, i);
        working.flip(i, j);
        t -= 6.0 * v * c;
        flips.push(FlipStep {
            src: i,
            dst: j,
            step,
            gradient_value: if degenerate { 0.0 } else { 3.0 * c / (2.0 * s) },
        });
        trajectory.push(if degenerate { 1.0 } else { (t + s) / (2.0 * s) });
    }

    Ok(AttackPlan {
        flips,
        d3_trajectory: trajectory,
        final_matrix: working,
    })
}

/// `(M^2)_ji` for a single edge.
fn square_entry(m: &SignedMatrix, j: u32, i: u32) -> f64 {
    let out_j = m.out_row(j);
    let in_i = m.in_col(i);
    let (mut a, mut b) = (0, 0);
    let mut acc = 0.0;
    while a < out_j.len() && b < in_i.len() {
        match out_j[a].0.cmp(&in_i[b].0) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                acc += out_j[a].1 * in_i[b].1;
                a += 1;
                b += 1;
            }
        }
    }
    acc
}

/// Oracle: evaluate the exact balance degree after every possible single
/// flip and return the minimizing edge with its exact change. Ties break
/// lexicographically; a nonnegative best change is reported honestly.
pub fn exhaustive_best_flip(m: &SignedMatrix) -> Result<((u32, u32), f64)> {
    if m.nnz() > EXHAUSTIVE_EDGE_CAP {
        return Err(Error::TooManyEdges {
            edges: m.nnz(),
            cap: EXHAUSTIVE_EDGE_CAP,
        });
    }
    if m.nnz() == 0 {
        return Err(Error::EmptyGraph);
    }
    let base = balance_degree(m).d3;
    let mut best: Option<((u32, u32), f64)> = None;
    for (i, j, _) in m.entries() {
        let mut flipped = m.clone();
        flipped.flip(i, j);
        let delta = balance_degree(&flipped).d3 - base;
        if best.as_ref().is_none_or(|b| delta < b.1) {
            best = Some(((i, j), delta));
        }
    }
    Ok(best.expect("nonempty edge set"))
}
