//! Balance learning: refine edge signs to maximize the balance degree, and
//! the experiment showing why a restored balance degree does not restore the
//! original signs.
//!
//! Restoration treats the signs as learnable variables: projected gradient
//! descent fits flip probabilities on the poisoned support (the same
//! machinery the augmenter uses), then signs are flipped in descending
//! probability order until the balance target is met. The flip count is
//! exact-tracked, so the reported balance degree matches a recomputation.

use serde::Serialize;

use crate::attack::{balance_attack, AttackBudget};
use crate::augment::{balance_loss, balance_loss_gradient, AugmenterState, DEFAULT_STEP_SIZE};
use crate::balance::{balance_degree, edge_traces};
use crate::error::{Error, Result};
use crate::graph::{overlap_ratio, SignedMatrix};

pub const DEFAULT_TARGET_D3: f64 = 0.95;

/// Gradient steps used to fit the flip probabilities.
const RESTORE_OPT_STEPS: usize = 200;

/// Outcome of a restoration run.
#[derive(Clone, Debug, Serialize)]
pub struct RestorationReport {
    #[serde(skip)]
    pub restored_matrix: SignedMatrix,
    pub d3_before: f64,
    pub d3_after: f64,
    pub flips_used: usize,
    pub overlap_with_clean: Option<f64>,
}

/// PGD on the flip probabilities that keeps the best iterate and stops
/// early instead of failing when the expected matrix degenerates.
fn fit_flip_probabilities(poisoned: &SignedMatrix, steps: usize) -> AugmenterState {
    let mut state = AugmenterState::init(poisoned, 0.0);
    let Ok(mut loss) = balance_loss(poisoned, &state) else {
        return state;
    };
    state.loss_trace.push(loss);
    let mut best = (loss, state.delta.clone());
    for _ in 0..steps {
        let Ok(grad) = balance_loss_gradient(poisoned, &state) else {
            break;
        };
        let g: Vec<f64> = grad.entries().map(|(_, _, v)| v).collect();
        let mut k = 0;
        state.delta = state.delta.map_values(|_, _, v| {
            let nv = (v - DEFAULT_STEP_SIZE * g[k]).clamp(0.0, 1.0);
            k += 1;
            nv
        });
        match balance_loss(poisoned, &state) {
            Ok(l) if l.is_finite() => {
                loss = l;
                state.loss_trace.push(loss);
                if loss < best.0 {
                    best = (loss, state.delta.clone());
                }
            }
            _ => break,
        }
    }
    state.delta = best.1;
    state
}

/// Refine the signs of `poisoned` toward a target balance degree.
///
/// Flip probabilities are fitted by gradient descent on the expected
/// balance; edges are then flipped in descending probability order (ties
/// lexicographic) until the running exact balance degree reaches
/// `target_d3`, the candidate list is exhausted, or `max_flips` is hit.
/// If the target is never reached the best prefix seen is returned, so
/// `d3_after >= d3_before` always. The report carries partial progress;
/// this operation does not fail.
pub fn balance_learning_restore(
    poisoned: &SignedMatrix,
    target_d3: f64,
    max_flips: usize,
) -> RestorationReport {
    let before = balance_degree(poisoned);
    if before.degenerate || before.d3 >= target_d3 {
        return RestorationReport {
            restored_matrix: poisoned.clone(),
            d3_before: before.d3,
            d3_after: before.d3,
            flips_used: 0,
            overlap_with_clean: None,
        };
    }

    let state = fit_flip_probabilities(poisoned, RESTORE_OPT_STEPS);
    let mut ranked: Vec<(f64, u32, u32)> =
        state.delta.entries().map(|(i, j, p)| (p, i, j)).collect();
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
    });

    // walk the ranking, tracking the exact balance degree per flip
    let traces = edge_traces(poisoned);
    let s = traces.trace_abs_a3;
    let mut t = traces.trace_a3;
    let mut working = poisoned.clone();
    let cap = max_flips.min(ranked.len());
    let mut best = (before.d3, 0usize);
    let mut chosen = None;
    for (k, &(_, i, j)) in ranked.iter().take(cap).enumerate() {
        let v = working.get(i, j);
        let c = square_entry(&working, j, i);
        working.flip(i, j);
        t -= 6.0 * v * c;
        let d3 = (t + s) / (2.0 * s);
        if d3 > best.0 {
            best = (d3, k + 1);
        }
        if d3 >= target_d3 {
            chosen = Some((d3, k + 1));
            break;
        }
    }
    let (d3_after, flips_used) = chosen.unwrap_or(best);

    let mut restored = poisoned.clone();
    for &(_, i, j) in ranked.iter().take(flips_used) {
        restored.flip(i, j);
    }
    RestorationReport {
        restored_matrix: restored,
        d3_before: before.d3,
        d3_after,
        flips_used,
        overlap_with_clean: None,
    }
}

/// `(M^2)_ji` for one edge.
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

/// Attack-then-restore comparison against the clean graph.
#[derive(Clone, Debug, Serialize)]
pub struct IrreversibilityReport {
    pub ptb_rate: f64,
    pub d3_clean: f64,
    pub d3_poisoned: f64,
    pub d3_restored: f64,
    pub overlap_poisoned_clean: f64,
    pub overlap_restored_clean: f64,
    pub attack_flips: usize,
    pub restore_flips: usize,
    #[serde(skip)]
    pub restored_matrix: SignedMatrix,
}

/// Poison `clean` at `ptb_rate` with the balance attack, restore with
/// balance learning, and report how far the restored signs drift from the
/// clean ones even as the balance degree recovers.
///
/// Both stages are deterministic; `_seed` is reserved for stochastic attack
/// variants and callers that sweep it vary the clean graph instead.
pub fn irreversibility_experiment(
    clean: &SignedMatrix,
    ptb_rate: f64,
    _seed: u64,
) -> Result<IrreversibilityReport> {
    let d3_clean = balance_degree(clean).d3;
    if d3_clean < 0.8 {
        return Err(Error::InvalidConfig(format!(
            "irreversibility experiment expects a mostly balanced input, d3 = {d3_clean:.4}"
        )));
    }
    let plan = balance_attack(clean, AttackBudget::Rate(ptb_rate))?;
    let poisoned = plan.final_matrix;
    let d3_poisoned = balance_degree(&poisoned).d3;

    let restore = balance_learning_restore(&poisoned, DEFAULT_TARGET_D3, poisoned.nnz());

    Ok(IrreversibilityReport {
        ptb_rate,
        d3_clean,
        d3_poisoned,
        d3_restored: restore.d3_after,
        overlap_poisoned_clean: overlap_ratio(&poisoned, clean)?,
        overlap_restored_clean: overlap_ratio(&restore.restored_matrix, clean)?,
        attack_flips: plan.flips.len(),
        restore_flips: restore.flips_used,
        restored_matrix: restore.restored_matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, SignedDiGraph};
    use crate::synth::{two_faction_graph, FactionConfig};

    fn cycle(signs: [i8; 3]) -> SignedMatrix {
        SignedDiGraph::new(
            3,
            vec![
                Edge::new(0, 1, signs[0]),
                Edge::new(1, 2, signs[1]),
                Edge::new(2, 0, signs[2]),
            ],
        )
        .unwrap()
        .to_adjacency()
    }

    /// Two-faction graph filtered to a minimum clean balance.
    fn balanced_factions(seed_from: u64, min_d3: f64) -> (SignedMatrix, u64) {
        let mut seed = seed_from;
        loop {
            let cfg = FactionConfig {
                n: 120,
                p_in: 0.1,
                p_out: 0.1,
                sign_noise: 0.05,
                seed,
            };
            let m = two_faction_graph(&cfg).unwrap().to_adjacency();
            if balance_degree(&m).d3 >= min_d3 {
                return (m, seed);
            }
            seed += 1;
        }
    }

    #[test]
    fn balanced_input_is_untouched() {
        let m = cycle([1, 1, 1]);
        let r = balance_learning_restore(&m, 1.0, 100);
        assert_eq!(r.flips_used, 0);
        assert_eq!(r.restored_matrix, m);
        assert_eq!(r.d3_before, 1.0);
        assert_eq!(r.d3_after, 1.0);
    }

    /// A one-negative triangle can be balanced by flipping the negative edge
    /// or by flipping a positive one; both end at d3 = 1 with different
    /// signs, which is the whole irreversibility point.
    #[test]
    fn restoration_target_is_not_unique() {
        let m = cycle([-1, 1, 1]);
        let r = balance_learning_restore(&m, 1.0, 3);
        assert_eq!(r.d3_after, 1.0);
        assert_eq!(r.flips_used, 1);

        // enumerate: every single flip of this triangle reaches d3 = 1
        for (i, j) in [(0u32, 1u32), (1, 2), (2, 0)] {
            let mut alt = m.clone();
            alt.flip(i, j);
            assert_eq!(balance_degree(&alt).d3, 1.0);
        }
        // and the three outcomes disagree pairwise on some edge sign
        let mut a = m.clone();
        a.flip(0, 1);
        let mut b = m.clone();
        b.flip(1, 2);
        assert!(crate::graph::perturbation_distance(&a, &b).unwrap() > 0);
    }

    #[test]
    fn d3_improves_and_topology_preserved() {
        for seed in 0..4 {
            let (clean, _) = balanced_factions(seed * 100, 0.85);
            let poisoned = balance_attack(&clean, AttackBudget::Rate(0.2))
                .unwrap()
                .final_matrix;
            let r = balance_learning_restore(&poisoned, 0.9, poisoned.nnz());
            assert!(r.d3_after >= r.d3_before);
            assert!(r.d3_after >= 0.9, "restored d3 {}", r.d3_after);
            assert!(r.restored_matrix.same_support(&poisoned));
            let recomputed = balance_degree(&r.restored_matrix).d3;
            assert!((recomputed - r.d3_after).abs() < 1e-9);
            assert_eq!(
                crate::graph::perturbation_distance(&r.restored_matrix, &poisoned).unwrap(),
                r.flips_used
            );
        }
    }

    #[test]
    fn restore_honors_flip_cap() {
        let (clean, _) = balanced_factions(40, 0.85);
        let poisoned = balance_attack(&clean, AttackBudget::Rate(0.2))
            .unwrap()
            .final_matrix;
        let r = balance_learning_restore(&poisoned, 1.0, 4);
        assert!(r.flips_used <= 4);
        assert!(r.d3_after >= r.d3_before);
    }

    #[test]
    fn irreversibility_zero_rate_is_noop() {
        // low-noise graph whose d3 already beats the restore target
        let mut seed = 0;
        let clean = loop {
            let cfg = FactionConfig {
                n: 100,
                p_in: 0.12,
                p_out: 0.12,
                sign_noise: 0.005,
                seed,
            };
            let m = two_faction_graph(&cfg).unwrap().to_adjacency();
            if balance_degree(&m).d3 >= DEFAULT_TARGET_D3 {
                break m;
            }
            seed += 1;
        };
        let rep = irreversibility_experiment(&clean, 0.0, 0).unwrap();
        assert_eq!(rep.overlap_poisoned_clean, 1.0);
        assert_eq!(rep.overlap_restored_clean, 1.0);
        assert_eq!(rep.attack_flips, 0);
        assert_eq!(rep.restore_flips, 0);
    }

    #[test]
    fn irreversibility_rejects_unbalanced_input() {
        let cfg = FactionConfig {
            n: 60,
            p_in: 0.15,
            p_out: 0.15,
            sign_noise: 0.45,
            seed: 2,
        };
        let m = two_faction_graph(&cfg).unwrap().to_adjacency();
        assert!(balance_degree(&m).d3 < 0.8);
        assert!(matches!(
            irreversibility_experiment(&m, 0.1, 0),
            Err(Error::InvalidConfig(_))
        ));
    }

    /// The restoration drifts away from the clean signs at heavy
    /// perturbation even though the balance degree recovers.
    #[test]
    fn restored_overlap_drops_below_poisoned_overlap() {
        let mut hits = 0;
        let seeds = 6;
        let mut seed_from = 0;
        for _ in 0..seeds {
            let (clean, used) = balanced_factions(seed_from, 0.85);
            seed_from = used + 1;
            let rep = irreversibility_experiment(&clean, 0.2, used).unwrap();
            assert!(rep.d3_restored >= rep.d3_poisoned);
            if rep.overlap_restored_clean < rep.overlap_poisoned_clean && rep.d3_restored >= 0.9 {
                hits += 1;
            }
        }
        assert!(hits >= seeds - 1, "phenomenon in {hits}/{seeds} seeds");
    }
}
