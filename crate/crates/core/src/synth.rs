//! Synthetic signed digraphs with controllable initial balance.
//!
//! Two mutually hostile factions produce a perfectly balanced graph: every
//! directed triangle has an even number of negative edges. Independent sign
//! noise then dials the balance degree down from exactly 1.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, SignedDiGraph};
use crate::rng;

/// Configuration of the two-faction generator. Nodes join either faction
/// with probability 1/2; ordered pairs get an edge with probability `p_in`
/// (same faction) or `p_out` (different factions); intra-faction edges are
/// positive, inter-faction edges negative; each sign is then flipped
/// independently with probability `sign_noise`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactionConfig {
    pub n: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub sign_noise: f64,
    pub seed: u64,
}

impl Default for FactionConfig {
    fn default() -> Self {
        FactionConfig {
            n: 150,
            p_in: 0.1,
            p_out: 0.1,
            sign_noise: 0.05,
            seed: 0,
        }
    }
}

pub fn two_faction_graph(cfg: &FactionConfig) -> Result<SignedDiGraph> {
    if cfg.n < 3 {
        return Err(Error::InvalidConfig(format!(
            "two-faction graph needs n >= 3, got {}",
            cfg.n
        )));
    }
    for (name, p) in [
        ("p_in", cfg.p_in),
        ("p_out", cfg.p_out),
        ("sign_noise", cfg.sign_noise),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("{name} = {p} outside [0,1]")));
        }
    }
    let mut rng = rng::stream(cfg.seed);
    let factions: Vec<bool> = (0..cfg.n).map(|_| rng.random::<f64>() < 0.5).collect();
    let mut edges = Vec::new();
    for i in 0..cfg.n {
        for j in 0..cfg.n {
            if i == j {
                continue;
            }
            let same = factions[i] == factions[j];
            let p = if same { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                let mut sign: i8 = if same { 1 } else { -1 };
                if rng.random::<f64>() < cfg.sign_noise {
                    sign = -sign;
                }
                edges.push(Edge::new(i as u32, j as u32, sign));
            }
        }
    }
    SignedDiGraph::new(cfg.n, edges)
}
