#![allow(dead_code)] // each test target uses its own subset of these helpers

//! Shared helpers for the integration suites.

use signet::balance::balance_degree;
use signet::graph::{Edge, SignedDiGraph, SignedMatrix};
use signet::synth::{two_faction_graph, FactionConfig};

/// First `count` two-faction graphs (scanning seeds upward from 0) whose
/// clean balance degree meets `min_d3`.
pub fn balanced_faction_graphs(
    count: usize,
    n: usize,
    sign_noise: f64,
    min_d3: f64,
) -> Vec<(u64, SignedMatrix)> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0u64;
    while out.len() < count {
        let cfg = FactionConfig {
            n,
            p_in: 0.1,
            p_out: 0.1,
            sign_noise,
            seed,
        };
        let m = two_faction_graph(&cfg).expect("valid config").to_adjacency();
        if balance_degree(&m).d3 >= min_d3 {
            out.push((seed, m));
        }
        seed += 1;
    }
    out
}

/// Random signed digraph: directed edge probability `p`, negative sign
/// probability `neg`.
pub fn random_signed_graph(n: u32, p: f64, neg: f64, seed: u64) -> SignedDiGraph {
    use rand::Rng;
    let mut rng = signet::rng::stream(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < p {
                let sign = if rng.random::<f64>() < neg { -1 } else { 1 };
                edges.push(Edge::new(i, j, sign));
            }
        }
    }
    SignedDiGraph::new(n as usize, edges).expect("construction is valid")
}

/// Path to the Bitcoin-Alpha ratings file if it is available, searching
/// `SIGNET_DATA_DIR` then `./data`. Integration tests that need the real
/// dataset skip (with a note) when this returns `None`.
pub fn bitcoin_alpha_path() -> Option<std::path::PathBuf> {
    let mut candidates = Vec::new();
    if let Ok(dir) = std::env::var("SIGNET_DATA_DIR") {
        candidates.push(std::path::PathBuf::from(dir));
    }
    candidates.push(std::path::PathBuf::from("data"));
    candidates.push(std::path::PathBuf::from("../../data"));
    for dir in candidates {
        for name in [
            "bitcoin_alpha.csv",
            "soc-sign-bitcoinalpha.csv",
            "bitcoinalpha.csv",
        ] {
            let p = dir.join(name);
            if p.exists() {
                return Some(p);
            }
        }
    }
    None
}

/// Induced subgraph on the `keep` highest-degree nodes, densely reindexed.
pub fn top_degree_subgraph(g: &SignedDiGraph, keep: usize) -> SignedDiGraph {
    let mut degree = vec![0usize; g.node_count()];
    for e in g.edges() {
        degree[e.src as usize] += 1;
        degree[e.dst as usize] += 1;
    }
    let mut order: Vec<usize> = (0..g.node_count()).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(degree[v]));
    let kept: std::collections::HashSet<usize> = order.into_iter().take(keep).collect();
    let mut remap = vec![u32::MAX; g.node_count()];
    let mut next = 0u32;
    let mut edges = Vec::new();
    for e in g.edges() {
        let (s, d) = (e.src as usize, e.dst as usize);
        if kept.contains(&s) && kept.contains(&d) {
            for v in [s, d] {
                if remap[v] == u32::MAX {
                    remap[v] = next;
                    next += 1;
                }
            }
            edges.push(Edge::new(remap[s], remap[d], e.sign));
        }
    }
    SignedDiGraph::new(next as usize, edges).expect("subgraph is valid")
}
