//! Random-graph controls matched to a real graph: fixed-edge-count
//! Erdős–Rényi resampling, degree-preserving double-edge swaps, and the
//! complete graph on the same nodes.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GeneSymbol, MolecularGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NullModelError {
    #[error("null model needs at least {needed} {what}, graph has {found}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("swap attempt factor must be at least 1")]
    BadFactor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewireConfig {
    pub seed: u64,
    /// Attempted swaps = factor × |E|.
    pub swap_attempt_factor: usize,
}

impl Default for RewireConfig {
    fn default() -> Self {
        RewireConfig {
            seed: 0,
            swap_attempt_factor: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullKind {
    Er,
    Dp,
    Full,
}

impl std::str::FromStr for NullKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "er" => Ok(NullKind::Er),
            "dp" => Ok(NullKind::Dp),
            "full" => Ok(NullKind::Full),
            other => Err(format!("unknown null model kind {other:?} (expected er|dp|full)")),
        }
    }
}

/// Index of the unordered pair `k` in row-major order over `i < j < n`.
fn decode_pair(k: usize, n: usize) -> (usize, usize) {
    // row i holds pairs (i, i+1..n); walk rows, it is cheap next to sampling
    let mut rest = k;
    for i in 0..n {
        let row = n - 1 - i;
        if rest < row {
            return (i, i + 1 + rest);
        }
        rest -= row;
    }
    unreachable!("pair index {k} out of range for {n} nodes")
}

/// Same node set, |E| edges drawn uniformly without replacement from all
/// unordered pairs (G(n, m)).
pub fn er_rewire(g: &MolecularGraph, cfg: &RewireConfig) -> Result<MolecularGraph, NullModelError> {
    let ig = g.indexed();
    let n = ig.node_count();
    if n < 2 {
        return Err(NullModelError::TooSmall {
            what: "nodes",
            needed: 2,
            found: n,
        });
    }
    let total = n * (n - 1) / 2;
    let m = ig.edges.len();
    assert!(m <= total, "simple graph cannot exceed C(n,2) edges");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picks = index::sample(&mut rng, total, m).into_vec();
    picks.sort_unstable();
    let edges = picks.into_iter().map(|k| {
        let (i, j) = decode_pair(k, n);
        (ig.names[i].clone(), ig.names[j].clone())
    });
    Ok(MolecularGraph::from_edges(edges, ig.names.iter().cloned()))
}

/// Repeated double-edge swaps: edges (a,b),(c,d) become (a,d),(c,b) when all
/// four endpoints differ and neither new edge exists. Degrees are invariant.
pub fn degree_preserving_rewire(
    g: &MolecularGraph,
    cfg: &RewireConfig,
) -> Result<MolecularGraph, NullModelError> {
    if cfg.swap_attempt_factor < 1 {
        return Err(NullModelError::BadFactor);
    }
    let ig = g.indexed();
    let m = ig.edges.len();
    if m < 2 {
        return Err(NullModelError::TooSmall {
            what: "edges",
            needed: 2,
            found: m,
        });
    }
    let mut edges = ig.edges.clone();
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let key = |x: usize, y: usize| (x.min(y), x.max(y));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.swap_attempt_factor * m {
        let i = rng.gen_range(0..m);
        let j = rng.gen_range(0..m);
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (mut c, mut d) = edges[j];
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c, &mut d);
        }
        if a == c || a == d || b == c || b == d {
            continue;
        }
        let (ad, cb) = (key(a, d), key(c, b));
        if present.contains(&ad) || present.contains(&cb) {
            continue;
        }
        present.remove(&edges[i]);
        present.remove(&edges[j]);
        present.insert(ad);
        present.insert(cb);
        edges[i] = ad;
        edges[j] = cb;
    }
    let named = edges
        .into_iter()
        .map(|(x, y)| (ig.names[x].clone(), ig.names[y].clone()));
    Ok(MolecularGraph::from_edges(named, ig.names.iter().cloned()))
}

/// Complete graph on `nodes`.
pub fn fully_connected(nodes: &BTreeSet<GeneSymbol>) -> Result<MolecularGraph, NullModelError> {
    if nodes.len() < 2 {
        return Err(NullModelError::TooSmall {
            what: "nodes",
            needed: 2,
            found: nodes.len(),
        });
    }
    let v: Vec<&GeneSymbol> = nodes.iter().collect();
    let edges = v
        .iter()
        .enumerate()
        .flat_map(|(i, a)| v[i + 1..].iter().map(move |b| ((*a).clone(), (*b).clone())));
    Ok(MolecularGraph::from_edges(edges, []))
}

/// Dispatches on `kind`.
pub fn generate(kind: NullKind, g: &MolecularGraph, cfg: &RewireConfig) -> Result<MolecularGraph, NullModelError> {
    match kind {
        NullKind::Er => er_rewire(g, cfg),
        NullKind::Dp => degree_preserving_rewire(g, cfg),
        NullKind::Full => fully_connected(g.node_set()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sym;

    fn graph(edges: &[(usize, usize)], n: usize) -> MolecularGraph {
        MolecularGraph::from_edges(
            edges.iter().map(|&(a, b)| (sym(&format!("n{a}")), sym(&format!("n{b}")))),
            (0..n).map(|i| sym(&format!("n{i}"))),
        )
    }

    fn cfg(seed: u64) -> RewireConfig {
        RewireConfig {
            seed,
            swap_attempt_factor: 10,
        }
    }

    #[test]
    fn pair_decoding_covers_all_pairs() {
        let n = 6;
        let pairs: Vec<_> = (0..15).map(|k| decode_pair(k, n)).collect();
        let expect: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        assert_eq!(pairs, expect);
    }

    #[test]
    fn er_triangle_is_forced() {
        let tri = graph(&[(0, 1), (1, 2), (0, 2)], 3);
        assert_eq!(er_rewire(&tri, &cfg(1)).unwrap(), tri);
    }

    #[test]
    fn er_preserves_counts_and_is_deterministic() {
        let edges: Vec<_> = (0..10).map(|i| (i, (i + 1) % 10)).chain((0..5).map(|i| (i, i + 5))).collect();
        let g = graph(&edges, 10);
        assert_eq!(g.edge_count(), 15);
        let a = er_rewire(&g, &cfg(7)).unwrap();
        let b = er_rewire(&g, &cfg(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.edge_count(), 15);
        assert_eq!(a.node_set(), g.node_set());
        assert_ne!(er_rewire(&g, &cfg(8)).unwrap(), a);
    }

    #[test]
    fn er_rejects_single_node() {
        let g = graph(&[], 1);
        assert!(matches!(er_rewire(&g, &cfg(0)), Err(NullModelError::TooSmall { .. })));
    }

    #[test]
    fn dp_triangle_has_no_swaps() {
        let tri = graph(&[(0, 1), (1, 2), (0, 2)], 3);
        assert_eq!(degree_preserving_rewire(&tri, &cfg(3)).unwrap(), tri);
    }

    #[test]
    fn dp_six_cycle_stays_two_regular() {
        // oracle: every simple 2-regular graph on 6 labelled nodes, by
        // enumerating all 6-edge subsets of K6
        let all_pairs: Vec<(usize, usize)> =
            (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).collect();
        let mut two_regular = Vec::new();
        for mask in 0u32..(1 << 15) {
            if mask.count_ones() != 6 {
                continue;
            }
            let mut deg = [0; 6];
            let chosen: Vec<_> = (0..15).filter(|b| mask >> b & 1 == 1).map(|b| all_pairs[b]).collect();
            for &(a, b) in &chosen {
                deg[a] += 1;
                deg[b] += 1;
            }
            if deg.iter().all(|&d| d == 2) {
                two_regular.push(graph(&chosen, 6));
            }
        }
        // 60 hexagons + 10 pairs of triangles
        assert_eq!(two_regular.len(), 70);
        let c6 = graph(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)], 6);
        let out = degree_preserving_rewire(&c6, &cfg(3)).unwrap();
        assert!(two_regular.contains(&out));
        assert_eq!(out.degrees(), c6.degrees());
    }

    #[test]
    fn dp_guards() {
        let e = graph(&[(0, 1)], 2);
        assert!(matches!(
            degree_preserving_rewire(&e, &cfg(0)),
            Err(NullModelError::TooSmall { what: "edges", .. })
        ));
        let p = graph(&[(0, 1), (1, 2)], 3);
        let bad = RewireConfig { seed: 0, swap_attempt_factor: 0 };
        assert_eq!(degree_preserving_rewire(&p, &bad), Err(NullModelError::BadFactor));
    }

    #[test]
    fn complete_graphs() {
        let four: BTreeSet<_> = (0..4).map(|i| sym(&format!("n{i}"))).collect();
        let k4 = fully_connected(&four).unwrap();
        assert_eq!(k4.edge_count(), 6);
        assert!(k4.degrees().values().all(|&d| d == 3));
        let two: BTreeSet<_> = (0..2).map(|i| sym(&format!("n{i}"))).collect();
        assert_eq!(fully_connected(&two).unwrap().edge_count(), 1);
        let one: BTreeSet<_> = [sym("x")].into_iter().collect();
        assert!(fully_connected(&one).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("dp".parse::<NullKind>().unwrap(), NullKind::Dp);
        assert!("ba".parse::<NullKind>().is_err());
    }
}
