//! Graphlet orbit counts on 2–4 node graphlets (orbits o0–o14, ORCA
//! numbering), per-graph signatures, and group comparisons.
//!
//! Orbit numbering:
//!
//! | orbit | graphlet | position |
//! |-------|----------|----------|
//! | o0 | edge | either end |
//! | o1, o2 | path P3 | end, middle |
//! | o3 | triangle | any |
//! | o4, o5 | path P4 | end, middle |
//! | o6, o7 | claw | leaf, center |
//! | o8 | 4-cycle | any |
//! | o9, o10, o11 | tailed triangle | tail end, far triangle node, attachment |
//! | o12, o13 | diamond | degree 2, degree 3 |
//! | o14 | K4 | any |
//!
//! [`count_orbits`] never enumerates 4-node subsets. For each node it counts
//! ten non-induced patterns from degrees, per-edge triangle counts and
//! 2-paths; each pattern count is a fixed non-negative combination of the
//! induced orbit counts, and together with a direct K4 enumeration the
//! system is triangular. [`brute_force_orbits`] classifies every 3- and
//! 4-subset and is the reference it is tested against.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::graph::{GeneSymbol, IndexedGraph, MolecularGraph};
use crate::util::fmt_f64;

pub const ORBITS: usize = 15;
pub const DEFAULT_BRUTE_FORCE_CAP: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphletError {
    #[error("brute-force orbit counting is capped at {cap} nodes, graph has {nodes}")]
    CapExceeded { cap: usize, nodes: usize },
    #[error("cannot summarize an empty graph")]
    EmptyGraph,
    #[error("need at least two groups, found {0}")]
    TooFewGroups(usize),
    #[error("group {0:?} has no graphs")]
    EmptyGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OrbitVector(pub [u64; ORBITS]);

impl OrbitVector {
    pub fn get(&self, orbit: usize) -> u64 {
        self.0[orbit]
    }
}

/// Orbit counts per node, in node order.
pub type OrbitTable = BTreeMap<GeneSymbol, OrbitVector>;

fn choose2(x: i64) -> i64 {
    x * (x - 1) / 2
}

fn choose3(x: i64) -> i64 {
    x * (x - 1) * (x - 2) / 6
}

struct Prepared {
    adj: Vec<Vec<usize>>,
    /// `tri[v][k]` = common neighbours of v and `adj[v][k]`
    tri: Vec<Vec<i64>>,
}

impl Prepared {
    fn new(g: &IndexedGraph) -> Self {
        let adj = g.adjacency();
        let n = adj.len();
        let mut tri: Vec<Vec<i64>> = adj.iter().map(|a| vec![0; a.len()]).collect();
        let mut mark = vec![false; n];
        for v in 0..n {
            for &u in &adj[v] {
                mark[u] = true;
            }
            for (k, &u) in adj[v].iter().enumerate() {
                if u < v {
                    continue;
                }
                let c = adj[u].iter().filter(|&&w| mark[w]).count() as i64;
                tri[v][k] = c;
                let back = adj[u].binary_search(&v).expect("symmetric adjacency");
                tri[u][back] = c;
            }
            for &u in &adj[v] {
                mark[u] = false;
            }
        }
        Prepared { adj, tri }
    }

    fn edge_tri(&self, a: usize, b: usize) -> i64 {
        let k = self.adj[a].binary_search(&b).expect("edge exists");
        self.tri[a][k]
    }

    fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}

fn intersect_sorted(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// Orbit counts for an indexed graph, one vector per node index.
pub fn count_orbits_indexed(g: &IndexedGraph) -> Vec<OrbitVector> {
    let n = g.node_count();
    let p = Prepared::new(g);
    let deg: Vec<i64> = p.adj.iter().map(|a| a.len() as i64).collect();
    let t: Vec<i64> = p.tri.iter().map(|r| r.iter().sum::<i64>() / 2).collect();
    // S(v) = Σ_{u∈N(v)} (d(u) − 1)
    let s: Vec<i64> = p
        .adj
        .iter()
        .map(|a| a.iter().map(|&u| deg[u] - 1).sum())
        .collect();

    // Triangle pass: diamond (degree-2 side) and tailed-triangle (far node)
    // patterns, plus K4 enumeration.
    let mut diamond_side = vec![0i64; n];
    let mut paw_far = vec![0i64; n];
    let mut k4 = vec![0i64; n];
    let mut common = Vec::new();
    for a in 0..n {
        for (ka, &b) in p.adj[a].iter().enumerate() {
            if b <= a {
                continue;
            }
            if p.tri[a][ka] == 0 {
                continue;
            }
            intersect_sorted(&p.adj[a], &p.adj[b], &mut common);
            let tab = p.tri[a][ka];
            for (ci, &c) in common.iter().enumerate() {
                if c <= b {
                    continue;
                }
                let tbc = p.edge_tri(b, c);
                let tac = p.edge_tri(a, c);
                diamond_side[a] += tbc - 1;
                diamond_side[b] += tac - 1;
                diamond_side[c] += tab - 1;
                paw_far[a] += deg[b] + deg[c] - 4;
                paw_far[b] += deg[a] + deg[c] - 4;
                paw_far[c] += deg[a] + deg[b] - 4;
                for &d in &common[ci + 1..] {
                    if p.has_edge(c, d) {
                        k4[a] += 1;
                        k4[b] += 1;
                        k4[c] += 1;
                        k4[d] += 1;
                    }
                }
            }
        }
    }

    (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0i64; n], Vec::<usize>::new()),
            |(cnt, touched), v| {
                let d = deg[v];
                let nb = &p.adj[v];

                // non-induced 4-cycles through v
                for &a in nb {
                    for &w in &p.adj[a] {
                        if w == v {
                            continue;
                        }
                        if cnt[w] == 0 {
                            touched.push(w);
                        }
                        cnt[w] += 1;
                    }
                }
                let mut cycles = 0i64;
                for &w in touched.iter() {
                    cycles += choose2(cnt[w]);
                    cnt[w] = 0;
                }
                touched.clear();

                let diamond_spine: i64 = p.tri[v].iter().map(|&x| choose2(x)).sum();
                let paw_tail: i64 = nb
                    .iter()
                    .zip(&p.tri[v])
                    .map(|(&a, &tva)| t[a] - tva)
                    .sum();
                let claw_leaf: i64 = nb.iter().map(|&a| choose2(deg[a] - 1)).sum();
                let path_end: i64 =
                    nb.iter().map(|&a| s[a]).sum::<i64>() - d * (d - 1) - 2 * t[v];
                let path_mid = (d - 1).max(0) * s[v] - 2 * t[v];
                let paw_attach = t[v] * (d - 2).max(0);
                let claw_center = choose3(d);

                let o14 = k4[v];
                let o13 = diamond_spine - 3 * o14;
                let o12 = diamond_side[v] - 3 * o14;
                let o8 = cycles - o12 - o13 - 3 * o14;
                let o11 = paw_attach - 2 * o13 - 3 * o14;
                let o10 = paw_far[v] - 2 * o12 - 2 * o13 - 6 * o14;
                let o9 = paw_tail - 2 * o12 - 3 * o14;
                let o7 = claw_center - o11 - o13 - o14;
                let o6 = claw_leaf - o9 - o10 - 2 * o12 - o13 - 3 * o14;
                let o4 = path_end - 2 * o8 - 2 * o9 - o10 - 4 * o12 - 2 * o13 - 6 * o14;
                let o5 = path_mid - 2 * o8 - o10 - 2 * o11 - 2 * o12 - 4 * o13 - 6 * o14;
                let o3 = t[v];
                let o2 = choose2(d) - t[v];
                let o1 = s[v] - 2 * t[v];
                let o0 = d;

                let all = [o0, o1, o2, o3, o4, o5, o6, o7, o8, o9, o10, o11, o12, o13, o14];
                let mut out = [0u64; ORBITS];
                for (slot, x) in out.iter_mut().zip(all) {
                    debug_assert!(x >= 0, "negative orbit count at node {v}: {all:?}");
                    *slot = x.max(0) as u64;
                }
                OrbitVector(out)
            },
        )
        .collect()
}

/// Exact per-node orbit counts.
pub fn count_orbits(g: &MolecularGraph) -> OrbitTable {
    let ig = g.indexed();
    let counts = count_orbits_indexed(&ig);
    ig.names.into_iter().zip(counts).collect()
}

/// Reference counter: classifies every connected induced 3- and 4-node
/// subgraph. O(n⁴); refuses graphs above `cap` nodes.
pub fn brute_force_orbits(g: &MolecularGraph, cap: usize) -> Result<OrbitTable, GraphletError> {
    let ig = g.indexed();
    let n = ig.node_count();
    if n > cap {
        return Err(GraphletError::CapExceeded { cap, nodes: n });
    }
    let mut adj = vec![vec![false; n]; n];
    for &(i, j) in &ig.edges {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    let mut out = vec![[0u64; ORBITS]; n];
    for (i, row) in adj.iter().enumerate() {
        out[i][0] = row.iter().filter(|&&x| x).count() as u64;
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let nodes = [a, b, c];
                let deg = local_degrees(&adj, &nodes);
                let m: usize = deg.iter().sum::<usize>() / 2;
                match m {
                    2 => {
                        for (k, &v) in nodes.iter().enumerate() {
                            out[v][if deg[k] == 2 { 2 } else { 1 }] += 1;
                        }
                    }
                    3 => {
                        for &v in &nodes {
                            out[v][3] += 1;
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let nodes = [a, b, c, d];
                    let deg = local_degrees(&adj, &nodes);
                    let m: usize = deg.iter().sum::<usize>() / 2;
                    let max = *deg.iter().max().unwrap_or(&0);
                    let min = *deg.iter().min().unwrap_or(&0);
                    if min == 0 || m < 3 {
                        // disconnected: an isolated vertex, or two disjoint edges
                        continue;
                    }
                    for (k, &v) in nodes.iter().enumerate() {
                        let orbit = match (m, max, deg[k]) {
                            (3, 3, 3) => 7,
                            (3, 3, _) => 6,
                            (3, 2, 1) => 4,
                            (3, 2, _) => 5,
                            (4, 2, _) => 8,
                            (4, 3, 1) => 9,
                            (4, 3, 2) => 10,
                            (4, 3, 3) => 11,
                            (5, _, 2) => 12,
                            (5, _, 3) => 13,
                            (6, _, _) => 14,
                            _ => unreachable!("connected 4-node graphlet with m={m} deg={deg:?}"),
                        };
                        out[v][orbit] += 1;
                    }
                }
            }
        }
    }
    Ok(ig
        .names
        .into_iter()
        .zip(out.into_iter().map(OrbitVector))
        .collect())
}

fn local_degrees<const K: usize>(adj: &[Vec<bool>], nodes: &[usize; K]) -> [usize; K] {
    let mut deg = [0; K];
    for i in 0..K {
        for j in 0..K {
            if i != j && adj[nodes[i]][nodes[j]] {
                deg[i] += 1;
            }
        }
    }
    deg
}

/// Per-graph mean orbit counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSignature {
    pub graph_id: String,
    pub means: [f64; ORBITS],
}

/// Mean orbit count over all nodes, isolated nodes included.
pub fn graph_signature(graph_id: &str, orbits: &OrbitTable) -> Result<OrbitSignature, GraphletError> {
    if orbits.is_empty() {
        return Err(GraphletError::EmptyGraph);
    }
    let n = orbits.len() as f64;
    let mut means = [0.0; ORBITS];
    for v in orbits.values() {
        for (m, c) in means.iter_mut().zip(v.0) {
            *m += c as f64;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    Ok(OrbitSignature {
        graph_id: graph_id.to_string(),
        means,
    })
}

/// Group-mean signatures standardized per orbit across groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupOrbitMatrix {
    pub groups: Vec<String>,
    pub sizes: Vec<usize>,
    pub means: Vec<[f64; ORBITS]>,
    pub z: Vec<[f64; ORBITS]>,
}

/// Averages signatures per group, then z-scores each orbit column across the
/// group means (population σ + `epsilon`). Signatures without a group are
/// ignored.
pub fn zscore_signatures(
    sigs: &[OrbitSignature],
    groups: &BTreeMap<String, String>,
    epsilon: f64,
) -> Result<GroupOrbitMatrix, GraphletError> {
    let mut acc: BTreeMap<&str, (usize, [f64; ORBITS])> = BTreeMap::new();
    for s in sigs {
        let Some(gname) = groups.get(&s.graph_id) else {
            continue;
        };
        let e = acc.entry(gname.as_str()).or_insert((0, [0.0; ORBITS]));
        e.0 += 1;
        for (a, m) in e.1.iter_mut().zip(s.means) {
            *a += m;
        }
    }
    if acc.len() < 2 {
        return Err(GraphletError::TooFewGroups(acc.len()));
    }
    let names: Vec<String> = acc.keys().map(|s| s.to_string()).collect();
    let sizes: Vec<usize> = acc.values().map(|(n, _)| *n).collect();
    let means: Vec<[f64; ORBITS]> = acc
        .values()
        .map(|(n, sum)| sum.map(|x| x / *n as f64))
        .collect();
    let k = means.len() as f64;
    let mut z = vec![[0.0; ORBITS]; means.len()];
    for o in 0..ORBITS {
        let mu = means.iter().map(|m| m[o]).sum::<f64>() / k;
        let sd = (means.iter().map(|m| (m[o] - mu).powi(2)).sum::<f64>() / k).sqrt();
        for (zi, m) in z.iter_mut().zip(&means) {
            zi[o] = (m[o] - mu) / (sd + epsilon);
        }
    }
    Ok(GroupOrbitMatrix {
        groups: names,
        sizes,
        means,
        z,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub group: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparison {
    pub orbit: usize,
    pub group_a: GroupStats,
    pub group_b: GroupStats,
    /// Mann–Whitney U of group A.
    pub u_statistic: f64,
    pub z_score: f64,
    pub p_value: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Two-sided Mann–Whitney U test with tie correction and continuity
/// correction under the normal approximation. Returns (U_a, z, p).
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&x| (x, true))
        .chain(b.iter().map(|&x| (x, false)))
        .collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_a += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let nf = n as f64;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return (u, 0.0, 1.0);
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = (2.0 * normal.sf(z)).min(1.0);
    (u, z * (u - mu).signum(), p)
}

/// Per-orbit Mann–Whitney comparison of two groups' per-graph means, sorted
/// by ascending p (orbit index breaks ties).
pub fn compare_groups(
    sigs: &[OrbitSignature],
    labels: &BTreeMap<String, String>,
) -> Result<Vec<GroupComparison>, GraphletError> {
    let names: BTreeSet<&str> = labels.values().map(String::as_str).collect();
    if names.len() != 2 {
        return Err(GraphletError::TooFewGroups(names.len()));
    }
    let names: Vec<&str> = names.into_iter().collect();
    let pick = |g: &str| -> Vec<&OrbitSignature> {
        sigs.iter()
            .filter(|s| labels.get(&s.graph_id).map(String::as_str) == Some(g))
            .collect()
    };
    let (ga, gb) = (pick(names[0]), pick(names[1]));
    for (g, members) in [(names[0], &ga), (names[1], &gb)] {
        if members.is_empty() {
            return Err(GraphletError::EmptyGroup(g.to_string()));
        }
    }
    let stats = |g: &str, xs: &[f64]| GroupStats {
        group: g.to_string(),
        n: xs.len(),
        mean: xs.iter().sum::<f64>() / xs.len() as f64,
        median: median(&mut xs.to_vec()),
    };
    let mut out: Vec<GroupComparison> = (0..ORBITS)
        .map(|o| {
            let xa: Vec<f64> = ga.iter().map(|s| s.means[o]).collect();
            let xb: Vec<f64> = gb.iter().map(|s| s.means[o]).collect();
            let (u, z, p) = mann_whitney_u(&xa, &xb);
            GroupComparison {
                orbit: o,
                group_a: stats(names[0], &xa),
                group_b: stats(names[1], &xb),
                u_statistic: u,
                z_score: z,
                p_value: p,
            }
        })
        .collect();
    out.sort_by(|x, y| {
        x.p_value
            .partial_cmp(&y.p_value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.orbit.cmp(&y.orbit))
    });
    Ok(out)
}

fn orbit_header(first: &str) -> String {
    let mut h = first.to_string();
    for o in 0..ORBITS {
        h.push_str(&format!("\to{o}"));
    }
    h
}

/// Per-node table: `gene<TAB>o0..o14`.
pub fn write_orbit_table<W: Write>(mut w: W, orbits: &OrbitTable) -> io::Result<()> {
    writeln!(w, "{}", orbit_header("gene"))?;
    for (g, v) in orbits {
        write!(w, "{g}")?;
        for c in v.0 {
            write!(w, "\t{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Per-graph signatures: `graph_id<TAB>o0..o14` (mean counts).
pub fn write_signatures<W: Write>(mut w: W, sigs: &[OrbitSignature]) -> io::Result<()> {
    writeln!(w, "{}", orbit_header("graph_id"))?;
    for s in sigs {
        write!(w, "{}", s.graph_id)?;
        for m in s.means {
            write!(w, "\t{}", fmt_f64(m))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_signatures(text: &str) -> Result<Vec<OrbitSignature>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h == orbit_header("graph_id") => {}
        _ => return Err("line 1: expected header graph_id<TAB>o0..o14".into()),
    }
    lines
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != ORBITS + 1 {
                return Err(format!("line {}: expected {} columns", i + 1, ORBITS + 1));
            }
            let mut means = [0.0; ORBITS];
            for (m, v) in means.iter_mut().zip(&f[1..]) {
                *m = v
                    .trim()
                    .parse()
                    .map_err(|_| format!("line {}: bad value {v:?}", i + 1))?;
            }
            Ok(OrbitSignature {
                graph_id: f[0].to_string(),
                means,
            })
        })
        .collect()
}
