//! Undirected simple graphs keyed by HGNC gene symbols.
//!
//! Every pathway graph, patient graph and null-model control in the crate is a
//! [`MolecularGraph`]. Nodes are kept in a `BTreeSet` and edges as
//! canonical-ordered pairs, so iteration order (and therefore any
//! serialization) is lexicographic and stable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A normalized HGNC gene symbol: trimmed, non-empty, uppercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeneSymbol(String);

impl GeneSymbol {
    pub fn new(raw: &str) -> Option<Self> {
        let s = raw.trim();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return None;
        }
        Some(GeneSymbol(s.to_uppercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for GeneSymbol {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        GeneSymbol::new(&value).ok_or_else(|| format!("invalid gene symbol {value:?}"))
    }
}

impl From<GeneSymbol> for String {
    fn from(g: GeneSymbol) -> String {
        g.0
    }
}

impl fmt::Display for GeneSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for GeneSymbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Shorthand used heavily in tests and fixtures. Panics on an invalid symbol.
pub fn sym(s: &str) -> GeneSymbol {
    GeneSymbol::new(s).unwrap_or_else(|| panic!("invalid gene symbol {s:?}"))
}

/// Unordered edge stored with the lexicographically smaller endpoint first.
pub type Edge = (GeneSymbol, GeneSymbol);

fn canonical(a: GeneSymbol, b: GeneSymbol) -> Edge {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MolecularGraph {
    nodes: BTreeSet<GeneSymbol>,
    edges: BTreeSet<Edge>,
}

/// Mutable construction buffer. Unlike [`MolecularGraph`] it tolerates
/// self-loop pairs, which appear when two pathway elements collapse onto the
/// same symbol; [`GraphBuilder::build`] drops them.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder {
    nodes: BTreeSet<GeneSymbol>,
    pairs: BTreeSet<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, g: GeneSymbol) -> &mut Self {
        self.nodes.insert(g);
        self
    }

    pub fn add_edge(&mut self, a: GeneSymbol, b: GeneSymbol) -> &mut Self {
        self.nodes.insert(a.clone());
        self.nodes.insert(b.clone());
        self.pairs.insert(canonical(a, b));
        self
    }

    pub fn self_loop_count(&self) -> usize {
        self.pairs.iter().filter(|(a, b)| a == b).count()
    }

    /// Finalizes the buffer, removing any self-loop pairs.
    pub fn build(self) -> MolecularGraph {
        let edges = self.pairs.into_iter().filter(|(a, b)| a != b).collect();
        MolecularGraph {
            nodes: self.nodes,
            edges,
        }
    }
}

impl MolecularGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from an edge list plus extra (possibly isolated) nodes.
    /// Self-loops are dropped.
    pub fn from_edges<I, J>(edges: I, extra_nodes: J) -> Self
    where
        I: IntoIterator<Item = (GeneSymbol, GeneSymbol)>,
        J: IntoIterator<Item = GeneSymbol>,
    {
        let mut b = GraphBuilder::new();
        for (x, y) in edges {
            b.add_edge(x, y);
        }
        for n in extra_nodes {
            b.add_node(n);
        }
        b.build()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &GeneSymbol> + '_ {
        self.nodes.iter()
    }

    pub fn node_set(&self) -> &BTreeSet<GeneSymbol> {
        &self.nodes
    }

    pub fn edges(&self) -> impl ExactSizeIterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn contains_node(&self, g: &GeneSymbol) -> bool {
        self.nodes.contains(g)
    }

    pub fn contains_edge(&self, a: &GeneSymbol, b: &GeneSymbol) -> bool {
        if a <= b {
            self.edges.contains(&(a.clone(), b.clone()))
        } else {
            self.edges.contains(&(b.clone(), a.clone()))
        }
    }

    pub fn degrees(&self) -> BTreeMap<GeneSymbol, usize> {
        let mut deg: BTreeMap<GeneSymbol, usize> =
            self.nodes.iter().map(|n| (n.clone(), 0)).collect();
        for (a, b) in &self.edges {
            *deg.get_mut(a).expect("edge endpoint is a node") += 1;
            *deg.get_mut(b).expect("edge endpoint is a node") += 1;
        }
        deg
    }

    /// Dense view: node list in deterministic order and edges as index pairs
    /// `(i, j)` with `i < j`.
    pub fn indexed(&self) -> IndexedGraph {
        let names: Vec<GeneSymbol> = self.nodes.iter().cloned().collect();
        let pos: BTreeMap<&GeneSymbol, usize> =
            names.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let edges = self
            .edges
            .iter()
            .map(|(a, b)| {
                let (i, j) = (pos[a], pos[b]);
                (i.min(j), i.max(j))
            })
            .collect();
        IndexedGraph { names, edges }
    }

    /// Writes the edge-list text format: one `A<TAB>B` line per edge, then a
    /// `#nodes` section listing degree-0 nodes.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (a, b) in &self.edges {
            writeln!(w, "{a}\t{b}")?;
        }
        let deg = self.degrees();
        let isolated: Vec<_> = deg.iter().filter(|(_, d)| **d == 0).collect();
        if !isolated.is_empty() {
            writeln!(w, "#nodes")?;
            for (n, _) in isolated {
                writeln!(w, "{n}")?;
            }
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("symbols are utf-8")
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, EdgeListError> {
        let mut b = GraphBuilder::new();
        let mut in_nodes = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if t == "#nodes" {
                in_nodes = true;
                continue;
            }
            if t.starts_with('#') {
                continue;
            }
            let bad = || EdgeListError::Malformed {
                line: lineno + 1,
                content: line.clone(),
            };
            if in_nodes {
                b.add_node(GeneSymbol::new(t).ok_or_else(bad)?);
            } else {
                let mut parts = t.split('\t');
                let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(bad());
                };
                let x = GeneSymbol::new(x).ok_or_else(bad)?;
                let y = GeneSymbol::new(y).ok_or_else(bad)?;
                b.add_edge(x, y);
            }
        }
        Ok(b.build())
    }
}

#[derive(Debug, Error)]
pub enum EdgeListError {
    #[error("edge list line {line}: expected `GENE_A<TAB>GENE_B`, got {content:?}")]
    Malformed { line: usize, content: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Index-based copy of a [`MolecularGraph`] for numeric kernels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedGraph {
    pub names: Vec<GeneSymbol>,
    pub edges: Vec<(usize, usize)>,
}

impl IndexedGraph {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    /// Sorted adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.names.len()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn to_graph(&self) -> MolecularGraph {
        MolecularGraph::from_edges(
            self.edges
                .iter()
                .map(|&(i, j)| (self.names[i].clone(), self.names[j].clone())),
            self.names.iter().cloned(),
        )
    }
}

/// Union of node and edge sets; shared symbols collapse to one node.
pub fn merge_graphs<'a, I>(graphs: I) -> MolecularGraph
where
    I: IntoIterator<Item = &'a MolecularGraph>,
{
    let mut out = MolecularGraph::new();
    for g in graphs {
        out.nodes.extend(g.nodes.iter().cloned());
        out.edges.extend(g.edges.iter().cloned());
    }
    out
}

/// Drops self-loop pairs from a construction buffer.
pub fn strip_self_loops(b: GraphBuilder) -> MolecularGraph {
    b.build()
}

/// Induced subgraph on `g.nodes ∩ keep`.
pub fn restrict_to_genes(g: &MolecularGraph, keep: &BTreeSet<GeneSymbol>) -> MolecularGraph {
    MolecularGraph {
        nodes: g.nodes.intersection(keep).cloned().collect(),
        edges: g
            .edges
            .iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b))
            .cloned()
            .collect(),
    }
}
