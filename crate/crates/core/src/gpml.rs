//! GPML pathway documents and their conversion to interaction graphs.
//!
//! Parsing is lenient about schema revision: both the 2013a attribute names
//! (`GraphId`, `TextLabel`, `GraphRef`, `Database`/`ID`) and the 2021 ones
//! (`elementId`, `textLabel`, `elementRef`, `dataSource`/`identifier`) are
//! accepted, and unknown elements are skipped.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geneid::{canonicalize, GeneIdMapping, Namespace};
use crate::graph::{GeneSymbol, GraphBuilder, MolecularGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GpmlError {
    #[error("{wpid}: malformed XML at byte {offset}: {msg}")]
    Xml {
        wpid: String,
        offset: u64,
        msg: String,
    },
    #[error("{wpid}: {msg}")]
    Schema { wpid: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeType {
    GeneProduct,
    Rna,
    Protein,
    Other,
}

impl NodeType {
    fn classify(raw: &str) -> Self {
        match raw.to_ascii_lowercase().as_str() {
            "geneproduct" | "gene" => NodeType::GeneProduct,
            "rna" | "mirna" | "microrna" => NodeType::Rna,
            "protein" => NodeType::Protein,
            _ => NodeType::Other,
        }
    }

    pub fn is_molecular(self) -> bool {
        !matches!(self, NodeType::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataNode {
    pub graph_id: String,
    pub label: String,
    pub node_type: NodeType,
    /// `Type` attribute as written in the document.
    pub raw_type: String,
    /// Namespace-qualified cross references, e.g. `ensembl:ENSG00000141510`.
    pub xrefs: Vec<String>,
}

impl DataNode {
    /// microRNA nodes: an explicit miRNA type, or a `MIR…`/`hsa-miR…` label.
    pub fn is_microrna(&self) -> bool {
        let t = self.raw_type.to_ascii_lowercase();
        if t == "mirna" || t == "microrna" {
            return true;
        }
        let l = self.label.trim().to_uppercase();
        l.starts_with("MIR") || l.starts_with("HSA-MIR")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionElement {
    pub referenced_graph_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathwayDocument {
    pub wpid: String,
    pub data_nodes: Vec<DataNode>,
    pub interactions: Vec<InteractionElement>,
}

fn xref_namespace(database: &str) -> String {
    let d = database.trim().to_ascii_lowercase();
    let ns = if d.starts_with("ensembl") {
        "ensembl"
    } else if d.starts_with("uniprot") {
        "uniprot"
    } else if d == "entrez gene" || d == "entrez" || d == "ncbi gene" || d == "ncbigene" || d == "entrezgene" {
        "entrez"
    } else if d == "hgnc" || d == "hgnc symbol" {
        "label"
    } else {
        return d.replace([' ', ':'], "_");
    };
    ns.to_string()
}

fn database_name(ns: &str) -> &str {
    match ns {
        "ensembl" => "Ensembl",
        "uniprot" => "Uniprot-TrEMBL",
        "entrez" => "Entrez Gene",
        "label" => "HGNC",
        other => other,
    }
}

struct Attrs(BTreeMap<String, String>);

impl Attrs {
    fn read(e: &BytesStart<'_>, wpid: &str, offset: u64) -> Result<Self, GpmlError> {
        let mut m = BTreeMap::new();
        for a in e.attributes() {
            let a = a.map_err(|err| GpmlError::Xml {
                wpid: wpid.to_string(),
                offset,
                msg: err.to_string(),
            })?;
            let key = String::from_utf8_lossy(a.key.local_name().as_ref()).into_owned();
            let val = a
                .unescape_value()
                .map_err(|err| GpmlError::Xml {
                    wpid: wpid.to_string(),
                    offset,
                    msg: err.to_string(),
                })?
                .into_owned();
            m.insert(key, val);
        }
        Ok(Attrs(m))
    }

    fn get(&self, names: &[&str]) -> Option<&str> {
        names.iter().find_map(|n| self.0.get(*n).map(String::as_str))
    }
}

#[derive(Default)]
struct Pending {
    node: Option<DataNode>,
    interaction: Option<InteractionElement>,
}

/// Parses a GPML document. Only DataNodes and Interactions are kept; labels,
/// shapes, groups and anchors are ignored.
pub fn parse_gpml(xml: &[u8], wpid: &str) -> Result<PathwayDocument, GpmlError> {
    if wpid.trim().is_empty() {
        return Err(GpmlError::Schema {
            wpid: wpid.to_string(),
            msg: "empty pathway id".into(),
        });
    }
    let mut reader = Reader::from_reader(xml);
    reader.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut doc = PathwayDocument {
        wpid: wpid.to_string(),
        data_nodes: Vec::new(),
        interactions: Vec::new(),
    };
    let mut depth = 0usize;
    let mut saw_root = false;
    let mut pending = Pending::default();

    loop {
        let offset = reader.buffer_position();
        let ev = reader.read_event_into(&mut buf).map_err(|e| GpmlError::Xml {
            wpid: wpid.to_string(),
            offset: reader.error_position(),
            msg: e.to_string(),
        })?;
        match ev {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(ev, Event::Empty(_));
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                if depth == 0 {
                    if saw_root {
                        return Err(GpmlError::Xml {
                            wpid: wpid.into(),
                            offset,
                            msg: "multiple root elements".into(),
                        });
                    }
                    saw_root = true;
                    if name != "Pathway" {
                        return Err(GpmlError::Schema {
                            wpid: wpid.into(),
                            msg: format!("root element is <{name}>, expected <Pathway>"),
                        });
                    }
                }
                let attrs = Attrs::read(e, wpid, offset)?;
                on_open(&name, &attrs, &mut pending, &mut doc);
                if is_empty {
                    on_close(&name, &mut pending, &mut doc);
                } else {
                    depth += 1;
                }
            }
            Event::End(ref e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
                on_close(&name, &mut pending, &mut doc);
                depth = depth.saturating_sub(1);
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !saw_root {
        return Err(GpmlError::Schema {
            wpid: wpid.into(),
            msg: "document has no root element".into(),
        });
    }
    let mut seen = HashSet::new();
    for n in &doc.data_nodes {
        if !seen.insert(n.graph_id.as_str()) {
            return Err(GpmlError::Schema {
                wpid: wpid.into(),
                msg: format!("duplicate DataNode id {:?}", n.graph_id),
            });
        }
    }
    Ok(doc)
}

fn on_open(name: &str, attrs: &Attrs, pending: &mut Pending, _doc: &mut PathwayDocument) {
    match name {
        "DataNode" => {
            let raw_type = attrs.get(&["Type", "type"]).unwrap_or("").to_string();
            pending.node = Some(DataNode {
                graph_id: attrs.get(&["GraphId", "elementId"]).unwrap_or("").trim().to_string(),
                label: attrs.get(&["TextLabel", "textLabel"]).unwrap_or("").to_string(),
                node_type: NodeType::classify(&raw_type),
                raw_type,
                xrefs: Vec::new(),
            });
        }
        "Xref" => {
            if let Some(node) = pending.node.as_mut() {
                let db = attrs.get(&["Database", "dataSource"]).unwrap_or("");
                let id = attrs.get(&["ID", "identifier"]).unwrap_or("").trim();
                if !db.trim().is_empty() && !id.is_empty() {
                    node.xrefs.push(format!("{}:{id}", xref_namespace(db)));
                }
            }
        }
        "Interaction" => pending.interaction = Some(InteractionElement::default()),
        "Point" => {
            if let Some(int) = pending.interaction.as_mut() {
                if let Some(r) = attrs.get(&["GraphRef", "elementRef"]) {
                    let r = r.trim();
                    if !r.is_empty() {
                        int.referenced_graph_ids.push(r.to_string());
                    }
                }
            }
        }
        _ => {}
    }
}

fn on_close(name: &str, pending: &mut Pending, doc: &mut PathwayDocument) {
    match name {
        "DataNode" => {
            // nodes without an id can never be referenced; drop them
            if let Some(n) = pending.node.take().filter(|n| !n.graph_id.is_empty()) {
                doc.data_nodes.push(n);
            }
        }
        "Interaction" => {
            if let Some(i) = pending.interaction.take() {
                doc.interactions.push(i);
            }
        }
        _ => {}
    }
}

/// Serializes the retained fields back to a minimal GPML 2013a document.
pub fn to_gpml(doc: &PathwayDocument) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&format!(
        "<Pathway xmlns=\"http://pathvisio.org/GPML/2013a\" Name=\"{}\">\n",
        escape(doc.wpid.as_str())
    ));
    for n in &doc.data_nodes {
        s.push_str(&format!(
            "  <DataNode TextLabel=\"{}\" GraphId=\"{}\" Type=\"{}\">\n",
            escape(n.label.as_str()),
            escape(n.graph_id.as_str()),
            escape(n.raw_type.as_str())
        ));
        for x in &n.xrefs {
            let (ns, id) = x.split_once(':').unwrap_or(("", x.as_str()));
            s.push_str(&format!(
                "    <Xref Database=\"{}\" ID=\"{}\"/>\n",
                escape(database_name(ns)),
                escape(id)
            ));
        }
        s.push_str("  </DataNode>\n");
    }
    for i in &doc.interactions {
        s.push_str("  <Interaction>\n    <Graphics>\n");
        for r in &i.referenced_graph_ids {
            s.push_str(&format!("      <Point GraphRef=\"{}\"/>\n", escape(r.as_str())));
        }
        s.push_str("    </Graphics>\n  </Interaction>\n");
    }
    s.push_str("</Pathway>\n");
    s
}

const RESOLUTION_ORDER: [Namespace; 3] = [Namespace::Ensembl, Namespace::Uniprot, Namespace::Entrez];

/// Resolves a DataNode through its Ensembl, UniProt and Entrez xrefs (in
/// that order), then its HGNC xref or label.
pub fn resolve_with_table<'a>(
    table: &'a GeneIdMapping,
) -> impl Fn(&DataNode) -> Option<GeneSymbol> + 'a {
    move |node: &DataNode| {
        for ns in RESOLUTION_ORDER {
            let prefix = format!("{}:", ns.prefix());
            for x in node.xrefs.iter().filter(|x| x.starts_with(&prefix)) {
                if let Some(s) = canonicalize(x, table, false) {
                    return Some(s);
                }
            }
        }
        let own = format!("label:{}", node.label);
        node.xrefs
            .iter()
            .filter(|x| x.starts_with("label:"))
            .map(String::as_str)
            .chain(std::iter::once(own.as_str()))
            .find_map(|k| canonicalize(k, table, false))
    }
}

/// Counts describing how a document reduced to its graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub data_nodes: usize,
    pub non_molecular: usize,
    pub microrna: usize,
    pub unresolved: usize,
    pub unmeasured: usize,
    pub retained: usize,
    pub self_loops: usize,
}

/// Builds the undirected interaction graph of a pathway, keeping only
/// molecular nodes that resolve to a measured HGNC symbol.
pub fn build_pathway_graph<F>(
    doc: &PathwayDocument,
    resolver: F,
    measured: &BTreeSet<GeneSymbol>,
) -> MolecularGraph
where
    F: Fn(&DataNode) -> Option<GeneSymbol>,
{
    build_pathway_graph_with_stats(doc, resolver, measured).0
}

pub fn build_pathway_graph_with_stats<F>(
    doc: &PathwayDocument,
    resolver: F,
    measured: &BTreeSet<GeneSymbol>,
) -> (MolecularGraph, BuildStats)
where
    F: Fn(&DataNode) -> Option<GeneSymbol>,
{
    let mut stats = BuildStats {
        data_nodes: doc.data_nodes.len(),
        ..Default::default()
    };
    let mut retained: BTreeMap<&str, GeneSymbol> = BTreeMap::new();
    for node in &doc.data_nodes {
        if !node.node_type.is_molecular() {
            stats.non_molecular += 1;
            continue;
        }
        if node.is_microrna() {
            stats.microrna += 1;
            continue;
        }
        let Some(symbol) = resolver(node) else {
            stats.unresolved += 1;
            continue;
        };
        if !measured.contains(&symbol) {
            stats.unmeasured += 1;
            continue;
        }
        retained.insert(node.graph_id.as_str(), symbol);
    }
    stats.retained = retained.len();

    let mut b = GraphBuilder::new();
    for s in retained.values() {
        b.add_node(s.clone());
    }
    for int in &doc.interactions {
        let refs: BTreeSet<&str> = int
            .referenced_graph_ids
            .iter()
            .map(String::as_str)
            .filter(|r| retained.contains_key(r))
            .collect();
        let refs: Vec<&GeneSymbol> = refs.into_iter().map(|r| &retained[r]).collect();
        for (i, a) in refs.iter().enumerate() {
            for c in &refs[i + 1..] {
                b.add_edge((*a).clone(), (*c).clone());
            }
        }
    }
    stats.self_loops = b.self_loop_count();
    (b.build(), stats)
}
