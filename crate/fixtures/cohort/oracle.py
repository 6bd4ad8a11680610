"""Independent reference for the fixture cohort's patient graphs.

Re-derives preprocessing, pathway selection and GPML graph construction
with numpy + ElementTree and writes expected_graphs.tsv:

    sample_id  status  pathways  nodes  edges  edges_sha256

edges_sha256 is the sha256 of the sorted "a\\tb\\n" lines (a < b) of the
patient graph; empty for excluded samples.
"""

import csv
import hashlib
import re
import sys
try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent


def qualify(key):
    ns, _, raw = key.partition(":")
    ns = ns.lower()
    raw = raw.strip()
    if ns in ("label", "symbol", "hgnc"):
        return "label:" + raw.upper()
    if ns == "ensembl":
        return "ensembl:" + re.sub(r"^(ENSG\d+)\.\d+$", r"\1", raw)
    return f"{ns}:{raw}"


def load_mapping(path):
    table = {}
    with open(path) as f:
        for i, line in enumerate(f):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#") or (i == 0 and line.startswith("source_id")):
                continue
            src, sym, pc = line.split("\t")
            table[qualify(src)] = (sym.strip(), pc.strip() == "1")
    return table


def load_matrix(path):
    with open(path) as f:
        rows = list(csv.reader(f, delimiter="\t"))
    samples = rows[0][1:]
    ids = [r[0] for r in rows[1:]]
    vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return ids, samples, vals


def canonicalize(ids, vals, table):
    best = {}
    order = []
    for r, rid in enumerate(ids):
        key = rid if ":" in rid else qualify("ensembl:" + rid)
        if key not in table:
            continue
        sym, coding = table[key]
        if not coding:
            continue
        mean = vals[r].mean()
        if sym not in best:
            order.append(sym)
            best[sym] = (r, mean)
        elif mean > best[sym][1]:
            best[sym] = (r, mean)
    return order, vals[[best[s][0] for s in order]]


def dysregulated(genes, x, tau, eps):
    z = (x - x.mean(axis=0)) / (x.std(axis=0) + eps)
    out = []
    for j in range(x.shape[1]):
        a = np.abs(z[:, j])
        q = np.percentile(a, tau)
        out.append({g for g, v in zip(genes, a) if v >= q})
    return out


def local(tag):
    return tag.rsplit("}", 1)[-1]


XREF_NS = {"ensembl": "ensembl", "entrez gene": "entrez", "entrez": "entrez", "ncbi gene": "entrez",
           "ncbigene": "entrez", "entrezgene": "entrez", "hgnc": "label", "hgnc symbol": "label"}


def xref_key(db, ident):
    d = db.strip().lower()
    if d.startswith("ensembl"):
        ns = "ensembl"
    elif d.startswith("uniprot"):
        ns = "uniprot"
    else:
        ns = XREF_NS.get(d, d.replace(" ", "_").replace(":", "_"))
    return f"{ns}:{ident.strip()}"


def attr(el, *names):
    for n in names:
        if n in el.attrib:
            return el.attrib[n]
    return ""


def pathway_graph(path, table, measured):
    root = ET.parse(path).getroot()
    keep = {}
    for node in root.iter():
        if local(node.tag) != "DataNode":
            continue
        gid = attr(node, "GraphId", "elementId").strip()
        typ = attr(node, "Type", "type").lower()
        label = attr(node, "TextLabel", "textLabel")
        if not gid or typ not in ("geneproduct", "gene", "rna", "mirna", "microrna", "protein"):
            continue
        if typ in ("mirna", "microrna") or label.strip().upper().startswith(("MIR", "HSA-MIR")):
            continue
        xrefs = []
        for x in node:
            if local(x.tag) == "Xref":
                db, ident = attr(x, "Database", "dataSource"), attr(x, "ID", "identifier")
                if db.strip() and ident.strip():
                    xrefs.append(xref_key(db, ident))
        sym = None
        for ns in ("ensembl", "uniprot", "entrez"):
            for k in xrefs:
                if sym is None and k.startswith(ns + ":") and qualify(k) in table:
                    sym = table[qualify(k)][0]
        if sym is None:
            for k in [k for k in xrefs if k.startswith("label:")] + ["label:" + label]:
                if qualify(k) in table:
                    sym = table[qualify(k)][0]
                    break
        if sym is not None and sym in measured:
            keep[gid] = sym
    nodes = set(keep.values())
    edges = set()
    for inter in root.iter():
        if local(inter.tag) != "Interaction":
            continue
        refs = sorted({attr(p, "GraphRef", "elementRef").strip() for p in inter.iter() if local(p.tag) == "Point"})
        syms = [keep[r] for r in refs if r in keep]
        for i, a in enumerate(syms):
            for b in syms[i + 1:]:
                if a != b:
                    edges.add((min(a, b), max(a, b)))
    return nodes, edges


def main():
    cfg = tomllib.loads((HERE / "config.toml").read_text())
    table = load_mapping(HERE / cfg["mapping_table"])
    ids, samples, raw = load_matrix(HERE / cfg["matrix"])
    genes, x = canonicalize(ids, raw, table)
    if cfg.get("log1p", True):
        x = np.log1p(x)
    n = cfg["hvg_n"]
    if n < len(genes):
        order = np.argsort(-x.var(axis=1), kind="stable")[:n]
        keep = sorted(order)
        genes, x = [genes[i] for i in keep], x[keep]
    measured = set(genes)
    dys = dysregulated(genes, x, cfg["tau"], cfg["epsilon"])

    index = {}
    with open(HERE / cfg["pathway_index"]) as f:
        next(f)
        for line in f:
            g, wp = (line.rstrip("\n").split("\t") + [""])[:2]
            if wp.strip():
                index.setdefault(g.strip(), set()).add(wp.strip())
    cache = {}
    out = csv.writer(sys.stdout if "--stdout" in sys.argv else open(HERE / "expected_graphs.tsv", "w"),
                     delimiter="\t", lineterminator="\n")
    out.writerow(["sample_id", "status", "pathways", "nodes", "edges", "edges_sha256"])
    for s, d in zip(samples, dys):
        wps = sorted(set().union(*[index.get(g, set()) for g in d]))
        if not wps:
            out.writerow([s, "no-pathways", 0, 0, 0, ""])
            continue
        nodes, edges = set(), set()
        for wp in wps:
            if wp not in cache:
                cache[wp] = pathway_graph(HERE / cfg["cache_dir"] / f"{wp}.gpml", table, measured)
            nodes |= cache[wp][0]
            edges |= cache[wp][1]
        if len(nodes) < 2 or not edges:
            out.writerow([s, "too-small", len(wps), len(nodes), len(edges), ""])
            continue
        blob = "".join(f"{a}\t{b}\n" for a, b in sorted(edges)).encode()
        out.writerow([s, "built", len(wps), len(nodes), len(edges), hashlib.sha256(blob).hexdigest()])


if __name__ == "__main__":
    main()
