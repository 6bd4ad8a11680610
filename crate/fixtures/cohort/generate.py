"""Regenerates the fixture cohort: GPML pathways, expression matrix,
identifier table, gene->pathway index, labels and pipeline config.

Deterministic (fixed numpy seed). Run from any directory:
    python3 fixtures/cohort/generate.py
"""

import os
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
rng = np.random.default_rng(20240611)

# ---------------------------------------------------------------- genes

PATHWAY_GENES = """
TP53 MDM2 CDKN1A BAX BBC3 GADD45A
PIK3CA AKT1 MTOR PTEN TSC2 RHEB FOXO3
KRAS BRAF MAP2K1 MAPK1 MAPK3 ELK1 FOS JUN
CDK1 CCNB1 CDK2 CCNE1 CDK4 CCND1 RB1 E2F1
CASP3 CASP8 CASP9 BCL2 BCL2L1 CYCS APAF1 XIAP
CTNNB1 APC AXIN1 GSK3B LEF1 TCF7 MYC
JAK1 JAK2 STAT1 STAT3 IL6 IL6R SOCS3
NFKB1 RELA IKBKB CHUK NFKBIA TNF TNFRSF1A TRAF2
BRCA1 BRCA2 RAD51 ATM ATR CHEK1 CHEK2 PALB2
TGFB1 TGFBR1 TGFBR2 SMAD2 SMAD3 SMAD4 SMAD7
IFNG
""".split()
FILLERS = [f"ZNF{n}" for n in range(101, 216)]
NONCODING = ["MALAT1", "NEAT1", "XIST", "H19"]

ensembl = {}
for i, g in enumerate(PATHWAY_GENES + FILLERS + NONCODING):
    ensembl[g] = f"ENSG00000{300001 + 7 * i:06d}"
entrez = {g: str(1000 + 13 * i) for i, g in enumerate(PATHWAY_GENES)}
uniprot = {g: f"P{10000 + 37 * i:05d}" for i, g in enumerate(PATHWAY_GENES)}

# ------------------------------------------------------------- pathways
# node: (graph_id, label, type, [(database, id), ...]); "g:" label means a
# gene node with its default Ensembl xref.


def gene(gid, symbol, xref="ensembl", typ="GeneProduct"):
    if xref == "ensembl":
        x = [("Ensembl", ensembl[symbol])]
    elif xref == "entrez":
        x = [("Entrez Gene", entrez[symbol])]
    elif xref == "uniprot":
        x = [("Uniprot-TrEMBL", uniprot[symbol])]
    elif xref == "hgnc":
        x = [("HGNC", symbol)]
    else:
        x = []
    return (gid, symbol, typ, x)


PATHWAYS = {
    "WP9001": dict(
        title="p53 core signalling",
        fmt="2013a",
        nodes=[
            gene("d1a", "TP53"), gene("d2b", "MDM2"), gene("d3c", "CDKN1A", "entrez"),
            gene("d4d", "BAX"), gene("d5e", "BBC3", "hgnc"), gene("d6f", "GADD45A", None),
        ],
        interactions=[
            ["d1a", "d2b", "d3c", "d4d"],
            ["d4d", "d5e"], ["d5e", "d6f"], ["d6f", "d3c"],
            ["d1a", "anc01"],
        ],
        anchors=["anc01"],
        labels=["Nucleus", "DNA damage"],
    ),
    "WP9002": dict(
        title="PI3K-AKT-mTOR axis",
        fmt="2021",
        nodes=[
            gene("n1", "PIK3CA"), gene("n2", "AKT1", "uniprot"), gene("n3", "MTOR"),
            gene("n4", "PTEN"), gene("n5", "TSC2"), gene("n6", "RHEB", typ="Protein"),
            gene("n7", "FOXO3"),
            ("n8", "PIP3", "Metabolite", [("ChEBI", "CHEBI:16618")]),
        ],
        interactions=[
            ["n4", "n1"], ["n1", "n2"], ["n2", "n4"], ["n7", "n2"],
            ["n2", "n5"], ["n5", "n6"], ["n6", "n3"], ["n3", "n2"],
            ["n1", "n8"], ["n8", "n2"],
        ],
        anchors=[],
        labels=["Plasma membrane"],
        groups=[("grp1", ["n5", "n6"])],
    ),
    "WP9003": dict(
        title="MAPK cascade",
        fmt="2013a",
        nodes=[
            gene("k1", "KRAS"), gene("k2", "BRAF"), gene("k3", "MAP2K1"), gene("k4", "MAPK1"),
            gene("k5", "MAPK3"), gene("k6", "ELK1"), gene("k7", "FOS"), gene("k8", "JUN"),
        ],
        interactions=[
            ["k1", "k2"], ["k2", "k3"], ["k3", "k4"], ["k3", "k5"],
            ["k4", "k6"], ["k5", "k6"], ["k6", "k7"], ["k7", "k8"], ["k8", "k4"],
        ],
        anchors=[],
        labels=["Cytoplasm"],
    ),
    "WP9004": dict(
        title="G1/S and G2/M control",
        fmt="2013a",
        nodes=[
            gene("c1", "CDK1"), gene("c2", "CCNB1"), gene("c3", "CDK2"), gene("c4", "CCNE1"),
            gene("c5", "CDK4"), gene("c6", "CCND1"), gene("c7", "RB1"), gene("c8", "E2F1"),
            ("c9", "hsa-miR-15a", "Rna", [("miRBase", "MIMAT0000068")]),
        ],
        interactions=[
            ["c5", "c6", "c7", "c8"],
            ["c3", "c4", "c7"], ["c1", "c2"], ["c2", "c8"], ["c1", "c7"],
            ["c9", "c6"], ["c9", "c5"],
        ],
        anchors=[],
        labels=[],
    ),
    "WP9005": dict(
        title="Intrinsic apoptosis",
        fmt="2021",
        nodes=[
            gene("a1", "CASP3"), gene("a2", "CASP8"), gene("a3", "CASP9"), gene("a4", "BCL2"),
            gene("a5", "BCL2L1"), gene("a6", "CYCS"), gene("a7", "APAF1", typ="Protein"),
            gene("a8", "XIAP"),
        ],
        interactions=[
            ["a3", "a6", "a7", "a8", "a1"],
            ["a4", "a5"], ["a2", "a1"], ["a4", "a6"], ["a4", "a2"],
        ],
        anchors=["ax1"],
        labels=["Mitochondrion"],
    ),
    "WP9006": dict(
        title="Canonical Wnt",
        fmt="2013a",
        nodes=[
            gene("w1", "CTNNB1"), gene("w2", "APC"), gene("w3", "AXIN1"), gene("w4", "GSK3B"),
            gene("w5", "LEF1"), gene("w6", "TCF7"), gene("w7", "MYC"), gene("w8", "CCND1"),
        ],
        interactions=[
            ["w2", "w3", "w4", "w1"],
            ["w1", "w5"], ["w5", "w7"], ["w7", "w6"], ["w6", "w1"], ["w7", "w8"],
        ],
        anchors=[],
        labels=["Destruction complex"],
        groups=[("dc", ["w2", "w3", "w4"])],
    ),
    "WP9007": dict(
        title="IL-6 JAK/STAT",
        fmt="2021",
        nodes=[
            gene("j1", "JAK1"), gene("j2", "JAK2"), gene("j3", "STAT1"), gene("j4", "STAT3"),
            gene("j5", "IL6"), gene("j6", "IL6R"), gene("j7", "SOCS3"),
        ],
        interactions=[
            ["j5", "j6"], ["j6", "j1"], ["j6", "j2"], ["j1", "j4"], ["j2", "j4"],
            ["j4", "j7"], ["j7", "j1"], ["j3", "j1"], ["j3"],
        ],
        anchors=[],
        labels=[],
    ),
    "WP9008": dict(
        title="TNF / NF-kB",
        fmt="2013a",
        nodes=[
            gene("f1", "NFKB1"), gene("f2", "RELA"), gene("f3", "IKBKB"), gene("f4", "CHUK"),
            gene("f5", "NFKBIA"), gene("f6", "TNF"), gene("f7", "TNFRSF1A"), gene("f8", "TRAF2"),
        ],
        interactions=[
            ["f6", "f7"], ["f7", "f8"], ["f8", "f3"], ["f8", "f4"],
            ["f3", "f5"], ["f4", "f5"], ["f5", "f1", "f2"],
        ],
        anchors=["fa1"],
        labels=["Cytosol"],
    ),
    "WP9009": dict(
        title="Homologous recombination",
        fmt="2013a",
        nodes=[
            gene("r1", "BRCA1"), gene("r2", "BRCA2", "uniprot"), gene("r3", "RAD51", "entrez"),
            gene("r4", "ATM"), gene("r5", "ATR"), gene("r6", "CHEK1"), gene("r7", "CHEK2"),
            gene("r8", "PALB2", "hgnc"),
            gene("r9", "BRCA1", "entrez"),
        ],
        interactions=[
            ["r1", "r2", "r8", "r3"],
            ["r4", "r7"], ["r5", "r6"], ["r4", "r5"], ["r7", "r1"],
            ["r1", "r9"],
        ],
        anchors=[],
        labels=[],
    ),
    "WP9010": dict(
        title="TGF-beta / SMAD",
        fmt="2021",
        nodes=[
            gene("t1", "TGFB1"), gene("t2", "TGFBR1"), gene("t3", "TGFBR2"), gene("t4", "SMAD2"),
            gene("t5", "SMAD3"), gene("t6", "SMAD4"), gene("t7", "SMAD7"),
            ("t8", "MALAT1", "Rna", [("Ensembl", ensembl["MALAT1"])]),
        ],
        interactions=[
            ["t4", "t5", "t6", "t2"],
            ["t1", "t3"], ["t3", "t2"], ["t7", "t2"], ["t8", "t6"],
        ],
        anchors=[],
        labels=["Extracellular"],
    ),
    "WP9011": dict(
        title="Interferon-gamma stub",
        fmt="2013a",
        nodes=[
            gene("y1", "IFNG"),
            ("y2", "hsa-miR-21", "Rna", [("miRBase", "MIMAT0000076")]),
            ("y3", "ATP", "Metabolite", [("ChEBI", "CHEBI:15422")]),
            ("y4", "LOC999", "GeneProduct", [("Ensembl", "ENSG00000999999")]),
        ],
        interactions=[["y1", "y2"], ["y1", "y3"], ["y1", "y4"], ["y2", "y3"]],
        anchors=[],
        labels=[],
    ),
}


# Hub genes reach targets curated in other pathways; stars add the degree
# heterogeneity typical of signalling maps.
HUBS = {
    "WP9001": ("d1a", ["MYC", "ATM", "CHEK2", "BCL2", "CDK2", "E2F1", "CASP9"]),
    "WP9002": ("n2", ["GSK3B", "BAX", "CDKN1A", "MDM2", "IKBKB"]),
    "WP9006": ("w7", ["CDK4", "CCNE1", "E2F1", "CDK2", "TP53"]),
    "WP9007": ("j4", ["MYC", "BCL2L1", "CCND1", "BCL2", "FOS"]),
}
for wpid, (hub, targets) in HUBS.items():
    for k, sym in enumerate(targets):
        PATHWAYS[wpid]["nodes"].append(gene(f"{hub}h{k}", sym, "hgnc"))
        PATHWAYS[wpid]["interactions"].append([hub, f"{hub}h{k}"])


def esc(s):
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def write_2013a(wpid, p):
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<Pathway xmlns="http://pathvisio.org/GPML/2013a" Name="{esc(p["title"])}" '
           f'Version="20240611" Organism="Homo sapiens">',
           f'  <Comment Source="WikiPathways-description">Fixture pathway {wpid}.</Comment>',
           '  <Graphics BoardWidth="900.0" BoardHeight="640.0" />']
    for k, (gid, label, typ, xrefs) in enumerate(p["nodes"]):
        out.append(f'  <DataNode TextLabel="{esc(label)}" GraphId="{gid}" Type="{typ}">')
        out.append(f'    <Graphics CenterX="{80 + 90 * k}.0" CenterY="{120 + 40 * (k % 3)}.0" '
                   'Width="80.0" Height="20.0" ZOrder="32768" FontSize="10" Valign="Middle" />')
        if xrefs:
            for db, xid in xrefs:
                out.append(f'    <Xref Database="{esc(db)}" ID="{esc(xid)}" />')
        else:
            out.append('    <Xref Database="" ID="" />')
        out.append('  </DataNode>')
    anchors = list(p.get("anchors", []))
    for k, refs in enumerate(p["interactions"]):
        out.append(f'  <Interaction GraphId="int{k:02d}">')
        out.append('    <Graphics ZOrder="12288" LineThickness="1.0">')
        for j, r in enumerate(refs):
            arrow = ' ArrowHead="Arrow"' if j == len(refs) - 1 else ""
            out.append(f'      <Point X="{100 + 10 * j}.0" Y="{200 + 5 * k}.0" GraphRef="{r}" '
                       f'RelX="0.0" RelY="1.0"{arrow} />')
        if len(refs) == 1:
            out.append(f'      <Point X="400.0" Y="{200 + 5 * k}.0" />')
        if k == 0 and anchors:
            out.append(f'      <Anchor Position="0.5" Shape="None" GraphId="{anchors.pop()}" />')
        out.append('    </Graphics>')
        out.append('    <Xref Database="" ID="" />')
        out.append('  </Interaction>')
    for k, text in enumerate(p.get("labels", [])):
        out.append(f'  <Label TextLabel="{esc(text)}" GraphId="lbl{k}">')
        out.append(f'    <Graphics CenterX="{50 + 200 * k}.0" CenterY="40.0" Width="120.0" Height="25.0" '
                   'ZOrder="28672" FontSize="12" />')
        out.append('  </Label>')
    out.append('  <Shape TextLabel="" GraphId="shp0">')
    out.append('    <Graphics CenterX="450.0" CenterY="320.0" Width="700.0" Height="400.0" '
               'ZOrder="16384" ShapeType="RoundedRectangle" />')
    out.append('  </Shape>')
    for gid, members in p.get("groups", []):
        out.append(f'  <Group GroupId="{gid}" GraphId="{gid}g" Style="Complex" />')
    out.append('  <InfoBox CenterX="0.0" CenterY="0.0" />')
    out.append('  <Biopax />')
    out.append('</Pathway>')
    return "\n".join(out) + "\n"


def write_2021(wpid, p):
    grp_of = {m: gid for gid, ms in p.get("groups", []) for m in ms}
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<Pathway xmlns="http://pathvisio.org/GPML/2021" title="{esc(p["title"])}" '
           'organism="Homo sapiens">',
           f'  <Xref identifier="{wpid}" dataSource="WikiPathways"/>',
           '  <Graphics boardWidth="900.0" boardHeight="640.0"/>',
           '  <DataNodes>']
    for k, (gid, label, typ, xrefs) in enumerate(p["nodes"]):
        g = f' groupRef="{grp_of[gid]}"' if gid in grp_of else ""
        out.append(f'    <DataNode elementId="{gid}" textLabel="{esc(label)}" type="{typ}"{g}>')
        for db, xid in xrefs:
            out.append(f'      <Xref identifier="{esc(xid)}" dataSource="{esc(db)}"/>')
        out.append(f'      <Graphics centerX="{80 + 90 * k}.0" centerY="{150 + 30 * (k % 4)}.0" '
                   'width="80.0" height="20.0"/>')
        out.append('    </DataNode>')
    out.append('  </DataNodes>')
    out.append('  <Interactions>')
    anchors = list(p.get("anchors", []))
    for k, refs in enumerate(p["interactions"]):
        out.append(f'    <Interaction elementId="i{k:02d}">')
        out.append('      <Waypoints>')
        for j, r in enumerate(refs):
            arrow = ' arrowHead="mim-conversion"' if j == len(refs) - 1 else ""
            out.append(f'        <Point elementId="i{k:02d}p{j}" x="{100 + 10 * j}.0" y="{200 + 5 * k}.0" '
                       f'elementRef="{r}"{arrow}/>')
        if len(refs) == 1:
            out.append(f'        <Point elementId="i{k:02d}px" x="400.0" y="{200 + 5 * k}.0"/>')
        out.append('      </Waypoints>')
        if k == 0 and anchors:
            out.append('      <Anchors>')
            out.append(f'        <Anchor elementId="{anchors.pop()}" position="0.5" shapeType="None"/>')
            out.append('      </Anchors>')
        out.append('    </Interaction>')
    out.append('  </Interactions>')
    if p.get("labels"):
        out.append('  <Labels>')
        for k, text in enumerate(p["labels"]):
            out.append(f'    <Label elementId="lbl{k}" textLabel="{esc(text)}">')
            out.append(f'      <Graphics centerX="{60 + 200 * k}.0" centerY="40.0" width="120.0" height="25.0"/>')
            out.append('    </Label>')
        out.append('  </Labels>')
    if p.get("groups"):
        out.append('  <Groups>')
        for gid, _ in p["groups"]:
            out.append(f'    <Group elementId="{gid}" type="Complex">')
            out.append('      <Graphics centerX="300.0" centerY="300.0" width="200.0" height="60.0"/>')
            out.append('    </Group>')
        out.append('  </Groups>')
    out.append('</Pathway>')
    return "\n".join(out) + "\n"


# --------------------------------------------------------------- matrix


def main():
    gdir = os.path.join(HERE, "gpml")
    os.makedirs(gdir, exist_ok=True)
    for wpid, p in PATHWAYS.items():
        text = write_2013a(wpid, p) if p["fmt"] == "2013a" else write_2021(wpid, p)
        with open(os.path.join(gdir, f"{wpid}.gpml"), "w") as f:
            f.write(text)

    members = {}
    for wpid, p in PATHWAYS.items():
        for _, label, typ, xrefs in p["nodes"]:
            if label in PATHWAY_GENES:
                members.setdefault(label, set()).add(wpid)

    # identifier table
    rows = ["source_id\thgnc_symbol\tprotein_coding"]
    for g in PATHWAY_GENES + FILLERS:
        rows.append(f"ensembl:{ensembl[g]}\t{g}\t1")
    for g in NONCODING:
        rows.append(f"ensembl:{ensembl[g]}\t{g}\t0")
    dup_sources = {}
    for k, g in enumerate(["TP53", "CCND1", "STAT3", "ZNF120", "ZNF150"]):
        alt = f"ENSG00000{800001 + k:06d}"
        dup_sources[g] = alt
        rows.append(f"ensembl:{alt}\t{g}\t1")
    for g in PATHWAY_GENES:
        rows.append(f"entrez:{entrez[g]}\t{g}\t1")
        rows.append(f"uniprot:{uniprot[g]}\t{g}\t1")
    for g in PATHWAY_GENES + FILLERS:
        rows.append(f"label:{g}\t{g}\t1")
    for g in NONCODING:
        rows.append(f"label:{g}\t{g}\t0")
    with open(os.path.join(HERE, "id_mapping.tsv"), "w") as f:
        f.write("\n".join(rows) + "\n")

    # gene -> pathway index; some fillers recorded with no pathway
    idx = ["gene\twpid"]
    for g in sorted(members):
        for wp in sorted(members[g]):
            idx.append(f"{g}\t{wp}")
    for g in FILLERS[:12]:
        idx.append(f"{g}\t")
    with open(os.path.join(HERE, "pathway_index.tsv"), "w") as f:
        f.write("\n".join(idx) + "\n")

    # matrix rows: (row id, symbol-or-None)
    matrix_rows = []
    for g in PATHWAY_GENES + FILLERS + NONCODING:
        version = 1 + (sum(map(ord, g)) % 9)
        matrix_rows.append((f"{ensembl[g]}.{version}", g))
    for g, alt in dup_sources.items():
        matrix_rows.append((f"{alt}.2", g))
    for k in range(8):
        matrix_rows.append((f"ENSG00000{900001 + k:06d}.1", None))
    # one row addressed through another namespace
    matrix_rows.append((f"entrez:{entrez['IFNG']}", "IFNG-ENTREZ"))

    samples = [f"S{i:02d}" for i in range(1, 31)]
    classes = ["tumor" if i < 15 else "normal" for i in range(30)]
    # swap a couple so classes interleave in sample order
    classes[3], classes[20] = classes[20], classes[3]

    base = rng.uniform(2.0, 6.0, size=len(matrix_rows))
    noise = rng.normal(0.0, 0.45, size=(len(matrix_rows), len(samples)))
    logv = base[:, None] + noise

    row_of = {}
    for r, (_, g) in enumerate(matrix_rows):
        if g is not None and g not in row_of and g in PATHWAY_GENES + FILLERS:
            row_of[g] = r

    tumor_pool = ["WP9001", "WP9002", "WP9003", "WP9004", "WP9005", "WP9006"]
    normal_pool = ["WP9005", "WP9006", "WP9007", "WP9008", "WP9009", "WP9010"]
    no_index_fillers = FILLERS[12:]
    for j, s in enumerate(samples):
        if s == "S29":
            for g in no_index_fillers[:38]:
                logv[row_of[g], j] += 12.0
            continue
        if s == "S30":
            for g in no_index_fillers[40:77]:
                logv[row_of[g], j] += 12.0
            logv[row_of["IFNG"], j] += 12.5
            continue
        pool = tumor_pool if classes[j] == "tumor" else normal_pool
        k = int(rng.integers(2, 4))
        for wp in rng.choice(pool, size=k, replace=False):
            for _, label, _, _ in PATHWAYS[wp]["nodes"]:
                if label in row_of:
                    logv[row_of[label], j] += rng.uniform(2.5, 3.5)
    values = np.expm1(np.clip(logv, 0.0, None))

    with open(os.path.join(HERE, "expression.tsv"), "w") as f:
        f.write("gene_id\t" + "\t".join(samples) + "\n")
        for r, (rid, _) in enumerate(matrix_rows):
            f.write(rid + "\t" + "\t".join(f"{v:.3f}" for v in values[r]) + "\n")

    with open(os.path.join(HERE, "labels.tsv"), "w") as f:
        f.write("sample_id\tclass\n")
        for s, c in zip(samples, classes):
            f.write(f"{s}\t{c}\n")


if __name__ == "__main__":
    main()
