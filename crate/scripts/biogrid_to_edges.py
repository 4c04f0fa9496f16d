#!/usr/bin/env python3
"""Build the two protein views from a BioGRID tab-delimited export.

BioGRID (https://thebiogrid.org) exports cannot be redistributed here. Given
an export and the list of 67 Saccharomyces cerevisiae proteins to keep (one
official symbol per line), this writes data/protein_genetic.edges and
data/protein_physical.edges as undirected views over the same node list.
Self interactions are dropped and repeated interactions collapse.

Usage: python3 scripts/biogrid_to_edges.py BIOGRID.tab3.txt proteins.txt [outdir]
"""
import csv
import sys
from pathlib import Path


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    export, protein_list = Path(sys.argv[1]), Path(sys.argv[2])
    out = Path(sys.argv[3] if len(sys.argv) > 3 else "data")
    out.mkdir(parents=True, exist_ok=True)
    proteins = [p.strip() for p in protein_list.read_text().split() if p.strip()]
    keep = set(proteins)
    edges = {"genetic": set(), "physical": set()}
    with export.open(newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        for row in reader:
            a = row.get("Official Symbol Interactor A")
            b = row.get("Official Symbol Interactor B")
            kind = (row.get("Experimental System Type") or "").strip().lower()
            if a in keep and b in keep and a != b and kind in edges:
                edges[kind].add(tuple(sorted((a, b))))
    for kind, pairs in edges.items():
        lines = ["# undirected", f"# view: {kind}", "# nodes: " + " ".join(proteins)]
        lines += [f"{a} {b}" for a, b in sorted(pairs)]
        (out / f"protein_{kind}.edges").write_text("\n".join(lines) + "\n")
        print(f"{kind}: {len(proteins)} nodes, {len(pairs)} links")


if __name__ == "__main__":
    main()
