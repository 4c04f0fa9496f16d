#!/usr/bin/env python3
"""Download the 50-girls excerpt of the Teenage Friends and Lifestyle Study
from the SIENA website and convert the three waves to edge lists.

The data are not redistributed with this repository. After running this
script the acceptance suite picks up data/girls_w{1,2,3}.edges instead of the
synthetic surrogates.

Usage: python3 scripts/fetch_girls.py [outdir]   (default: data)
"""
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

URL = "https://www.stats.ox.ac.uk/~snijders/siena/s50_data.zip"
MEMBERS = ["s50-network1.dat", "s50-network2.dat", "s50-network3.dat"]
EXPECTED_LINKS = [113, 116, 122]


def parse_matrix(text):
    rows = [[int(float(v)) for v in line.split()] for line in text.splitlines() if line.strip()]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("adjacency matrix is not square")
    # any nonzero code is a nomination
    return [[1 if v else 0 for v in r] for r in rows]


def write_edges(path, y, wave):
    n = len(y)
    labels = [f"g{i:02d}" for i in range(1, n + 1)]
    lines = ["# directed", f"# view: wave{wave}", "# nodes: " + " ".join(labels)]
    for i in range(n):
        for j in range(n):
            if i != j and y[i][j]:
                lines.append(f"{labels[i]} {labels[j]}")
    path.write_text("\n".join(lines) + "\n")
    return sum(y[i][j] for i in range(n) for j in range(n) if i != j)


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(URL, timeout=60) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    names = {Path(n).name: n for n in archive.namelist()}
    for wave, (member, expected) in enumerate(zip(MEMBERS, EXPECTED_LINKS), 1):
        if member not in names:
            sys.exit(f"{member} not found in {URL}")
        y = parse_matrix(archive.read(names[member]).decode())
        links = write_edges(out / f"girls_w{wave}.edges", y, wave)
        status = "ok" if links == expected else f"expected {expected}"
        print(f"wave {wave}: {len(y)} nodes, {links} links ({status})")


if __name__ == "__main__":
    main()
