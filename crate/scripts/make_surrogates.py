#!/usr/bin/env python3
"""Generate synthetic stand-ins for the two benchmark multiplex networks.

The original files cannot be redistributed with this repository (see
scripts/fetch_girls.py for the 50-girls excerpt). These surrogates keep the
node counts, directedness and exact per-view link counts, and are sampled from
a latent space joint model with planted intercepts so that parameter recovery
can be checked.

Usage: python3 scripts/make_surrogates.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np


def cluster_positions(rng, n, n_clusters, spread, jitter):
    centres = rng.normal(0.0, spread, size=(n_clusters, 2))
    member = rng.integers(0, n_clusters, size=n)
    return centres[member] + rng.normal(0.0, jitter, size=(n, 2))


def expected_links(z, alpha, directed, scale):
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1) * scale
    p = 1.0 / (1.0 + np.exp(-(alpha - d2)))
    np.fill_diagonal(p, 0.0)
    return p.sum() if directed else p.sum() / 2.0


def calibrate_scale(z, alpha, directed, target):
    # expected link count is decreasing in the distance scale
    lo, hi = 1e-3, 1e3
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        if expected_links(z, alpha, directed, mid) > target:
            lo = mid
        else:
            hi = mid
    return np.sqrt(lo * hi)


def sample_exact(rng, z, alpha, directed, target):
    n = z.shape[0]
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1)
    p = 1.0 / (1.0 + np.exp(-(alpha - d2)))
    for _ in range(100000):
        u = rng.random((n, n))
        y = (u < p).astype(int)
        np.fill_diagonal(y, 0)
        if not directed:
            y = np.triu(y, 1)
            y = y + y.T
            count = int(y.sum() // 2)
        else:
            count = int(y.sum())
        if count == target:
            return y
    raise RuntimeError("could not hit target link count")


def write_view(path, labels, y, directed, view_label):
    n = len(labels)
    lines = [
        f"# {'directed' if directed else 'undirected'}",
        f"# view: {view_label}",
        "# nodes: " + " ".join(labels),
    ]
    for i in range(n):
        for j in range(n):
            if y[i, j] and (directed or i < j):
                lines.append(f"{labels[i]} {labels[j]}")
    path.write_text("\n".join(lines) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    out.mkdir(parents=True, exist_ok=True)

    # 50 girls, three directed waves, planted intercepts near the published
    # joint-model estimates.
    rng = np.random.default_rng(20140601)
    labels = [f"g{i:02d}" for i in range(1, 51)]
    z = cluster_positions(rng, 50, 12, 1.6, 0.35)
    z *= np.sqrt(calibrate_scale(z, -0.39, True, 116))
    for wave, (alpha, links) in enumerate(zip([-0.42, -0.39, -0.32], [113, 116, 122]), 1):
        zw = z + rng.normal(0.0, 0.12, size=z.shape)
        y = sample_exact(rng, zw, alpha, True, links)
        write_view(out / f"girls_surrogate_w{wave}.edges", labels, y, True, f"wave{wave}")

    # 67 proteins, two undirected relation types over shared positions.
    rng = np.random.default_rng(20140602)
    labels = [f"p{i:02d}" for i in range(1, 68)]
    z = cluster_positions(rng, 67, 8, 1.4, 0.45)
    z *= np.sqrt(calibrate_scale(z, -0.410, False, 294))
    for name, alpha, links in [("genetic", -0.410, 294), ("physical", -0.940, 190)]:
        y = sample_exact(rng, z, alpha, False, links)
        write_view(out / f"protein_surrogate_{name}.edges", labels, y, False, name)


if __name__ == "__main__":
    main()
