"""Writes tests/data/hdbscan_reference.json from scikit-learn's HDBSCAN."""
import json
import pathlib

import numpy as np
from sklearn.cluster import HDBSCAN


def canonical(labels):
    # Renumber clusters by smallest member index; noise stays -1.
    mapping, out = {}, []
    for lab in labels:
        if lab < 0:
            out.append(-1)
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    return out


def main():
    rng = np.random.default_rng(20240611)
    cases = []
    for i in range(12):
        k = 2 + i % 3
        spread = 0.1 + 0.05 * (i % 4)
        centers = rng.uniform(-20, 20, size=(k, 2))
        pts = np.vstack([c + rng.normal(0, spread, size=(int(rng.integers(15, 40)), 2)) for c in centers])
        if i % 2:
            pts = np.vstack([pts, rng.uniform(-25, 25, size=(8, 2))])
        pts = pts[rng.permutation(len(pts))]
        mcs = int(rng.integers(5, 12))
        ms = int(rng.integers(2, 8))
        for dim_pad in (0, 1):
            p = pts if not dim_pad else np.hstack([pts, rng.normal(0, spread, size=(len(pts), 1))])
            # sklearn counts the point itself in min_samples.
            model = HDBSCAN(min_cluster_size=mcs, min_samples=ms + 1, allow_single_cluster=False)
            labels = model.fit_predict(p)
            cases.append({
                "name": f"blobs{i}_d{p.shape[1]}",
                "min_cluster_size": mcs,
                "min_samples": ms,
                "points": p.round(12).tolist(),
                "labels": canonical(labels.tolist()),
            })
    out = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data" / "hdbscan_reference.json"
    out.write_text(json.dumps({"generator": "sklearn.cluster.HDBSCAN", "cases": cases}, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {out}")


if __name__ == "__main__":
    main()
