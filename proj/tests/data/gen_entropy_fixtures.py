"""Regenerates entropy_fixtures.json: random share-time fixtures with the
CV and histogram entropy exactly as numpy computes them."""
import json
import pathlib

import numpy as np


def reference(times):
    deltas = np.diff(times)
    cv = np.std(deltas) / np.mean(deltas)
    hist, _ = np.histogram(deltas, bins=20, density=True)
    entropy = -np.sum(hist * np.log(hist + 1e-10))
    return float(cv), float(entropy)


def main():
    rng = np.random.default_rng(20240611)
    fixtures = []
    for i in range(100):
        n = int(rng.integers(11, 600))
        kind = i % 5
        if kind == 0:
            deltas = rng.exponential(0.02, n - 1)
        elif kind == 1:
            deltas = rng.uniform(0.001, 3.0, n - 1)
        elif kind == 2:
            deltas = rng.lognormal(-3.0, 1.5, n - 1)
        elif kind == 3:
            # coarse quantization puts many deltas on shared bin edges
            deltas = rng.integers(1, 8, n - 1) * 0.125
        else:
            deltas = np.full(n - 1, 0.05) if i % 10 == 4 else rng.gamma(0.3, 0.1, n - 1) + 1e-6
        times = np.concatenate([[rng.uniform(0.0, 100.0)], deltas]).cumsum()
        if np.any(np.diff(times) <= 0):
            continue
        cv, entropy = reference(times)
        fixtures.append({"times": times.tolist(), "cv": cv, "paper_entropy": entropy})
    out = pathlib.Path(__file__).with_name("entropy_fixtures.json")
    out.write_text(json.dumps({"numpy": np.__version__, "fixtures": fixtures}))
    print(f"wrote {len(fixtures)} fixtures to {out}")


if __name__ == "__main__":
    main()
