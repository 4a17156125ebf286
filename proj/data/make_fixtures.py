#!/usr/bin/env python3
"""Regenerates the bundled datasets under data/.

The frequency fixture's expected values are computed here by a direct
evaluation of the bank-level structural equations, independently of the
C++ library, and stored next to the data in oracle.json.
"""
import json
import math
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent

# Losses in millions above a 1 million threshold; row k, column j is the
# k-th loss of cell j.
TABLE1 = """
1.557 9.039 1.166 1.548 1.578 1.201 1.006 1.741 1.364 1.074
1.079 2.138 1.037 1.040 1.282 2.815 1.169 1.165 2.036 1.103
1.047 1.008 1.136 1.045 1.092 3.037 1.215 1.010 1.014 1.664
1.199 1.761 2.104 1.774 1.658 1.001 1.116 1.096 1.217 1.049
1.395 1.654 1.774 1.045 2.025 1.114 1.010 1.060 1.202 1.104
1.060 1.073 1.161 1.856 1.129 1.422 1.560 1.352 1.095 2.924
3.343 2.435 1.080 1.636 1.946 2.397 1.059 1.044 1.348 1.265
2.297 4.357 1.154 1.403 1.831 1.241 1.059 1.678 1.191 1.333
1.297 1.576 1.257 2.522 1.478 1.522 1.050 1.882 1.161 1.424
1.180 1.113 1.231 1.113 1.208 1.243 1.231 1.401 1.017 1.435
"""

CELLS = [f"cell{j + 1}" for j in range(10)]


def write_config(path, bank, cells, threshold=1.0):
    rows = [{"bank_id": bank, "cell_id": c, "threshold": threshold,
             "severity_scale": 1.0, "frequency_scale": 1.0} for c in cells]
    path.write_text(json.dumps(rows, indent=2) + "\n")


def write_counts(path, bank, counts):
    lines = ["bank_id,cell_id,year,count"]
    for cell, series in counts.items():
        for year, n in enumerate(series, start=1):
            lines.append(f"{bank},{cell},{year},{int(n)}")
    path.write_text("\n".join(lines) + "\n")


def frequency_oracle(counts, scales, tol=1e-14, max_iter=10000):
    """Fixed point of the bank-level frequency equations, started from the
    volume weights; zero between-cell variance takes the volume-weighted
    fallback. The balance constant is (J - 1) / J / sum(s (1 - s)), the
    unbiased Buhlmann-Straub form."""
    cells = list(counts)
    J = len(cells)
    vol = np.array([scales[c] * len(counts[c]) for c in cells], dtype=float)
    mle = np.array([sum(counts[c]) for c in cells], dtype=float) / vol
    nu0 = vol.sum()
    share = vol / nu0
    fbar = mle.mean()
    T = J / (J - 1) * np.sum(share * (mle - fbar) ** 2)
    c = (J - 1) / J / np.sum(share * (1 - share))
    lam = np.sum(vol * mle) / nu0
    omega2 = max(c * (T - J * lam / nu0), 0.0)
    if omega2 == 0.0:
        return {"profile": lam, "between_variance": 0.0, "degenerate": True,
                "weights": [0.0] * J, "credibility": [lam] * J}
    for _ in range(max_iter):
        g = vol / (vol + lam / omega2)
        lam_new = np.sum(g * mle) / g.sum()
        omega2_new = max(c * (T - J * lam_new / nu0), 0.0)
        done = abs(lam_new - lam) <= tol * (1 + abs(lam_new)) and \
            abs(omega2_new - omega2) <= tol * (1 + omega2_new)
        lam, omega2 = lam_new, omega2_new
        if omega2 == 0.0:
            raise RuntimeError("fixture truncates mid-iteration")
        if done:
            break
    g = vol / (vol + lam / omega2)
    cred = g * mle + (1 - g) * lam
    return {"profile": float(lam), "between_variance": float(omega2), "degenerate": False,
            "weights": [float(x) for x in g], "credibility": [float(x) for x in cred]}


def main():
    rows = [[float(x) for x in line.split()] for line in TABLE1.strip().splitlines()]
    t1 = ROOT / "table1"
    t1.mkdir(exist_ok=True)
    lines = ["bank_id,cell_id,amount"]
    for j, cell in enumerate(CELLS):
        for row in rows:
            lines.append(f"bank1,{cell},{row[j]}")
    (t1 / "losses.csv").write_text("\n".join(lines) + "\n")
    write_config(t1 / "config.json", "bank1", CELLS)

    fx = ROOT / "fixtures"

    # 10 cells matching the reference bank layout; rates ~ Gamma(mean 2, variance 0.5),
    # 20 years of Poisson counts each.
    rng = np.random.default_rng(20240601)
    shape, scale = 2.0 ** 2 / 0.5, 0.5 / 2.0
    rates = rng.gamma(shape, scale, size=len(CELLS))
    counts = {c: rng.poisson(r, size=20).tolist() for c, r in zip(CELLS, rates)}
    d = fx / "frequency10"
    d.mkdir(parents=True, exist_ok=True)
    write_config(d / "config.json", "bank1", CELLS)
    write_counts(d / "counts.csv", "bank1", counts)
    oracle = frequency_oracle(counts, {c: 1.0 for c in CELLS})
    oracle.update({"generator": {"seed": 20240601, "rate_mean": 2.0, "rate_variance": 0.5, "years": 20},
                   "true_rates": [float(r) for r in rates], "tolerance": 1e-8})
    (d / "oracle.json").write_text(json.dumps(oracle, indent=2) + "\n")

    # Two cells with identical counts: zero between-cell dispersion.
    d = fx / "identical_counts"
    d.mkdir(parents=True, exist_ok=True)
    write_config(d / "config.json", "bank1", ["cell1", "cell2"])
    write_counts(d / "counts.csv", "bank1", {"cell1": [2, 3, 1, 4], "cell2": [2, 3, 1, 4]})

    # Reference bank cells with no exceedances at all.
    d = fx / "zero_counts"
    d.mkdir(parents=True, exist_ok=True)
    write_config(d / "config.json", "bank1", CELLS)
    write_counts(d / "counts.csv", "bank1", {c: [0] * 5 for c in CELLS})

    # Two cells with identical loss multisets.
    d = fx / "identical_losses"
    d.mkdir(parents=True, exist_ok=True)
    write_config(d / "config.json", "bank1", ["cell1", "cell2"])
    amounts = [1.5, 2.25, 1.1, 3.0, 1.8]
    lines = ["bank_id,cell_id,amount"] + [f"bank1,{c},{a}" for c in ("cell1", "cell2") for a in amounts]
    (d / "losses.csv").write_text("\n".join(lines) + "\n")

    # Expert opinions for the reference bank cells.
    ops = [{"bank_id": "bank1", "cell_id": "cell1", "kind": "severity", "level": 10.0, "probability": 0.1},
           {"bank_id": "bank1", "cell_id": "cell2", "kind": "severity", "level": 10.0, "probability": 0.01},
           {"bank_id": "bank1", "cell_id": "cell1", "kind": "frequency", "expected_count": 5.0}]
    (fx / "opinions.json").write_text(json.dumps(ops, indent=2) + "\n")


if __name__ == "__main__":
    main()
