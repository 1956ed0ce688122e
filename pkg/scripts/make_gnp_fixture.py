#!/usr/bin/env python3
"""Regenerate the synthetic GNP-like fixture in ``data/``.

An ARFIMA(1,d,0) path with d=0.23 and phi=0.1 is rescaled so its demeaned
returns have sample variance 1.683, given a 1.5% mean quarterly growth, and
cumulated into 309 positive levels. It is a stand-in with the right length
and scale, not the real series.
"""

import csv
import datetime as dt

import numpy as np

from arfimabayes.draws import fmt17
from arfimabayes.model import ArfimaParams, simulate_arfima

N_RETURNS = 308
TARGET_VAR = 1.683


def main(path="data/gnp_synthetic_levels.csv", seed=19470101):
    y = simulate_arfima(ArfimaParams(d=0.23, phi=0.1), N_RETURNS, seed=seed)
    y = (y - y.mean()) * np.sqrt(TARGET_VAR / np.var(y, ddof=1))
    levels = 250.0 * np.exp(np.concatenate([[0.0], np.cumsum(y + 1.5)]) / 100.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "level"])
        for k, v in enumerate(levels):
            date = dt.date(1947 + k // 4, 1 + 3 * (k % 4), 1)
            w.writerow([date.isoformat(), fmt17(v)])


if __name__ == "__main__":
    main()
