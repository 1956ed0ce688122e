"""Container for posterior samples from either MCMC or ABC, with CSV/JSON I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._out import open_output
from .errors import InputError
from .model import ArfimaParams, order_names, parse_order

COLUMNS = ("d", "phi", "theta", "sigma2")
PROVENANCES = ("mcmc-simultaneous", "mcmc-filtered", "abc-fp", "abc-20p", "abc-logp", "point")


def fmt17(x: float) -> str:
    """Round-trippable decimal text (17 significant digits)."""
    return format(float(x), ".17g")


@dataclass
class PosteriorDraws:
    """Ordered samples of ``(d, phi, theta, sigma2)``.

    ``samples`` has one row per draw with absent ARMA terms stored as 0.
    ``iterations`` records the chain iteration (MCMC) or the global
    simulation index (ABC) each draw came from.
    """

    samples: np.ndarray
    order: str
    provenance: str
    iterations: np.ndarray | None = None
    acceptance_rates: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.order = parse_order(self.order)
        s = np.asarray(self.samples, dtype=float).reshape(-1, 4)
        if self.order[0] == "0":
            s[:, 1] = 0.0
        if self.order[2] == "0":
            s[:, 2] = 0.0
        self.samples = s
        if self.iterations is None:
            self.iterations = np.arange(1, len(s) + 1)
        self.iterations = np.asarray(self.iterations, dtype=np.int64)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return order_names(self.order) + ("sigma2",)

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, COLUMNS.index(name)]

    def params(self, i: int) -> ArfimaParams:
        d, phi, theta, s2 = self.samples[i]
        return ArfimaParams.from_order(self.order, d, phi, theta, s2)

    @property
    def draws(self) -> list[ArfimaParams]:
        return [self.params(i) for i in range(len(self))]

    def mean_vector(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    def summary(self, level: float = 0.90) -> dict[str, dict[str, float]]:
        """Posterior mean, SD and equal-tailed interval per free parameter."""
        if len(self) == 0:
            return {}
        a = (1.0 - level) / 2.0
        out = {}
        for name in self.names:
            x = self.column(name)
            out[name] = {
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
                "lb": float(np.quantile(x, a)),
                "ub": float(np.quantile(x, 1.0 - a)),
            }
        return out

    @classmethod
    def point_mass(cls, params: ArfimaParams, count: int = 1) -> "PosteriorDraws":
        return cls(np.tile(params.as_vector(), (count, 1)), params.order, "point")

    def to_csv(self, path) -> None:
        active = set(self.names)
        with open_output(path) as fh:
            w = csv.writer(fh)
            w.writerow(("iteration",) + COLUMNS)
            for it, row in zip(self.iterations, self.samples):
                w.writerow([int(it)] + [fmt17(v) if c in active else "" for c, v in zip(COLUMNS, row)])

    @classmethod
    def from_csv(cls, path, order: str | None = None, provenance: str = "point") -> "PosteriorDraws":
        """Read a draws CSV; the order is inferred from which columns are filled."""
        path = Path(path)
        try:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
        except FileNotFoundError as exc:
            raise InputError(f"no such file: {path}") from exc
        if not rows:
            raise InputError(f"{path}: no draws")
        missing = {"iteration", *COLUMNS} - set(rows[0])
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        if order is None:
            order = f"{int(rows[0]['phi'] != '')}d{int(rows[0]['theta'] != '')}"
        samples = np.zeros((len(rows), 4))
        its = np.empty(len(rows), dtype=np.int64)
        for i, r in enumerate(rows, start=2):
            try:
                its[i - 2] = int(r["iteration"])
                samples[i - 2] = [float(r[c]) if r[c] != "" else 0.0 for c in COLUMNS]
            except ValueError as exc:
                raise InputError(f"{path}:{i}: non-numeric value ({exc})") from exc
        return cls(samples, order, provenance, its)

    def to_json_dict(self) -> dict:
        active = set(self.names)
        return {
            "order": self.order,
            "provenance": self.provenance,
            "acceptance_rates": self.acceptance_rates,
            "count": len(self),
            "summary": self.summary(),
            "draws": [
                {"iteration": int(it), **{c: float(v) for c, v in zip(COLUMNS, row) if c in active}}
                for it, row in zip(self.iterations, self.samples)
            ],
        }
