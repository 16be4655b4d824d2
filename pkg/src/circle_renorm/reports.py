"""Level-indexed measurement sequences and their exponential fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FIT_START = 4


def censor_floor(prec: int) -> float:
    """Values below ``2^(24 - P)`` are indistinguishable from rounding."""
    return 2.0 ** (24 - prec)


@dataclass
class DecayReport:
    """A sequence ``(n, value)`` with a least-squares fit ``value ~ C lambda^n``.

    The fit uses ``n >= fit_start`` and only values above the precision
    floor; ``censored`` counts the values that were set to zero for being
    below it.
    """

    name: str
    points: list
    floor: float = 0.0
    censored: int = 0
    fit_start: int = FIT_START
    C: float | None = None
    lam: float | None = None
    residual: float | None = None
    notes: dict = field(default_factory=dict)

    @property
    def levels(self):
        return [n for n, _ in self.points]

    @property
    def values(self):
        return [v for _, v in self.points]

    def value_at(self, n: int):
        return next((v for m, v in self.points if m == n), None)

    @property
    def fitted(self) -> bool:
        return self.lam is not None

    def all_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    def as_dict(self) -> dict:
        return {"name": self.name, "points": [[n, v] for n, v in self.points], "floor": self.floor,
                "censored": self.censored, "fit_start": self.fit_start, "C": self.C,
                "lambda": self.lam, "residual": self.residual, "notes": self.notes}


def fit_decay(ns, values, fit_start: int = FIT_START):
    """``(C, lambda, rms residual)`` of ``log value = log C + n log lambda``; ``None`` if under 2 points."""
    pts = [(n, v) for n, v in zip(ns, values) if n >= fit_start and v > 0 and math.isfinite(v)]
    if len(pts) < 2:
        return None
    x = np.array([n for n, _ in pts], dtype=float)
    y = np.log(np.array([v for _, v in pts], dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    res = y - (slope * x + intercept)
    return float(math.exp(intercept)), float(math.exp(slope)), float(np.sqrt(np.mean(res * res)))


def make_report(name: str, points, prec: int | None = None, fit_start: int = FIT_START, **notes) -> DecayReport:
    """Censor values below the precision floor, then fit."""
    floor = censor_floor(prec) if prec else 0.0
    out, censored = [], 0
    for n, v in points:
        v = float(v)
        if v < 0:
            raise ValueError(f"{name}: negative value at level {n}")
        if 0 < v < floor:
            v = 0.0
            censored += 1
        out.append((int(n), v))
    rep = DecayReport(name, out, floor, censored, fit_start, notes=dict(notes))
    fit = fit_decay([n for n, _ in out], [v for _, v in out], fit_start)
    if fit is not None:
        rep.C, rep.lam, rep.residual = fit
    return rep
