"""Return-time tail laws for synthetic towers.

Each law is a survival sequence ``s(n)`` with ``s(0) = 1``; the return time
``R >= 1`` has ``P(R = k) = s(k-1) - s(k)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError


@dataclass(frozen=True)
class ExpTail:
    theta: float

    def __post_init__(self):
        if not 0 < self.theta < 1:
            raise UsageError("ExpTail needs theta in (0, 1)")

    def survival(self, n):
        return self.theta ** np.asarray(n, dtype=float)


@dataclass(frozen=True)
class StretchedTail:
    c: float
    eta: float

    def __post_init__(self):
        if not self.c > 0 or not 0 < self.eta < 1:
            raise UsageError("StretchedTail needs c > 0 and eta in (0, 1)")

    def survival(self, n):
        return np.exp(-self.c * np.asarray(n, dtype=float) ** self.eta)


@dataclass(frozen=True)
class PolyTail:
    """``s(n) = (n + 1)**(-alpha)``, i.e. ``P(R = k)`` proportional to ``k**-alpha - (k+1)**-alpha``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise UsageError("PolyTail needs alpha > 1 (finite mean return time)")

    def survival(self, n):
        return (np.asarray(n, dtype=float) + 1.0) ** (-self.alpha)


def law_to_dict(law) -> dict:
    if isinstance(law, ExpTail):
        return {"kind": "exp", "theta": law.theta}
    if isinstance(law, StretchedTail):
        return {"kind": "stretched", "c": law.c, "eta": law.eta}
    if isinstance(law, PolyTail):
        return {"kind": "poly", "alpha": law.alpha}
    raise UsageError(f"unknown tail law {law!r}")


def law_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "exp":
        return ExpTail(float(spec["theta"]))
    if kind == "stretched":
        return StretchedTail(float(spec["c"]), float(spec["eta"]))
    if kind == "poly":
        return PolyTail(float(spec["alpha"]))
    raise UsageError(f"unknown tail law kind {kind!r}")
