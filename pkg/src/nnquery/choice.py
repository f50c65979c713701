"""Plackett-Luce choice model over query outcomes.

A candidate at distance d from the reference gets utility 1 / (d^2 + mu);
choice probabilities are utilities normalized over the candidate set. The
margin parameter mu expresses confidence in the current distances: large mu
flattens the distribution toward uniform, mu -> 0 trusts the distances
exactly. Entropies are in nats throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCHEDULES = ("constant", "diminishing", "max_distance")


@dataclass(frozen=True)
class PLParams:
    """Margin configuration: a fixed value or a schedule driven by the
    largest pairwise distance of the current embedding estimate."""

    mu: float = 0.0
    schedule: str = "constant"
    rate: float = 0.99

    def __post_init__(self) -> None:
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if not 0.0 < self.rate < 1.0:
            raise ValueError("rate must lie in (0, 1)")


def choice_probabilities(distances: np.ndarray, mu: float) -> np.ndarray:
    """Probability that each candidate is picked as nearest to the reference.

    p_c = (d_c^2 + mu)^-1 / sum_j (d_j^2 + mu)^-1. With mu = 0 and k >= 1
    exact zero distances, the limit convention puts mass 1/k on each
    zero-distance candidate.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size < 2:
        raise ValueError("need a vector of at least 2 distances")
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    denom = d * d + mu
    if mu == 0.0:
        zeros = denom == 0.0
        if zeros.any():
            p = np.zeros_like(d)
            p[zeros] = 1.0 / zeros.sum()
            return p
    u = 1.0 / denom
    return u / u.sum()


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def entropy_rows(p: np.ndarray) -> np.ndarray:
    """Entropy of each row of a stack of probability vectors."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def mu_value(params: PLParams, cycle: int, d_max: float | None = None) -> float:
    """Resolve the margin for a given learning cycle.

    constant     -> params.mu
    diminishing  -> d_max * rate^cycle
    max_distance -> d_max
    """
    if cycle < 0:
        raise ValueError("cycle must be nonnegative")
    if params.schedule == "constant":
        return params.mu
    if d_max is None:
        raise ValueError(f"schedule {params.schedule!r} requires d_max")
    if d_max < 0:
        raise ValueError("d_max must be nonnegative")
    if params.schedule == "diminishing":
        return d_max * params.rate**cycle
    return d_max
