"""Stochastic smoothed-gradient oracles.

Two one-sample estimators of the smoothed objective's gradient:

* gradient feedback: evaluate the (possibly noisy) gradient at a uniform
  ball perturbation of the query point;
* value feedback: evaluate the (possibly noisy) value at a uniform sphere
  perturbation and scale the direction by d/delta.

Draws consume two dedicated streams (Gaussian directions, radial uniforms)
so that scalar queries, vectorized batches, and the compiled inner loop all
reproduce the identical sequence from one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .objectives import Objective

FLAVOR_GRADIENT = "gradient"
FLAVOR_VALUE = "value"


class OracleRng:
    """Seeded pair of streams used by the smoothing oracles.

    ``normals`` feeds the isotropic Gaussian directions, ``radius`` the
    radial uniforms of ball draws. Splitting them keeps batch draws
    bit-identical to scalar draws (Gaussian generation consumes a variable
    number of raw words, so interleaving on one stream would not commute
    with vectorization).
    """

    def __init__(self, seed_or_sequence):
        if isinstance(seed_or_sequence, np.random.SeedSequence):
            ss = seed_or_sequence
        else:
            ss = np.random.SeedSequence(seed_or_sequence)
        kids = ss.spawn(2)
        self.normals = np.random.Generator(np.random.PCG64(kids[0]))
        self.radius = np.random.Generator(np.random.PCG64(kids[1]))

    def ball(self, d: int) -> np.ndarray:
        """One uniform draw from the unit ball (normals then one uniform)."""
        while True:
            n = self.normals.standard_normal(d)
            s = float(n @ n)
            if s > 0.0:
                break
        u = self.radius.random()
        return n / math.sqrt(s) * u ** (1.0 / d)

    def sphere(self, d: int) -> np.ndarray:
        while True:
            n = self.normals.standard_normal(d)
            s = float(n @ n)
            if s > 0.0:
                break
        return n / math.sqrt(s)

    def ball_batch(self, n: int, d: int) -> np.ndarray:
        normals = self.normals.standard_normal((n, d))
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        radius = self.radius.random(n) ** (1.0 / d)
        return normals / norms * radius[:, None]

    def sphere_batch(self, n: int, d: int) -> np.ndarray:
        normals = self.normals.standard_normal((n, d))
        norms = np.linalg.norm(normals, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return normals / norms


def _check_query(obj: Objective, x, delta: float):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (obj.dimension,):
        raise DimensionMismatch(f"query has shape {x.shape}, expected ({obj.dimension},)")
    if delta > obj.domain_margin:
        raise ValueError(
            f"delta {delta} exceeds the objective's domain margin {obj.domain_margin}"
        )
    return x


def sgo_g(obj: Objective, x, delta: float, rng: OracleRng) -> np.ndarray:
    """One gradient-feedback draw: gradient at a uniform ball perturbation."""
    x = _check_query(obj, x, delta)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    u = rng.ball(obj.dimension)
    return obj.gradient(x + delta * u)


def sgo_v(obj: Objective, x, delta: float, rng: OracleRng) -> np.ndarray:
    """One value-feedback draw: (d/delta) * f(x + delta*v) * v, v on the sphere."""
    x = _check_query(obj, x, delta)
    if delta <= 0:
        raise ValueError("the value-feedback estimator requires delta > 0")
    d = obj.dimension
    v = rng.sphere(d)
    return (d / delta) * obj.value(x + delta * v) * v


@dataclass
class OracleStats:
    """Accumulated statistics over a batch of oracle draws."""

    n: int
    mean: np.ndarray
    stderr: np.ndarray
    max_norm: float
    mean_sq_norm: float


class SmoothedOracle:
    """Stateful one-sample oracle with a fixed smoothing radius.

    The declared bound is the Lipschitz constant for gradient feedback and
    d*C/delta for value feedback; noise inflation is already folded into
    the wrapped objective's declared constants.
    """

    def __init__(self, flavor: str, objective: Objective, delta: float, rng: OracleRng):
        if flavor not in (FLAVOR_GRADIENT, FLAVOR_VALUE):
            raise ValueError(f"unknown oracle flavor {flavor!r}")
        if delta > objective.domain_margin:
            raise ValueError(
                f"delta {delta} exceeds the objective's domain margin "
                f"{objective.domain_margin}"
            )
        if flavor == FLAVOR_VALUE and delta <= 0:
            raise ValueError("value feedback requires delta > 0")
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        self.flavor = flavor
        self.objective = objective
        self.delta = float(delta)
        self.rng = rng
        if flavor == FLAVOR_GRADIENT:
            self.declared_bound = objective.lipschitz
        else:
            self.declared_bound = objective.dimension * objective.value_bound / delta

    def query(self, x) -> np.ndarray:
        if self.flavor == FLAVOR_GRADIENT:
            return sgo_g(self.objective, x, self.delta, self.rng)
        return sgo_v(self.objective, x, self.delta, self.rng)

    def query_batch(self, x, n: int) -> np.ndarray:
        """n draws at a fixed point; row i equals the i-th scalar query."""
        x = _check_query(self.objective, x, self.delta)
        d = self.objective.dimension
        if self.flavor == FLAVOR_GRADIENT:
            u = self.rng.ball_batch(n, d)
            return self.objective.gradient_batch(x + self.delta * u)
        v = self.rng.sphere_batch(n, d)
        vals = self.objective.value_batch(x + self.delta * v)
        return (d / self.delta) * vals[:, None] * v


def make_oracle(flavor: str, obj: Objective, delta: float, rng: OracleRng) -> SmoothedOracle:
    return SmoothedOracle(flavor, obj, delta, rng)


def draw_stats(oracle: SmoothedOracle, x, n: int, chunk: int = 1_000_000) -> OracleStats:
    """Mean, per-coordinate standard error, max norm over n oracle draws."""
    d = oracle.objective.dimension
    total = np.zeros(d)
    total_sq = np.zeros(d)
    max_norm = 0.0
    sq_norm_sum = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        g = oracle.query_batch(x, m)
        total += g.sum(axis=0)
        total_sq += (g**2).sum(axis=0)
        norms_sq = np.einsum("ij,ij->i", g, g)
        max_norm = max(max_norm, float(np.sqrt(norms_sq.max())))
        sq_norm_sum += float(norms_sq.sum())
        done += m
    mean = total / n
    var = np.maximum(total_sq / n - mean**2, 0.0) * (n / max(n - 1, 1))
    return OracleStats(
        n=n, mean=mean, stderr=np.sqrt(var / n),
        max_norm=max_norm, mean_sq_norm=sq_norm_sum / n,
    )
