"""Convex decision sets: Euclidean projection, diameter, membership, sampling.

Three shapes are supported: balls, axis-aligned boxes, and the intersection
of a ball with one of the former. The outer solvers only ever form
``K ∩ B(center, 1.5*delta)``, so this closed family keeps projections exact
(ball, box) or cheap (Dykstra for the intersection) without a QP solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NumericalFailure

MEMBERSHIP_TOL = 1e-9
DYKSTRA_TOL = 1e-9
DYKSTRA_MAX_ITER = 10_000

# Kernel-side shape codes (mirrored in _kernels.pyx / _pyloop.py).
SET_BALL = 0
SET_BOX = 1
SET_BALL_IN_BALL = 2   # intersection, ball base
SET_BALL_IN_BOX = 3    # intersection, box base


def _as_vector(x, d, name="point"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (d,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({d},)")
    return v


@dataclass(frozen=True)
class UnitSample:
    """A draw from the unit ball or unit sphere."""

    vector: np.ndarray
    kind: str  # "ball" | "sphere"


def sample_unit(kind: str, d: int, rng: np.random.Generator) -> UnitSample:
    """Uniform sample from the unit sphere or unit ball in R^d.

    Sphere draws are normalized isotropic Gaussians; ball draws scale a
    sphere draw by U**(1/d). Deterministic given the generator state.
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if kind not in ("ball", "sphere"):
        raise ValueError(f"kind must be 'ball' or 'sphere', got {kind!r}")
    while True:
        n = rng.standard_normal(d)
        s = float(n @ n)
        if s > 0.0:
            break
    v = n / math.sqrt(s)
    if kind == "ball":
        u = rng.random()
        v = v * u ** (1.0 / d)
    return UnitSample(vector=v, kind=kind)


class EuclideanBall:
    """Closed Euclidean ball {x : ||x - center|| <= radius}."""

    shape = "ball"

    def __init__(self, center, radius: float):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        if self.center.ndim != 1:
            raise ValueError("center must be a vector")
        self.radius = float(radius)
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {radius}")

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def project(self, point) -> np.ndarray:
        y = _as_vector(point, self.dimension)
        diff = y - self.center
        dist = float(np.linalg.norm(diff))
        if dist <= self.radius:
            return y.copy()
        return self.center + diff * (self.radius / dist)

    def contains(self, point, tol: float = MEMBERSHIP_TOL) -> bool:
        y = _as_vector(point, self.dimension)
        return float(np.linalg.norm(y - self.center)) <= self.radius + tol

    def diameter(self) -> float:
        return 2.0 * self.radius

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        u = sample_unit("ball", self.dimension, rng)
        return self.center + self.radius * u.vector

    def __repr__(self):
        return f"EuclideanBall(center={self.center.tolist()}, radius={self.radius})"


class AxisBox:
    """Axis-aligned box {x : lower <= x <= upper} (componentwise)."""

    shape = "box"

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not np.all(self.lower < self.upper):
            raise ValueError("need lower[i] < upper[i] for all i")

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    def project(self, point) -> np.ndarray:
        y = _as_vector(point, self.dimension)
        return np.clip(y, self.lower, self.upper)

    def contains(self, point, tol: float = MEMBERSHIP_TOL) -> bool:
        y = _as_vector(point, self.dimension)
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def sample_uniform(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random(self.dimension)

    def __repr__(self):
        return f"AxisBox(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


class Intersection:
    """Intersection of a ball with a base set (ball or box).

    Projection uses Dykstra's alternating projections (tolerance 1e-9,
    at most 10000 cycles); the error must stay far below the smallest
    smoothing radius exercised by the solvers. When one member set
    contains the other the projection collapses to the single projector.
    """

    shape = "intersection"

    def __init__(self, ball: EuclideanBall, base):
        if not isinstance(ball, EuclideanBall):
            raise ValueError("first member of an Intersection must be a ball")
        if isinstance(base, Intersection):
            raise ValueError("nested intersections are not supported")
        if ball.dimension != base.dimension:
            raise DimensionMismatch(
                f"ball dimension {ball.dimension} != base dimension {base.dimension}"
            )
        self.ball = ball
        self.base = base
        self._ball_covers_base = self._compute_ball_covers_base()
        self._base_covers_ball = self._compute_base_covers_ball()

    def _compute_ball_covers_base(self) -> bool:
        c, r = self.ball.center, self.ball.radius
        if isinstance(self.base, AxisBox):
            # farthest box corner from the ball center
            far = np.maximum(np.abs(self.base.lower - c), np.abs(self.base.upper - c))
            return float(np.linalg.norm(far)) <= r
        return float(np.linalg.norm(self.base.center - c)) + self.base.radius <= r

    def _compute_base_covers_ball(self) -> bool:
        c, r = self.ball.center, self.ball.radius
        if isinstance(self.base, AxisBox):
            return bool(
                np.all(c - r >= self.base.lower) and np.all(c + r <= self.base.upper)
            )
        return float(np.linalg.norm(c - self.base.center)) + r <= self.base.radius

    @property
    def dimension(self) -> int:
        return self.ball.dimension

    def project(self, point) -> np.ndarray:
        y = _as_vector(point, self.dimension)
        if self._ball_covers_base:
            return self.base.project(y)
        if self._base_covers_ball:
            return self.ball.project(y)
        return self._dykstra(y)

    def _dykstra(self, y: np.ndarray) -> np.ndarray:
        x = y.copy()
        p = np.zeros_like(y)
        q = np.zeros_like(y)
        residual = math.inf
        for _ in range(DYKSTRA_MAX_ITER):
            x_prev = x
            u = self.ball.project(x + p)
            p = x + p - u
            x = self.base.project(u + q)
            q = u + q - x
            residual = float(np.max(np.abs(x - x_prev)))
            if residual <= DYKSTRA_TOL:
                return x
        raise NumericalFailure(
            f"Dykstra projection did not converge within {DYKSTRA_MAX_ITER} "
            f"iterations (residual {residual:.3e})",
            residual=residual,
        )

    def contains(self, point, tol: float = MEMBERSHIP_TOL) -> bool:
        return self.ball.contains(point, tol) and self.base.contains(point, tol)

    def diameter(self) -> float:
        # Conservative bound by the intersecting ball; only ever used to
        # size smoothing radii, so an upper bound preserves all guarantees.
        return 2.0 * self.ball.radius

    def sample_uniform(
        self, rng: np.random.Generator, max_attempts: int = 2_000_000
    ) -> np.ndarray:
        for _ in range(max_attempts):
            x = self.ball.sample_uniform(rng)
            if self.base.contains(x):
                return x
        raise NumericalFailure(
            "rejection sampling acceptance rate estimated below 1e-6 "
            f"({max_attempts} consecutive rejections)"
        )

    def __repr__(self):
        return f"Intersection(ball={self.ball!r}, base={self.base!r})"


def project(set_, point) -> np.ndarray:
    """Euclidean projection of ``point`` onto ``set_``."""
    return set_.project(point)


def diameter(set_) -> float:
    return set_.diameter()


def contains(set_, point, tol: float = MEMBERSHIP_TOL) -> bool:
    return set_.contains(point, tol)


def sample_uniform(set_, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample over a bounded set with positive volume."""
    return set_.sample_uniform(rng)


def kernel_descriptor(set_):
    """Pack a set into (kind, params) consumed by the compiled/pure loops.

    params layout:
      ball:           [cx..., r]
      box:            [lo..., hi...]
      ball-in-ball:   [cx..., r, bcx..., br, ball_covers, base_covers]
      ball-in-box:    [cx..., r, lo..., hi..., ball_covers, base_covers]
    """
    d = set_.dimension
    if isinstance(set_, EuclideanBall):
        return SET_BALL, np.concatenate([set_.center, [set_.radius]])
    if isinstance(set_, AxisBox):
        return SET_BOX, np.concatenate([set_.lower, set_.upper])
    if isinstance(set_, Intersection):
        flags = [float(set_._ball_covers_base), float(set_._base_covers_ball)]
        head = np.concatenate([set_.ball.center, [set_.ball.radius]])
        if isinstance(set_.base, EuclideanBall):
            tail = np.concatenate([set_.base.center, [set_.base.radius], flags])
            return SET_BALL_IN_BALL, np.concatenate([head, tail])
        tail = np.concatenate([set_.base.lower, set_.base.upper, flags])
        return SET_BALL_IN_BOX, np.concatenate([head, tail])
    raise ValueError(f"unsupported set type {type(set_).__name__}")
