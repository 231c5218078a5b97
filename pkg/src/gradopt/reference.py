"""Brute-force reference smoothing and testbed certification.

The smoothed version of an objective is its expectation over a uniform
ball perturbation. This module computes it the slow, trustworthy way:
tensorized Gauss-Legendre/trapezoid quadrature over the ball for d <= 3
(relative error <= 1e-6 on polynomials; in practice far better for the
smooth testbed functions) and seeded Monte-Carlo above that. Everything
downstream treats these values as the oracle side of a dual-route check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import DimensionMismatch
from .geometry import EuclideanBall, MEMBERSHIP_TOL
from .objectives import Objective, SigmaNiceSpec

MC_DEFAULT_SAMPLES = 200_000


@lru_cache(maxsize=None)
def unit_ball_nodes(d: int):
    """Quadrature nodes U (n, d) and weights w (sum 1) for E_{u~B}[g(u)]."""
    if d == 1:
        x, w = np.polynomial.legendre.leggauss(96)
        return x.reshape(-1, 1), w / 2.0
    if d == 2:
        # area element via s = r^2; trapezoid in the periodic angle
        xs, ws = np.polynomial.legendre.leggauss(48)
        s = 0.5 * (xs + 1.0)
        ws = ws / 2.0
        n_theta = 64
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        r = np.sqrt(s)
        U = np.stack(
            [
                np.outer(r, np.cos(theta)).ravel(),
                np.outer(r, np.sin(theta)).ravel(),
            ],
            axis=1,
        )
        w = np.repeat(ws / n_theta, n_theta)
        return U, w
    if d == 3:
        # volume element via t = r^3; product rule on the sphere
        xt, wt = np.polynomial.legendre.leggauss(32)
        t = 0.5 * (xt + 1.0)
        wt = wt / 2.0
        mu, wmu = np.polynomial.legendre.leggauss(24)
        n_theta = 48
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        r = np.cbrt(t)
        sin_phi = np.sqrt(1.0 - mu**2)
        U = np.empty((r.size * mu.size * n_theta, 3))
        w = np.empty(r.size * mu.size * n_theta)
        idx = 0
        for i, ri in enumerate(r):
            for j, mj in enumerate(mu):
                block = slice(idx, idx + n_theta)
                U[block, 0] = ri * sin_phi[j] * np.cos(theta)
                U[block, 1] = ri * sin_phi[j] * np.sin(theta)
                U[block, 2] = ri * mj
                w[block] = wt[i] * wmu[j] / (2.0 * n_theta)
                idx += n_theta
        return U, w
    raise ValueError("quadrature nodes exist for d <= 3 only")


def _check_delta(obj: Objective, delta: float):
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta > obj.domain_margin:
        raise ValueError(
            f"delta {delta} exceeds the objective's domain margin {obj.domain_margin}"
        )


def smoothed_value(obj: Objective, x, delta: float) -> float:
    """Quadrature value of the delta-smoothed objective at one point (d <= 3)."""
    _check_delta(obj, delta)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (obj.dimension,):
        raise DimensionMismatch(f"point has shape {x.shape}")
    if delta == 0.0:
        return obj.value(x)
    U, w = unit_ball_nodes(obj.dimension)
    return float(w @ obj.value_batch(x + delta * U))


def smoothed_value_batch(obj: Objective, X, delta: float) -> np.ndarray:
    """Quadrature smoothed values for many points (nodes-major accumulation)."""
    _check_delta(obj, delta)
    X = np.asarray(X, dtype=np.float64)
    if delta == 0.0:
        return obj.value_batch(X)
    U, w = unit_ball_nodes(obj.dimension)
    acc = np.zeros(X.shape[0])
    for i in range(w.size):
        acc += w[i] * obj.value_batch(X + delta * U[i])
    return acc


def smoothed_gradient(obj: Objective, x, delta: float) -> np.ndarray:
    """Quadrature gradient of the delta-smoothed objective (d <= 3)."""
    _check_delta(obj, delta)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if delta == 0.0:
        return obj.gradient(x)
    U, w = unit_ball_nodes(obj.dimension)
    return w @ obj.gradient_batch(x + delta * U)


def _mc_ball(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    normals = rng.standard_normal((n, d))
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radius = rng.random(n) ** (1.0 / d)
    return normals / norms * radius[:, None]


def smoothed_value_mc(obj: Objective, x, delta: float,
                      n: int = MC_DEFAULT_SAMPLES, seed: int = 0):
    """Seeded Monte-Carlo smoothed value; returns (estimate, standard error)."""
    _check_delta(obj, delta)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    rng = np.random.default_rng(seed)
    u = _mc_ball(rng, n, obj.dimension)
    vals = obj.value_batch(x + delta * u)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def smoothed_gradient_mc(obj: Objective, x, delta: float,
                         n: int = MC_DEFAULT_SAMPLES, seed: int = 0,
                         fd_step: float = 1e-5) -> np.ndarray:
    """Smoothed gradient for d > 3: central differences of the MC value.

    Common random numbers (one seed for both sides of every difference)
    keep the finite differences usable at MC accuracy.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = obj.dimension
    g = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = fd_step
        hi, _ = smoothed_value_mc(obj, x + e, delta, n=n, seed=seed)
        lo, _ = smoothed_value_mc(obj, x - e, delta, n=n, seed=seed)
        g[i] = (hi - lo) / (2.0 * fd_step)
    return g


def reference_smoothed_value(obj: Objective, x, delta: float,
                             n_mc: int = MC_DEFAULT_SAMPLES, seed: int = 0) -> float:
    """Dispatch: quadrature for d <= 3, seeded Monte-Carlo otherwise."""
    if obj.dimension <= 3:
        return smoothed_value(obj, x, delta)
    return smoothed_value_mc(obj, x, delta, n=n_mc, seed=seed)[0]


def reference_smoothed_gradient(obj: Objective, x, delta: float,
                                n_mc: int = MC_DEFAULT_SAMPLES, seed: int = 0) -> np.ndarray:
    if obj.dimension <= 3:
        return smoothed_gradient(obj, x, delta)
    return smoothed_gradient_mc(obj, x, delta, n=n_mc, seed=seed)


# ---------------------------------------------------------------------------
# Bias bound
# ---------------------------------------------------------------------------

@dataclass
class BiasReport:
    delta: float
    bound: float               # delta * L
    max_ratio: float           # max |bias| / bound
    worst_point: np.ndarray
    passed: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] |smoothed - f| <= delta*L = {self.bound:.6g}: "
            f"max ratio {self.max_ratio:.6g} at {self.worst_point}"
        )


def check_bias_bound(obj: Objective, delta: float, grid) -> BiasReport:
    """Check |smoothed(x) - f(x)| <= delta * L over a grid of points."""
    X = np.asarray(grid, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    bound = delta * obj.lipschitz
    smoothed = smoothed_value_batch(obj, X, delta)
    exact = obj.value_batch(X)
    bias = np.abs(smoothed - exact)
    ratios = bias / bound if bound > 0 else np.where(bias > 0, np.inf, 0.0)
    k = int(np.argmax(ratios))
    # 1e-9 slack covers quadrature round-off on functions that meet the
    # bound with equality
    passed = bool(ratios[k] <= 1.0 + 1e-9)
    return BiasReport(
        delta=delta, bound=bound, max_ratio=float(ratios[k]),
        worst_point=X[k].copy(), passed=passed,
    )


# ---------------------------------------------------------------------------
# sigma-nice verification
# ---------------------------------------------------------------------------

@dataclass
class RungCheck:
    delta: float
    minimizers: list
    hessian_min_eig: float
    hessian_witness: np.ndarray
    hessian_ok: bool


@dataclass
class PairCheck:
    delta: float
    gap: float
    allowed: float
    ok: bool


@dataclass
class VerificationReport:
    sigma: float
    passed: bool
    rungs: list[RungCheck] = field(default_factory=list)
    pairs: list[PairCheck] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def __str__(self):
        lines = [f"sigma-nice verification (sigma={self.sigma:g}): "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for r in self.rungs:
            mins = ", ".join(np.array2string(np.asarray(m), precision=6) for m in r.minimizers)
            lines.append(
                f"  delta={r.delta:<12.6g} min eig={r.hessian_min_eig: .6g} "
                f"[{'ok' if r.hessian_ok else 'FAIL'}] minimizers: {mins}"
            )
        for p in self.pairs:
            lines.append(
                f"  centering {p.delta:g} -> {p.delta / 2:g}: gap={p.gap:.3e} "
                f"(allowed {p.allowed:.3e}) [{'ok' if p.ok else 'FAIL'}]"
            )
        lines.extend(f"  ! {msg}" for msg in self.failures)
        return "\n".join(lines)


def _grid_over_set(set_, n_per_axis: int):
    """Rectangular grid over the set's bounding box, masked to members."""
    d = set_.dimension
    if isinstance(set_, EuclideanBall):
        lo = set_.center - set_.radius
        hi = set_.center + set_.radius
    else:
        lo, hi = set_.lower, set_.upper
    axes = [np.linspace(lo[i], hi[i], n_per_axis) for i in range(d)]
    if d == 1:
        X = axes[0].reshape(-1, 1)
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=1)
    if isinstance(set_, EuclideanBall):
        keep = np.linalg.norm(X - set_.center, axis=1) <= set_.radius + 1e-12
        X = X[keep]
    step = float(max((hi[i] - lo[i]) / (n_per_axis - 1) for i in range(d)))
    return X, step


def locate_smoothed_minimizers(obj: Objective, delta: float, set_,
                               n_per_axis: int | None = None) -> list[np.ndarray]:
    """Global minimizers of the smoothed objective over the set.

    Dense grid plus local refinement on the quadrature smoother; returns
    every minimizer whose refined value ties the global minimum (symmetric
    testbeds produce pairs).
    """
    d = obj.dimension
    if n_per_axis is None:
        n_per_axis = 4001 if d == 1 else 201
    X, step = _grid_over_set(set_, n_per_axis)
    vals = smoothed_value_batch(obj, X, delta)
    vmin = float(vals.min())
    scale = max(1.0, float(np.max(np.abs(vals))))
    tie_tol = 1e-9 * scale
    cand = X[vals <= vmin + tie_tol]

    # cluster candidates by proximity, keep one representative each
    reps: list[np.ndarray] = []
    for c in cand:
        if all(np.linalg.norm(c - r) > 2.5 * step for r in reps):
            reps.append(c)

    refined = []
    for r in reps:
        if d == 1:
            lo, hi = r[0] - 2 * step, r[0] + 2 * step
            res = optimize.minimize_scalar(
                lambda t: smoothed_value(obj, np.array([t]), delta),
                bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-10},
            )
            point, value = np.array([res.x]), float(res.fun)
        else:
            res = optimize.minimize(
                lambda z: smoothed_value(obj, z, delta),
                r, method="Nelder-Mead",
                options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 800},
            )
            point, value = np.asarray(res.x), float(res.fun)
        if not set_.contains(point, tol=1e-7):
            point = set_.project(point)
            value = smoothed_value(obj, point, delta)
        refined.append((point, value))

    best = min(v for _, v in refined)
    out: list[np.ndarray] = []
    for point, value in refined:
        if value <= best + tie_tol and all(
            np.linalg.norm(point - q) > 1e-5 for q in out
        ):
            out.append(point)
    return out


def _hessian_min_eig_batch(obj: Objective, X: np.ndarray, delta: float, h: float):
    """Min eigenvalue of the FD Hessian of the smoothed objective at each row."""
    d = obj.dimension
    n = X.shape[0]
    if d == 1:
        stencil = np.concatenate([X, X + h, X - h])
        vals = smoothed_value_batch(obj, stencil, delta)
        f0, fp, fm = vals[:n], vals[n:2 * n], vals[2 * n:]
        return (fp - 2.0 * f0 + fm) / h**2
    if d == 2:
        e1 = np.array([h, 0.0])
        e2 = np.array([0.0, h])
        blocks = [X, X + e1, X - e1, X + e2, X - e2,
                  X + e1 + e2, X + e1 - e2, X - e1 + e2, X - e1 - e2]
        vals = smoothed_value_batch(obj, np.concatenate(blocks), delta)
        v = [vals[i * n:(i + 1) * n] for i in range(9)]
        fxx = (v[1] - 2.0 * v[0] + v[2]) / h**2
        fyy = (v[3] - 2.0 * v[0] + v[4]) / h**2
        fxy = (v[5] - v[6] - v[7] + v[8]) / (4.0 * h**2)
        mean = 0.5 * (fxx + fyy)
        return mean - np.sqrt((0.5 * (fxx - fyy)) ** 2 + fxy**2)
    raise ValueError("Hessian checks support d <= 2")


def verify_sigma_nice(obj: Objective, spec: SigmaNiceSpec, set_,
                      n_per_axis: int | None = None,
                      hessian_points_per_axis: int = 61,
                      eig_slack: float = 1e-3) -> VerificationReport:
    """Numerically check the two sigma-nice conditions along the delta ladder.

    For each consecutive ladder pair (delta, delta/2): every global
    minimizer of the delta-smoothed objective must have a delta/2
    counterpart within delta/2 (centering), and the numerical Hessian of
    the delta-smoothed objective must have min eigenvalue >= sigma on a
    grid covering B(minimizer, 3*delta) ∩ K (local strong convexity,
    second-order central differences, grid step <= delta/10).
    """
    if obj.dimension > 2:
        raise ValueError("verification is brute-force feasible for d <= 2 only")
    sigma = spec.sigma
    report = VerificationReport(sigma=sigma, passed=True)
    ladder = list(spec.delta_ladder)
    mins_by_rung = [
        locate_smoothed_minimizers(obj, dl, set_, n_per_axis) for dl in ladder
    ]

    for k, delta in enumerate(ladder):
        mins = mins_by_rung[k]
        h = delta / 64.0
        worst_eig = math.inf
        witness = mins[0]
        for m in mins:
            span = 3.0 * delta
            npts = max(hessian_points_per_axis, int(math.ceil(6.0 * delta / (delta / 10.0))) + 1)
            axes = [np.linspace(m[i] - span, m[i] + span, npts) for i in range(obj.dimension)]
            if obj.dimension == 1:
                X = axes[0].reshape(-1, 1)
            else:
                mesh = np.meshgrid(*axes, indexing="ij")
                X = np.stack([g.ravel() for g in mesh], axis=1)
            inside_ball = np.linalg.norm(X - m, axis=1) <= span + 1e-12
            X = X[inside_ball]
            member = np.array([set_.contains(row, tol=MEMBERSHIP_TOL) for row in X])
            X = X[member]
            eigs = _hessian_min_eig_batch(obj, X, delta, h)
            i = int(np.argmin(eigs))
            if eigs[i] < worst_eig:
                worst_eig = float(eigs[i])
                witness = X[i].copy()
        ok = worst_eig >= sigma * (1.0 - eig_slack)
        report.rungs.append(RungCheck(
            delta=delta, minimizers=[m.copy() for m in mins],
            hessian_min_eig=worst_eig, hessian_witness=witness, hessian_ok=ok,
        ))
        if not ok:
            report.passed = False
            report.failures.append(
                f"local strong convexity fails at delta={delta:g}: "
                f"min eig {worst_eig:.6g} < sigma {sigma:g} at {witness}"
            )

    for k in range(len(ladder) - 1):
        delta = ladder[k]
        gap = 0.0
        for m in mins_by_rung[k]:
            nearest = min(
                float(np.linalg.norm(m - m2)) for m2 in mins_by_rung[k + 1]
            )
            gap = max(gap, nearest)
        allowed = delta / 2.0 + 1e-6 * delta + 1e-9
        ok = gap <= allowed
        report.pairs.append(PairCheck(delta=delta, gap=gap, allowed=allowed, ok=ok))
        if not ok:
            report.passed = False
            report.failures.append(
                f"centering fails at pair ({delta:g}, {delta / 2:g}): "
                f"gap {gap:.6g} > {delta / 2:.6g}"
            )
    return report
