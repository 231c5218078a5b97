"""Objective functions, noisy-feedback wrappers, and the synthetic testbed.

Objectives declare their Lipschitz constant, value bound, and the largest
smoothing radius for which queries outside the decision set stay defined
(``domain_margin``). The synthetic testbed family is a strongly convex
quadratic plus a separable cosine wobble; its certification story lives in
:mod:`gradopt.reference`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, DimensionMismatch
from .geometry import AxisBox, EuclideanBall

# Kernel-side objective codes (mirrored in _kernels.pyx / _pyloop.py).
OBJ_CONSTANT = 0
OBJ_LINEAR = 1
OBJ_QUADRATIC = 2
OBJ_QUADCOS = 3
OBJ_ABS = 4

NOISE_NONE = 0
NOISE_GRADIENT = 1
NOISE_VALUE = 2


def _check_dim(x, d):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (d,):
        raise DimensionMismatch(f"point has shape {v.shape}, expected ({d},)")
    return v


class Objective:
    """Black-box function with value/gradient access and declared constants."""

    dimension: int
    lipschitz: float
    value_bound: float
    domain_margin: float

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def value_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.array([self.value(row) for row in X])

    def gradient_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.stack([self.gradient(row) for row in X])

    def kernel_spec(self):
        """(kind, params) for the compiled loop, or None if not supported."""
        return None

    # Known global minimum over the canonical set, when available.
    minimum_value: float | None = None
    minimizer: np.ndarray | None = None


class ConstantObjective(Objective):
    def __init__(self, c: float, dimension: int, domain_margin: float = math.inf):
        self.c = float(c)
        self.dimension = int(dimension)
        self.lipschitz = 0.0
        self.value_bound = abs(self.c)
        self.domain_margin = domain_margin
        self.minimum_value = self.c

    def value(self, x) -> float:
        _check_dim(x, self.dimension)
        return self.c

    def gradient(self, x) -> np.ndarray:
        _check_dim(x, self.dimension)
        return np.zeros(self.dimension)

    def value_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.full(X.shape[0], self.c)

    def gradient_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.zeros_like(X)

    def kernel_spec(self):
        return OBJ_CONSTANT, np.array([self.c])


class LinearObjective(Objective):
    """f(x) = a.x + b, declared on a ball of radius ``bound_radius``."""

    def __init__(self, a, b: float = 0.0, bound_radius: float = 10.0,
                 domain_margin: float = math.inf):
        self.a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        self.b = float(b)
        self.dimension = self.a.shape[0]
        self.lipschitz = float(np.linalg.norm(self.a))
        self.value_bound = abs(self.b) + self.lipschitz * bound_radius
        self.domain_margin = domain_margin

    def value(self, x) -> float:
        return float(self.a @ _check_dim(x, self.dimension) + self.b)

    def gradient(self, x) -> np.ndarray:
        _check_dim(x, self.dimension)
        return self.a.copy()

    def value_batch(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.a + self.b

    def gradient_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.broadcast_to(self.a, X.shape).copy()

    def kernel_spec(self):
        return OBJ_LINEAR, np.concatenate([self.a, [self.b]])


class QuadraticObjective(Objective):
    """f(x) = (curvature/2) ||x - center||^2, declared within ``reach``."""

    def __init__(self, center, curvature: float, reach: float,
                 domain_margin: float = math.inf):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.curvature = float(curvature)
        if self.curvature <= 0:
            raise ValueError("curvature must be positive")
        self.dimension = self.center.shape[0]
        self.reach = float(reach)
        self.lipschitz = self.curvature * self.reach
        self.value_bound = 0.5 * self.curvature * self.reach**2
        self.domain_margin = domain_margin
        self.minimum_value = 0.0
        self.minimizer = self.center.copy()

    def value(self, x) -> float:
        diff = _check_dim(x, self.dimension) - self.center
        return 0.5 * self.curvature * float(diff @ diff)

    def gradient(self, x) -> np.ndarray:
        return self.curvature * (_check_dim(x, self.dimension) - self.center)

    def value_batch(self, X) -> np.ndarray:
        diff = np.asarray(X, dtype=np.float64) - self.center
        return 0.5 * self.curvature * np.einsum("ij,ij->i", diff, diff)

    def gradient_batch(self, X) -> np.ndarray:
        return self.curvature * (np.asarray(X, dtype=np.float64) - self.center)

    def kernel_spec(self):
        return OBJ_QUADRATIC, np.concatenate([[self.curvature], self.center])


class QuadCosObjective(Objective):
    """f(x) = (curvature/2)||x-center||^2 + amp * sum_i cos(freq*(x_i-c_i)).

    With ``amp <= 0`` the global minimizer is exactly ``center`` (the
    quadratic and every cosine term are minimized there simultaneously);
    side basins appear wherever |amp|*freq exceeds curvature*|x - center|.
    """

    def __init__(self, center, curvature: float, amp: float, freq: float,
                 reach: float, domain_margin: float = math.inf):
        self.center = np.atleast_1d(np.asarray(center, dtype=np.float64))
        self.curvature = float(curvature)
        self.amp = float(amp)
        self.freq = float(freq)
        if self.curvature <= 0:
            raise ValueError("curvature must be positive")
        self.dimension = self.center.shape[0]
        self.reach = float(reach)
        d = self.dimension
        self.lipschitz = self.curvature * self.reach + abs(self.amp) * self.freq * math.sqrt(d)
        self.value_bound = 0.5 * self.curvature * self.reach**2 + d * abs(self.amp)
        self.domain_margin = domain_margin
        if self.amp <= 0:
            self.minimum_value = d * self.amp
            self.minimizer = self.center.copy()

    def value(self, x) -> float:
        diff = _check_dim(x, self.dimension) - self.center
        quad = 0.5 * self.curvature * float(diff @ diff)
        return quad + self.amp * float(np.sum(np.cos(self.freq * diff)))

    def gradient(self, x) -> np.ndarray:
        diff = _check_dim(x, self.dimension) - self.center
        return self.curvature * diff - self.amp * self.freq * np.sin(self.freq * diff)

    def value_batch(self, X) -> np.ndarray:
        diff = np.asarray(X, dtype=np.float64) - self.center
        quad = 0.5 * self.curvature * np.einsum("ij,ij->i", diff, diff)
        return quad + self.amp * np.sum(np.cos(self.freq * diff), axis=1)

    def gradient_batch(self, X) -> np.ndarray:
        diff = np.asarray(X, dtype=np.float64) - self.center
        return self.curvature * diff - self.amp * self.freq * np.sin(self.freq * diff)

    def kernel_spec(self):
        return OBJ_QUADCOS, np.concatenate(
            [[self.curvature, self.amp, self.freq], self.center]
        )


class AbsObjective(Objective):
    """f(x) = |x - center| in one dimension (reference-smoother test case)."""

    def __init__(self, center: float = 0.0, bound_radius: float = 10.0,
                 domain_margin: float = math.inf):
        self.center = np.array([float(center)])
        self.dimension = 1
        self.lipschitz = 1.0
        self.value_bound = bound_radius
        self.domain_margin = domain_margin
        self.minimum_value = 0.0
        self.minimizer = self.center.copy()

    def value(self, x) -> float:
        return abs(float(_check_dim(x, 1)[0] - self.center[0]))

    def gradient(self, x) -> np.ndarray:
        t = float(_check_dim(x, 1)[0] - self.center[0])
        return np.array([math.copysign(1.0, t) if t != 0.0 else 0.0])

    def value_batch(self, X) -> np.ndarray:
        return np.abs(np.asarray(X, dtype=np.float64)[:, 0] - self.center[0])

    def gradient_batch(self, X) -> np.ndarray:
        t = np.asarray(X, dtype=np.float64) - self.center[0]
        return np.sign(t)

    def kernel_spec(self):
        return OBJ_ABS, self.center.copy()


@dataclass
class NoiseModel:
    """Additive zero-mean bounded noise: componentwise uniform on [-kappa, kappa].

    kind: "none" | "gradient" | "value". The rng stream is owned by whoever
    runs the queries (one stream per worker).
    """

    kind: str = "none"
    kappa: float = 0.0
    rng: np.random.Generator | None = None

    def __post_init__(self):
        if self.kind not in ("none", "gradient", "value"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ValueError("kappa must be finite and nonnegative")

    @property
    def code(self) -> int:
        return {"none": NOISE_NONE, "gradient": NOISE_GRADIENT, "value": NOISE_VALUE}[self.kind]


class NoisyObjective(Objective):
    """Wraps an objective with additive uniform noise on one feedback channel.

    Declared bounds grow to L + kappa*sqrt(d) (gradient noise) or C + kappa
    (value noise). Noise draws are independent across queries given the
    stream; batch queries consume the stream in row-major order, matching
    an equivalent sequence of scalar queries.
    """

    def __init__(self, base: Objective, noise: NoiseModel):
        self.base = base
        self.noise = noise
        self.dimension = base.dimension
        d = base.dimension
        self.lipschitz = base.lipschitz + (
            noise.kappa * math.sqrt(d) if noise.kind == "gradient" else 0.0
        )
        self.value_bound = base.value_bound + (
            noise.kappa if noise.kind == "value" else 0.0
        )
        self.domain_margin = base.domain_margin
        self.minimum_value = base.minimum_value
        self.minimizer = base.minimizer

    @property
    def rng(self) -> np.random.Generator | None:
        return self.noise.rng

    def bind_noise_stream(self, rng: np.random.Generator):
        self.noise.rng = rng

    def _require_rng(self) -> np.random.Generator:
        if self.noise.rng is None:
            raise ValueError("noise stream unbound; seed the NoiseModel rng first")
        return self.noise.rng

    def value(self, x) -> float:
        v = self.base.value(x)
        if self.noise.kind == "value" and self.noise.kappa > 0:
            v += self.noise.kappa * (2.0 * self._require_rng().random() - 1.0)
        elif self.noise.kind == "value":
            self._require_rng().random()
        return v

    def gradient(self, x) -> np.ndarray:
        g = self.base.gradient(x)
        if self.noise.kind == "gradient":
            u = self._require_rng().random(self.dimension)
            g = g + self.noise.kappa * (2.0 * u - 1.0)
        return g

    def value_batch(self, X) -> np.ndarray:
        v = self.base.value_batch(X)
        if self.noise.kind == "value":
            u = self._require_rng().random(v.shape[0])
            v = v + self.noise.kappa * (2.0 * u - 1.0)
        return v

    def gradient_batch(self, X) -> np.ndarray:
        g = self.base.gradient_batch(X)
        if self.noise.kind == "gradient":
            u = self._require_rng().random(g.shape)
            g = g + self.noise.kappa * (2.0 * u - 1.0)
        return g

    def kernel_spec(self):
        return self.base.kernel_spec()


def make_noisy(obj: Objective, noise: NoiseModel) -> Objective:
    """Wrap ``obj`` with a noise model; kind "none" returns ``obj`` unchanged."""
    if noise.kind == "none" or noise.kappa == 0.0:
        if noise.kind == "none":
            return obj
    return NoisyObjective(obj, noise)


def declared_reach(set_, center, margin: float) -> float:
    """max ||x - center|| over (set + margin*unit ball); sizes L and C."""
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    if isinstance(set_, AxisBox):
        far = np.maximum(np.abs(set_.lower - center), np.abs(set_.upper - center))
        base = float(np.linalg.norm(far))
    elif isinstance(set_, EuclideanBall):
        base = float(np.linalg.norm(set_.center - center)) + set_.radius
    else:
        base = float(np.linalg.norm(set_.ball.center - center)) + set_.ball.radius
    return base + margin


# ---------------------------------------------------------------------------
# sigma-nice synthetic testbed
# ---------------------------------------------------------------------------

@dataclass
class SigmaNiceSpec:
    """Certification target: strong-convexity modulus, minimizer, delta ladder."""

    sigma: float
    global_minimizer: np.ndarray
    delta_ladder: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        for a, b in zip(self.delta_ladder, self.delta_ladder[1:]):
            if not math.isclose(b, 0.5 * a, rel_tol=1e-12):
                raise ValueError("delta ladder must halve at every step")


# Ratio between the certified sigma and the quadratic curvature. The
# headroom absorbs the residual wobble curvature left by smoothing.
SIGMA_PRIME_RATIO = {1: 0.5, 2: 0.8}

# Verified-admissible wobble ranges per dimension (frozen alongside the
# golden verification reports; see tests/test_reference.py). amp <= 0 keeps
# the global minimizer pinned at the quadratic center.
ADMISSIBLE_WOBBLE = {
    1: dict(freq_lo=2.0, freq_hi=2.7, amp_freq_max=12.0),
    2: dict(freq_lo=3.0, freq_hi=7.0, amp_freq2_max=0.16),
}

# Published defaults. d=1 is macro-multimodal (9 local minima on [-10,10],
# basin walls strong enough to trap plain SGD); d=2 is a mildly wobbled
# bowl whose smoothed versions certify at every ladder rung.
TESTBED_DEFAULTS = {
    1: dict(sigma=0.0045, wobble_amp=-0.03939560595677129, wobble_freq=0.8 * math.pi),
    2: dict(sigma=1.04, wobble_amp=-0.0078, wobble_freq=5.0),
}

TESTBED_CENTERS = {1: (0.0,), 2: (0.12, -0.08)}
LADDER_LEVELS = 11  # delta_1 down to delta_1 / 2**10


def canonical_set(d: int):
    """Decision set the shipped testbeds are certified against."""
    if d == 1:
        return AxisBox([-10.0], [10.0])
    if d == 2:
        return EuclideanBall([0.0, 0.0], 1.0)
    raise ValueError("testbed sets exist for d in {1, 2}")


def make_sigma_nice_test_function(
    sigma: float,
    d: int,
    wobble_amp: float,
    wobble_freq: float,
    *,
    set_=None,
    enforce_admissible: bool = True,
):
    """Build a testbed objective and its certification spec.

    The quadratic curvature is sigma / SIGMA_PRIME_RATIO[d]; the wobble must
    fall in the verified-admissible range found by the construction sweep
    (pass ``enforce_admissible=False`` to build out-of-range functions for
    counterexample fixtures).
    """
    if d not in (1, 2):
        raise ConstructionError("testbed construction supports d in {1, 2}")
    if sigma <= 0:
        raise ConstructionError("sigma must be positive")
    curvature = sigma / SIGMA_PRIME_RATIO[d]
    if enforce_admissible and wobble_amp != 0.0:
        adm = ADMISSIBLE_WOBBLE[d]
        ok = adm["freq_lo"] <= wobble_freq <= adm["freq_hi"] and wobble_amp <= 0.0
        if ok and d == 1:
            ok = abs(wobble_amp) * wobble_freq <= adm["amp_freq_max"] * curvature
        if ok and d == 2:
            ok = abs(wobble_amp) * wobble_freq**2 <= adm["amp_freq2_max"] * curvature
        if not ok:
            raise ConstructionError(
                f"wobble (amp={wobble_amp}, freq={wobble_freq}) outside the "
                f"verified-admissible range for d={d}"
            )
    set_ = set_ if set_ is not None else canonical_set(d)
    center = np.array(TESTBED_CENTERS[d])
    delta1 = set_.diameter() / 2.0
    margin = delta1
    reach = declared_reach(set_, center, margin)
    obj = QuadCosObjective(
        center=center, curvature=curvature, amp=wobble_amp, freq=wobble_freq,
        reach=reach, domain_margin=margin,
    )
    ladder = [delta1 / 2.0**k for k in range(LADDER_LEVELS)]
    spec = SigmaNiceSpec(sigma=sigma, global_minimizer=center.copy(), delta_ladder=ladder)
    return obj, spec


def testbed(d: int):
    """Shipped default testbed: (objective, spec, canonical set)."""
    params = TESTBED_DEFAULTS[d]
    obj, spec = make_sigma_nice_test_function(
        params["sigma"], d, params["wobble_amp"], params["wobble_freq"]
    )
    return obj, spec, canonical_set(d)
