"""Pure-Python inner loop: the fallback backend for suffix-averaged SGD.

This mirrors the compiled kernel in ``_kernels.pyx`` operation for
operation (same scalar arithmetic order, same RNG consumption, same
projection logic), so both backends produce bit-identical trajectories.
Keep the two files in sync; the parity test enforces it.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import (
    DYKSTRA_MAX_ITER,
    DYKSTRA_TOL,
    SET_BALL,
    SET_BALL_IN_BALL,
    SET_BALL_IN_BOX,
    SET_BOX,
)
from .objectives import (
    NOISE_GRADIENT,
    NOISE_VALUE,
    OBJ_ABS,
    OBJ_CONSTANT,
    OBJ_LINEAR,
    OBJ_QUADCOS,
    OBJ_QUADRATIC,
)

STATUS_OK = 0
STATUS_NON_FINITE = 1
STATUS_DYKSTRA_FAIL = 2


def _gradient(kind, params, y, out, d):
    if kind == OBJ_CONSTANT:
        for i in range(d):
            out[i] = 0.0
    elif kind == OBJ_LINEAR:
        for i in range(d):
            out[i] = params[i]
    elif kind == OBJ_QUADRATIC:
        curv = params[0]
        for i in range(d):
            out[i] = curv * (y[i] - params[1 + i])
    elif kind == OBJ_QUADCOS:
        curv, amp, freq = params[0], params[1], params[2]
        for i in range(d):
            diff = y[i] - params[3 + i]
            out[i] = curv * diff - amp * freq * math.sin(freq * diff)
    elif kind == OBJ_ABS:
        t = y[0] - params[0]
        out[0] = math.copysign(1.0, t) if t != 0.0 else 0.0
    else:
        raise ValueError(f"unknown objective kind {kind}")


def _value(kind, params, y, d):
    if kind == OBJ_CONSTANT:
        return params[0]
    if kind == OBJ_LINEAR:
        acc = params[d]
        for i in range(d):
            acc += params[i] * y[i]
        return acc
    if kind == OBJ_QUADRATIC:
        curv = params[0]
        acc = 0.0
        for i in range(d):
            diff = y[i] - params[1 + i]
            acc += 0.5 * curv * diff * diff
        return acc
    if kind == OBJ_QUADCOS:
        curv, amp, freq = params[0], params[1], params[2]
        acc = 0.0
        for i in range(d):
            diff = y[i] - params[3 + i]
            acc += 0.5 * curv * diff * diff + amp * math.cos(freq * diff)
        return acc
    if kind == OBJ_ABS:
        return abs(y[0] - params[0])
    raise ValueError(f"unknown objective kind {kind}")


def _project_ball(center_off, radius, z, out, d, params):
    s = 0.0
    for i in range(d):
        diff = z[i] - params[center_off + i]
        s += diff * diff
    if s <= radius * radius:
        for i in range(d):
            out[i] = z[i]
    else:
        scale = radius / math.sqrt(s)
        for i in range(d):
            out[i] = params[center_off + i] + (z[i] - params[center_off + i]) * scale

def _project_box(lo_off, hi_off, z, out, d, params):
    for i in range(d):
        v = z[i]
        if v < params[lo_off + i]:
            v = params[lo_off + i]
        elif v > params[hi_off + i]:
            v = params[hi_off + i]
        out[i] = v


def _project(set_kind, params, z, out, d, scratch):
    """Project z onto the set; returns True on success, False on Dykstra failure."""
    if set_kind == SET_BALL:
        _project_ball(0, params[d], z, out, d, params)
        return True
    if set_kind == SET_BOX:
        _project_box(0, d, z, out, d, params)
        return True

    # intersections: ball params at [0..d], base after
    if set_kind == SET_BALL_IN_BALL:
        base_off = d + 1
        flag_off = base_off + d + 1
    else:
        base_off = d + 1
        flag_off = base_off + 2 * d
    ball_covers_base = params[flag_off] != 0.0
    base_covers_ball = params[flag_off + 1] != 0.0

    def proj_base(src, dst):
        if set_kind == SET_BALL_IN_BALL:
            _project_ball(base_off, params[base_off + d], src, dst, d, params)
        else:
            _project_box(base_off, base_off + d, src, dst, d, params)

    if ball_covers_base:
        proj_base(z, out)
        return True
    if base_covers_ball:
        _project_ball(0, params[d], z, out, d, params)
        return True

    # Dykstra's alternating projections
    x, p, q, u, t1, xprev = scratch
    for i in range(d):
        x[i] = z[i]
        p[i] = 0.0
        q[i] = 0.0
    for _ in range(DYKSTRA_MAX_ITER):
        for i in range(d):
            xprev[i] = x[i]
            t1[i] = x[i] + p[i]
        _project_ball(0, params[d], t1, u, d, params)
        for i in range(d):
            p[i] = t1[i] - u[i]
            t1[i] = u[i] + q[i]
        proj_base(t1, x)
        residual = 0.0
        for i in range(d):
            q[i] = t1[i] - x[i]
            r = abs(x[i] - xprev[i])
            if r > residual:
                residual = r
        if residual <= DYKSTRA_TOL:
            for i in range(d):
                out[i] = x[i]
            return True
    return False


def run_suffix_sgd(
    obj_kind: int,
    obj_params: np.ndarray,
    noise_kind: int,
    kappa: float,
    set_kind: int,
    set_params: np.ndarray,
    flavor: int,
    delta: float,
    sigma: float,
    total_steps: int,
    x0: np.ndarray,
    normals_gen: np.random.Generator,
    radius_gen: np.random.Generator,
    noise_gen: np.random.Generator | None,
    stride: int,
):
    """Run the projected-SGD inner loop; see sgd.suffix_sgd for the contract.

    Returns (status, fail_step, suffix_avg, final_x, trace_rounds,
    trace_points, trace_norms).
    """
    d = len(x0)
    obj_params = [float(v) for v in obj_params]
    set_params = [float(v) for v in set_params]
    x = [float(v) for v in x0]
    n = [0.0] * d
    y = [0.0] * d
    g = [0.0] * d
    z = [0.0] * d
    suffix = [0.0] * d
    scratch = tuple([0.0] * d for _ in range(6))
    half = total_steps // 2
    inv_d = 1.0 / d
    value_flavor = flavor == 1
    coef_scale = d / delta if value_flavor else 0.0

    n_rows = 1 + (total_steps - 1) // stride if stride > 0 else 0
    trace_rounds = np.zeros(n_rows, dtype=np.int64)
    trace_points = np.zeros((n_rows, d))
    trace_norms = np.zeros(n_rows)
    row = 0

    normal = normals_gen.standard_normal
    uniform = radius_gen.random
    noise_uniform = noise_gen.random if noise_gen is not None else None

    for t in range(1, total_steps + 1):
        if t > half:
            for i in range(d):
                suffix[i] += x[i]

        # unit direction
        while True:
            s = 0.0
            for i in range(d):
                n[i] = normal()
                s += n[i] * n[i]
            if s > 0.0:
                break
        norm = math.sqrt(s)

        if value_flavor:
            for i in range(d):
                n[i] = n[i] / norm
                y[i] = x[i] + delta * n[i]
            val = _value(obj_kind, obj_params, y, d)
            if noise_kind == NOISE_VALUE:
                val += kappa * (2.0 * noise_uniform() - 1.0)
            coef = coef_scale * val
            for i in range(d):
                g[i] = coef * n[i]
        else:
            u = uniform()
            fac = u if d == 1 else u**inv_d
            for i in range(d):
                y[i] = x[i] + delta * (n[i] / norm) * fac
            _gradient(obj_kind, obj_params, y, g, d)
            if noise_kind == NOISE_GRADIENT:
                for i in range(d):
                    g[i] += kappa * (2.0 * noise_uniform() - 1.0)

        if stride > 0 and (t - 1) % stride == 0:
            gs = 0.0
            for i in range(d):
                trace_points[row, i] = x[i]
                gs += g[i] * g[i]
            trace_rounds[row] = t
            trace_norms[row] = math.sqrt(gs)
            row += 1

        eta = 1.0 / (sigma * t)
        for i in range(d):
            z[i] = x[i] - eta * g[i]
        if not _project(set_kind, set_params, z, x, d, scratch):
            return (STATUS_DYKSTRA_FAIL, t, None, None, None, None, None)
        for i in range(d):
            if not math.isfinite(x[i]):
                return (STATUS_NON_FINITE, t, None, None, None, None, None)

    count = total_steps - half
    avg = np.array([v / count for v in suffix])
    return (STATUS_OK, 0, avg, np.array(x), trace_rounds[:row], trace_points[:row], trace_norms[:row])
