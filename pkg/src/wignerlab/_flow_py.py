"""Pure-numpy backend for the Dyson Brownian Motion inner loops.

Mirrors the compiled `_flow_core` API exactly; selected at import by
`wignerlab.flowcore` when the extension is unavailable (or forced via
WIGNERLAB_PURE_PYTHON=1). Semantics, not bits, match the compiled twin:
each backend is bitwise-reproducible against itself.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _drift(x: np.ndarray, n_inv: float) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    return n_inv * np.sum(1.0 / diff, axis=1) - 0.5 * x


def _kernel_rate(x: np.ndarray, u: np.ndarray, n_inv: float) -> np.ndarray:
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    w = 1.0 / (diff * diff)
    return n_inv * (w @ u - w.sum(axis=1) * u)


def _kernel_coef(x: np.ndarray, n_inv: float, dt: float) -> float:
    """Largest diagonal Euler coefficient; cheap ordered-gap bound first."""
    g = _min_gap(x)
    if not np.isfinite(g):
        return 0.0
    bound = dt * n_inv * 3.2899 / (g * g)
    if bound <= 1.0:
        return bound
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, np.inf)
    return float(dt * n_inv * np.max(np.sum(1.0 / (diff * diff), axis=1)))


def _min_gap(x: np.ndarray) -> float:
    return float(np.min(np.diff(x))) if len(x) > 1 else np.inf


def em_block(x, t, t_target, xi, beta, c_dt, dt_max, max_halve, dts, x2=None,
             u=None, v=None):
    """Integrate dx_k = sqrt(2/(beta n)) dB_k + ((1/n) sum 1/(x_k-x_l) - x_k/2) dt
    from t toward t_target, consuming one xi row per accepted step.

    Adaptive dt = min(c_dt * min_gap^2 * n, dt_max, t_target - t); on an
    ordering violation the same xi row is retried with dt/2, up to max_halve
    times. Optionally advances a coupled system x2 (same noise, common dt) and
    tangent kernels u, v (frozen-coefficient Euler on the pre-step positions).

    Returns (t, rows_used, status): status 0 = reached t_target,
    1 = xi exhausted, 2 = ordering failure (collision), 3 = kernel CFL failure.
    """
    n = len(x)
    n_inv = 1.0 / n
    noise_coef = np.sqrt(2.0 / (beta * n))
    rows = xi.shape[0]
    row = 0
    while t < t_target:
        if row >= rows:
            return t, row, 1
        gap = _min_gap(x)
        if x2 is not None:
            gap = min(gap, _min_gap(x2))
        dt = c_dt * gap * gap * n if np.isfinite(gap) else dt_max
        dt = min(dt, dt_max, t_target - t)
        drift1 = _drift(x, n_inv)
        drift2 = _drift(x2, n_inv) if x2 is not None else None
        accepted = False
        for _ in range(max_halve + 1):
            step = drift1 * dt + noise_coef * np.sqrt(dt) * xi[row]
            xn = x + step
            ok = np.all(np.diff(xn) > 0.0) if n > 1 else True
            xn2 = None
            if ok and x2 is not None:
                step2 = drift2 * dt + noise_coef * np.sqrt(dt) * xi[row]
                xn2 = x2 + step2
                ok = np.all(np.diff(xn2) > 0.0) if n > 1 else True
            if ok:
                accepted = True
                break
            dt *= 0.5
        if not accepted:
            return t, row, 2
        if u is not None:
            if _kernel_coef(x, n_inv, dt) > 1.0:
                return t, row, 3
            u += _kernel_rate(x, u, n_inv) * dt
            v += _kernel_rate(x, v, n_inv) * dt
        x[:] = xn
        if xn2 is not None:
            x2[:] = xn2
        dts.append(dt)
        t += dt
        row += 1
    return t, row, 0


def replay_block(x, t, t_target, xi, dts_fixed, start_step, beta, x2=None,
                 u=None, v=None):
    """Re-run a recorded dt sequence (bitwise path replay), optionally
    evolving kernels along the replayed positions.

    Returns (t, rows_used, steps_done, status): status 0 = reached target,
    1 = xi exhausted, 3 = kernel CFL failure.
    """
    n = len(x)
    n_inv = 1.0 / n
    noise_coef = np.sqrt(2.0 / (beta * n))
    rows = xi.shape[0]
    row = 0
    step_idx = start_step
    total = len(dts_fixed)
    while step_idx < total and t < t_target:
        if row >= rows:
            return t, row, step_idx - start_step, 1
        dt = dts_fixed[step_idx]
        drift1 = _drift(x, n_inv)
        if u is not None:
            if _kernel_coef(x, n_inv, dt) > 1.0:
                return t, row, step_idx - start_step, 3
            u += _kernel_rate(x, u, n_inv) * dt
            v += _kernel_rate(x, v, n_inv) * dt
        x += drift1 * dt + noise_coef * np.sqrt(dt) * xi[row]
        if x2 is not None:
            x2 += _drift(x2, n_inv) * dt + noise_coef * np.sqrt(dt) * xi[row]
        t += dt
        row += 1
        step_idx += 1
    return t, row, step_idx - start_step, 0
