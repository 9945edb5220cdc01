"""Dyson Brownian Motion: ordered-particle SDE integration with replayable
noise, coupled flows sharing one Brownian record, tangent-kernel dynamics,
the coupling observables f_t / f~_t, rigidity statistics, and the
homogenized gap predictor.

Noise model: step s consumes one row of standard normals xi[s, :] from a
Philox stream keyed by the path seed; the Brownian increment is
sqrt(dt_s) xi[s, k], and the path records the accepted dt sequence, so
(seed, dt_sequence) replays the path bitwise on the same backend.
"""

from __future__ import annotations

import io
import json
import zlib
from dataclasses import dataclass

import numpy as np

from . import flowcore
from .spectral import Spectrum, quantile, quantiles, scale_params

XI_BLOCK = 8192


class DbmError(RuntimeError):
    pass


@dataclass(frozen=True)
class DtPolicy:
    c_dt: float = 0.1
    dt_max: float = 1e-2
    max_halve: int = 20

    def as_dict(self) -> dict:
        return {"c_dt": self.c_dt, "dt_max": self.dt_max, "max_halve": self.max_halve}


@dataclass(frozen=True)
class DbmPath:
    beta: int
    n: int
    times: np.ndarray            # snapshot grid, increasing, times[0] = 0
    particles: np.ndarray        # (len(times), n), ordered rows
    dt_policy: DtPolicy
    dt_sequence: np.ndarray      # accepted dt per step, whole run
    seed: int
    steps_to_snapshot: np.ndarray  # cumulative step count at each snapshot
    backend: str

    def __post_init__(self):
        for row in self.particles:
            if len(row) > 1 and not np.all(np.diff(row) > 0):
                raise DbmError("stored particle configuration is not ordered")

    @property
    def steps(self) -> int:
        return len(self.dt_sequence)

    def index_of_time(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-12:
            raise DbmError(f"time {t} is not on the stored grid")
        return idx

    def noise_increments(self) -> np.ndarray:
        """Regenerate the per-step Brownian increments sqrt(dt_s) xi[s,k]."""
        xi = _xi_stream(self.seed, self.n, self.steps)
        return np.sqrt(self.dt_sequence)[:, None] * xi

    def noise_record_json(self) -> str:
        return json.dumps({
            "seed": self.seed,
            "beta": self.beta,
            "n": self.n,
            "generator": "philox",
            "dt_sequence": self.dt_sequence.tolist(),
            "snapshot_times": self.times.tolist(),
        })

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("time,k,x\n")
        for it, t in enumerate(self.times):
            for k in range(self.n):
                buf.write(f"{t!r},{k + 1},{self.particles[it, k]!r}\n")
        return buf.getvalue()


def _xi_stream(seed: int, n: int, steps: int) -> np.ndarray:
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([zlib.crc32(b"dbm"), int(seed)]))
    )
    return rng.standard_normal((steps, n))


def _xi_blocks(seed: int, n: int):
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([zlib.crc32(b"dbm"), int(seed)]))
    )
    while True:
        yield rng.standard_normal((XI_BLOCK, n))


def _prepare_initial(initial) -> np.ndarray:
    x = initial.lambdas if isinstance(initial, Spectrum) else np.asarray(initial, float)
    x = np.sort(np.array(x, dtype=np.float64))
    # perturb exact ties so the strong solution's ordering is strict
    for k in range(1, len(x)):
        if x[k] <= x[k - 1]:
            x[k] = x[k - 1] + 1e-12
    return x


def _snapshot_grid(t_end: float, snapshots) -> np.ndarray:
    if snapshots is None:
        grid = np.linspace(0.0, t_end, 11)
    elif np.isscalar(snapshots):
        grid = np.linspace(0.0, t_end, int(snapshots) + 1)
    else:
        grid = np.asarray(snapshots, dtype=np.float64)
        if grid[0] != 0.0:
            grid = np.concatenate([[0.0], grid])
    if not np.all(np.diff(grid) > 0) or abs(grid[-1] - t_end) > 1e-12:
        raise DbmError("snapshot grid must be increasing and end at t_end")
    return grid


def _integrate(x0, beta, t_end, policy, seed, snapshots, x2_0=None, u0=None, v0=None):
    x = x0.copy()
    x2 = None if x2_0 is None else x2_0.copy()
    u = None if u0 is None else np.array(u0, dtype=np.float64)
    v = None if v0 is None else np.array(v0, dtype=np.float64)
    grid = _snapshot_grid(t_end, snapshots)
    snaps = [x.copy()]
    snaps2 = [x2.copy()] if x2 is not None else None
    snaps_u = [u.copy()] if u is not None else None
    snaps_v = [v.copy()] if v is not None else None
    steps_at = [0]
    dts: list[float] = []
    t = 0.0
    blocks = _xi_blocks(seed, len(x))
    xi = next(blocks)
    offset = 0
    for t_snap in grid[1:]:
        while True:
            t, used, status = flowcore.em_block(
                x, t, t_snap, xi[offset:], beta, policy.c_dt, policy.dt_max,
                policy.max_halve, dts, x2, u, v,
            )
            offset += used
            if status == 0:
                break
            if status == 1:
                xi = next(blocks)
                offset = 0
                continue
            if status == 2:
                raise DbmError(
                    f"particle collision persisted after {policy.max_halve} "
                    f"dt halvings at step {len(dts)} (t={t:.6g})"
                )
            raise DbmError(
                f"kernel step unstable (CFL violation) at step {len(dts)}; "
                f"re-run with a smaller dt policy (c_dt < {policy.c_dt})"
            )
        snaps.append(x.copy())
        steps_at.append(len(dts))
        if snaps2 is not None:
            snaps2.append(x2.copy())
        if snaps_u is not None:
            snaps_u.append(u.copy())
            snaps_v.append(v.copy())
    return grid, snaps, snaps2, snaps_u, snaps_v, np.asarray(dts), steps_at


def run_dbm(initial, beta: int, t_end: float, dt_policy: DtPolicy | None = None,
            seed: int | None = None, snapshots=None) -> DbmPath:
    """Euler-Maruyama path of the ordered-particle SDE
    dx_k = sqrt(2/(beta n)) dB_k + ((1/n) sum_{l!=k} 1/(x_k-x_l) - x_k/2) dt."""
    if beta not in (1, 2):
        raise DbmError(f"beta must be 1 or 2, got {beta}")
    if not (0.0 < t_end <= 1.0):
        raise DbmError(f"t_end must lie in (0, 1], got {t_end}")
    if seed is None:
        raise DbmError("seed is mandatory")
    policy = dt_policy or DtPolicy()
    x0 = _prepare_initial(initial)
    grid, snaps, _, _, _, dts, steps_at = _integrate(
        x0, beta, t_end, policy, seed, snapshots
    )
    return DbmPath(beta=beta, n=len(x0), times=grid,
                   particles=np.asarray(snaps), dt_policy=policy,
                   dt_sequence=dts, seed=int(seed),
                   steps_to_snapshot=np.asarray(steps_at),
                   backend=flowcore.BACKEND)


def run_coupled(init_a, init_b, beta: int, t_end: float,
                dt_policy: DtPolicy | None = None, seed: int | None = None,
                snapshots=None) -> tuple[DbmPath, DbmPath]:
    """Two DBM paths driven by the identical Brownian record (same B_k),
    advanced with a common adaptive dt."""
    if beta not in (1, 2):
        raise DbmError(f"beta must be 1 or 2, got {beta}")
    if seed is None:
        raise DbmError("seed is mandatory")
    policy = dt_policy or DtPolicy()
    xa = _prepare_initial(init_a)
    xb = _prepare_initial(init_b)
    if len(xa) != len(xb):
        raise DbmError("coupled initials must have equal length")
    grid, snaps_a, snaps_b, _, _, dts, steps_at = _integrate(
        xa, beta, t_end, policy, seed, snapshots, x2_0=xb
    )
    common = dict(beta=beta, n=len(xa), times=grid, dt_policy=policy,
                  dt_sequence=dts, seed=int(seed),
                  steps_to_snapshot=np.asarray(steps_at),
                  backend=flowcore.BACKEND)
    return (DbmPath(particles=np.asarray(snaps_a), **common),
            DbmPath(particles=np.asarray(snaps_b), **common))


@dataclass(frozen=True)
class KernelTrajectory:
    """Tangent kernel u (and |u0|-initialized v) along a stored path."""

    times: np.ndarray
    u: np.ndarray  # (len(times), n)
    v: np.ndarray

    def state_at(self, t: float):
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-12:
            raise DbmError(f"time {t} is not on the stored grid")
        return self.u[idx], self.v[idx]


def evolve_kernel(u0, path: DbmPath) -> KernelTrajectory:
    """Frozen-coefficient Euler for du_k = (1/n) sum (u_l - u_k)/(x_k - x_l)^2 dt
    along the realized positions of `path` (replayed step-for-step), plus the
    v-variant initialized at |u0|.

    Conserves sum(u) (antisymmetry) and satisfies the maximum principle as
    long as the path's dt policy keeps the Euler coefficient below 1.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    if len(u0) != path.n:
        raise DbmError(f"kernel length {len(u0)} != particle count {path.n}")
    x = path.particles[0].copy()
    u = u0.copy()
    v = np.abs(u0)
    xi_all = _xi_stream(path.seed, path.n, path.steps)
    us = [u.copy()]
    vs = [v.copy()]
    t = 0.0
    step = 0
    for i, t_snap in enumerate(path.times[1:], start=1):
        target_steps = path.steps_to_snapshot[i]
        t, used, done, status = flowcore.replay_block(
            x, t, float(t_snap), xi_all[step:target_steps], path.dt_sequence,
            step, float(path.beta), None, u, v,
        )
        step += done
        if status == 3:
            raise DbmError(
                "kernel step unstable (CFL violation); re-run the path with a "
                "smaller dt policy"
            )
        if status != 0 and step != target_steps:
            raise DbmError("kernel replay desynchronized from the stored path")
        us.append(u.copy())
        vs.append(v.copy())
    return KernelTrajectory(times=path.times, u=np.asarray(us), v=np.asarray(vs))


def _observable(path, kernel, z, t, which) -> complex:
    zc = complex(z)
    if zc.imag == 0.0:
        raise DbmError("observable requires Im z != 0")
    it = path.index_of_time(t)
    x = path.particles[it]
    w = kernel.u[it] if which == "u" else kernel.v[it]
    return complex(np.exp(-t / 2.0) * np.sum(w / (x - zc)))


def observable_f(path: DbmPath, kernel: KernelTrajectory, z, t: float) -> complex:
    """f_t(z) = e^{-t/2} sum_k u_k(t) / (x_k(t) - z)."""
    return _observable(path, kernel, z, t, "u")


def observable_f_tilde(path: DbmPath, kernel: KernelTrajectory, z, t: float) -> complex:
    """f~_t(z), the |u0|-initialized variant."""
    return _observable(path, kernel, z, t, "v")


def rigidity_report(path: DbmPath) -> float:
    """max over stored (t, k) of |x_k(t) - gamma_k| / (n^{-2/3} min(k, n+1-k)^{-1/3})."""
    n = path.n
    gam = quantiles(n)
    k = np.arange(1, n + 1)
    denom = n ** (-2.0 / 3.0) * np.minimum(k, n + 1 - k) ** (-1.0 / 3.0)
    dev = np.abs(path.particles - gam[None, :]) / denom[None, :]
    return float(dev.max())


def sgrid(n: int, n_points: int = 32) -> list[complex]:
    """Observable evaluation grid: quantile-spaced energies with
    eta = phi^2 l(E), phi = min(e^{(log log n)^2}, n^{0.1})."""
    phi = min(np.exp(np.log(np.log(n)) ** 2), float(n) ** 0.1)
    out = []
    for j in range(1, n_points + 1):
        k = max(1, min(n, round((j - 0.5) / n_points * n)))
        e = quantile(int(k), n)
        out.append(complex(e, phi ** 2 * scale_params(e, n).ell))
    return out


def ubar(initial_a, initial_b, t: float, k: int, alpha: float = 0.05) -> float:
    """Homogenized gap predictor
    ubar_k(t) = (sum_j Im(1/(gamma_j - gamma_k - it)) (a_j - b_j)) / (n Im m(gamma_k + it))
    with m the Stieltjes transform of the quantile configuration (so constant
    differences are reproduced exactly)."""
    a = np.asarray(initial_a.lambdas if isinstance(initial_a, Spectrum) else initial_a)
    b = np.asarray(initial_b.lambdas if isinstance(initial_b, Spectrum) else initial_b)
    if a.shape != b.shape:
        raise DbmError("initial configurations must have equal length")
    n = len(a)
    if not (alpha * n <= k <= (1.0 - alpha) * n):
        raise DbmError(f"index k={k} outside the bulk range [{alpha*n:.0f}, {(1-alpha)*n:.0f}]")
    gam = quantiles(n)
    z = complex(gam[k - 1], t)
    weights = np.imag(1.0 / (gam - z))
    return float(np.sum(weights * (a - b)) / np.sum(weights))
