"""Exact spectral quantities: eigenvalues, semicircle objects, the centered
log-characteristic polynomial, advection characteristics, and fluctuation
normalizations.

Branch conventions (shared by every operation here): complex square roots
sqrt(z^2-4) use the branch analytic off [-2,2] with sqrt(z^2-4) ~ z at
infinity; logs are principal, extended to the negative reals by continuity
from above (Im log x = pi for x < 0).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .ensemble import MatrixSample

TWO_PI = 2.0 * np.pi


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalue vector of one sample plus source metadata."""

    n: int
    lambdas: np.ndarray
    meta: dict

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.shape != (self.n,):
            raise SpectralError("eigenvalue vector has wrong length")
        if np.any(np.diff(lam) < 0):
            raise SpectralError("eigenvalues must be sorted ascending")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    def to_csv(self) -> str:
        return "\n".join(repr(x) for x in self.lambdas) + "\n"

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "lambdas": self.lambdas.tolist(),
                           "meta": self.meta})

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        doc = json.loads(text)
        return cls(n=int(doc["n"]), lambdas=np.asarray(doc["lambdas"]),
                   meta=doc.get("meta", {}))


def eigenvalues(sample: MatrixSample) -> Spectrum:
    """Full sorted spectrum of a dense symmetric/hermitian sample."""
    try:
        lam = np.linalg.eigvalsh(sample.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectralError(
            f"eigensolver failed for sample with seed record {sample.seed_record}"
        ) from exc
    return Spectrum(n=sample.n, lambdas=np.sort(lam),
                    meta={"source": sample.seed_record})


def rho(x):
    """Semicircle density sqrt((4-x^2)_+) / (2 pi)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / TWO_PI
    return out if out.shape else float(out)


def semicircle_cdf(x):
    """Closed-form semicircle CDF on [-2, 2]."""
    x = np.asarray(x, dtype=np.float64)
    xc = np.clip(x, -2.0, 2.0)
    out = 0.5 + xc * np.sqrt(4.0 - xc * xc) / (4.0 * np.pi) + np.arcsin(xc / 2.0) / np.pi
    return out if out.shape else float(out)


def sqrt_z2m4(z):
    """sqrt(z^2 - 4), analytic on C minus [-2,2], ~ z at infinity.

    Real inputs are taken by continuity from above.
    """
    z = np.asarray(z, dtype=np.complex128)
    zi = np.where(z.imag == 0.0, z.real + 1e-300j, z)  # continuity from above
    out = np.sqrt(zi - 2.0) * np.sqrt(zi + 2.0)
    return out if out.shape else complex(out)


def m_sc(z):
    """Semicircle Stieltjes transform: root of m^2 + z m + 1 = 0, Im m > 0
    in the upper half plane; real-axis evaluation allowed only for |E| > 2."""
    arr = np.asarray(z, dtype=np.complex128)
    if np.any((arr.imag == 0.0) & (np.abs(arr.real) <= 2.0)):
        raise SpectralError("m_sc on [-2,2] requires Im z > 0")
    return _m_sc_unchecked(z)


def _m_sc_unchecked(z):
    z = np.asarray(z, dtype=np.complex128)
    out = (-z + sqrt_z2m4(z)) / 2.0
    return out if out.shape else complex(out)


def quantile(k: int, n: int) -> float:
    """Semicircle quantile gamma_k solving F(gamma_k) = k/n.

    Bisection to width 1e-6 followed by Newton polish; round trip
    |F(quantile(k,n)) - k/n| <= 1e-10.
    """
    if not (1 <= k <= n):
        raise SpectralError(f"index k={k} out of range 1..{n}")
    target = k / n
    if k == n:
        return 2.0
    lo, hi = -2.0, 2.0
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if semicircle_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = rho(x)
        if d <= 0:
            break
        x -= (semicircle_cdf(x) - target) / d
        x = min(max(x, -2.0), 2.0)
    return float(x)


def quantiles(n: int) -> np.ndarray:
    """All semicircle quantiles gamma_1..gamma_n."""
    return np.array([quantile(k, n) for k in range(1, n + 1)])


@dataclass(frozen=True)
class ScaleParams:
    kappa: float
    ell: float


def kappa_of(z) -> float:
    """Distance to the spectral edge: |z+2| ^ |z-2| (complex allowed)."""
    zc = complex(z)
    return min(abs(zc + 2.0), abs(zc - 2.0))


def scale_params(E: float, n: int) -> ScaleParams:
    """kappa(E) and the typical eigenvalue spacing l(E) at dimension n."""
    if not np.isfinite(E):
        raise SpectralError("energy must be finite")
    if n < 1:
        raise SpectralError("n must be positive")
    kappa = kappa_of(E)
    edge = n ** (-2.0 / 3.0)
    if -2.0 + edge <= E <= 2.0 - edge:
        ell = kappa ** (-0.5) / n
    else:
        ell = edge
    return ScaleParams(kappa=float(kappa), ell=float(ell))


def stieltjes(spec: Spectrum, z) -> complex:
    """Empirical Stieltjes transform s(z) = (1/n) sum 1/(lambda_k - z)."""
    z = complex(z)
    if z.imag == 0.0 and np.any(spec.lambdas == z.real):
        raise SpectralError("real-axis evaluation exactly at an eigenvalue")
    return complex(np.mean(1.0 / (spec.lambdas - z)))


def log_potential(z) -> complex:
    """U(z) = int log(z-x) drho(x), principal branch continued from above.

    Closed form z^2/4 - z sqrt(z^2-4)/4 + log(z + sqrt(z^2-4)) - log 2 - 1/2;
    rejects real z <= -2 (the branch cut of the outer log).
    """
    zc = complex(z)
    if zc.imag == 0.0 and zc.real <= -2.0:
        raise SpectralError("log_potential rejected on the branch cut (-inf, -2]")
    r = sqrt_z2m4(zc)
    w = zc + r
    if w.imag == 0.0 and w.real < 0.0:  # continuity from above on the negatives
        logw = np.log(-w.real) + 1j * np.pi
    else:
        logw = np.log(w)
    return complex(zc * zc / 4.0 - zc * r / 4.0 + logw - np.log(2.0) - 0.5)


def _log_from_above(w):
    """Principal log with Im log(x) = pi for negative real x."""
    w = np.asarray(w, dtype=np.complex128)
    neg = (w.imag == 0.0) & (w.real < 0.0)
    out = np.empty_like(w)
    out[~neg] = np.log(w[~neg])
    out[neg] = np.log(-w[neg].real) + 1j * np.pi
    return out


def log_char_poly(spec: Spectrum, z) -> complex:
    """Centered log-characteristic polynomial
    L(z) = sum_j log(z - lambda_j) - n U(z)."""
    zc = complex(z)
    diffs = zc - spec.lambdas
    if zc.imag == 0.0 and np.any(diffs.real == 0.0):
        raise SpectralError("real-axis evaluation collides with an eigenvalue")
    total = complex(np.sum(_log_from_above(diffs)))
    return total - spec.n * log_potential(zc)


def characteristic(z, t: float, mode: str = "closed-form") -> complex:
    """Advection characteristic z_t with dz/dt = m_sc(z) + z/2, z_0 = z.

    closed-form: z_t = (e^{t/2}(z + sqrt(z^2-4)) + e^{-t/2}(z - sqrt(z^2-4)))/2.
    ode: adaptive Runge-Kutta on the same vector field (cross-check, 1e-8).
    """
    zc = complex(z)
    if zc.imag <= 0.0:
        raise SpectralError("characteristic requires Im z > 0")
    if t < 0:
        raise SpectralError("time must be nonnegative")
    if mode == "closed-form":
        r = sqrt_z2m4(zc)
        return complex((np.exp(t / 2.0) * (zc + r) + np.exp(-t / 2.0) * (zc - r)) / 2.0)
    if mode == "ode":
        def field(_, y):
            w = complex(y[0], y[1])
            dw = _m_sc_unchecked(w) + w / 2.0
            return [dw.real, dw.imag]

        sol = solve_ivp(field, (0.0, t), [zc.real, zc.imag], method="DOP853",
                        rtol=1e-12, atol=1e-12)
        if not sol.success:  # pragma: no cover
            raise SpectralError(f"characteristic ODE failed: {sol.message}")
        return complex(sol.y[0, -1], sol.y[1, -1])
    raise SpectralError(f"unknown mode {mode!r}")


def normalized_fluct(spec: Spectrum, k: int, beta: int) -> float:
    """Centered, variance-normalized eigenvalue fluctuation
    Y(k) = pi n sqrt(beta/log n) rho(gamma_k) (lambda_k - gamma_k)."""
    n = spec.n
    if not (1 <= k <= n):
        raise SpectralError(f"index k={k} out of range 1..{n}")
    gam = quantile(k, n)
    dens = rho(gam)
    if dens <= 0.0:
        raise SpectralError(f"rho(gamma_{k}) = 0; fluctuation undefined at the edge")
    return float(np.pi * n * np.sqrt(beta / np.log(n)) * dens
                 * (spec.lambdas[k - 1] - gam))


def resolvent(sample: MatrixSample, z) -> np.ndarray:
    zc = complex(z)
    h = sample.entries.astype(np.complex128, copy=True)
    h[np.diag_indices(sample.n)] -= zc
    try:
        return np.linalg.inv(h)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"singular shift at z={zc}") from exc


def ward_residual(sample: MatrixSample, z) -> float:
    """max_i | sum_j |G_ij|^2 - Im G_ii / eta | for the numerical resolvent."""
    zc = complex(z)
    if zc.imag <= 0.0:
        raise SpectralError("ward_residual requires Im z > 0")
    g = resolvent(sample, zc)
    lhs = np.sum(np.abs(g) ** 2, axis=1)
    rhs = np.diagonal(g).imag / zc.imag
    return float(np.max(np.abs(lhs - rhs)))
