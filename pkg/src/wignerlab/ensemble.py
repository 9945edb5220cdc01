"""Variance profiles and samplers for generalized Wigner / Wigner-type matrices.

A profile is the symmetric grid of entry variances sigma2[i,j] ~ 1/n; samples
are real-symmetric or complex-hermitian matrices with independent centered
upper-triangular entries drawn from a chosen unit-variance law and scaled to
the profile. All randomness flows through counter-based Philox streams keyed
by an explicit seed, so identical (profile, law, seed) reproduces identical
bits regardless of call order or thread count.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

ROW_SUM_TOL = 1e-12

PROFILE_KINDS = ("goe", "gue", "uniform", "circulant", "custom")


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class EntryLaw:
    """Unit-variance symmetric entry law with its normalized cumulants."""

    name: str
    s1: float
    s2: float
    s3: float
    s4: float

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.name == "gaussian":
            return rng.standard_normal(shape)
        if self.name == "rademacher":
            return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        if self.name == "uniform-symmetric":
            return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
        raise EnsembleError(f"unsupported entry law {self.name!r}")


GAUSSIAN = EntryLaw("gaussian", 0.0, 1.0, 0.0, 0.0)
RADEMACHER = EntryLaw("rademacher", 0.0, 1.0, 0.0, -2.0)
UNIFORM_SYMMETRIC = EntryLaw("uniform-symmetric", 0.0, 1.0, 0.0, -1.2)

_LAWS = {law.name: law for law in (GAUSSIAN, RADEMACHER, UNIFORM_SYMMETRIC)}


def get_law(name) -> EntryLaw:
    if isinstance(name, EntryLaw):
        return name
    try:
        return _LAWS[name]
    except KeyError:
        raise EnsembleError(
            f"unknown entry law {name!r}; choose from {sorted(_LAWS)}"
        ) from None


def entry_cumulants(law) -> tuple[float, float, float, float]:
    """Exact normalized cumulants (s1..s4) of the unit-variance law."""
    law = get_law(law)
    return (law.s1, law.s2, law.s3, law.s4)


@dataclass(frozen=True)
class VarianceProfile:
    """Symmetric grid of entry variances defining an ensemble.

    ``exact_gw`` records whether every row sums to 1 within 1e-12 (exact
    generalized Wigner); GOE rows sum to 1 + 1/n and are flagged approximate.
    ``c_min``/``c_max`` record the constants in c/n <= sigma2 <= C/n.
    """

    n: int
    sigma2: np.ndarray
    kind: str
    bandwidth: int | None = None
    exact_gw: bool = field(init=False)
    c_min: float = field(init=False)
    c_max: float = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise EnsembleError(f"dimension must be positive, got {self.n}")
        s = np.asarray(self.sigma2, dtype=np.float64)
        if s.shape != (self.n, self.n):
            raise EnsembleError(f"sigma2 shape {s.shape} != ({self.n}, {self.n})")
        if not np.array_equal(s, s.T):
            raise EnsembleError("sigma2 must be exactly symmetric")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise EnsembleError("sigma2 entries must be finite and nonnegative")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "sigma2", s)
        rows = self.row_sums()
        object.__setattr__(
            self, "exact_gw", bool(np.max(np.abs(rows - 1.0)) <= ROW_SUM_TOL)
        )
        object.__setattr__(self, "c_min", float(self.n * s.min()))
        object.__setattr__(self, "c_max", float(self.n * s.max()))

    def row_sums(self) -> np.ndarray:
        return self.sigma2.sum(axis=1)

    @property
    def is_complex(self) -> bool:
        return self.kind == "gue"

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "kind": self.kind,
                "bandwidth": self.bandwidth,
                "constants": {"c": self.c_min, "C": self.c_max},
                "exact_gw": self.exact_gw,
                "sigma2": self.sigma2.ravel().tolist(),  # row-major
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "VarianceProfile":
        doc = json.loads(text)
        n = int(doc["n"])
        sigma2 = np.asarray(doc["sigma2"], dtype=np.float64).reshape(n, n)
        return cls(n=n, sigma2=sigma2, kind=doc["kind"], bandwidth=doc.get("bandwidth"))


def make_profile(kind: str, n: int, bandwidth: int | None = None,
                 sigma2=None) -> VarianceProfile:
    """Build a variance profile of the given kind. Deterministic.

    goe: sigma2[i,j] = (1 + delta_ij)/n   (row sums 1 + 1/n)
    gue: sigma2[i,j] = 1/n                (row sums exactly 1)
    uniform: sigma2[i,j] = 1/n
    circulant: weight 1/2 on the diagonal, 1/(4 bandwidth) on each of the
        2*bandwidth cyclic neighbors (row sums exactly 1)
    custom: caller-provided grid, validated
    """
    if n < 1:
        raise EnsembleError(f"dimension must be positive, got {n}")
    if kind == "goe":
        grid = (np.ones((n, n)) + np.eye(n)) / n
    elif kind in ("gue", "uniform"):
        grid = np.full((n, n), 1.0 / n)
    elif kind == "circulant":
        if bandwidth is None or not (1 <= bandwidth < n):
            raise EnsembleError(f"circulant bandwidth must satisfy 1 <= b < n, got {bandwidth}")
        grid = np.zeros((n, n))
        idx = np.arange(n)
        grid[idx, idx] = 0.5
        w = 1.0 / (4.0 * bandwidth)
        for off in range(1, bandwidth + 1):
            grid[idx, (idx + off) % n] += w
            grid[idx, (idx - off) % n] += w
    elif kind == "custom":
        if sigma2 is None:
            raise EnsembleError("custom profile requires a sigma2 grid")
        grid = np.asarray(sigma2, dtype=np.float64)
    else:
        raise EnsembleError(f"unknown profile kind {kind!r}")
    return VarianceProfile(n=n, sigma2=grid, kind=kind, bandwidth=bandwidth)


def _philox(*entropy) -> np.random.Generator:
    """Counter-based generator keyed by the given integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(entropy))))


def _tag(text: str) -> int:
    return zlib.crc32(text.encode())


@dataclass(frozen=True)
class MatrixSample:
    n: int
    symmetry: str  # "real" | "complex-hermitian"
    entries: np.ndarray
    seed_record: dict

    def __post_init__(self):
        e = self.entries
        if e.shape != (self.n, self.n):
            raise EnsembleError("entry grid has wrong shape")
        if not np.array_equal(e, e.conj().T):
            raise EnsembleError("sample must be exactly symmetric/hermitian")
        if self.symmetry == "complex-hermitian" and np.any(e.diagonal().imag != 0.0):
            raise EnsembleError("diagonal must be real")
        e.setflags(write=False)

    def trace(self) -> float:
        return float(np.real(self.entries.trace()))

    def to_json(self) -> str:
        doc = {"n": self.n, "symmetry": self.symmetry, "seed_record": self.seed_record}
        if self.symmetry == "real":
            doc["entries"] = self.entries.ravel().tolist()
        else:
            doc["entries_re"] = self.entries.real.ravel().tolist()
            doc["entries_im"] = self.entries.imag.ravel().tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "MatrixSample":
        doc = json.loads(text)
        n = int(doc["n"])
        if doc["symmetry"] == "real":
            entries = np.asarray(doc["entries"]).reshape(n, n)
        else:
            entries = (
                np.asarray(doc["entries_re"]).reshape(n, n)
                + 1j * np.asarray(doc["entries_im"]).reshape(n, n)
            )
        return cls(n=n, symmetry=doc["symmetry"], entries=entries,
                   seed_record=doc["seed_record"])


def sample_matrix(profile: VarianceProfile, law=GAUSSIAN, symmetry: str | None = None,
                  seed: int | None = None) -> MatrixSample:
    """Draw one matrix with independent upper-triangular entries.

    Entry (i,j) has variance profile.sigma2[i,j]; the complex class splits it
    evenly between real and imaginary parts (diagonal stays real with the full
    variance). Identical (profile, law, symmetry, seed) reproduces identical bits.
    """
    if seed is None:
        raise EnsembleError("seed is mandatory; refusing to auto-generate one")
    law = get_law(law)
    if symmetry is None:
        symmetry = "complex-hermitian" if profile.is_complex else "real"
    if symmetry not in ("real", "complex-hermitian"):
        raise EnsembleError(f"unknown symmetry class {symmetry!r}")
    n = profile.n
    rng = _philox(_tag("sample_matrix"), _tag(symmetry), int(seed))
    scale = np.sqrt(profile.sigma2)
    upper = np.triu_indices(n, 1)
    if symmetry == "real":
        draws = law.draw(rng, (n, n))
        h = np.zeros((n, n))
        h[upper] = draws[upper] * scale[upper]
        h = h + h.T
        h[np.diag_indices(n)] = draws.diagonal() * scale.diagonal()
    else:
        re = law.draw(rng, (n, n))
        im = law.draw(rng, (n, n))
        h = np.zeros((n, n), dtype=np.complex128)
        off = (re[upper] + 1j * im[upper]) * (scale[upper] / np.sqrt(2.0))
        h[upper] = off
        h = h + h.conj().T
        h[np.diag_indices(n)] = re.diagonal() * scale.diagonal()
    record = {"seed": int(seed), "kind": profile.kind, "law": law.name,
              "symmetry": symmetry, "generator": "philox"}
    return MatrixSample(n=n, symmetry=symmetry, entries=h, seed_record=record)


def ou_interpolate(h0: MatrixSample, t: float, seed: int | None = None) -> MatrixSample:
    """Ornstein-Uhlenbeck matrix flow e^{-t/2} h0 + sqrt(1 - e^{-t}) U.

    U is a fresh GOE (resp. GUE) sample matching h0's symmetry class, so the
    total entry variance interpolates e^{-t} sigma0^2 + (1-e^{-t}) sigma_G^2.
    """
    if t < 0:
        raise EnsembleError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return h0
    if seed is None:
        raise EnsembleError("seed is mandatory; refusing to auto-generate one")
    kind = "goe" if h0.symmetry == "real" else "gue"
    gauss_profile = make_profile(kind, h0.n)
    u = sample_matrix(gauss_profile, GAUSSIAN, symmetry=h0.symmetry, seed=seed)
    mixed = np.exp(-t / 2.0) * h0.entries + np.sqrt(1.0 - np.exp(-t)) * u.entries
    record = {"ou_from": h0.seed_record, "t": t, "seed": int(seed)}
    return MatrixSample(n=h0.n, symmetry=h0.symmetry, entries=mixed, seed_record=record)


def tridiagonal_gaussian_spectrum(n: int, beta: int, seed: int) -> np.ndarray:
    """Sorted GOE/GUE eigenvalues via the Dumitriu-Edelman tridiagonal model.

    Identical in law to eigenvalues of a dense GOE (beta=1) / GUE (beta=2)
    sample on the [-2, 2] scaling, at O(n^2) cost instead of O(n^3).
    """
    if beta not in (1, 2):
        raise EnsembleError(f"beta must be 1 or 2, got {beta}")
    if seed is None:
        raise EnsembleError("seed is mandatory")
    rng = _philox(_tag("tridiagonal"), beta, int(seed))
    diag = rng.standard_normal(n) * np.sqrt(2.0)
    dof = beta * np.arange(n - 1, 0, -1)
    off = np.sqrt(rng.chisquare(dof)) if n > 1 else np.empty(0)
    w = scipy.linalg.eigvalsh_tridiagonal(diag, off, lapack_driver="sterf")
    w = np.sort(w) / np.sqrt(beta * n)
    return w
