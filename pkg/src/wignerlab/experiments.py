"""Monte Carlo harness: reproducible, seeded desk-scale experiments probing
the limit theorems, with persisted manifest/raw/summary artifacts.

Determinism contract: replica r of experiment `tag` derives its seed as
SeedSequence((master_seed, crc32(tag), r)); replicas run embarrassingly
parallel and merge in replica-index order, so results are independent of the
worker count. Summaries accumulate with math.fsum in fixed order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import clt, dbm
from .ensemble import (
    get_law,
    make_profile,
    sample_matrix,
    tridiagonal_gaussian_spectrum,
)
from .spectral import (
    Spectrum,
    eigenvalues,
    log_char_poly,
    m_sc,
    normalized_fluct,
    scale_params,
    stieltjes,
)

EXPERIMENTS = (
    "logfield_clt",
    "eigenvalue_clt",
    "wegner",
    "local_law",
    "coupling",
    "advection",
    "smoothing",
    "variance_match",
)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n: int | list
    samples: int
    beta: int = 1
    profile: str = "goe"
    law: str = "gaussian"
    energies: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    t: float = 0.1
    gamma: float = 0.3
    seed: int | None = None
    out_dir: str | None = None
    threads: int = 0
    bandwidth: int | None = None
    sampler: str = "dense"
    criteria: dict = field(default_factory=dict)
    eta_ladder: list = field(default_factory=list)
    delta_ladder: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    edge_exponent: float | None = None  # local_law: adds E = 2 - n^{-x}
    f_scale: float = 4.0                # variance_match: bump amplitude

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {EXPERIMENTS}")
        if self.seed is None:
            raise ConfigError("seed is mandatory, never auto-generated")
        if self.samples < 1:
            raise ConfigError("replica count must be >= 1")
        ns = self.n if isinstance(self.n, list) else [self.n]
        if any(v < 8 for v in ns):
            raise ConfigError("n must be >= 8")
        if any(abs(e) > 2.0 for e in self.energies):
            raise ConfigError("energies must lie in [-2, 2]")
        if self.beta not in (1, 2):
            raise ConfigError("beta must be 1 or 2")
        if self.sampler not in ("dense", "tridiagonal"):
            raise ConfigError("sampler must be dense or tridiagonal")
        if self.sampler == "tridiagonal" and (
            self.profile not in ("goe", "gue") or self.law != "gaussian"
        ):
            raise ConfigError("tridiagonal sampler is only exact for gaussian goe/gue")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def replica_seed(master_seed: int, tag: str, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), zlib.crc32(tag.encode()), r])


def _spawn_integer(master_seed: int, tag: str, r: int) -> int:
    # a plain integer view of the derived sequence, for samplers that key on ints
    return int(replica_seed(master_seed, tag, r).generate_state(1, np.uint64)[0])


def draw_spectrum(cfg_profile: str, law: str, n: int, beta: int, sampler: str,
                  seed_int: int, bandwidth=None) -> np.ndarray:
    """One sorted spectrum per the configured sampling route."""
    if sampler == "tridiagonal":
        return tridiagonal_gaussian_spectrum(n, beta, seed_int)
    symmetry = "complex-hermitian" if beta == 2 else "real"
    kind = cfg_profile
    if beta == 2 and cfg_profile == "goe":
        kind = "gue"
    profile = make_profile(kind, n, bandwidth=bandwidth)
    sample = sample_matrix(profile, get_law(law), symmetry=symmetry, seed=seed_int)
    return eigenvalues(sample).lambdas


# ---------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    skewness: float
    kurtosis: float
    ks_normal: float
    ci95: tuple

    def as_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance,
                "skewness": self.skewness, "kurtosis": self.kurtosis,
                "ks_normal": self.ks_normal, "ci95": list(self.ci95)}


def _phi(x: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(x)


def ks_distance(samples) -> float:
    """Kolmogorov-Smirnov distance to the standard normal CDF."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    m = len(xs)
    if m == 0:
        raise ValueError("empty sample set")
    cdf = _phi(xs)
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


def ks_two_sample(a, b) -> float:
    xs = np.sort(np.asarray(a, float))
    ys = np.sort(np.asarray(b, float))
    allv = np.concatenate([xs, ys])
    fa = np.searchsorted(xs, allv, side="right") / len(xs)
    fb = np.searchsorted(ys, allv, side="right") / len(ys)
    return float(np.max(np.abs(fa - fb)))


def summarize(samples) -> SummaryStats:
    """Unbiased mean/variance, standardized skewness/kurtosis (excess),
    KS to the standard normal of the standardized sample, normal 95% CI."""
    xs = np.asarray(samples, dtype=np.float64)
    m = len(xs)
    if m == 0:
        raise ValueError("empty sample set")
    mean = math.fsum(xs) / m
    if m > 1:
        var = math.fsum((x - mean) ** 2 for x in xs) / (m - 1)
    else:
        var = 0.0
    sd = math.sqrt(var) if var > 0 else 0.0
    if sd > 0:
        zs = (xs - mean) / sd
        skew = math.fsum(zs ** 3) / m
        kurt = math.fsum(zs ** 4) / m - 3.0
        ks = ks_distance(zs)
    else:
        skew = kurt = 0.0
        ks = ks_distance(xs - mean) if m > 1 else 0.5
    half = 1.959963984540054 * sd / math.sqrt(m) if m > 0 else 0.0
    return SummaryStats(count=m, mean=mean, variance=var, skewness=skew,
                        kurtosis=kurt, ks_normal=ks, ci95=(mean - half, mean + half))


# ---------------------------------------------------------------------------
# run result + persistence


@dataclass
class RunResult:
    config: dict
    columns: list
    raw: np.ndarray              # (replicas, len(columns))
    summaries: dict              # column -> SummaryStats
    covariance: np.ndarray | None
    passes: dict                 # criterion name -> bool
    details: dict
    discarded: int
    wall_clock: float

    @property
    def passed(self) -> bool:
        return all(self.passes.values())

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.config, sort_keys=True).encode())
        h.update(self.raw.tobytes())
        return h.hexdigest()

    def raw_csv(self) -> str:
        lines = ["replica," + ",".join(self.columns)]
        for r, row in enumerate(self.raw):
            lines.append(str(r) + "," + ",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"

    def summary_doc(self) -> dict:
        return {
            "experiment": self.config.get("experiment"),
            "summaries": {k: v.as_dict() for k, v in self.summaries.items()},
            "covariance": None if self.covariance is None else self.covariance.tolist(),
            "passes": self.passes,
            "passed": self.passed,
            "details": self.details,
            "discarded": self.discarded,
            "wall_clock_s": self.wall_clock,
        }

    def persist(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        import wignerlab

        manifest = {
            "config": self.config,
            "content_hash": self.content_hash(),
            "versions": {"wignerlab": wignerlab.__version__,
                         "numpy": np.__version__,
                         "backend": wignerlab.BACKEND},
        }
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        with open(os.path.join(out_dir, "raw.csv"), "w") as fh:
            fh.write(self.raw_csv())
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(self.summary_doc(), fh, indent=2, sort_keys=True)


def _pool_map(fn, args, threads: int):
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads == 1 or len(args) == 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        chunk = max(1, len(args) // (8 * threads))
        return list(ex.map(fn, args, chunksize=chunk))


# ---------------------------------------------------------------------------
# replica workers (top level: picklable)


def _logfield_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
    out = []
    for n in ns:
        seed_int = _spawn_integer(cfg.seed, f"{cfg.experiment}:{n}", r)
        lam = draw_spectrum(cfg.profile, cfg.law, n, cfg.beta, cfg.sampler,
                            seed_int, cfg.bandwidth)
        spec = Spectrum(n=n, lambdas=lam, meta={})
        for e in cfg.energies:
            eta = math.exp(math.log(n) ** 0.25) * scale_params(e, n).ell
            ln = log_char_poly(spec, complex(e, eta))
            out.extend([ln.real, ln.imag])
        # edge statistics for the mean-shift regression: Re L at E=2 and the
        # fixed-offset control Re L(2.02) whose mean is n-independent
        l2 = float(np.sum(np.log(np.abs(2.0 - lam)))) - n * 0.5
        u_c = _log_potential_real(2.02)
        lc = float(np.sum(np.log(np.abs(2.02 - lam)))) - n * u_c
        out.extend([l2, lc])
    return tuple(out)


def _log_potential_real(e: float) -> float:
    from .spectral import log_potential

    return float(log_potential(e).real)


def _eigen_clt_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_int = _spawn_integer(cfg.seed, cfg.experiment, r)
    lam = draw_spectrum(cfg.profile, cfg.law, n, cfg.beta, cfg.sampler,
                        seed_int, cfg.bandwidth)
    spec = Spectrum(n=n, lambdas=lam, meta={})
    return tuple(normalized_fluct(spec, int(k), cfg.beta) for k in cfg.indices)


def _wegner_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_int = _spawn_integer(cfg.seed, cfg.experiment, r)
    lam = draw_spectrum(cfg.profile, cfg.law, n, cfg.beta, cfg.sampler,
                        seed_int, cfg.bandwidth)
    out = []
    for e in cfg.energies:
        ell = scale_params(e, n).ell
        for delta in cfg.delta_ladder:
            half = delta * ell
            count = int(np.sum((lam >= e - half) & (lam <= e + half)))
            out.append(float(count > 0))
    return tuple(out)


def _local_law_energies(cfg, n: int) -> list:
    es = list(cfg.energies)
    if cfg.edge_exponent is not None:
        es.append(2.0 - float(n) ** (-cfg.edge_exponent))
    return es


def _local_law_ladder(cfg, n: int) -> list:
    return cfg.eta_ladder or [2.0 ** j / n for j in range(0, int(math.log2(n)) - 1)]


def _local_law_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
    out = []
    for n in ns:
        seed_int = _spawn_integer(cfg.seed, f"{cfg.experiment}:{n}", r)
        lam = draw_spectrum(cfg.profile, cfg.law, n, cfg.beta, cfg.sampler,
                            seed_int, cfg.bandwidth)
        spec = Spectrum(n=n, lambdas=lam, meta={})
        for e in _local_law_energies(cfg, n):
            for eta in _local_law_ladder(cfg, n):
                if eta < 1.0 / n:
                    raise ConfigError("eta below 1/n rejected")
                z = complex(e, eta)
                diff = stieltjes(spec, z) - m_sc(z)
                out.append((n * eta) ** 2 * abs(diff) ** 2)
    return tuple(out)


def _coupling_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_a = _spawn_integer(cfg.seed, cfg.experiment + ":wig", r)
    seed_b = _spawn_integer(cfg.seed, cfg.experiment + ":goe", r)
    seed_path = _spawn_integer(cfg.seed, cfg.experiment + ":path", r)
    prof = make_profile("uniform", n)
    lam = eigenvalues(sample_matrix(prof, get_law(cfg.law), seed=seed_a)).lambdas
    mu = tridiagonal_gaussian_spectrum(n, cfg.beta, seed_b)
    pa, pb = dbm.run_coupled(lam, mu, cfg.beta, cfg.t, seed=seed_path,
                             snapshots=[cfg.t])
    dist = float(np.max(np.abs(pa.particles[-1] - pb.particles[-1])))
    return (n * cfg.t * dist,)


def _advection_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_a = _spawn_integer(cfg.seed, cfg.experiment + ":wig", r)
    seed_b = _spawn_integer(cfg.seed, cfg.experiment + ":goe", r)
    seed_path = _spawn_integer(cfg.seed, cfg.experiment + ":path", r)
    prof = make_profile("uniform", n)
    lam = eigenvalues(sample_matrix(prof, get_law(cfg.law), seed=seed_a)).lambdas
    mu = tridiagonal_gaussian_spectrum(n, cfg.beta, seed_b)
    path = dbm.run_dbm(lam, cfg.beta, cfg.t, seed=seed_path, snapshots=[cfg.t])
    kern = dbm.evolve_kernel(mu - lam, path)
    from .spectral import characteristic

    resid = []
    for z in dbm.sgrid(n):
        zt = characteristic(z, cfg.t)
        f_t = dbm.observable_f(path, kern, z, cfg.t)
        f_0 = complex(np.sum((mu - lam) / (lam - zt)))
        resid.append(abs(f_t - f_0) / (1.0 + abs(f_0)))
    return (float(np.median(resid)),)


def _smoothing_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_int = _spawn_integer(cfg.seed, cfg.experiment, r)
    lam = draw_spectrum(cfg.profile, cfg.law, n, cfg.beta, cfg.sampler,
                        seed_int, cfg.bandwidth)
    spec = Spectrum(n=n, lambdas=lam, meta={})
    e = cfg.energies[0] if cfg.energies else 0.0
    if np.min(np.abs(lam - e)) < 1e-12:
        return (float("nan"),)  # discarded: eigenvalue collision on the real axis
    eta = math.exp(math.log(n) ** 0.25) * scale_params(e, n).ell
    lz = log_char_poly(spec, complex(e, eta))
    le = log_char_poly(spec, complex(e, 0.0))
    return (abs(lz - le) / math.sqrt(math.log(n)),)


def _variance_match_worker(args) -> tuple:
    (cfg_doc, r) = args
    cfg = ExperimentConfig.from_dict(cfg_doc)
    n = cfg.n
    seed_int = _spawn_integer(cfg.seed, cfg.experiment, r)
    prof = make_profile(cfg.profile, n, bandwidth=cfg.bandwidth)
    sample = sample_matrix(prof, get_law(cfg.law), seed=seed_int)
    lam = eigenvalues(sample).lambdas
    tr_h = float(np.sum(lam))
    tr_h2 = float(np.sum(lam ** 2))
    # mesoscopic bump at scale n^{-gamma} centered at the first energy
    e0 = cfg.energies[0] if cfg.energies else 0.0
    width = float(n) ** (-cfg.gamma)
    f = clt.bump_test_function(e0, width)
    tr_f = cfg.f_scale * float(np.sum(f.f(lam)))
    return (tr_h, tr_h2, tr_f)


_WORKERS = {
    "logfield_clt": _logfield_worker,
    "eigenvalue_clt": _eigen_clt_worker,
    "wegner": _wegner_worker,
    "local_law": _local_law_worker,
    "coupling": _coupling_worker,
    "advection": _advection_worker,
    "smoothing": _smoothing_worker,
    "variance_match": _variance_match_worker,
}


# ---------------------------------------------------------------------------
# experiment drivers


def _collect(cfg: ExperimentConfig, columns: list) -> tuple[np.ndarray, float]:
    t0 = time.time()
    worker = _WORKERS[cfg.experiment]
    args = [(cfg.to_dict(), r) for r in range(cfg.samples)]
    rows = _pool_map(worker, args, cfg.threads)
    raw = np.asarray(rows, dtype=np.float64)
    if raw.shape != (cfg.samples, len(columns)):
        raise RuntimeError(
            f"worker returned shape {raw.shape}, expected ({cfg.samples}, {len(columns)})"
        )
    return raw, time.time() - t0


def _band(cfg: ExperimentConfig, name: str, default):
    return cfg.criteria.get(name, default)


def run_logfield_clt(cfg: ExperimentConfig) -> RunResult:
    """Centered log-characteristic-polynomial statistics at z = E + i eta(E),
    eta(E) = e^{(log n)^{1/4}} l(E), plus edge statistics at E = 2."""
    ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
    columns = []
    for n in ns:
        for i, _ in enumerate(cfg.energies):
            columns += [f"re_L_n{n}_E{i}", f"im_L_n{n}_E{i}"]
        columns += [f"re_L_edge_n{n}", f"re_L_ctrl_n{n}"]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    passes, details = {}, {}
    if cfg.energies:
        # normalized variance vs the exponent prediction at the first energy
        exps = clt.covariance_exponents(cfg.energies, ns[-1], cfg.beta)
        col = f"re_L_n{ns[-1]}_E0"
        norm_var = summaries[col].variance * cfg.beta / math.log(ns[-1])
        a11 = exps.a[0, 0]
        lo, hi = _band(cfg, "re_var_band", (0.8, 1.25))
        passes["re_variance_vs_a11"] = bool(lo * a11 <= norm_var <= hi * a11)
        details["re_norm_variance"] = norm_var
        details["a11"] = a11
        if len(cfg.energies) >= 2:
            i0 = columns.index(f"re_L_n{ns[-1]}_E0")
            i1 = columns.index(f"re_L_n{ns[-1]}_E1")
            corr = np.corrcoef(raw[:, i0], raw[:, i1])[0, 1]
            pred = exps.a[0, 1] / math.sqrt(exps.a[0, 0] * exps.a[1, 1])
            tol = _band(cfg, "corr_tol", 0.2)
            passes["re_cross_correlation"] = bool(abs(corr - pred) <= tol)
            details["re_correlation"] = float(corr)
            details["re_correlation_pred"] = float(pred)
    if len(ns) >= 2:
        details.update(_ladder_details(cfg, ns, columns, raw))
    cov = np.cov(raw.T) if raw.shape[1] > 1 else None
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=cov, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


def _ols_slope(xs, ys):
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    xc = xs - xs.mean()
    return float(np.sum(xc * ys) / np.sum(xc ** 2))


def _ladder_details(cfg, ns, columns, raw) -> dict:
    """Slope diagnostics across the n-ladder (criteria 4 and 5)."""
    logn = [math.log(n) for n in ns]
    out = {}
    if cfg.energies:
        vars_ = [summarize(raw[:, columns.index(f"re_L_n{n}_E0")]).variance
                 for n in ns]
        out["var_slope"] = _ols_slope(logn, vars_)
        # prediction: (1/beta) d log(1/eta(n, E0)) / d log n across the ladder
        e0 = cfg.energies[0]
        log_inv_eta = [-(math.log(n) ** 0.25
                         + math.log(scale_params(e0, n).ell)) for n in ns]
        out["var_slope_pred"] = _ols_slope(logn, log_inv_eta) / cfg.beta
        out["var_points"] = vars_
    # edge mean shift with the fixed-offset control variate
    edge_cols = [columns.index(f"re_L_edge_n{n}") for n in ns]
    ctrl_cols = [columns.index(f"re_L_ctrl_n{n}") for n in ns]
    edge = raw[:, edge_cols]
    ctrl = raw[:, ctrl_cols]
    ctrl_centered = ctrl - ctrl.mean()
    b = float(np.sum((edge - edge.mean(axis=0)) * ctrl_centered)
              / np.sum(ctrl_centered ** 2))
    adj_means = edge.mean(axis=0) - b * (ctrl.mean(axis=0) - ctrl.mean())
    out["edge_means"] = edge.mean(axis=0).tolist()
    out["edge_means_adjusted"] = adj_means.tolist()
    out["edge_slope"] = _ols_slope(logn, adj_means)
    out["edge_slope_raw"] = _ols_slope(logn, edge.mean(axis=0))
    out["edge_slope_pred"] = clt.delta_shift(2.0, 1000, cfg.beta) / math.log(1000)
    return out


def run_eigenvalue_clt(cfg: ExperimentConfig) -> RunResult:
    if not cfg.indices:
        raise ConfigError("eigenvalue_clt requires indices")
    n = cfg.n
    alpha, delta = 0.05, 0.5
    for k in cfg.indices:
        bulk = alpha * n <= k <= (1 - alpha) * n
        edge = 1 <= k <= n ** delta or n - n ** delta <= k <= n
        if not (bulk or edge):
            raise ConfigError(f"index {k} outside the bulk/edge ranges")
    columns = [f"Y_k{k}" for k in cfg.indices]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    exps = clt.covariance_exponents([], n, cfg.beta, indices=cfg.indices)
    passes, details = {}, {"c_kk": np.diag(exps.c).tolist()}
    for i, k in enumerate(cfg.indices):
        s = summaries[columns[i]]
        ckk = exps.c[i, i]
        if alpha * n <= k <= (1 - alpha) * n:
            lo, hi = _band(cfg, "bulk_var_band", (0.7, 1.3))
            passes[f"bulk_variance_k{k}"] = bool(lo <= s.variance <= hi)
            ks_max = _band(cfg, "bulk_ks_max", 0.08)
            passes[f"bulk_ks_k{k}"] = bool(s.ks_normal < ks_max)
        else:
            lo, hi = _band(cfg, "edge_var_ratio_band", (0.45, 0.95))
            passes[f"edge_variance_k{k}"] = bool(lo * ckk <= s.variance <= hi * ckk)
    cov = np.cov(raw.T) if len(columns) > 1 else None
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=cov, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


def run_wegner(cfg: ExperimentConfig) -> RunResult:
    if not cfg.energies:
        raise ConfigError("wegner requires energies")
    columns = [f"hit_E{i}_d{d}" for i, _ in enumerate(cfg.energies)
               for d in cfg.delta_ladder]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    passes, details = {}, {}
    ratio_lo, ratio_hi = _band(cfg, "halving_ratio_band", (0.3, 0.7))
    for i, e in enumerate(cfg.energies):
        probs = [summaries[f"hit_E{i}_d{d}"].mean for d in cfg.delta_ladder]
        details[f"P_E{i}"] = probs
        details[f"ratio_to_width_E{i}"] = [
            p / (2.0 * d) for p, d in zip(probs, cfg.delta_ladder)
        ]
        mono = all(probs[j] >= probs[j + 1] for j in range(len(probs) - 1))
        passes[f"monotone_E{i}"] = bool(mono)
        for j in range(len(cfg.delta_ladder) - 1):
            if abs(cfg.delta_ladder[j + 1] / cfg.delta_ladder[j] - 0.5) < 1e-9:
                ratio = probs[j + 1] / probs[j] if probs[j] > 0 else float("nan")
                passes[f"halving_E{i}_{j}"] = bool(ratio_lo <= ratio <= ratio_hi)
                details[f"halving_ratio_E{i}_{j}"] = ratio
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


def run_local_law(cfg: ExperimentConfig) -> RunResult:
    ns = cfg.n if isinstance(cfg.n, list) else [cfg.n]
    columns = []
    n_energies = len(_local_law_energies(cfg, ns[0]))
    for n in ns:
        for i in range(n_energies):
            columns += [f"stat_n{n}_E{i}_eta{j}"
                        for j in range(len(_local_law_ladder(cfg, n)))]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    passes, details = {}, {}
    ratio_max = _band(cfg, "doubling_ratio_max", 1.5)
    for i in range(n_energies):
        per_n = []
        for n in ns:
            cols = [c for c in columns if c.startswith(f"stat_n{n}_E{i}_")]
            per_n.append(max(summaries[c].mean for c in cols))
        details[f"sup_stat_E{i}"] = per_n
        for j in range(len(ns) - 1):
            ratio = per_n[j + 1] / per_n[j]
            passes[f"doubling_E{i}_{j}"] = bool(ratio <= ratio_max)
            details[f"doubling_ratio_E{i}_{j}"] = ratio
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


def run_coupling(cfg: ExperimentConfig) -> RunResult:
    columns = ["scaled_distance"]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    thresh = _band(cfg, "distance_threshold", float(cfg.n) ** 0.2)
    frac_min = _band(cfg, "pass_fraction", 0.9)
    frac = float(np.mean(raw[:, 0] <= thresh))
    passes = {"coupling_distance": bool(frac >= frac_min)}
    details = {"fraction_within": frac, "threshold": thresh}
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


def run_advection(cfg: ExperimentConfig) -> RunResult:
    columns = ["median_rel_residual"]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    max_med = _band(cfg, "median_max", 0.1)
    med = float(np.median(raw[:, 0]))
    passes = {"advection_residual": bool(med <= max_med)}
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details={"median": med}, discarded=0, wall_clock=wall)


def run_smoothing(cfg: ExperimentConfig) -> RunResult:
    columns = ["smoothing_stat"]
    raw, wall = _collect(cfg, columns)
    good = raw[~np.isnan(raw[:, 0])]
    discarded = int(len(raw) - len(good))
    summaries = {"smoothing_stat": summarize(good[:, 0])}
    max_med = _band(cfg, "median_max", 0.5)
    med = float(np.median(good[:, 0]))
    passes = {"smoothing_median": bool(med <= max_med)}
    details = {"median": med, "discard_rate": discarded / len(raw)}
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details=details, discarded=discarded, wall_clock=wall)


def run_variance_match(cfg: ExperimentConfig) -> RunResult:
    columns = ["tr_h", "tr_h2", "tr_f"]
    raw, wall = _collect(cfg, columns)
    summaries = {c: summarize(raw[:, i]) for i, c in enumerate(columns)}
    prof = make_profile(cfg.profile, cfg.n, bandwidth=cfg.bandwidth)
    target = float(np.trace(prof.sigma2))
    s = summaries["tr_h"]
    se = s.variance * math.sqrt(2.0 / (s.count - 1))
    passes = {"tr_h_variance_identity":
              bool(abs(s.variance - target) <= 3.0 * se)}
    details = {"tr_h_variance": s.variance, "target": target, "se": se}
    # characteristic-function curve for the mesoscopic bump (scaled by f_scale)
    e0 = cfg.energies[0] if cfg.energies else 0.0
    f = clt.bump_test_function(e0, float(cfg.n) ** (-cfg.gamma))
    vb = clt.variance_gw(f, prof, cfg.law, beta=cfg.beta)
    v_pred = cfg.f_scale ** 2 * vb.total
    lams = np.linspace(0.0, 2.0, 9)
    pred = clt.char_curve(v_pred, lams)
    centered = raw[:, 2] - np.mean(raw[:, 2])
    emp = np.array([float(np.mean(np.cos(l * centered))) for l in lams])
    char_tol = _band(cfg, "char_tol", 0.1)
    passes["char_curve"] = bool(np.max(np.abs(emp - pred)) <= char_tol)
    details["char_max_dev"] = float(np.max(np.abs(emp - pred)))
    details["variance_breakdown"] = {
        "main": vb.main, "trace_s": vb.trace_s_term, "quartic": vb.quartic_term,
        "band": vb.epsilon_band, "classical_total": vb.classical_total,
    }
    details["tr_f_mc_variance"] = summaries["tr_f"].variance
    return RunResult(config=cfg.to_dict(), columns=columns, raw=raw,
                     summaries=summaries, covariance=None, passes=passes,
                     details=details, discarded=0, wall_clock=wall)


_RUNNERS = {
    "logfield_clt": run_logfield_clt,
    "eigenvalue_clt": run_eigenvalue_clt,
    "wegner": run_wegner,
    "local_law": run_local_law,
    "coupling": run_coupling,
    "advection": run_advection,
    "smoothing": run_smoothing,
    "variance_match": run_variance_match,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    result = _RUNNERS[cfg.experiment](cfg)
    if cfg.out_dir:
        result.persist(cfg.out_dir)
    return result
