"""wignerlab: generalized Wigner ensembles, Dyson Brownian Motion, quadratic
vector equations, and Monte Carlo checks of log-correlated eigenvalue
statistics."""

from . import clt, dbm, ensemble, experiments, qve, spectral
from .flowcore import BACKEND

__version__ = "0.1.0"

__all__ = ["clt", "dbm", "ensemble", "experiments", "qve", "spectral", "BACKEND"]
