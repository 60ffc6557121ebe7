"""Maximum-likelihood fit of the generalized Pareto distribution.

For fixed ``tau = xi / beta`` the likelihood is maximized in closed form by
``xi(tau) = mean(log1p(tau * x))`` and ``beta = xi / tau``, leaving a
one-dimensional profile that is scanned on a grid and refined by
golden-section search.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import XI_ZERO_TOL, GpdParams, gpd_residual_cv
from .empirics import _as_sample
from .errors import BoundarySolutionWarning, InvalidParameterError, OutOfSupportError

BRACKET_EPS = 1e-6
UPPER_TAU = 20.0
TAU_TOL = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def gpd_loglik(sample, params: GpdParams) -> float:
    sample = _as_sample(sample)
    x = sample.values
    n = sample.n
    xi, beta = params.xi, params.beta
    if abs(xi) < XI_ZERO_TOL:
        return float(-n * math.log(beta) - x.sum() / beta)
    z = xi * x / beta
    if xi < 0 and not np.all(z > -1.0):
        raise OutOfSupportError(
            f"data exceed the upper endpoint beta/|xi| = {beta / abs(xi):g} of the GPD"
        )
    return float(-n * math.log(beta) - (1.0 + 1.0 / xi) * np.log1p(z).sum())


@dataclass
class GpdFit:
    xi: float
    beta: float
    loglik: float
    implied_cv: Optional[float]
    n: int
    tau: float
    boundary: bool = False
    notes: list = field(default_factory=list)

    @property
    def tail_power(self) -> float:
        """``1 / xi``, the polynomial decay rate of the tail (inf when xi = 0)."""
        return math.inf if self.xi == 0 else 1.0 / self.xi

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "beta": self.beta,
            "tail_power": None if self.xi == 0 else 1.0 / self.xi,
            "implied_cv": self.implied_cv,
            "loglik": self.loglik,
            "n": self.n,
            "boundary": self.boundary,
            "notes": list(self.notes),
        }


def _profile(taus: np.ndarray, x: np.ndarray, xbar: float):
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    xi = np.log1p(np.outer(taus, x)).mean(axis=1)
    zero = taus == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(zero, xbar, xi / np.where(zero, 1.0, taus))
    n = x.size
    ll = -n * np.log(beta) - n * (1.0 + xi)
    return np.where(zero, 0.0, xi), beta, ll


def fit_gpd_ml(sample) -> GpdFit:
    """ML estimates of (xi, beta) for a positive sample of at least 10 values."""
    sample = _as_sample(sample)
    if sample.n < 10:
        raise InvalidParameterError("GPD fit needs at least 10 observations")
    x = sample.values
    xbar = float(x.mean())
    xmax = float(x[-1])
    med = float(np.median(x))
    lo = -(1.0 - BRACKET_EPS) / xmax
    hi = UPPER_TAU / med

    grid = np.unique(np.concatenate([
        lo * np.linspace(1.0, 0.0, 121),
        np.geomspace(1e-6 / med, hi, 300),
    ]))
    _, _, ll = _profile(grid, x, xbar)
    i = int(np.nanargmax(ll))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]

    def f(t):
        return float(_profile(t, x, xbar)[2][0])

    tol = TAU_TOL / med
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best_tau = grid[i]
    best_ll = float(ll[i])
    mid = 0.5 * (a + b)
    if f(mid) > best_ll:
        best_tau, best_ll = mid, f(mid)

    xi_arr, beta_arr, _ = _profile(best_tau, x, xbar)
    xi, beta = float(xi_arr[0]), float(beta_arr[0])
    notes = []
    boundary = bool(i in (0, grid.size - 1)) and bool(
        abs(best_tau - grid[0]) <= tol or abs(best_tau - grid[-1]) <= tol
    )
    if boundary:
        notes.append("maximum on the boundary of the search bracket")
        warnings.warn(
            f"GPD likelihood maximized at the bracket boundary (tau={best_tau:g}, xi={xi:g})",
            BoundarySolutionWarning,
            stacklevel=2,
        )
    if xi > 1:
        notes.append("xi > 1: non-regular region for maximum likelihood")
    implied = gpd_residual_cv(xi) if xi < 0.5 else None
    return GpdFit(xi, beta, best_ll, implied, sample.n, float(best_tau), boundary, notes)
