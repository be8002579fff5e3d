"""
Scaling-curve families fitted to (gallery size, rate) observations, used to
extrapolate where identification would fall to zero or to chance.
"""
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.optimize import bisect

from gazeauth.core.base import CurveModel
from gazeauth.core.errors import DataError, NumericalError
from gazeauth.utils.hashing import stable_hash

logger = logging.getLogger(__name__)

ROOT_SEARCH_MAX = 1e9
_POWER_STARTS = (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0)


def _linear_lstsq(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise NumericalError("degenerate design matrix: the observations cannot identify the curve")
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coeffs


class _TransformedLinear(CurveModel):
    """y = a * g(x) + b, solved by linear least squares on the transformed abscissa."""
    n_params = 2

    def transform(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        return coeffs[0] * self.transform(np.asarray(x, dtype=np.float64)) + coeffs[1]

    def fit(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g = self.transform(x)
        return _linear_lstsq(np.column_stack([g, np.ones_like(g)]), y)

    def hash(self) -> str:
        return stable_hash({"family": self.name})


class SqrtCurve(_TransformedLinear):
    name = "sqrt"

    def transform(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(x)

    def closed_form_root(self, coeffs: np.ndarray) -> Optional[float]:
        a, b = coeffs
        return float((-b / a) ** 2) if a < 0 < b else None


class LogCurve(_TransformedLinear):
    name = "log"

    def transform(self, x: np.ndarray) -> np.ndarray:
        return np.log(x)

    def closed_form_root(self, coeffs: np.ndarray) -> Optional[float]:
        a, b = coeffs
        return float(np.exp(-b / a)) if a < 0 else None


class LinearCurve(_TransformedLinear):
    """With `tail`, only the last `tail` observations (largest x) are fitted."""
    name = "linear"

    def __init__(self, tail: Optional[int] = None):
        if tail is not None and tail < 3:
            raise DataError("a tail fit needs at least 3 observations")
        self.tail = tail

    def transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def fit(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.tail is not None:
            order = np.argsort(x, kind="stable")[-self.tail:]
            x, y = x[order], y[order]
        return super().fit(x, y)

    def closed_form_root(self, coeffs: np.ndarray) -> Optional[float]:
        a, b = coeffs
        return float(-b / a) if a < 0 else None

    def hash(self) -> str:
        return stable_hash({"family": self.name, "tail": self.tail})


class PowerCurve(CurveModel):
    """y = a * x^b + c by damped Gauss-Newton, best of several exponent starts."""
    name = "power"
    n_params = 3

    def __init__(self, max_iter: int = 200, tol: float = 1e-12):
        self.max_iter = max_iter
        self.tol = tol

    def evaluate(self, x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        a, b, c = coeffs
        return a * np.power(np.asarray(x, dtype=np.float64), b) + c

    def _gauss_newton(self, x: np.ndarray, y: np.ndarray, b0: float) -> Optional[np.ndarray]:
        xb = np.power(x, b0)
        a, c = _linear_lstsq(np.column_stack([xb, np.ones_like(xb)]), y)
        theta = np.array([a, b0, c])
        sse = float(np.sum((self.evaluate(x, theta) - y) ** 2))
        log_x = np.log(x)
        for _ in range(self.max_iter):
            xb = np.power(x, theta[1])
            r = y - self.evaluate(x, theta)
            J = np.column_stack([xb, theta[0] * xb * log_x, np.ones_like(x)])
            step, *_ = np.linalg.lstsq(J, r, rcond=None)
            t = 1.0
            while t > 1e-10:
                cand = theta + t * step
                cand_sse = float(np.sum((self.evaluate(x, cand) - y) ** 2))
                if np.isfinite(cand_sse) and cand_sse <= sse - 1e-4 * t * float(step @ (J.T @ r)):
                    break
                t *= 0.5
            else:
                break
            improvement = sse - cand_sse
            theta, sse = cand, cand_sse
            if improvement <= self.tol * max(sse, 1e-300):
                break
        return theta if np.all(np.isfinite(theta)) else None

    def fit(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        best, best_sse = None, np.inf
        for b0 in _POWER_STARTS:
            try:
                theta = self._gauss_newton(x, y, b0)
            except NumericalError:
                continue
            if theta is None:
                continue
            sse = float(np.sum((self.evaluate(x, theta) - y) ** 2))
            if sse < best_sse:
                best, best_sse = theta, sse
        if best is None:
            raise NumericalError("power-law fit failed from every starting exponent")
        return best

    def closed_form_root(self, coeffs: np.ndarray) -> Optional[float]:
        return None

    def hash(self) -> str:
        return stable_hash({"family": self.name, "max_iter": self.max_iter, "tol": self.tol})


# ---------- Fitting ----------
class CurveFit(BaseModel):
    family: str
    coefficients: List[float]
    r2_adj: float
    root: Optional[float]
    chance_crossing: Optional[float]
    n_observations: int


def adjusted_r2(y: np.ndarray, fitted: np.ndarray, n_params: int) -> float:
    """Regressors exclude the intercept: p = n_params - 1."""
    n = y.size
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise NumericalError("R^2 is undefined for constant observations")
    p = n_params - 1
    return 1.0 - (ss_res / ss_tot) * (n - 1) / (n - p - 1)


def first_crossing(f: Callable[[float], float], lo: float, hi: float = ROOT_SEARCH_MAX) -> Optional[float]:
    """Smallest x >= lo with f(x) <= 0 for a function with at most one sign change on [lo, hi]."""
    f_lo = f(lo)
    if f_lo <= 0:
        return lo
    if not f(hi) <= 0:
        return None
    return float(bisect(f, lo, hi, xtol=1e-9, rtol=1e-12, maxiter=500))


def fit_scaling_curve(x: Sequence[float], y: Sequence[float], model: CurveModel) -> CurveFit:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("observations must be two equal-length 1-d sequences")
    if np.any(x <= 0):
        raise DataError("gallery sizes must be positive")
    n_used = x.size if not isinstance(model, LinearCurve) or model.tail is None else min(model.tail, x.size)
    if n_used < model.n_params + 1:
        raise DataError(f"{model.name} fit needs at least {model.n_params + 1} observations, got {n_used}")

    coeffs = model.fit(x, y)
    if isinstance(model, LinearCurve) and model.tail is not None:
        order = np.argsort(x, kind="stable")[-model.tail:]
        r2 = adjusted_r2(y[order], model.evaluate(x[order], coeffs), model.n_params)
    else:
        r2 = adjusted_r2(y, model.evaluate(x, coeffs), model.n_params)

    x_min = float(x.min())

    def value(v: float) -> float:
        return float(model.evaluate(np.array([v]), coeffs)[0])

    if value(x_min) <= 0:
        root: Optional[float] = x_min
    else:
        closed = model.closed_form_root(coeffs)
        root = closed if closed is not None else first_crossing(value, x_min)
    chance = first_crossing(lambda v: value(v) - 100.0 / v, x_min)
    logger.info("%s fit: coefficients %s, adjusted R^2 %.6f, root %s", model.name, coeffs.tolist(), r2, root)
    return CurveFit(
        family=model.name,
        coefficients=[float(c) for c in coeffs],
        r2_adj=r2,
        root=root,
        chance_crossing=chance,
        n_observations=n_used,
    )
