"""
Linear conditional-quantile regression.

Default solver: iteratively reweighted least squares on an epsilon-smoothed
check loss (epsilon annealed geometrically from 1e-3 to 1e-10 of the
response scale, at most 200 iterations), then an exact polish. The polish
starts from the basic solution interpolating the p+1 smallest IRLS residuals
and walks basis exchanges, each one a one-dimensional weighted-quantile line
search along an edge, until no exchange lowers the check loss. The result is
a vertex optimum of the underlying linear program.

``solver="highs"`` solves the same linear program with scipy's HiGHS backend.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..errors import DomainError, InsufficientData, SingularDesign

logger = logging.getLogger(__name__)

IRLS_MAX_ITER = 200
EPS_START = 1e-3
EPS_END = 1e-10
MAX_PIVOTS = 10_000


@dataclass(frozen=True)
class QuantileFit:
    tau: float
    coefficients: np.ndarray   # intercept first
    residuals: np.ndarray
    check_loss: float
    abs_residual_sum: float
    pivots: int = 0


def check_loss(u: np.ndarray, tau: float) -> float:
    """Sum of rho_tau(u) = u * (tau - 1{u < 0})."""
    u = np.asarray(u, dtype=float)
    return float(np.sum(u * (tau - (u < 0))))


def _design(X: np.ndarray, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise DomainError(f"Design has {X.shape[0]} rows, response has {n}")
    return np.column_stack([np.ones(n), X]) if X.shape[1] else np.ones((n, 1))


def _irls(A: np.ndarray, y: np.ndarray, tau: float, scale: float) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    asym = np.array([1.0 - tau, tau])
    decay = (EPS_END / EPS_START) ** (1.0 / (IRLS_MAX_ITER - 1))
    eps = EPS_START * scale
    for _ in range(IRLS_MAX_ITER):
        r = y - A @ beta
        w = asym[(r >= 0).astype(int)] / np.maximum(np.abs(r), eps)
        sw = np.sqrt(w)
        new_beta, *_ = np.linalg.lstsq(A * sw[:, None], y * sw, rcond=None)
        converged = np.max(np.abs(new_beta - beta)) <= 1e-15 * (1.0 + np.max(np.abs(beta)))
        beta = new_beta
        if converged and eps <= EPS_END * scale * 1.0001:
            break
        eps = max(eps * decay, EPS_END * scale)
    return beta


def _initial_basis(A: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    k = A.shape[1]
    basis = []
    for i in np.argsort(np.abs(residuals), kind="mergesort"):
        trial = basis + [int(i)]
        if np.linalg.matrix_rank(A[trial]) == len(trial):
            basis = trial
            if len(basis) == k:
                break
    return np.array(basis)


def _line_search(r: np.ndarray, a: np.ndarray, tau: float) -> Tuple[float, int]:
    """Minimise sum rho_tau(r - t a) over t; returns (t*, index of the breakpoint)."""
    active = np.flatnonzero(a != 0.0)
    t = r[active] / a[active]
    weight = np.abs(a[active])
    order = np.lexsort((active, t))
    slope = -(tau * weight[a[active] > 0].sum() + (1.0 - tau) * weight[a[active] < 0].sum())
    cum = slope + np.cumsum(weight[order])
    stop = int(np.searchsorted(cum >= 0.0, True))
    pick = order[min(stop, len(order) - 1)]
    return float(t[pick]), int(active[pick])


def _polish(A: np.ndarray, y: np.ndarray, tau: float, start: np.ndarray) -> Tuple[np.ndarray, int]:
    basis = _initial_basis(A, y - A @ start)
    beta = np.linalg.solve(A[basis], y[basis])
    loss = check_loss(y - A @ beta, tau)
    pivots = 0
    improved = True
    while improved and pivots < MAX_PIVOTS:
        improved = False
        inv = np.linalg.inv(A[basis])
        for q in range(len(basis)):
            d = inv[:, q]
            r = y - A @ beta
            step, entering = _line_search(r, A @ d, tau)
            if step == 0.0 or entering in basis:
                continue
            candidate = beta + step * d
            cand_loss = check_loss(y - A @ candidate, tau)
            if cand_loss < loss - 1e-14 * (1.0 + loss):
                basis = basis.copy()
                basis[q] = entering
                beta = np.linalg.solve(A[basis], y[basis])
                loss = check_loss(y - A @ beta, tau)
                pivots += 1
                improved = True
                break
    if pivots >= MAX_PIVOTS:
        logger.warning(f"Quantile polish hit the pivot cap ({MAX_PIVOTS})")
    return beta, pivots


def _highs(A: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    n, k = A.shape
    c = np.concatenate([np.zeros(k), tau * np.ones(n), (1.0 - tau) * np.ones(n)])
    A_eq = sparse.hstack([sparse.csr_matrix(A), sparse.identity(n), -sparse.identity(n)], format="csr")
    bounds = [(None, None)] * k + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if not res.success:
        raise SingularDesign(f"HiGHS failed on quantile regression: {res.message}")
    return res.x[:k]


def qr_fit(X: np.ndarray, y: np.ndarray, tau: float, solver: str = "irls") -> QuantileFit:
    """Fit ``Q_tau(y | X)`` with an intercept always prepended."""
    y = np.asarray(y, dtype=float)
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    n = len(y)
    A = _design(X, n)
    k = A.shape[1]
    if n <= k:
        raise InsufficientData(f"Quantile regression needs n > p+1 (n={n}, p+1={k})")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
        raise DomainError("Quantile regression inputs contain non-finite values")
    if np.linalg.matrix_rank(A) < k:
        raise SingularDesign("Quantile regression design is rank deficient")

    pivots = 0
    if solver == "irls":
        spread = np.mean(np.abs(y - np.median(y)))
        scale = spread if spread > 0 else max(np.max(np.abs(y)), 1.0)
        start = _irls(A, y, tau, scale)
        beta, pivots = _polish(A, y, tau, start)
    elif solver == "highs":
        beta = _highs(A, y, tau)
    else:
        raise DomainError(f"Unknown quantile solver '{solver}'")

    residuals = y - A @ beta
    return QuantileFit(
        tau=tau,
        coefficients=beta,
        residuals=residuals,
        check_loss=check_loss(residuals, tau),
        abs_residual_sum=float(np.sum(np.abs(residuals))),
        pivots=pivots,
    )
