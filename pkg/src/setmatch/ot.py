"""Optimal-transport numerics.

The transportation problem between an image's crop set and a class's
descriptor set is solved approximately by log-domain Sinkhorn iteration and
exactly (for testing, at small sizes) by LCM expansion to an assignment
problem.  Returned plans are rounded onto the transport polytope so marginal
invariants hold to 1e-9.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .data import DescriptorSet, FeatureSet
from .errors import (
    Degenerate,
    DimMismatch,
    NonFiniteCost,
    NonUniformMarginals,
    TooLarge,
)

MAX_ORACLE_CELLS = 64

CONVERGED = "converged"
MAX_ITERS = "max_iters"
EXACT = "exact"


@dataclass(frozen=True)
class SinkhornConfig:
    """Entropic-regularization parameters for the approximate solver."""

    epsilon: float = 0.05
    max_iters: int = 200
    marginal_tol: float = 1e-6

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.marginal_tol <= 0:
            raise ValueError("marginal_tol must be positive")


@dataclass(frozen=True)
class Marginals:
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if mu.ndim != 1 or nu.ndim != 1 or mu.size == 0 or nu.size == 0:
            raise Degenerate("marginals must be non-empty 1-D vectors")
        if np.any(mu <= 0) or np.any(nu <= 0):
            raise ValueError("marginal entries must be strictly positive")
        if abs(mu.sum() - 1.0) > 1e-9 or abs(nu.sum() - 1.0) > 1e-9:
            raise ValueError("marginals must each sum to 1 within 1e-9")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def uniform(cls, m: int, n: int) -> "Marginals":
        if m < 1 or n < 1:
            raise Degenerate("uniform marginals need m >= 1 and n >= 1")
        return cls(np.full(m, 1.0 / m), np.full(n, 1.0 / n))


@dataclass(frozen=True)
class TransportPlan:
    matrix: np.ndarray
    achieved_cost: float
    status: str = CONVERGED
    marginal_violation: float = 0.0


def _check_cost(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] == 0 or c.shape[1] == 0:
        raise Degenerate("cost matrix must be non-empty and 2-D")
    if not np.all(np.isfinite(c)):
        raise NonFiniteCost("cost matrix has non-finite entries")
    return c


def cosine_cost(image_set: FeatureSet, descriptor_set: DescriptorSet) -> np.ndarray:
    """Grounding cost C[m][n] = 1 - <v_m, d_n> between unit vectors."""
    if image_set.dim != descriptor_set.dim:
        raise DimMismatch(
            f"feature dim {image_set.dim} != descriptor dim {descriptor_set.dim}"
        )
    x = image_set.vectors.astype(np.float64)
    d = descriptor_set.vectors.astype(np.float64)
    c = 1.0 - x @ d.T
    # unit inputs bound cosine in [-1, 1]; clip float drift back to [0, 2]
    return np.clip(c, 0.0, 2.0)


def round_to_feasible(raw_plan, marginals: Marginals) -> np.ndarray:
    """Project a nonnegative plan onto the transport polytope.

    Rows are scaled down to at most mu, columns to at most nu, then the
    missing mass is redistributed as a rank-one correction.  Output row and
    column sums match the marginals to 1e-9.
    """
    t = np.asarray(raw_plan, dtype=np.float64).copy()
    if np.any(t < 0):
        raise ValueError("raw plan must be nonnegative")
    mu, nu = marginals.mu, marginals.nu
    row = t.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(row > mu, mu / np.where(row > 0, row, 1.0), 1.0)
    t *= scale[:, None]
    col = t.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(col > nu, nu / np.where(col > 0, col, 1.0), 1.0)
    t *= scale[None, :]
    err_r = mu - t.sum(axis=1)
    err_c = nu - t.sum(axis=0)
    total = err_r.sum()
    if total > 0:
        t += np.outer(err_r, err_c) / total
    return t


def _violation(t: np.ndarray, marginals: Marginals) -> float:
    r = np.max(np.abs(t.sum(axis=1) - marginals.mu))
    c = np.max(np.abs(t.sum(axis=0) - marginals.nu))
    return float(max(r, c))


# annealing schedule: regularization decays geometrically from 1.0 to the
# target, warm-starting the potentials so tiny epsilons stay convergent
_ANNEAL_FACTOR = 0.75
_ANNEAL_STEPS_PER_LEVEL = 3


def sinkhorn_emd(cost, marginals: Marginals, config: SinkhornConfig) -> TransportPlan:
    """Entropically regularized transport via stabilized log-domain updates."""
    c = _check_cost(cost)
    m, n = c.shape
    if m != marginals.mu.size or n != marginals.nu.size:
        raise DimMismatch("marginal lengths must match the cost matrix")
    eps = config.epsilon
    log_mu = np.log(marginals.mu)
    log_nu = np.log(marginals.nu)
    f = np.zeros(m)
    g = np.zeros(n)
    iters = 0
    level = max(1.0, eps)
    while level > eps * (1.0 + 1e-9) and iters < config.max_iters:
        for _ in range(_ANNEAL_STEPS_PER_LEVEL):
            if iters >= config.max_iters:
                break
            f = level * (log_mu - logsumexp((g[None, :] - c) / level, axis=1))
            g = level * (log_nu - logsumexp((f[:, None] - c) / level, axis=0))
            iters += 1
        level *= _ANNEAL_FACTOR
    status = MAX_ITERS
    violation = math.inf
    while iters < config.max_iters:
        f = eps * (log_mu - logsumexp((g[None, :] - c) / eps, axis=1))
        g = eps * (log_nu - logsumexp((f[:, None] - c) / eps, axis=0))
        iters += 1
        t = np.exp((f[:, None] + g[None, :] - c) / eps)
        violation = _violation(t, marginals)
        if violation <= config.marginal_tol:
            status = CONVERGED
            break
    t = np.exp((f[:, None] + g[None, :] - c) / eps)
    if not math.isfinite(violation) or status == MAX_ITERS:
        violation = _violation(t, marginals)
    rounded = round_to_feasible(t, marginals)
    return TransportPlan(
        matrix=rounded,
        achieved_cost=float(np.sum(rounded * c)),
        status=status,
        marginal_violation=violation,
    )


def _require_uniform(marginals: Marginals) -> None:
    m, n = marginals.mu.size, marginals.nu.size
    if np.max(np.abs(marginals.mu - 1.0 / m)) > 1e-9 or np.max(
        np.abs(marginals.nu - 1.0 / n)
    ) > 1e-9:
        raise NonUniformMarginals("exact solver supports only uniform marginals")


def exact_emd(cost, marginals: Marginals) -> TransportPlan:
    """Exact transportation optimum for uniform marginals (test oracle).

    Masses are scaled by L = lcm(M, N) so every expanded row and column
    carries one unit; the cost matrix is replicated accordingly and the
    resulting L x L assignment problem is solved exactly.  The assignment is
    contracted back to an M x N plan and the objective divided by L.
    """
    c = _check_cost(cost)
    m, n = c.shape
    if m * n > MAX_ORACLE_CELLS:
        raise TooLarge(f"exact oracle limited to M*N <= {MAX_ORACLE_CELLS}")
    if m != marginals.mu.size or n != marginals.nu.size:
        raise DimMismatch("marginal lengths must match the cost matrix")
    _require_uniform(marginals)
    lcm = math.lcm(m, n)
    rep_r, rep_c = lcm // m, lcm // n
    expanded = np.repeat(np.repeat(c, rep_r, axis=0), rep_c, axis=1)
    rows, cols = linear_sum_assignment(expanded)
    value = float(expanded[rows, cols].sum() / lcm)
    plan = np.zeros((m, n))
    np.add.at(plan, (rows // rep_r, cols // rep_c), 1.0 / lcm)
    return TransportPlan(
        matrix=plan, achieved_cost=value, status=EXACT, marginal_violation=0.0
    )
