"""Large-deviation bounds for shape measures and the bulk-embedding test.

A shape with parts ``size_k`` (multiplicity ``m_k``) defines the atomic measure
putting mass ``m_k * size_k`` at ``log size_k``. Its log-Laplace transform is
``ell(beta) = log sum_k m_k size_k**(beta+1)``, the log of the (beta+1)-norm
raised to the power beta+1. Convolution powers of the measure are the measures
of tensor powers, so Chernoff and Cramér bounds on them bound tail sums of
tensor powers, and the exact tails act as an oracle for both bounds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from ._optimize import beta_grid, grid_minimize
from .budget import BudgetExceeded, default_budget
from .packing import BratteliDiagram, greedy_embed, verify_diagram
from .shapes import (
    Shape,
    format_p,
    log_p_norm,
    repeat,
    supermajorizes,
    tail_ge_exp,
    tensor,
    tensor_power,
)

__all__ = [
    "LogLaplace",
    "ell",
    "legendre",
    "chernoff_upper",
    "cramer_lower",
    "default_slack",
    "max_curvature",
    "exact_tail",
    "Status",
    "BulkVerdict",
    "bulk_check",
    "analytic_n_bound",
    "BulkConstruction",
    "bulk_construct",
    "ClassicalPathError",
    "NotBulkEmbeddable",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-9


class ClassicalPathError(ValueError):
    """The target memory is entirely classical; compare 1-norms instead."""


class NotBulkEmbeddable(ValueError):
    """Some p-norm of the source exceeds that of the target."""


class LogLaplace:
    """Log-Laplace transform of the measure attached to a shape."""

    def __init__(self, shape: Shape):
        self.shape = shape
        self.positions = shape.log_sizes
        self.log_weights = shape.log_mults + shape.log_sizes

    @property
    def atoms(self) -> list[tuple[float, int]]:
        """``(position, weight)`` pairs: ``(log size, size * multiplicity)``."""
        return [(math.log(s), s * m) for s, m in self.shape.items]

    @property
    def upper(self) -> float:
        """Right end of the support, ``log`` of the largest part."""
        return float(self.positions[0])

    def value(self, beta):
        beta = np.asarray(beta, dtype=float)
        z = self.log_weights + np.multiply.outer(beta, self.positions)
        # hot path for the norm-gap search: scipy's logsumexp costs ~100us per
        # call in argument handling alone; every row has a finite maximum here
        top = z.max(axis=-1, keepdims=True)
        return np.log(np.exp(z - top).sum(axis=-1)) + top[..., 0]

    def moments(self, beta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(ell, ell', ell'')`` at each beta (tilted mean and variance)."""
        beta = np.asarray(beta, dtype=float)
        z = self.log_weights + np.multiply.outer(beta, self.positions)
        lse = logsumexp(z, axis=-1)
        w = np.exp(z - np.expand_dims(lse, -1))
        mean = w @ self.positions
        centred = self.positions - np.expand_dims(mean, -1)
        var = np.sum(w * centred**2, axis=-1)
        return lse, mean, var

    def __call__(self, beta: float, order: int = 0) -> float:
        if beta < 0:
            raise ValueError(f"beta must be >= 0, got {beta}")
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        if beta == 0 and order == 0:
            return math.log(self.shape.total)
        return float(self.moments(beta)[order])

    def slope_gap(self, beta: float, t: float) -> float:
        """``ell'(beta) - t`` computed as a tilted mean of ``position - t``."""
        z = self.log_weights + beta * self.positions
        w = np.exp(z - logsumexp(z))
        return float(w @ (self.positions - t))


def ell(s: Shape, beta: float, order: int = 0) -> float:
    """``ell(beta) = log sum m_k size_k**(beta+1)`` or its first/second derivative."""
    return LogLaplace(s)(beta, order)


def legendre(s: Shape, t: float) -> tuple[float, float]:
    """Minimize ``ell(beta) - beta*t`` over ``beta >= 0``.

    Returns ``(minimum, argmin)``. Below the mean log-size ``ell'(0)`` the
    minimum sits at beta = 0; at or above the log of the largest part the
    minimand has no minimizer and ``ValueError`` is raised.
    """
    L = LogLaplace(s)
    if L.slope_gap(0.0, t) >= 0:
        return L(0.0), 0.0
    if t >= L.upper:
        raise ValueError(f"t={t} is not below log(max part)={L.upper}; minimand is unbounded")

    lo, hi = 0.0, 1.0
    while L.slope_gap(hi, t) < 0:
        lo, hi = hi, 2 * hi
        if hi > 1e15:
            raise ValueError(f"could not bracket the minimizer for t={t}")
    beta = 0.5 * (lo + hi)
    for _ in range(200):
        gap = L.slope_gap(beta, t)
        if gap == 0:
            break
        if gap < 0:
            lo = beta
        else:
            hi = beta
        curv = L(beta, 2)
        step = beta - gap / curv if curv > 0 else math.nan
        beta = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return float(L.value(beta)) - beta * t, beta


def log_chernoff_upper(s: Shape, n: int, t: float) -> float:
    value, _ = legendre(s, t)
    return n * value


def chernoff_upper(s: Shape, n: int, t: float) -> float:
    """Chernoff bound ``exp(n (ell(beta) - beta t))`` on the tail beyond ``n t``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return math.exp(log_chernoff_upper(s, n, t))


@lru_cache(maxsize=64)
def max_curvature(s: Shape) -> float:
    """Upper bound C on ``ell''`` over ``[0, inf)``.

    ``ell''`` is a tilted variance of the log-sizes and vanishes as beta grows,
    so the supremum is found on a finite grid; the grid maximum is then
    re-checked against a finer grid and the larger value kept.
    """
    if len(s.items) == 1:
        return 0.0
    L = LogLaplace(s)
    hi = _tail_beta(s.sizes)
    neg, _ = grid_minimize(lambda b: -L.moments(b)[2], beta_grid(hi))
    fine = beta_grid(hi, 4096)
    return max(-neg, float(np.max(L.moments(fine)[2])))


def default_slack(s: Shape, n: int) -> float:
    """Slack sqrt(2C/n), which keeps the Cramér bracket at least 1/2."""
    return math.sqrt(2 * max_curvature(s) / n)


def cramer_lower(s: Shape, n: int, t: float, slack: float | None = None) -> float:
    """Cramér lower bound on the tail beyond ``n (t - slack)``.

    Returns ``exp(n (ell(beta) - beta t - beta slack)) * (1 - ell''(beta) / (n slack^2))``
    with beta the Legendre minimizer at ``t``. A non-positive return value
    means the bound is vacuous.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    L = LogLaplace(s)
    if L.slope_gap(0.0, t) < 0 and t >= L.upper:
        raise ValueError(f"t={t} is outside [ell'(0), log max part)")
    if L.slope_gap(0.0, t) > 0 and not math.isclose(L(0.0, 1), t, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError(f"t={t} is below ell'(0)={L(0.0, 1)}")
    if slack is None:
        slack = default_slack(s, n)
    if not slack > 0:
        raise ValueError(f"slack must be positive, got {slack}")
    value, beta = legendre(s, t)
    bracket = 1.0 - L(beta, 2) / (n * slack * slack)
    return math.exp(n * (value - beta * slack)) * bracket


def distinct_power_sizes(s: Shape, n: int) -> int:
    """Upper bound on the number of distinct part sizes of ``s^{⊗n}``."""
    d = len(s.items)
    return math.comb(n + d - 1, d - 1)


@lru_cache(maxsize=256)
def _power(s: Shape, n: int) -> Shape:
    return tensor_power(s, n)


def exact_tail(s: Shape, n: int, t, budget: int | None = None) -> int:
    """Exact mass of the n-fold convolution beyond ``n t``.

    Equal to the sum of the parts of ``s^{⊗n}`` of size at least ``exp(n t)``;
    ``t`` is taken at its exact rational value.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    budget = default_budget() if budget is None else budget
    if distinct_power_sizes(s, n) > budget:
        raise BudgetExceeded(f"{s}^{n} may have more than {budget} distinct sizes")
    return tail_ge_exp(_power(s, n), Fraction(t) * n)


# -- bulk embedding ---------------------------------------------------------


class Status(str, enum.Enum):
    HOLDS = "holds"
    MARGINAL = "marginal"
    VIOLATED = "violated"


@dataclass(frozen=True)
class BulkVerdict:
    """Verdict with its margin (in log-norm units) and the p attaining it."""

    status: Status
    margin: float
    witness_p: float
    witness_point: tuple[float, float] | None = None

    @property
    def ok(self) -> bool:
        """True unless the verdict is a strict violation."""
        return self.status is not Status.VIOLATED

    def to_dict(self) -> dict:
        data = {
            "status": self.status.value,
            "margin": self.margin,
            "witness_p": format_p(self.witness_p),
        }
        if self.witness_point is not None:
            data["witness_point"] = list(self.witness_point)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "BulkVerdict":
        p = data["witness_p"]
        point = data.get("witness_point")
        return cls(
            Status(data["status"]),
            float(data["margin"]),
            math.inf if p == "inf" else float(p),
            tuple(point) if point is not None else None,
        )


def classify(margin: float, tol: float) -> Status:
    if margin > tol:
        return Status.HOLDS
    if margin < -tol:
        return Status.VIOLATED
    return Status.MARGINAL


def _tail_beta(sizes) -> float:
    # beta past which every part below the largest is exponentially negligible
    # (relative weight below e^-40 per unit of multiplicity log)
    sizes = sorted(set(sizes), reverse=True)
    if len(sizes) < 2:
        return 64.0
    gap = min(math.log(x / y) for x, y in zip(sizes, sizes[1:]))
    return 64.0 + 80.0 / gap


def _dominant_crossover(a: Shape, b: Shape) -> tuple[int, float]:
    """Sign of ``sum_x c_x x^p`` for large p and a p past which that sign holds.

    ``c_x`` is the multiplicity of size x in b minus that in a. Past
    ``p* = log(sum_{x<x*} |c_x| / |c_x*|) / log(x*/x2)`` the top term outweighs
    all others combined.
    """
    diff: dict[int, int] = dict(b.items)
    for size, mult in a.items:
        diff[size] = diff.get(size, 0) - mult
    terms = sorted(((x, c) for x, c in diff.items() if c), reverse=True)
    if not terms:
        return 0, 1.0
    top, ctop = terms[0]
    sign = 1 if ctop > 0 else -1
    if len(terms) == 1:
        return sign, 1.0
    rest = sum(abs(c) for _, c in terms[1:])
    x2 = terms[1][0]
    p_star = math.log(rest / abs(ctop)) / math.log(top / x2)
    return sign, max(1.0, p_star)


def _search_range(a: Shape, b: Shape) -> float:
    _, p_star = _dominant_crossover(a, b)
    return max(8.0 * p_star, _tail_beta(a.sizes + b.sizes))


def _norm_gap(a: Shape, b: Shape):
    """Vectorized ``log||b||_p - log||a||_p`` as a function of beta = p - 1."""
    La, Lb = LogLaplace(a), LogLaplace(b)
    exact0 = math.log(b.total) - math.log(a.total)

    def h(beta):
        beta = np.asarray(beta, dtype=float)
        out = (Lb.value(beta) - La.value(beta)) / (beta + 1.0)
        return np.where(beta == 0, exact0, out)

    return h


def bulk_check(a: Shape, b: Shape, tol: float = DEFAULT_TOL) -> BulkVerdict:
    """Decide whether ``||a||_p <= ||b||_p`` for every p in [1, inf].

    The margin is the minimum over p of ``log||b||_p - log||a||_p``. The p
    axis is searched on a geometric beta grid whose far end is placed past
    the point where the largest differing part settles the sign of the
    difference, and p = inf is compared exactly through the largest parts.
    Two entirely classical memories reduce to comparing 1-norms.
    """
    if a.is_classical and b.is_classical:
        margin = math.log(b.total) - math.log(a.total)
        return BulkVerdict(classify(margin, tol), margin, 1.0)

    h = _norm_gap(a, b)
    margin, beta = grid_minimize(h, beta_grid(_search_range(a, b)))
    witness = beta + 1.0
    at_inf = math.log(b.max_part) - math.log(a.max_part)
    if at_inf < margin:
        margin, witness = at_inf, math.inf
    return BulkVerdict(classify(margin, tol), margin, witness)


def analytic_n_bound(a: Shape, b: Shape, tol: float = DEFAULT_TOL) -> int | None:
    """Smallest n for which the large-deviation argument certifies
    ``2 lambda(a^{⊗n}) <= lambda(b^{⊗n})`` in supermajorization order.

    With ``g = ell_b - ell_a``, ``C = max ell_b''`` and ``s = sqrt(2C/n)``, the
    Chernoff bound for a and the Cramér bound for b give the cutoff inequality
    at every threshold once ``2 beta s + 2 log 2 / n <= g(beta)`` for all
    beta >= 0 (the beta = 0 case is the small-threshold branch). Returns None
    unless the norms of b strictly dominate those of a.
    """
    if b.is_classical:
        raise ClassicalPathError("b is entirely classical: compare 1-norms directly")
    verdict = bulk_check(a, b, tol)
    if verdict.status is not Status.HOLDS:
        return None

    La, Lb = LogLaplace(a), LogLaplace(b)
    C = max_curvature(b)
    betas = beta_grid(_search_range(a, b), 4096)
    g = Lb.value(betas) - La.value(betas)
    g[0] = math.log(b.total) - math.log(a.total)
    slope_inf = math.log(b.max_part) - math.log(a.max_part)
    log2 = math.log(2.0)

    def slack_ok(n: int) -> bool:
        s = math.sqrt(2 * C / n)
        if 2 * s >= slope_inf:
            return False
        return bool(np.min(g - 2 * betas * s - 2 * log2 / n) >= 0)

    hi = 1
    while not slack_ok(hi):
        hi *= 2
        if hi > 1 << 62:
            return None
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if slack_ok(mid):
            hi = mid
        else:
            lo = mid
    # polish the grid minimum at the chosen n and step up if it dips below 0
    n = hi
    while True:
        s = math.sqrt(2 * C / n)
        worst, _ = grid_minimize(
            lambda x: np.where(
                np.asarray(x) == 0,
                g[0] - 2 * log2 / n,
                Lb.value(x) - La.value(x) - 2 * np.asarray(x) * s - 2 * log2 / n,
            ),
            betas,
        )
        if worst >= 0:
            return n
        n += 1


@dataclass(frozen=True)
class BulkConstruction:
    """An exact embedding of ``a^{⊗n}`` into ``b^{⊗m}``."""

    n: int
    m: int
    certificate: BratteliDiagram
    analytic_bound: int | None = None

    def summary(self) -> dict:
        cert = self.certificate
        return {
            "block_classes": len(cert.block_sizes_a),
            "bin_classes": len(cert.bin_sizes_b),
            "blocks": str(sum(cert.row_counts)),
            "bins": str(sum(cert.col_counts)),
        }


def _scan_bound(a: Shape, b: Shape, eps: Fraction) -> int | None:
    # Theorem-level fallback: with k = ceil(1/eps), a^{⊗k} strictly fits
    # b^{⊗k+1} at every p, so the analytic n for that pair bounds the scan.
    k = math.ceil(1 / eps)
    if k > 8 or b.is_classical:
        return None
    try:
        n = analytic_n_bound(tensor_power(a, k), tensor_power(b, k + 1))
    except (ValueError, BudgetExceeded):
        return None
    return None if n is None else k * n


def bulk_construct(
    a: Shape,
    b: Shape,
    eps,
    n_max: int,
    budget: int | None = None,
    with_bound: bool = False,
) -> BulkConstruction | None:
    """Find the least ``N <= n_max`` with ``a^{⊗N}`` embedding in ``b^{⊗M}``, ``M = ceil(N(1+eps))``.

    Each N is tested with the exact criterion that b^{⊗M} supermajorizes
    a^{⊗N} with every part doubled; on success the greedy packing is built at
    (size, load) granularity and re-verified with integer arithmetic.

    Raises :class:`NotBulkEmbeddable` when some p-norm of ``a`` exceeds that of
    ``b`` and returns None when no N up to ``n_max`` works.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    verdict = bulk_check(a, b)
    if verdict.status is Status.VIOLATED:
        raise NotBulkEmbeddable(
            f"norm of {a} exceeds norm of {b} at p={format_p(verdict.witness_p)}"
        )
    budget = default_budget() if budget is None else budget

    a_pow = Shape({1: 1})
    b_pow = Shape({1: 1})
    m_cur = 0
    for n in range(1, n_max + 1):
        m = math.ceil(n * (1 + eps))
        if distinct_power_sizes(b, m) > budget or distinct_power_sizes(a, n) > budget:
            raise BudgetExceeded(f"tensor powers at N={n}, M={m} exceed the budget {budget}")
        a_pow = tensor(a_pow, a)
        while m_cur < m:
            b_pow = tensor(b_pow, b)
            m_cur += 1
        if not supermajorizes(b_pow, repeat(a_pow, 2)):
            continue
        cert = greedy_embed(a_pow, b_pow, compressed=True)
        if cert is None or not verify_diagram(a_pow, b_pow, cert):
            raise RuntimeError(f"greedy packing failed despite the doubling criterion at N={n}")
        bound = _scan_bound(a, b, eps) if with_bound else None
        return BulkConstruction(n, m, cert, bound)
    return None
