"""Noiseless coding of a state through another memory: fidelity of given
channels, the Hölder-type upper bound on it, typical subalgebras of tensor
powers, and the feasibility and decay-rate verdicts.

Channels are written in the observable (Heisenberg) picture. A
:class:`Channel` from ``from_shape`` to ``to_shape`` sends block ``k`` of the
source algebra into block ``j`` of the target through
``B_k -> sum_l K*_{j,k,l} B_k K_{j,k,l}``, with each ``K_{j,k,l}`` of shape
``(size_k(from), size_j(to))``. An encoding of ``a`` into ``b`` therefore
maps b-observables to a-observables (``from=b, to=a``) and a decoding maps
a-observables to b-observables (``from=a, to=b``).
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from ._optimize import beta_grid, grid_minimize
from .budget import BudgetExceeded, default_budget
from .entropy import (
    DiagonalState,
    classical_entropy,
    min_support_gap,
    quantum_entropy,
    region_contains,
)
from .largedev import DEFAULT_TOL, BulkVerdict, _tail_beta
from .shapes import Shape, _check_p

__all__ = [
    "Channel",
    "SUBUNITAL_TOL",
    "identity_channel",
    "random_subunital_channel",
    "dense_sup",
    "holder_bound",
    "log_holder_bound",
    "coding_fidelity",
    "TypicalSummary",
    "typical_algebra",
    "verify_typical_bounds",
    "code_feasible",
    "nogo_rate",
    "nogo_witness",
]

SUBUNITAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Channel:
    """Block-structured completely positive map given by Kraus families.

    ``kraus[(j, k)]`` lists the operators from source block ``k`` into target
    block ``j``; blocks are numbered in the order of :meth:`Shape.blocks`.
    Missing pairs have no operators.
    """

    from_shape: Shape
    to_shape: Shape
    kraus: Mapping[tuple[int, int], tuple[np.ndarray, ...]] = field(default_factory=dict)

    def __post_init__(self):
        src = list(self.from_shape.blocks())
        dst = list(self.to_shape.blocks())
        clean = {}
        for (j, k), ops in self.kraus.items():
            if not (0 <= j < len(dst) and 0 <= k < len(src)):
                raise ValueError(f"Kraus index ({j}, {k}) out of range")
            mats = tuple(np.asarray(op, dtype=complex) for op in ops)
            for op in mats:
                if op.shape != (src[k], dst[j]):
                    raise ValueError(
                        f"Kraus operator ({j}, {k}) has shape {op.shape}, expected {(src[k], dst[j])}"
                    )
            if mats:
                clean[(int(j), int(k))] = mats
        object.__setattr__(self, "kraus", clean)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Channel):
            return NotImplemented
        if (self.from_shape, self.to_shape) != (other.from_shape, other.to_shape):
            return False
        if self.kraus.keys() != other.kraus.keys():
            return False
        return all(
            len(ops) == len(other.kraus[key])
            and all(np.array_equal(x, y) for x, y in zip(ops, other.kraus[key]))
            for key, ops in self.kraus.items()
        )

    __hash__ = None

    def unitality_defect(self) -> float:
        """Smallest eigenvalue of ``I - sum K*K`` over target blocks (>= 0 when subunital)."""
        worst = math.inf
        for j, size in enumerate(self.to_shape.blocks()):
            acc = np.zeros((size, size), dtype=complex)
            for (jj, _), ops in self.kraus.items():
                if jj == j:
                    for op in ops:
                        acc += op.conj().T @ op
            eig = np.linalg.eigvalsh(np.eye(size) - acc)
            worst = min(worst, float(eig[0]))
        return worst

    def is_subunital(self, tol: float = SUBUNITAL_TOL) -> bool:
        return self.unitality_defect() >= -tol

    def scaled(self, factor: float) -> "Channel":
        """Every Kraus operator multiplied by ``factor``."""
        return Channel(
            self.from_shape,
            self.to_shape,
            {key: tuple(factor * op for op in ops) for key, ops in self.kraus.items()},
        )

    def to_dict(self) -> dict:
        ops = []
        for (j, k), mats in sorted(self.kraus.items()):
            for ell, op in enumerate(mats):
                ops.append(
                    {
                        "j": j,
                        "k": k,
                        "l": ell,
                        "rows": op.shape[0],
                        "cols": op.shape[1],
                        "entries": [[[float(z.real), float(z.imag)] for z in row] for row in op],
                    }
                )
        return {
            "from_shape": self.from_shape.to_dict(),
            "to_shape": self.to_shape.to_dict(),
            "kraus": ops,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Channel":
        grouped: dict[tuple[int, int], list] = {}
        for item in sorted(data["kraus"], key=lambda d: (d["j"], d["k"], d.get("l", 0))):
            op = np.array([[complex(re, im) for re, im in row] for row in item["entries"]])
            op = op.reshape(int(item["rows"]), int(item["cols"]))
            grouped.setdefault((int(item["j"]), int(item["k"])), []).append(op)
        return cls(
            Shape.from_dict(data["from_shape"]),
            Shape.from_dict(data["to_shape"]),
            {key: tuple(ops) for key, ops in grouped.items()},
        )


def identity_channel(shape: Shape) -> Channel:
    sizes = list(shape.blocks())
    return Channel(shape, shape, {(k, k): (np.eye(s),) for k, s in enumerate(sizes)})


def random_subunital_channel(from_shape: Shape, to_shape: Shape, rank: int = 1, seed: int = 0) -> Channel:
    """Random channel with complex Gaussian Kraus operators.

    The operators landing in each target block are rescaled together so that
    ``sum K*K`` has operator norm one there. Deterministic in ``seed``.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    rng = np.random.default_rng(seed)
    src = list(from_shape.blocks())
    dst = list(to_shape.blocks())
    kraus = {}
    for j, dj in enumerate(dst):
        family = {}
        acc = np.zeros((dj, dj), dtype=complex)
        for k, sk in enumerate(src):
            ops = []
            for _ in range(rank):
                op = rng.standard_normal((sk, dj)) + 1j * rng.standard_normal((sk, dj))
                acc += op.conj().T @ op
                ops.append(op)
            family[(j, k)] = ops
        scale = 1.0 / math.sqrt(float(np.linalg.eigvalsh(acc)[-1]))
        for key, ops in family.items():
            kraus[key] = tuple(scale * op for op in ops)
    return Channel(from_shape, to_shape, kraus)


def dense_sup(rho: DiagonalState) -> float:
    """Dense-coding supremum ``max r_{k,j}^2 / r_k`` over nonempty blocks."""
    best = 0.0
    for spec, rk in zip(rho.spectra, rho.block_weights):
        if rk > 0:
            best = max(best, float(np.max(spec)) ** 2 / rk)
    return best


def _log_norms(s: Shape, p: np.ndarray) -> np.ndarray:
    # log||s||_p for an array of p >= 1, inf allowed
    p = np.asarray(p, dtype=float)
    finite = np.where(np.isinf(p), 1.0, p)
    z = s.log_mults + np.multiply.outer(finite, s.log_sizes)
    out = logsumexp(z, axis=-1) / finite
    out = np.where(p == 1.0, math.log(s.total), out)
    return np.where(np.isinf(p), math.log(s.max_part), out)


def _conjugate(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = p / (p - 1.0)
    q = np.where(p == 1.0, np.inf, q)
    return np.where(np.isinf(p), 1.0, q)


def log_holder_bound(
    rho: DiagonalState, b: Shape, p: float | None = None, copies: int = 1, b_copies: int | None = None
) -> tuple[float, float]:
    """Log of ``||rho||_d ||lambda(a)||_q ||lambda(b)||_p`` and the p used.

    ``copies`` evaluates the bound for ``rho`` tensored N times against ``b``
    tensored ``b_copies`` times (default N), using that every factor is
    multiplicative. ``p=None`` minimizes over p in [1, inf].
    """
    if copies < 1:
        raise ValueError(f"copies must be >= 1, got {copies}")
    b_copies = copies if b_copies is None else b_copies
    a = rho.shape
    log_d = math.log(dense_sup(rho))

    def total(pp):
        pp = np.asarray(pp, dtype=float)
        return copies * (log_d + _log_norms(a, _conjugate(pp))) + b_copies * _log_norms(b, pp)

    if p is not None:
        p = _check_p(p)
        return float(total(np.array([p]))[0]), p

    hi = _tail_beta(a.sizes + b.sizes)
    value, beta = grid_minimize(lambda beta: total(1.0 + np.asarray(beta)), beta_grid(hi))
    best_p = beta + 1.0
    at_inf = float(total(np.array([np.inf]))[0])
    if at_inf <= value + 1e-15:
        value, best_p = at_inf, math.inf
    return value, best_p


def holder_bound(rho: DiagonalState, b: Shape, p: float | None = None, copies: int = 1) -> float:
    """Upper bound on the fidelity of coding ``rho`` through ``b``.

    Equal to ``||rho||_d ||lambda(a)||_q ||lambda(b)||_p`` with ``1/p + 1/q = 1``
    and ``a`` the shape of ``rho``; ``p=None`` takes the minimum over p.
    """
    return math.exp(log_holder_bound(rho, b, p, copies)[0])


def coding_fidelity(rho: DiagonalState, decode: Channel, encode: Channel) -> float:
    """Complete fidelity of the round trip: ``sum r_k |rho'_k(Y_{j,k,m} X_{k,j,l})|^2``.

    ``encode`` maps observables of b to those of a (``from=b, to=a``) and
    ``decode`` maps observables of a to those of b (``from=a, to=b``);
    ``rho'_k(M)`` is the normalized spectrum of block k paired with the
    diagonal of M.
    """
    a = rho.shape
    if encode.to_shape != a or decode.from_shape != a:
        raise ValueError("channels do not act on the shape of the state")
    if encode.from_shape != decode.to_shape:
        raise ValueError("encode source and decode target differ")
    for name, ch in (("encode", encode), ("decode", decode)):
        if not ch.is_subunital():
            raise ValueError(f"{name} channel is not subunital (defect {ch.unitality_defect():.3g})")

    total = 0.0
    for (k, j), xs in encode.kraus.items():
        rk = rho.block_weights[k]
        ys = decode.kraus.get((j, k))
        if rk <= 0 or not ys:
            continue
        spec = rho.normalized_spectrum(k)
        for y in ys:
            for x in xs:
                val = spec @ np.einsum("ij,ji->i", y, x)
                total += rk * abs(val) ** 2
    return float(total)


# -- typical subalgebras ---------------------------------------------------


@dataclass(frozen=True)
class TypicalSummary:
    """Typical subalgebra of the N-th tensor power at typicality width alpha.

    ``shape_typ`` is None when no index sequence is typical.
    """

    N: int
    alpha: Fraction
    shape_typ: Shape | None
    prob_exact: Fraction
    log_dense_sup: float

    @property
    def prob_typ(self) -> float:
        return float(self.prob_exact)

    @property
    def block_count(self) -> int:
        return 0 if self.shape_typ is None else self.shape_typ.count

    @property
    def log_block_count(self) -> float:
        return math.log(self.block_count) if self.block_count else -math.inf

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "alpha": str(self.alpha),
            "shape_typ": None if self.shape_typ is None else self.shape_typ.to_dict(),
            "prob_typ": self.prob_typ,
            "prob_typ_exact": str(self.prob_exact),
            "block_count": str(self.block_count),
            "log_block_count": self.log_block_count if self.block_count else None,
            "log_dense_sup": self.log_dense_sup if self.block_count else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "TypicalSummary":
        shape = data.get("shape_typ")
        lds = data.get("log_dense_sup")
        return cls(
            N=int(data["N"]),
            alpha=Fraction(data["alpha"]),
            shape_typ=None if shape is None else Shape.from_dict(shape),
            prob_exact=Fraction(data["prob_typ_exact"]),
            log_dense_sup=-math.inf if lds is None else float(lds),
        )


def _as_alpha(alpha) -> Fraction:
    # floats are read at their shortest decimal form, so 0.15 means 3/20
    if isinstance(alpha, float):
        return Fraction(repr(alpha))
    return Fraction(alpha)


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def _multinomial(n: int, parts) -> int:
    out, left = 1, n
    for c in parts:
        out *= math.comb(left, c)
        left -= c
    return out


def typical_algebra(rho: DiagonalState, N: int, alpha, budget: int | None = None) -> TypicalSummary:
    """Exact typical subalgebra of ``rho`` tensored N times.

    A sequence of letters (k, j) is typical when every letter frequency is
    within alpha of ``r_{k,j}`` (strict inequality) and no letter of
    probability zero occurs. The computation runs
    over type classes, i.e. letter-count vectors, never over sequences. A
    block-occupation vector ``(N_k)`` labels ``multinomial(N; N_k)`` blocks of
    the typical algebra, each of size ``sum prod_k multinomial(N_k; n_{k,.})``
    over the typical count vectors refining it.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    alpha = _as_alpha(alpha)
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    budget = default_budget() if budget is None else budget
    letters = [(k, r) for k, block in enumerate(rho.exact) for r in block]
    D = len(letters)
    if math.comb(N + D - 1, D - 1) > budget:
        raise BudgetExceeded(f"{math.comb(N + D - 1, D - 1)} type classes exceed the budget {budget}")

    ranges = []
    for _, r in letters:
        if r == 0:
            # zero-probability letters never occur in a typical sequence
            ranges.append((0, 0))
            continue
        lo = max(0, math.floor(N * (r - alpha)) + 1)
        hi = min(N, math.ceil(N * (r + alpha)) - 1)
        ranges.append((lo, hi))
    if any(lo > hi for lo, hi in ranges):
        return TypicalSummary(N, alpha, None, Fraction(0), -math.inf)
    min_rest = [0] * (D + 1)
    max_rest = [0] * (D + 1)
    for i in range(D - 1, -1, -1):
        min_rest[i] = min_rest[i + 1] + ranges[i][0]
        max_rest[i] = max_rest[i + 1] + ranges[i][1]

    n_blocks = len(rho.sizes)
    # occupation -> [block size, typical weight within one block, classes]
    occ_data: dict[tuple[int, ...], list] = {}
    counts = [0] * D

    def visit():
        occ = [0] * n_blocks
        for (k, _), c in zip(letters, counts):
            occ[k] += c
        occ_key = tuple(occ)
        ways = 1
        prob = Fraction(1)
        i = 0
        for k in range(n_blocks):
            block = []
            while i < D and letters[i][0] == k:
                block.append(counts[i])
                if counts[i]:
                    prob *= letters[i][1] ** counts[i]
                i += 1
            ways *= _multinomial(occ[k], block)
        entry = occ_data.setdefault(occ_key, [0, Fraction(0), []])
        entry[0] += ways
        entry[1] += ways * prob
        if prob > 0:
            entry[2].append(prob)

    def rec(i: int, left: int):
        if i == D:
            if left == 0:
                visit()
            return
        lo, hi = ranges[i]
        lo = max(lo, left - max_rest[i + 1])
        hi = min(hi, left - min_rest[i + 1])
        for c in range(lo, hi + 1):
            counts[i] = c
            rec(i + 1, left - c)
        counts[i] = 0

    rec(0, N)
    if not occ_data:
        return TypicalSummary(N, alpha, None, Fraction(0), -math.inf)

    parts: dict[int, int] = {}
    total_prob = Fraction(0)
    for occ, (size, weight, _) in occ_data.items():
        mult = _multinomial(N, occ)
        parts[size] = parts.get(size, 0) + mult
        total_prob += mult * weight

    log_d = -math.inf
    if total_prob > 0:
        log_p = _log_fraction(total_prob)
        for _, weight, probs in occ_data.values():
            if weight > 0 and probs:
                log_d = max(log_d, 2 * _log_fraction(max(probs)) - log_p - _log_fraction(weight))
    return TypicalSummary(N, alpha, Shape(parts), total_prob, log_d)


def verify_typical_bounds(summary: TypicalSummary, H: float, S: float, eps: float) -> bool:
    """Check the three size estimates of a typical subalgebra at slack ``eps``.

    With N the power: ``|log n - HN| < N eps`` for the block count n,
    ``|log size - SN| < N eps`` for every block size, and
    ``log||rho_typ||_d + (H + 2S) N < N eps``.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if summary.shape_typ is None or not math.isfinite(summary.log_dense_sup):
        return False
    N = summary.N
    slack = N * eps
    if not abs(summary.log_block_count - H * N) < slack:
        return False
    if any(not abs(math.log(size) - S * N) < slack for size in summary.shape_typ.sizes):
        return False
    return summary.log_dense_sup + (H + 2 * S) * N < slack


def code_feasible(rho: DiagonalState, b: Shape, tol: float = DEFAULT_TOL) -> BulkVerdict:
    """Whether the entropy pair of ``rho`` lies in the capacity region of ``b``."""
    return region_contains(b, classical_entropy(rho), quantum_entropy(rho), tol)


def nogo_witness(rho: DiagonalState, b: Shape, delta: float = 0.0) -> tuple[float, float]:
    """Decay exponent ``max_p (H/p + S - (1+delta) log||lambda(b)||_p)`` and its p."""
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    gap, p = min_support_gap(b, classical_entropy(rho), quantum_entropy(rho), 1.0 + delta)
    return -gap, p


def nogo_rate(rho: DiagonalState, b: Shape, delta: float = 0.0) -> float:
    """Exponent r with fidelity at most about ``exp(-N r)`` when coding N copies
    of ``rho`` into ``N(1+delta)`` copies of ``b``; ``r <= 0`` means no decay.
    """
    return nogo_witness(rho, b, delta)[0]
