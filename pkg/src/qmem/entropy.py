"""States on hybrid memories, their classical and quantum entropies, and the
capacity region cut out by ``H/p + S <= log||lambda||_p`` over p in [1, inf].

Entropies are in nats. A state is given diagonalized: one eigenvalue
sequence per block.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational

import numpy as np
from scipy.special import logsumexp, xlogy

from ._optimize import beta_grid, grid_minimize
from .largedev import (
    DEFAULT_TOL,
    BulkVerdict,
    LogLaplace,
    Status,
    _tail_beta,
    bulk_check,
    classify,
)
from .shapes import Shape, _check_p, log_p_norm, make_shape

__all__ = [
    "DiagonalState",
    "ThermalEnsemble",
    "CapacityRegion",
    "make_state",
    "classical_entropy",
    "quantum_entropy",
    "total_entropy",
    "thermal_state",
    "capacity_point",
    "region_boundary",
    "region_contains",
    "min_support_gap",
    "region_subset",
    "realize_point",
]

NORM_TOL = 1e-9


def _as_fraction(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x)
    xf = float(x)
    if not math.isfinite(xf):
        raise ValueError(f"eigenvalues must be finite, got {x!r}")
    return Fraction(xf)


class DiagonalState:
    """A state given by the eigenvalues ``r_{k,j}`` of each block.

    Blocks are kept in order of decreasing size (stable for ties). Entries
    may be floats, integers, fractions or fraction strings such as ``"3/4"``;
    the exact rational value of every entry is retained alongside the float
    arrays, and totals within ``1e-9`` of one are renormalized.
    """

    def __init__(self, blocks: Sequence[tuple[int, Sequence]]):
        if not blocks:
            raise ValueError("a state needs at least one block")
        parsed = []
        for size, weights in blocks:
            size = int(size)
            if size < 1:
                raise ValueError(f"block sizes must be >= 1, got {size}")
            fr = tuple(_as_fraction(w) for w in weights)
            if len(fr) != size:
                raise ValueError(f"block of size {size} given {len(fr)} eigenvalues")
            if any(w < 0 for w in fr):
                raise ValueError("eigenvalues must be nonnegative")
            parsed.append((size, fr))
        total = sum(sum(fr) for _, fr in parsed)
        if abs(float(total) - 1.0) > NORM_TOL:
            raise ValueError(f"eigenvalues sum to {float(total)}, not 1")
        parsed.sort(key=lambda item: -item[0])
        self.sizes: tuple[int, ...] = tuple(s for s, _ in parsed)
        self.exact: tuple[tuple[Fraction, ...], ...] = tuple(
            tuple(w / total for w in fr) for _, fr in parsed
        )
        self.spectra: tuple[np.ndarray, ...] = tuple(
            np.array([float(w) for w in fr]) for fr in self.exact
        )

    @cached_property
    def shape(self) -> Shape:
        return make_shape(self.sizes)

    @cached_property
    def block_weights(self) -> np.ndarray:
        """``r_k``, the total weight of each block."""
        return np.array([float(sum(fr)) for fr in self.exact])

    def normalized_spectrum(self, k: int) -> np.ndarray:
        """``r'_{k,j} = r_{k,j} / r_k``; undefined (ValueError) for an empty block."""
        rk = self.block_weights[k]
        if rk <= 0:
            raise ValueError(f"block {k} has zero weight")
        return self.spectra[k] / rk

    def __repr__(self) -> str:
        body = "; ".join(
            f"{s}: [{', '.join(f'{w:.6g}' for w in spec)}]"
            for s, spec in zip(self.sizes, self.spectra)
        )
        return f"DiagonalState({body})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiagonalState):
            return NotImplemented
        return self.sizes == other.sizes and self.exact == other.exact

    def __hash__(self) -> int:
        return hash((self.sizes, self.exact))

    def to_dict(self) -> dict:
        return {
            "blocks": [
                {"size": s, "weights": [float(w) for w in spec]}
                for s, spec in zip(self.sizes, self.spectra)
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "DiagonalState":
        return cls([(b["size"], b["weights"]) for b in data["blocks"]])


def make_state(shape: Shape, eigenvalues: Sequence[Sequence]) -> DiagonalState:
    """Attach per-block eigenvalues to the blocks of ``shape`` (largest first)."""
    sizes = list(shape.blocks())
    if len(eigenvalues) != len(sizes):
        raise ValueError(f"shape {shape} has {len(sizes)} blocks, got {len(eigenvalues)}")
    return DiagonalState(list(zip(sizes, eigenvalues)))


def classical_entropy(rho: DiagonalState) -> float:
    """Shannon entropy ``-sum r_k log r_k`` of the block weights."""
    r = rho.block_weights
    return float(-np.sum(xlogy(r, r))) + 0.0


def quantum_entropy(rho: DiagonalState) -> float:
    """Average entropy of the normalized block spectra, ``-sum r_{k,j} log r'_{k,j}``."""
    total = 0.0
    for k, spec in enumerate(rho.spectra):
        rk = rho.block_weights[k]
        if rk > 0:
            total -= float(np.sum(xlogy(spec, spec / rk)))
    return total


def total_entropy(rho: DiagonalState) -> float:
    """``-sum r_{k,j} log r_{k,j}`` over all eigenvalues."""
    return float(-sum(np.sum(xlogy(spec, spec)) for spec in rho.spectra))


@dataclass(frozen=True)
class ThermalEnsemble:
    """Thermal data at exponent p: energies ``-log size`` and inverse temperature p - 1."""

    p: float
    beta: float
    temperature: float
    energies: tuple[float, ...]
    log_partition: float

    @property
    def free_energy(self) -> float:
        """``-T log Z``; the p = inf limit is ``-log`` of the largest part."""
        if math.isinf(self.p):
            return min(self.energies)
        if self.beta == 0:
            return -math.inf if self.log_partition > 0 else 0.0
        return -self.log_partition / self.beta


def _thermal_log_weights(shape: Shape, p: float) -> np.ndarray:
    # log r_k per distinct size; blocks of one size share a weight
    if math.isinf(p):
        m = shape.max_multiplicity
        out = np.full(len(shape.items), -np.inf)
        out[0] = -math.log(m)
        return out
    z = shape.log_mults + p * shape.log_sizes
    return p * shape.log_sizes - logsumexp(z)


def thermal_state(shape: Shape, p: float) -> tuple[DiagonalState, ThermalEnsemble]:
    """Thermal state at exponent p: block weights proportional to ``size**p``,
    uniform within each block. At p = inf the weight is spread evenly over the
    largest blocks.
    """
    p = _check_p(p)
    log_r = _thermal_log_weights(shape, p)
    blocks = []
    for (size, mult), lr in zip(shape.items, log_r):
        eig = math.exp(lr) / size if np.isfinite(lr) else 0.0
        blocks.extend([(size, [eig] * size)] * mult)
    state = _trusted_state(blocks)
    beta = p - 1.0
    if math.isinf(p):
        log_z = math.inf
        temperature = 0.0
    else:
        log_z = float(LogLaplace(shape)(beta)) if beta > 0 else math.log(shape.total)
        temperature = math.inf if beta == 0 else 1.0 / beta
    ensemble = ThermalEnsemble(
        p=p,
        beta=beta,
        temperature=temperature,
        energies=tuple(-math.log(s) for s in shape.blocks()),
        log_partition=log_z,
    )
    return state, ensemble


def _trusted_state(blocks) -> DiagonalState:
    # float eigenvalues from a closed form; renormalize the small drift
    total = sum(sum(w) for _, w in blocks)
    return DiagonalState([(s, [w / total for w in ws]) for s, ws in blocks])


def capacity_point(shape: Shape, p: float) -> tuple[float, float]:
    """``(H, S)`` of the thermal state at exponent p, a boundary point of the region.

    ``S`` is the tilted mean of the log-sizes and ``H = -sum r_k log r_k``;
    together ``H/p + S`` equals ``log||lambda||_p``.
    """
    p = _check_p(p)
    if math.isinf(p):
        return math.log(shape.max_multiplicity), math.log(shape.max_part)
    log_r = _thermal_log_weights(shape, p)
    mass = shape.log_mults + log_r
    w = np.exp(mass)
    H = float(-np.sum(w * log_r))
    S = float(w @ shape.log_sizes)
    return max(H, 0.0), S


def _dedupe(points, tol=1e-12):
    out = []
    for pt in points:
        if not out or abs(pt[0] - out[-1][0]) > tol or abs(pt[1] - out[-1][1]) > tol:
            out.append(pt)
    return out


def region_boundary(shape: Shape, samples: int = 256) -> list[tuple[float, float]]:
    """Upper-right boundary of the capacity region as a polyline.

    Runs from ``(0, log max)`` along the flat top to ``(log m, log max)``
    (m = multiplicity of the largest part), down the thermal curve from large
    p to p = 1 on a geometric grid in beta = p - 1, and along the slope -1
    edge to ``(log||lambda||_1, 0)``.
    """
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    top = math.log(shape.max_part)
    points = [(0.0, top), capacity_point(shape, math.inf)]
    betas = beta_grid(_tail_beta(shape.sizes), samples)[::-1]
    points.extend(capacity_point(shape, 1.0 + b) for b in betas)
    points.append((math.log(shape.total), 0.0))
    return _dedupe(points)


def min_support_gap(shape: Shape, H: float, S: float, scale: float = 1.0) -> tuple[float, float]:
    """Minimum over p of ``scale * log||lambda||_p - H/p - S`` and the p attaining it.

    Minimized over beta = p - 1 on a geometric grid, with the p = inf endpoint
    ``scale * log max - S`` compared separately (and preferred on ties).
    """
    L = LogLaplace(shape)
    log_total = math.log(shape.total)

    def f(beta):
        beta = np.asarray(beta, dtype=float)
        out = (scale * L.value(beta) - H) / (beta + 1.0) - S
        return np.where(beta == 0, scale * log_total - H - S, out)

    margin, beta = grid_minimize(f, beta_grid(_tail_beta(shape.sizes)))
    at_inf = scale * math.log(shape.max_part) - S
    if at_inf <= margin + 1e-15:
        return at_inf, math.inf
    return margin, beta + 1.0


def region_contains(shape: Shape, H: float, S: float, tol: float = DEFAULT_TOL) -> BulkVerdict:
    """Test ``H/p + S <= log||lambda||_p`` for all p, with H, S >= 0.

    The margin is the minimum over p of ``log||lambda||_p - H/p - S``; a
    negative coordinate is reported as a violation by that amount.
    """
    H, S = float(H), float(S)
    if H < 0 or S < 0:
        margin = min(H, S)
        return BulkVerdict(classify(margin, tol), margin, 1.0 if H < S else math.inf, (H, S))
    margin, witness = min_support_gap(shape, H, S)
    return BulkVerdict(classify(margin, tol), margin, witness, (H, S))


def region_subset(a: Shape, b: Shape, tol: float = DEFAULT_TOL, samples: int = 64) -> BulkVerdict:
    """Decide whether the region of ``a`` lies inside that of ``b``.

    Equivalent to the norm comparison of :func:`largedev.bulk_check`. A
    violation carries the thermal point of ``a`` at the witness p, which lies
    outside the region of ``b``. The boundary of ``a`` is also sampled
    through :func:`region_contains` as a consistency check.
    """
    verdict = bulk_check(a, b, tol)
    point = capacity_point(a, verdict.witness_p)
    for H, S in region_boundary(a, samples):
        inner = region_contains(b, H, S, tol)
        if verdict.ok and inner.margin < -1e-6:
            raise RuntimeError(f"boundary point ({H}, {S}) of {a} escapes {b} despite {verdict}")
    if verdict.status is Status.VIOLATED:
        return BulkVerdict(verdict.status, verdict.margin, verdict.witness_p, point)
    return verdict


@dataclass(frozen=True)
class CapacityRegion:
    """The capacity region of a shape, with support function ``p -> log||lambda||_p``."""

    shape: Shape

    def support(self, p: float) -> float:
        """S-intercept of the tangent line of slope ``-1/p``."""
        return log_p_norm(self.shape, p)

    @cached_property
    def boundary(self) -> list[tuple[float, float]]:
        return region_boundary(self.shape)

    def contains(self, H: float, S: float, tol: float = DEFAULT_TOL) -> BulkVerdict:
        return region_contains(self.shape, H, S, tol)

    def __contains__(self, point) -> bool:
        return self.contains(*point).ok


def _bisect(f, lo: float, hi: float, target: float, increasing: bool, iters: int = 200) -> float:
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def _purify(weights: list[float], sizes: list[int], theta: float):
    # each block's spectrum moved a fraction theta from uniform toward pure
    blocks = []
    for w, s in zip(weights, sizes):
        spec = [w * (1 - theta) / s] * s
        spec[0] += w * theta
        blocks.append((s, spec))
    return blocks


def _quantum_entropy_of(weights, sizes, theta) -> float:
    total = 0.0
    for w, s in zip(weights, sizes):
        if w <= 0 or s == 1:
            continue
        rest = (1 - theta) / s
        first = rest + theta
        total += w * float(-xlogy(first, first) - (s - 1) * xlogy(rest, rest))
    return total


def realize_point(shape: Shape, H: float, S: float, tol: float = DEFAULT_TOL) -> tuple[DiagonalState, float]:
    """A state ``rho`` and ``t >= 0`` with ``H = H(rho) + t`` and ``S = S(rho) - t``.

    Start from a state with uniform block spectra whose classical entropy is
    the target (a mixture over the largest blocks when H is below ``log m``,
    the thermal state on the curve otherwise, and the p = 1 thermal state plus
    a transfer t beyond it). Then every block spectrum is moved toward a pure
    state, which keeps the block weights and lowers the quantum entropy to
    ``S + t``. Raises ``ValueError`` for points outside the region.
    """
    verdict = region_contains(shape, H, S, tol)
    if verdict.status is Status.VIOLATED:
        raise ValueError(f"({H}, {S}) lies outside the capacity region of {shape}")
    H, S = max(float(H), 0.0), max(float(S), 0.0)
    sizes = list(shape.blocks())
    m = shape.max_multiplicity
    H1, S1 = capacity_point(shape, 1.0)

    if H <= math.log(m):
        # mix a point mass on the first largest block with the uniform mixture
        def mix(theta):
            w = [0.0] * len(sizes)
            for i in range(m):
                w[i] = theta / m
            w[0] += 1 - theta
            return w

        def ent(theta):
            w = np.array(mix(theta))
            return float(-np.sum(xlogy(w, w)))

        theta = _bisect(ent, 0.0, 1.0, H, increasing=True) if m > 1 and H > 0 else 0.0
        weights = mix(theta)
    elif H <= H1:

        def ent(beta):
            return capacity_point(shape, 1.0 + beta)[0]

        hi = 1.0
        while ent(hi) > H and hi < 1e8:
            hi *= 2
        beta = _bisect(ent, 0.0, hi, H, increasing=False)
        log_r = _thermal_log_weights(shape, 1.0 + beta)
        weights = [math.exp(lr) for (_, mult), lr in zip(shape.items, log_r) for _ in range(mult)]
    else:
        log_r = _thermal_log_weights(shape, 1.0)
        weights = [math.exp(lr) for (_, mult), lr in zip(shape.items, log_r) for _ in range(mult)]

    total = sum(weights)
    weights = [w / total for w in weights]
    w_arr = np.array(weights)
    t = max(H - float(-np.sum(xlogy(w_arr, w_arr))), 0.0)
    s_top = _quantum_entropy_of(weights, sizes, 0.0)
    target = S + t
    if target >= s_top:
        theta = 0.0
    else:
        theta = _bisect(lambda x: _quantum_entropy_of(weights, sizes, x), 0.0, 1.0, target, increasing=False)
    state = DiagonalState(_purify(weights, sizes, theta))
    return state, t
