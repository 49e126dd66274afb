"""Memory shapes: the multiset of block sizes of a hybrid memory.

A shape is stored as ``size -> multiplicity`` with arbitrary-precision integers
on both sides, so tensor powers such as ``(3,1,1)^{⊗200}`` stay exact even though
they have astronomically many parts.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping
from fractions import Fraction
from functools import cached_property
from numbers import Rational, Real

import mpmath
import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Shape",
    "make_shape",
    "parse_shape",
    "log_p_norm",
    "tensor",
    "tensor_power",
    "tail_ge",
    "tail_ge_exp",
    "part_count_ge",
    "part_count_ge_exp",
    "repeat",
    "supermajorizes",
    "format_p",
    "parse_p",
]

# below this gap a float comparison of log(size) against a threshold is re-done
# in extended precision
_LOG_CLOSE = 1e-9


class Shape:
    """Immutable multiset of positive block sizes.

    Construct with :func:`make_shape` from a list of sizes, or directly from a
    ``{size: multiplicity}`` mapping. Equal multisets compare and hash equal.
    """

    def __init__(self, parts: Mapping[int, int]):
        items = []
        for size, mult in parts.items():
            size, mult = _as_int(size, "part size"), _as_int(mult, "multiplicity")
            if size < 1:
                raise ValueError(f"part sizes must be >= 1, got {size}")
            if mult < 0:
                raise ValueError(f"multiplicities must be >= 0, got {mult}")
            if mult:
                items.append((size, mult))
        if not items:
            raise ValueError("a shape needs at least one part")
        items.sort(reverse=True)
        self._items: tuple[tuple[int, int], ...] = tuple(items)

    # -- basic views -----------------------------------------------------
    @property
    def items(self) -> tuple[tuple[int, int], ...]:
        """``(size, multiplicity)`` pairs, sizes strictly descending."""
        return self._items

    @property
    def parts(self) -> dict[int, int]:
        return dict(self._items)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self._items)

    @property
    def max_part(self) -> int:
        return self._items[0][0]

    @property
    def max_multiplicity(self) -> int:
        """Multiplicity of the largest part."""
        return self._items[0][1]

    @cached_property
    def total(self) -> int:
        """Sum of all parts, the 1-norm."""
        return sum(s * m for s, m in self._items)

    @cached_property
    def count(self) -> int:
        """Number of parts counted with multiplicity."""
        return sum(m for _, m in self._items)

    @property
    def is_classical(self) -> bool:
        return self.max_part == 1

    def blocks(self) -> Iterator[int]:
        """Iterate over every part, largest first."""
        for size, mult in self._items:
            for _ in range(mult):
                yield size

    @cached_property
    def log_sizes(self) -> np.ndarray:
        return np.array([math.log(s) for s, _ in self._items])

    @cached_property
    def log_mults(self) -> np.ndarray:
        return np.array([math.log(m) for _, m in self._items])

    # -- dunder ----------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Shape):
            return NotImplemented
        return self._items == other._items

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"Shape({_describe(self)})"

    def __str__(self) -> str:
        return _describe(self)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {"parts": {str(s): m for s, m in self._items}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Shape":
        parts = data["parts"] if "parts" in data else data
        return cls({int(k): int(v) for k, v in parts.items()})


def _describe(shape: Shape) -> str:
    if shape.count <= 32:
        return ",".join(str(s) for s in shape.blocks())
    return " + ".join(f"{s}^{m}" if m > 1 else str(s) for s, m in shape.items)


def _as_int(value, what: str) -> int:
    if isinstance(value, bool):
        raise TypeError(f"{what} must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise TypeError(f"{what} must be an integer, got {value!r}")


def make_shape(sizes: Iterable[int]) -> Shape:
    """Build a canonical shape from a list of part sizes, e.g. ``[2, 1, 1]``."""
    parts: dict[int, int] = {}
    seen = False
    for raw in sizes:
        seen = True
        size = _as_int(raw, "part size")
        if size < 1:
            raise ValueError(f"part sizes must be >= 1, got {size}")
        parts[size] = parts.get(size, 0) + 1
    if not seen:
        raise ValueError("a shape needs at least one part")
    return Shape(parts)


def parse_shape(text: str) -> Shape:
    """Parse a comma-separated literal such as ``"2,1,1"``.

    A ``size^mult`` token is also accepted, e.g. ``"4^3,1"``.
    """
    tokens = [t.strip() for t in text.split(",")]
    if not text.strip() or any(t == "" for t in tokens):
        raise ValueError(f"malformed shape literal {text!r}")
    parts: dict[int, int] = {}
    for tok in tokens:
        base, _, exp = tok.partition("^")
        try:
            size = int(base)
            mult = int(exp) if exp else 1
        except ValueError:
            raise ValueError(f"malformed shape token {tok!r}") from None
        if size < 1 or mult < 1:
            raise ValueError(f"shape tokens must be positive, got {tok!r}")
        parts[size] = parts.get(size, 0) + mult
    return Shape(parts)


def parse_p(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "infinity", "oo"):
        return math.inf
    return float(Fraction(text)) if "/" in text else float(text)


def format_p(p: float) -> str:
    if math.isinf(p):
        return "inf"
    return repr(int(p)) if float(p).is_integer() else repr(float(p))


def _check_p(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ValueError(f"p must be >= 1 (or inf), got {p}")
    return p


def log_p_norm(s: Shape, p: float) -> float:
    """Natural log of ``(sum_k size_k**p)**(1/p)``.

    ``p = 1`` is evaluated exactly from the integer total and ``p = inf`` gives
    the log of the largest part; other exponents use a shifted exponent sum.
    """
    p = _check_p(p)
    if math.isinf(p):
        return math.log(s.max_part)
    if p == 1.0:
        return math.log(s.total)
    return float(logsumexp(s.log_mults + p * s.log_sizes)) / p


def tensor(a: Shape, b: Shape) -> Shape:
    """Shape of the tensor product: all pairwise products of parts."""
    parts: dict[int, int] = {}
    for sa, ma in a.items:
        for sb, mb in b.items:
            key = sa * sb
            parts[key] = parts.get(key, 0) + ma * mb
    return Shape(parts)


def tensor_power(a: Shape, n: int) -> Shape:
    n = _as_int(n, "power")
    if n < 0:
        raise ValueError(f"tensor power must be >= 0, got {n}")
    result = Shape({1: 1})
    base = a
    while n:
        if n & 1:
            result = tensor(result, base)
        n >>= 1
        if n:
            base = tensor(base, base)
    return result


def _ceil_threshold(x) -> int | None:
    """Smallest integer size that is >= the positive threshold ``x``.

    ``None`` means no size qualifies (``x = inf``).
    """
    if isinstance(x, bool):
        raise TypeError("threshold must be a number")
    if isinstance(x, Rational):
        frac = Fraction(x)
    elif isinstance(x, Real):
        xf = float(x)
        if math.isnan(xf):
            raise ValueError("threshold is NaN")
        if xf == math.inf:
            return None
        frac = Fraction(xf)
    else:
        raise TypeError(f"unsupported threshold {x!r}")
    if frac <= 0:
        raise ValueError(f"threshold must be positive, got {x}")
    return math.ceil(frac)


def log_ge(size: int, y) -> bool:
    """Decide ``log(size) >= y`` for an integer size and a real (or rational) ``y``.

    Ordinary floats decide clear cases; near-ties are settled with 200-bit
    arithmetic on the exact value of ``y``.
    """
    ls = math.log(size)
    yf = float(y)
    if abs(ls - yf) > _LOG_CLOSE * max(1.0, abs(yf)):
        return ls > yf
    frac = Fraction(y)
    with mpmath.workprec(200):
        return mpmath.log(size) >= mpmath.mpf(frac.numerator) / frac.denominator


def _sweep(s: Shape, keep) -> tuple[int, int]:
    tail = count = 0
    for size, mult in s.items:
        if not keep(size):
            break
        tail += size * mult
        count += mult
    return tail, count


def tail_ge(s: Shape, x) -> int:
    """Sum of all parts of size at least ``x`` (exact for rational ``x``)."""
    cut = _ceil_threshold(x)
    if cut is None:
        return 0
    return _sweep(s, lambda size: size >= cut)[0]


def part_count_ge(s: Shape, x) -> int:
    """Number of parts (with multiplicity) of size at least ``x``."""
    cut = _ceil_threshold(x)
    if cut is None:
        return 0
    return _sweep(s, lambda size: size >= cut)[1]


def tail_ge_exp(s: Shape, y) -> int:
    """``tail_ge(s, exp(y))`` without rounding ``exp(y)`` to a float."""
    return _sweep(s, lambda size: log_ge(size, y))[0]


def part_count_ge_exp(s: Shape, y) -> int:
    return _sweep(s, lambda size: log_ge(size, y))[1]


def repeat(s: Shape, times: int) -> Shape:
    """Each part repeated ``times`` times (not magnified)."""
    times = _as_int(times, "repeat count")
    if times < 1:
        raise ValueError(f"repeat count must be >= 1, got {times}")
    return Shape({size: mult * times for size, mult in s.items})


def supermajorizes(big: Shape, small: Shape) -> bool:
    """True iff ``small`` is supermajorized by ``big``.

    That is, for every threshold x the parts of ``big`` of size >= x sum to at
    least the parts of ``small`` of size >= x. Both tail sums are step
    functions, and between consecutive sizes of ``small`` its tail is flat
    while the tail of ``big`` can only grow as x decreases, so checking at the
    sizes of ``small`` is enough.
    """
    big_items = big.items
    i = 0
    big_tail = small_tail = 0
    for size, mult in small.items:
        small_tail += size * mult
        while i < len(big_items) and big_items[i][0] >= size:
            big_tail += big_items[i][0] * big_items[i][1]
            i += 1
        if small_tail > big_tail:
            return False
    return True
