"""Embeddings of memories as bin packing, with Bratteli-diagram certificates.

Blocks of ``a`` are packed into bins of ``b``. A diagram may be stored per part
(every row and column count 1) or aggregated, where a row stands for
``row_counts[j]`` identical blocks and a column for ``col_counts[k]``
identical bins that all received the same load. The aggregated form is what
makes certificates for tensor powers feasible.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .budget import BudgetExceeded
from .shapes import Shape

__all__ = [
    "BratteliDiagram",
    "EmbedResult",
    "verify_diagram",
    "embed_search",
    "decide_embed",
    "greedy_embed",
]


@dataclass(frozen=True)
class BratteliDiagram:
    """Edge matrix ``edges[j][k]``: copies of block row ``j`` in each bin of column ``k``."""

    block_sizes_a: tuple[int, ...]
    bin_sizes_b: tuple[int, ...]
    edges: tuple[tuple[int, ...], ...]
    row_counts: tuple[int, ...] = field(default=())
    col_counts: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "block_sizes_a", tuple(self.block_sizes_a))
        object.__setattr__(self, "bin_sizes_b", tuple(self.bin_sizes_b))
        object.__setattr__(self, "edges", tuple(tuple(row) for row in self.edges))
        if not self.row_counts:
            object.__setattr__(self, "row_counts", (1,) * len(self.block_sizes_a))
        if not self.col_counts:
            object.__setattr__(self, "col_counts", (1,) * len(self.bin_sizes_b))
        object.__setattr__(self, "row_counts", tuple(self.row_counts))
        object.__setattr__(self, "col_counts", tuple(self.col_counts))

    @property
    def aggregated(self) -> bool:
        return any(c != 1 for c in self.row_counts + self.col_counts)

    def to_dict(self) -> dict:
        data = {
            "block_sizes_a": [str(s) for s in self.block_sizes_a],
            "bin_sizes_b": [str(s) for s in self.bin_sizes_b],
            "edges": [list(row) for row in self.edges],
        }
        if self.aggregated:
            data["row_counts"] = [str(c) for c in self.row_counts]
            data["col_counts"] = [str(c) for c in self.col_counts]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "BratteliDiagram":
        return cls(
            block_sizes_a=tuple(int(s) for s in data["block_sizes_a"]),
            bin_sizes_b=tuple(int(s) for s in data["bin_sizes_b"]),
            edges=tuple(tuple(int(x) for x in row) for row in data["edges"]),
            row_counts=tuple(int(c) for c in data.get("row_counts", ())),
            col_counts=tuple(int(c) for c in data.get("col_counts", ())),
        )


def _multiset(sizes, counts) -> Counter:
    out: Counter = Counter()
    for s, c in zip(sizes, counts):
        out[s] += c
    return out


def verify_diagram(a: Shape, b: Shape, d: BratteliDiagram) -> bool:
    """Check that ``d`` certifies an embedding of ``a`` into ``b``.

    Every bin must hold at most its size and every block of ``a`` must be
    placed at least once. Raises ``ValueError`` if the rows and columns of the
    diagram do not describe the parts of ``a`` and ``b``.
    """
    rows, cols = len(d.block_sizes_a), len(d.bin_sizes_b)
    if len(d.row_counts) != rows or len(d.col_counts) != cols:
        raise ValueError("row/column counts do not match the diagram size")
    if len(d.edges) != rows or any(len(r) != cols for r in d.edges):
        raise ValueError(f"edge matrix is not {rows}x{cols}")
    if any(c < 1 for c in d.row_counts + d.col_counts):
        raise ValueError("row and column counts must be positive")
    if _multiset(d.block_sizes_a, d.row_counts) != Counter(a.parts):
        raise ValueError("diagram rows do not match the parts of a")
    if _multiset(d.bin_sizes_b, d.col_counts) != Counter(b.parts):
        raise ValueError("diagram columns do not match the parts of b")

    for row in d.edges:
        if any(x < 0 for x in row):
            return False
    for k, bin_size in enumerate(d.bin_sizes_b):
        load = sum(d.edges[j][k] * d.block_sizes_a[j] for j in range(rows))
        if load > bin_size:
            return False
    for j in range(rows):
        placed = sum(d.edges[j][k] * d.col_counts[k] for k in range(cols))
        if placed < d.row_counts[j]:
            return False
    return True


@dataclass(frozen=True)
class EmbedResult:
    """Outcome of the exact search; ``embeddable`` is None when the budget ran out."""

    embeddable: bool | None
    diagram: BratteliDiagram | None
    nodes_explored: int


def _fits_supermajorized(blocks: list[int], start: int, residual: list[int]) -> bool:
    # Remaining blocks must be supermajorized by the residual capacities,
    # checked at the block sizes (descending).
    caps = sorted((r for r in residual if r > 0), reverse=True)
    i = cap_tail = block_tail = 0
    n = len(blocks)
    pos = start
    while pos < n:
        size = blocks[pos]
        while pos < n and blocks[pos] == size:
            block_tail += size
            pos += 1
        while i < len(caps) and caps[i] >= size:
            cap_tail += caps[i]
            i += 1
        if block_tail > cap_tail:
            return False
    return True


def embed_search(a: Shape, b: Shape, node_budget: int | None = None) -> EmbedResult:
    """Exact branch-and-bound search for a packing of ``a`` into ``b``.

    Blocks are placed one at a time, largest first, each exactly once. A
    branch is a choice among bins with distinct residual capacity (bins with
    equal residual are interchangeable), tried from the tightest fit upwards.
    Branches are cut when the remaining blocks are not supermajorized by the
    residual capacities, and failed states are memoized.
    """
    blocks = list(a.blocks())
    bins = list(b.blocks())
    if a.total > b.total or a.max_part > b.max_part:
        return EmbedResult(False, None, 0)

    residual = list(bins)
    choice = [0] * len(blocks)
    failed: set[tuple] = set()
    nodes = 0

    def search(i: int) -> bool:
        nonlocal nodes
        if i == len(blocks):
            return True
        nodes += 1
        if node_budget is not None and nodes > node_budget:
            raise BudgetExceeded(f"node budget {node_budget} exhausted")
        key = (i, tuple(sorted(residual)))
        if key in failed:
            return False
        if not _fits_supermajorized(blocks, i, residual):
            failed.add(key)
            return False
        size = blocks[i]
        tried = set()
        order = sorted(range(len(bins)), key=lambda k: (residual[k], k))
        for k in order:
            cap = residual[k]
            if cap < size or cap in tried:
                continue
            tried.add(cap)
            residual[k] -= size
            choice[i] = k
            if search(i + 1):
                return True
            residual[k] += size
        failed.add(key)
        return False

    try:
        found = search(0)
    except BudgetExceeded:
        return EmbedResult(None, None, nodes)
    if not found:
        return EmbedResult(False, None, nodes)
    edges = [[0] * len(bins) for _ in blocks]
    for j, k in enumerate(choice):
        edges[j][k] = 1
    return EmbedResult(True, BratteliDiagram(tuple(blocks), tuple(bins), edges), nodes)


def decide_embed(a: Shape, b: Shape, node_budget: int | None = None) -> BratteliDiagram | None:
    """Certificate of ``a`` embedding in ``b``, or None if there is none.

    Raises :class:`BudgetExceeded` when the search exceeds ``node_budget``.
    """
    result = embed_search(a, b, node_budget)
    if result.embeddable is None:
        raise BudgetExceeded(f"embedding search exceeded {node_budget} nodes")
    return result.diagram


def _greedy_classes(a: Shape, b: Shape):
    # Bin classes: [residual, bin size, load, count]; load is a tuple of
    # (block size, copies) pairs. Blocks go largest first into the tightest
    # fitting class; a bin keeps taking copies until it no longer fits one.
    classes: list[list] = [[s, s, (), m] for s, m in reversed(b.items)]
    for size, mult in a.items:
        left = mult
        while left:
            fitting = [c for c in classes if c[0] >= size and c[3] > 0]
            if not fitting:
                return None
            cls = min(fitting, key=lambda c: (c[0], -c[1], c[2]))
            per_bin = cls[0] // size
            full = min(cls[3], left // per_bin)
            new = []
            if full:
                new.append([cls[0] - per_bin * size, cls[1], cls[2] + ((size, per_bin),), full])
                cls[3] -= full
                left -= full * per_bin
            if left and cls[3]:
                new.append([cls[0] - left * size, cls[1], cls[2] + ((size, left),), 1])
                cls[3] -= 1
                left = 0
            classes = [c for c in classes if c[3] > 0] + new
            merged: dict[tuple, int] = {}
            for c in classes:
                key = (c[0], c[1], c[2])
                merged[key] = merged.get(key, 0) + c[3]
            classes = [[r, s, load, n] for (r, s, load), n in merged.items()]
    return classes


def greedy_embed(a: Shape, b: Shape, compressed: bool = False) -> BratteliDiagram | None:
    """Greedy packing: largest block first, into the tightest bin where it fits.

    Guaranteed to succeed when ``b`` supermajorizes ``a`` with every part
    repeated twice. With ``compressed=True`` the certificate is aggregated by
    (block size, bin load) class, which is the only practical form for tensor
    powers.
    """
    classes = _greedy_classes(a, b)
    if classes is None:
        return None
    classes.sort(key=lambda c: (-c[1], c[2], c[0]))
    row_sizes = [s for s, _ in a.items]
    row_index = {s: j for j, s in enumerate(row_sizes)}
    if compressed:
        edges = [[0] * len(classes) for _ in row_sizes]
        for k, (_, _, load, _) in enumerate(classes):
            for size, copies in load:
                edges[row_index[size]][k] += copies
        return BratteliDiagram(
            tuple(row_sizes),
            tuple(c[1] for c in classes),
            edges,
            row_counts=tuple(m for _, m in a.items),
            col_counts=tuple(c[3] for c in classes),
        )

    blocks = list(a.blocks())
    bins: list[int] = []
    loads: list[tuple] = []
    for _, bin_size, load, count in classes:
        bins.extend([bin_size] * count)
        loads.extend([load] * count)
    edges = [[0] * len(bins) for _ in blocks]
    next_row: dict[int, int] = {}
    for j, size in enumerate(blocks):
        next_row.setdefault(size, j)
    for k, load in enumerate(loads):
        for size, copies in load:
            for _ in range(copies):
                edges[next_row[size]][k] = 1
                next_row[size] += 1
    return BratteliDiagram(tuple(blocks), tuple(bins), edges)
