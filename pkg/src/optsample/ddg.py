"""Entropy-optimal DDG samplers: probability matrix, pseudotree, linear encoding.

The tree for a ``Z_kl``-type distribution has a leaf labelled ``i`` at level
``j + 1`` exactly when bit ``j`` of the expansion of ``M_i / Z`` is set.  When
``l < k`` the branches left at level ``k - 1`` loop back to the level-``l``
branches, giving a finite graph for the repeating suffix.

Outcome labels inside trees and encodings are 1-based (a leaf cell holds the
negated label); everything returned to callers is 0-based.
"""

from __future__ import annotations

import json
import struct
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from .numsys import DegenerateDistributionError, PrecisionSpec, encode_numsys, z_kl
from .optimize import Assignment

ENTROPY_BITS = 128
_MAGIC = b"DDG1"


class MalformedError(ValueError):
    """A matrix or encoding does not describe a DDG tree that halts."""


@dataclass(frozen=True)
class ProbabilityMatrix:
    """``n x k`` bit matrix; row ``i`` is the expansion of ``M_i / Z_kl``."""

    bits: tuple[tuple[int, ...], ...]
    k: int
    l: int

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def spec(self) -> PrecisionSpec:
        return PrecisionSpec(self.k, self.l)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.int64).reshape(self.n, self.k)


def build_matrix(M: Assignment, spec: PrecisionSpec) -> ProbabilityMatrix:
    """Prefix/suffix expansion of every ``M_i / Z_kl``, one row per outcome."""
    Z = z_kl(spec)
    if M.Z != Z:
        raise ValueError(f"assignment has Z={M.Z} but ({spec.k}, {spec.l}) needs Z={Z}")
    if any(m == Z for m in M.M):
        raise DegenerateDistributionError("one outcome has probability 1; use the trivial sampler")
    rows = []
    for m in M.M:
        exp = encode_numsys(m, spec)
        rows.append(exp.prefix + exp.suffix)
    return ProbabilityMatrix(tuple(rows), spec.k, spec.l)


class DdgNode:
    """Tree node; ``label`` is a 1-based outcome for leaves and ``None`` for branches."""

    __slots__ = ("label", "left", "right", "loc", "level")

    def __init__(self, level: int, label: int | None = None):
        self.label = label
        self.left: DdgNode | None = None
        self.right: DdgNode | None = None
        self.loc: int | None = None
        self.level = level

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def __repr__(self):
        if self.is_leaf:
            return f"DdgNode(leaf {self.label}, level {self.level})"
        return f"DdgNode(branch, level {self.level})"


def _level(i: int) -> int:
    return (i + 1).bit_length() - 1


@contextmanager
def _deep_recursion(depth: int):
    # both builder and packer recurse once per level
    limit = sys.getrecursionlimit()
    if limit < depth + 100:
        sys.setrecursionlimit(depth + 100)
    try:
        yield
    finally:
        sys.setrecursionlimit(limit)


def make_leaf_table(P: ProbabilityMatrix) -> dict[int, int]:
    """Map heap-order node indices to 1-based outcome labels."""
    table: dict[int, int] = {}
    i = 2
    for c in range(P.k):
        first = (1 << (c + 1)) - 1
        for r in range(P.n):
            if P.bits[r][c]:
                if i < first:
                    raise MalformedError(f"level {c + 1} has more leaves than free nodes")
                table[i] = r + 1
                i -= 1
        i = 2 * i + 2
    return table


def make_tree(P: ProbabilityMatrix) -> DdgNode:
    """Build the (pseudo)tree for ``P``; returns the root."""
    k, l = P.k, P.l
    leaves = make_leaf_table(P)
    ancestors: list[DdgNode] = []

    def pop_ancestor() -> DdgNode:
        if not ancestors:
            raise MalformedError("no level-l ancestor left for a back-edge")
        return ancestors.pop(0)

    def build(i: int) -> DdgNode:
        level = _level(i)
        if i in leaves:
            return DdgNode(level, leaves[i])
        if level >= k:
            raise MalformedError(f"branch below level {k}: column sums do not describe a tree")
        node = DdgNode(level)
        if level == l:
            ancestors.append(node)
        last = level == k - 1
        node.right = pop_ancestor() if last and (2 * i + 2) not in leaves else build(2 * i + 2)
        node.left = pop_ancestor() if last and (2 * i + 1) not in leaves else build(2 * i + 1)
        return node

    with _deep_recursion(k):
        root = build(0)
    if ancestors:
        raise MalformedError(f"{len(ancestors)} level-l ancestors were never targeted")
    return root


def _walk(root: DdgNode):
    """Each distinct node once, depth first, left before right."""
    seen = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        if not node.is_leaf:
            stack.append(node.right)
            stack.append(node.left)


def leaf_levels(root: DdgNode) -> list[tuple[int, int]]:
    """``(outcome, level)`` of every leaf, outcome 0-based."""
    return sorted((n.label - 1, n.level) for n in _walk(root) if n.is_leaf)


def back_edges(root: DdgNode) -> list[tuple[int, int]]:
    """``(source level, target level)`` of every edge that does not go one level down."""
    out = []
    for node in _walk(root):
        if node.is_leaf:
            continue
        for child in (node.left, node.right):
            if child.level != node.level + 1:
                out.append((node.level, child.level))
    return out


@dataclass(frozen=True, eq=False)
class LinearEncoding:
    """Flat cell array of a DDG tree.

    A leaf cell holds ``-label``; a branch at cell ``c`` holds the cells of its
    left and right children at ``c`` and ``c + 1``.
    """

    enc: np.ndarray
    n: int
    k: int
    l: int

    def __post_init__(self):
        arr = np.array(self.enc, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "enc", arr)
        if arr.ndim != 1 or arr.size == 0:
            raise MalformedError("encoding must be a non-empty flat array")
        if arr.min() < -self.n:
            raise MalformedError(f"leaf label out of range for n={self.n}")

    def __len__(self):
        return int(self.enc.size)

    def __eq__(self, other):
        if not isinstance(other, LinearEncoding):
            return NotImplemented
        return (self.n, self.k, self.l) == (other.n, other.k, other.l) and np.array_equal(self.enc, other.enc)

    @property
    def degenerate(self) -> bool:
        return self.enc[0] < 0

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "k": self.k, "l": self.l, "enc": [int(x) for x in self.enc]})

    @classmethod
    def from_json(cls, text: str) -> "LinearEncoding":
        data = json.loads(text)
        try:
            return cls(np.array(data["enc"], dtype=np.int64), int(data["n"]), int(data["k"]), int(data["l"]))
        except KeyError as exc:
            raise MalformedError(f"encoding JSON lacks field {exc}") from None

    def to_bytes(self) -> bytes:
        head = _MAGIC + struct.pack("<4I", self.n, self.k, self.l, len(self))
        return head + self.enc.astype("<i8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "LinearEncoding":
        if blob[:4] != _MAGIC:
            raise MalformedError("not a DDG1 encoding")
        n, k, l, size = struct.unpack_from("<4I", blob, 4)
        body = blob[20:]
        if len(body) != 8 * size:
            raise MalformedError(f"expected {size} cells, found {len(body) / 8:g}")
        return cls(np.frombuffer(body, dtype="<i8").astype(np.int64), n, k, l)


def pack_tree(root: DdgNode, n: int | None = None, spec: PrecisionSpec | None = None) -> LinearEncoding:
    """Lay the tree out in a flat array, reusing cells for back-edge targets."""
    nodes = list(_walk(root))
    for node in nodes:
        node.loc = None
    if n is None:
        n = max((node.label for node in nodes if node.is_leaf), default=1)
    if spec is None:
        depth = max(node.level for node in nodes)
        spec = PrecisionSpec(max(depth, 1), max(depth, 1))
    enc: dict[int, int] = {}

    def pack(node: DdgNode, offset: int) -> int:
        node.loc = offset
        if node.is_leaf:
            enc[offset] = -node.label
            return offset + 1
        if node.left.loc is not None:
            enc[offset] = node.left.loc
            w = offset + 2
        else:
            enc[offset] = offset + 2
            w = pack(node.left, offset + 2)
        if node.right.loc is not None:
            enc[offset + 1] = node.right.loc
        else:
            enc[offset + 1] = w
            w = pack(node.right, w)
        return w

    with _deep_recursion(max(node.level for node in nodes)):
        size = pack(root, 0)
    cap = max(3 * n * spec.k, 1)
    if size > cap:
        raise MalformedError(f"encoding has {size} cells, above the {cap}-cell bound")
    arr = np.zeros(size, dtype=np.int64)
    for i, v in enc.items():
        arr[i] = v
    return LinearEncoding(arr, n, spec.k, spec.l)


def degenerate_encoding(outcome: int, n: int, spec: PrecisionSpec | None = None) -> LinearEncoding:
    """One-cell encoding that returns ``outcome`` (0-based) without reading any bits."""
    spec = spec or PrecisionSpec(1, 1)
    return LinearEncoding(np.array([-(outcome + 1)], dtype=np.int64), n, spec.k, spec.l)


def build_encoding(M: Assignment, spec: PrecisionSpec) -> LinearEncoding:
    """Matrix, tree and packing in one go; degenerate assignments get the one-cell encoding."""
    if M.Z != z_kl(spec):
        raise ValueError(f"assignment has Z={M.Z} but ({spec.k}, {spec.l}) needs Z={z_kl(spec)}")
    for i, m in enumerate(M.M):
        if m == M.Z:
            return degenerate_encoding(i, M.n, spec)
    return pack_tree(make_tree(build_matrix(M, spec)), M.n, spec)


def _solve(enc: LinearEncoding) -> tuple[list[Fraction], Fraction]:
    """Absorption probabilities and expected branch visits from cell 0.

    Each branch cell ``s`` gives ``x_s = 1 + (x_left + x_right) / 2`` over the
    vector (outcome indicators, steps).  Cells are eliminated from the highest
    index down, so an equation only ever mentions back-edge targets.
    """
    cells = enc.enc
    size = len(enc)
    n = enc.n
    if cells[0] < 0:
        dist = [Fraction(0)] * n
        dist[-int(cells[0]) - 1] = Fraction(1)
        return dist, Fraction(0)

    half = Fraction(1, 2)
    const: dict[int, dict] = {}
    coef: dict[int, dict[int, Fraction]] = {}
    users: dict[int, set[int]] = {}
    stack = [0]
    while stack:
        s = stack.pop()
        if s in const:
            continue
        if s + 1 >= size:
            raise MalformedError(f"branch at cell {s} runs off the end of the encoding")
        c: dict = {"bits": Fraction(1)}
        a: dict[int, Fraction] = {}
        for child in (int(cells[s]), int(cells[s + 1])):
            if not 0 <= child < size:
                raise MalformedError(f"cell {s} points outside the encoding")
            if cells[child] < 0:
                label = -int(cells[child]) - 1
                c[label] = c.get(label, 0) + half
            else:
                a[child] = a.get(child, 0) + half
                users.setdefault(child, set()).add(s)
                stack.append(child)
        const[s], coef[s] = c, a

    done = set()
    for s in sorted(const, reverse=True):
        if s == 0:
            break
        c, a = const[s], coef[s]
        q = a.pop(s, Fraction(0))
        users.get(s, set()).discard(s)
        if q:
            if q == 1:
                raise MalformedError(f"cell {s} can never reach a leaf")
            scale = 1 / (1 - q)
            for key in c:
                c[key] *= scale
            for key in a:
                a[key] *= scale
        done.add(s)
        for u in users.pop(s, ()):
            if u in done:
                continue
            w = coef[u].pop(s)
            cu, au = const[u], coef[u]
            for key, v in c.items():
                cu[key] = cu.get(key, 0) + w * v
            for t, v in a.items():
                au[t] = au.get(t, 0) + w * v
                users.setdefault(t, set()).add(u)
        for t in a:
            users.get(t, set()).discard(s)

    c, a = const[0], coef[0]
    q = a.pop(0, Fraction(0))
    if a:
        raise MalformedError("elimination left unresolved references")
    if q == 1:
        raise MalformedError("cell 0 can never reach a leaf")
    scale = 1 / (1 - q)
    dist = [Fraction(c.get(i, 0)) * scale for i in range(n)]
    bits = c["bits"] * scale
    if sum(dist) != 1:
        raise MalformedError(f"output distribution sums to {sum(dist)}: some paths never halt")
    return dist, bits


def exact_output_distribution(enc: LinearEncoding) -> list[Fraction]:
    """Probability of each outcome (0-based) when traversing with fair bits."""
    return _solve(enc)[0]


def expected_bits(enc: LinearEncoding) -> Fraction:
    """Expected number of bits consumed per sample."""
    return _solve(enc)[1]


def shannon_entropy(dist: Sequence[Fraction], bits: int = ENTROPY_BITS):
    """``sum p log2(1/p)`` as an MPFR float."""
    with gmpy2.context(precision=bits):
        total = gmpy2.mpfr(0)
        for x in dist:
            x = Fraction(x)
            if x:
                px = gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
                total -= px * gmpy2.log2(px)
        return total


@dataclass(frozen=True)
class AnalysisReport:
    output_distribution: list[Fraction]
    expected_bits: Fraction
    entropy: object

    def to_dict(self) -> dict:
        return {
            "output_distribution": [str(x) for x in self.output_distribution],
            "expected_bits": str(self.expected_bits),
            "expected_bits_decimal": f"{float(self.expected_bits):.12g}",
            "entropy": f"{float(self.entropy):.17g}",
        }


def analyze(enc: LinearEncoding) -> AnalysisReport:
    dist, bits = _solve(enc)
    return AnalysisReport(dist, bits, shannon_entropy(dist))
