"""Iterated function systems of ordered similarities on [0, 1] and their gaps.

A system is a list of maps ``psi_i(x) = r_i * x + t_i`` whose images
``psi_i[0, 1]`` are disjoint, ordered left to right and separated by strictly
positive gaps ``E_i``.  The complement of the attractor in [0, 1] is the
union of the images ``psi_w(E_i)`` over all finite words ``w``; those are the
gap intervals enumerated here.

Letters and gap indices are 0-based throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BoundaryError,
    CapacityError,
    OverlapError,
    RatioError,
    ZeroGapError,
)

DEFAULT_CAPACITY = 10**8

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IfsSystem:
    """Validated system; build it with :func:`validate_ifs`."""

    ratios: tuple[float, ...]
    translations: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.ratios)

    @property
    def gaps(self) -> tuple[tuple[float, float, float], ...]:
        """``(left, right, length)`` of each first-level gap ``E_i``."""
        out = []
        for i in range(self.m - 1):
            left = self.translations[i] + self.ratios[i]
            right = self.translations[i + 1]
            out.append((left, right, right - left))
        return tuple(out)

    @property
    def gap_lengths(self) -> np.ndarray:
        return np.array([g[2] for g in self.gaps])

    @property
    def gap_lefts(self) -> np.ndarray:
        return np.array([g[0] for g in self.gaps])

    @property
    def max_gap(self) -> float:
        return float(self.gap_lengths.max())

    @property
    def min_gap(self) -> float:
        return float(self.gap_lengths.min())

    @property
    def min_ratio(self) -> float:
        return min(self.ratios)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    @classmethod
    def from_ratios_and_gaps(cls, ratios: Sequence[float], gaps: Sequence[float]) -> "IfsSystem":
        """Lay out cells of the given ratios left to right with the given gaps."""
        if len(gaps) != len(ratios) - 1:
            raise ValueError("need exactly one gap between consecutive cells")
        raw = []
        t = 0.0
        for i, r in enumerate(ratios):
            raw.append((r, t))
            if i < len(gaps):
                t = t + r + gaps[i]
        return validate_ifs(raw)

    def similarity_dimension(self, tol: float = 1e-14) -> float:
        """Root ``s`` of ``sum r_i**s = 1``."""
        from scipy.optimize import brentq

        logr = np.log(self.ratios)
        return brentq(lambda s: float(np.exp(s * logr).sum()) - 1.0, 0.0, 1.0, xtol=tol)

    def to_raw(self) -> list[tuple[float, float]]:
        return list(zip(self.ratios, self.translations))


@dataclass(frozen=True)
class Word:
    """Finite word ``(i_1, ..., i_k)`` addressing the cell ``psi_{i_1} o ... o psi_{i_k}[0, 1]``."""

    letters: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def extend(self, j: int) -> "Word":
        return Word(self.letters + (j,))

    def ratio(self, ifs: IfsSystem) -> float:
        out = 1.0
        for i in self.letters:
            out = out * ifs.ratios[i]
        return out

    def apply(self, ifs: IfsSystem, x: float) -> float:
        for i in reversed(self.letters):
            x = ifs.ratios[i] * x + ifs.translations[i]
        return x

    def cell(self, ifs: IfsSystem) -> tuple[float, float]:
        # same accumulation order as the enumerator, so endpoints agree bitwise
        ratio, offset = 1.0, 0.0
        for i in self.letters:
            offset = offset + ratio * ifs.translations[i]
            ratio = ratio * ifs.ratios[i]
        return offset, offset + ratio


@dataclass(frozen=True)
class GapInterval:
    id: int
    left: float
    right: float
    length: float
    word: Word
    gap_index: int


def validate_ifs(raw: Sequence[Sequence[float]]) -> IfsSystem:
    """Check a list of ``(ratio, translation)`` pairs and build the system.

    Raises
    ------
    RatioError
        A ratio lies outside (0, 1).
    BoundaryError
        ``psi_1(0) != 0`` or ``psi_m(1) != 1``.
    OverlapError
        Two cells intersect or appear out of order.
    ZeroGapError
        Two consecutive cells touch.
    """
    if len(raw) == 0:
        raise ValueError("an IFS needs at least one map")
    pairs = []
    for item in raw:
        if len(item) != 2:
            raise ValueError(f"expected (ratio, translation), got {item!r}")
        pairs.append((float(item[0]), float(item[1])))
    for r, _ in pairs:
        if not (0.0 < r < 1.0):
            raise RatioError(f"ratio {r} not in (0, 1)")
    if len(pairs) < 2:
        raise BoundaryError("a single contraction cannot map [0, 1] onto itself")
    ratios = tuple(p[0] for p in pairs)
    trans = tuple(p[1] for p in pairs)
    if abs(trans[0]) > 4 * _EPS:
        raise BoundaryError(f"psi_1(0) = {trans[0]} != 0")
    if abs(trans[-1] + ratios[-1] - 1.0) > 4 * _EPS:
        raise BoundaryError(f"psi_m(1) = {trans[-1] + ratios[-1]} != 1")
    for i in range(len(pairs) - 1):
        if trans[i + 1] <= trans[i]:
            raise OverlapError(f"cells {i} and {i + 1} are out of order")
        gap = trans[i + 1] - (trans[i] + ratios[i])
        if gap < 0:
            raise OverlapError(f"cells {i} and {i + 1} overlap by {-gap}")
        if gap == 0:
            raise ZeroGapError(f"cells {i} and {i + 1} touch; gaps must be strictly positive")
    trans = (0.0,) + trans[1:]
    return IfsSystem(ratios, trans)


@dataclass(frozen=True)
class GapTable:
    """Column store of enumerated gaps, sorted by decreasing length then left endpoint.

    ``level`` and ``slot`` locate the generating word in ``word_levels``; the
    word of a gap is rebuilt on demand with :meth:`word`.
    """

    left: np.ndarray
    length: np.ndarray
    gap_index: np.ndarray
    first: np.ndarray  # first letter of the word, -1 for the empty word
    depth: np.ndarray
    slot: np.ndarray
    word_levels: tuple  # per depth: (parent slot, letter) arrays
    delta: float

    def __len__(self) -> int:
        return int(self.length.size)

    @property
    def right(self) -> np.ndarray:
        return self.left + self.length

    def word(self, k: int) -> Word:
        d = int(self.depth[k])
        s = int(self.slot[k])
        letters = []
        while d > 0:
            parent, letter = self.word_levels[d]
            letters.append(int(letter[s]))
            s = int(parent[s])
            d -= 1
        return Word(tuple(reversed(letters)))


def gap_table(ifs: IfsSystem, delta: float, capacity: int = DEFAULT_CAPACITY) -> GapTable:
    """Enumerate every gap ``psi_w(E_i)`` of length ``>= delta``.

    Words are explored breadth first and a word is pruned as soon as
    ``r_w * max(eps) < delta``.  Word ratios are accumulated left to right so
    each stored length is exactly ``r_w * eps_i`` as computed from the word.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    r = np.asarray(ifs.ratios)
    t = np.asarray(ifs.translations)
    eps = ifs.gap_lengths
    e_left = ifs.gap_lefts
    max_eps = eps.max()

    ratio = np.array([1.0])
    offset = np.array([0.0])
    first = np.array([-1])
    word_levels: list = [(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))]
    chunks = []
    total = 0
    depth = 0
    while ratio.size:
        lens = ratio[:, None] * eps[None, :]
        w, g = np.nonzero(lens >= delta)
        total += w.size
        if total > capacity:
            raise CapacityError(f"more than {capacity} gaps above delta={delta}")
        chunks.append((
            offset[w] + ratio[w] * e_left[g],
            lens[w, g],
            g,
            first[w],
            np.full(w.size, depth),
            w,
        ))
        child = ratio[:, None] * r[None, :]
        pw, j = np.nonzero(child * max_eps >= delta)
        if pw.size > capacity:
            raise CapacityError(f"more than {capacity} live words above delta={delta}")
        offset = offset[pw] + ratio[pw] * t[j]
        ratio = child[pw, j]
        first = np.where(first[pw] < 0, j, first[pw])
        depth += 1
        word_levels.append((pw, j))

    cols = [np.concatenate([c[k] for c in chunks]) for k in range(6)]
    left, length, gidx, fst, dep, slot = cols
    order = np.lexsort((left, -length))
    return GapTable(
        left=left[order],
        length=length[order],
        gap_index=gidx[order].astype(np.int64),
        first=fst[order].astype(np.int64),
        depth=dep[order].astype(np.int64),
        slot=slot[order].astype(np.int64),
        word_levels=tuple(word_levels),
        delta=float(delta),
    )


def enumerate_gaps(ifs: IfsSystem, delta: float, capacity: int = DEFAULT_CAPACITY) -> list[GapInterval]:
    """Gaps of length ``>= delta`` as objects, longest first, ties by left endpoint."""
    tab = gap_table(ifs, delta, capacity)
    return [
        GapInterval(
            id=k,
            left=float(tab.left[k]),
            right=float(tab.left[k] + tab.length[k]),
            length=float(tab.length[k]),
            word=tab.word(k),
            gap_index=int(tab.gap_index[k]),
        )
        for k in range(len(tab))
    ]


def gap_count_profile(
    ifs: IfsSystem, deltas: Sequence[float], capacity: int = DEFAULT_CAPACITY
) -> list[tuple[float, int]]:
    """``N(delta)``, the number of gaps of length ``>= delta``, for each cutoff."""
    d = np.asarray(deltas, dtype=float)
    if d.size == 0:
        return []
    if np.any(d <= 0):
        raise ValueError("cutoffs must be positive")
    if np.any(np.diff(d) >= 0):
        raise ValueError("cutoffs must be strictly decreasing")
    # only the ratios r_w matter, so walk them level by level without positions
    eps = np.asarray(ifs.gap_lengths)
    r = np.asarray(ifs.ratios)
    d_min = float(d[-1])
    counts = np.zeros(d.size, dtype=np.int64)
    total = 0
    level = np.array([1.0])
    while level.size:
        lengths = np.multiply.outer(level, eps).ravel()
        lengths = lengths[lengths >= d_min]
        total += lengths.size
        if total > capacity:
            raise CapacityError(f"more than {capacity} gaps of length >= {d_min}")
        counts += lengths.size - np.searchsorted(np.sort(lengths), d, side="left")
        level = np.multiply.outer(level, r).ravel()
        level = level[level * ifs.max_gap >= d_min]
    return [(float(x), int(n)) for x, n in zip(d, counts)]


def net_cells(ifs: IfsSystem, depth: int, weights: Sequence[float] | None = None):
    """Offsets, ratios and (optionally) weights of all cells ``psi_w[0, 1]`` with ``|w| = depth``.

    Cells come out in left-to-right order.
    """
    r = np.asarray(ifs.ratios)
    t = np.asarray(ifs.translations)
    p = None if weights is None else np.asarray(weights, dtype=float)
    ratio = np.array([1.0])
    offset = np.array([0.0])
    weight = np.array([1.0])
    for _ in range(depth):
        offset = (offset[:, None] + ratio[:, None] * t[None, :]).ravel()
        ratio = (ratio[:, None] * r[None, :]).ravel()
        if p is not None:
            weight = (weight[:, None] * p[None, :]).ravel()
    if p is None:
        return offset, ratio
    return offset, ratio, weight
