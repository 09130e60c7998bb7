"""Dyadic lattice geometry on a bounded 1-D domain.

The domain ``[0, length)`` is split into ``N = 2**depth`` equal cells.  Cubes
are intervals made of whole cells.  Three lattices are available: shift 0 is
the standard dyadic tree, shifts 1 and 2 displace the cube boundaries at each
level by roughly one and two thirds of the side length (alternating in sign
from level to level, which keeps every lattice nested).  Cubes of a shifted
lattice that stick out of the domain are clamped to it.

Cell indices are used everywhere internally; a cube or interval is turned into
a half-open cell range ``(lo, hi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

SHIFTS = (0, 1, 2)


def jacobsthal(j: int) -> int:
    """Integer nearest to 2**j / 3 with the parity that keeps shifts nested."""
    return (2**j - (-1) ** j) // 3


@dataclass(frozen=True, order=True)
class DyadicCube:
    shift: int
    level: int
    index: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.shift, self.level, self.index)


Interval = tuple[int, int]
CubeLike = Union[DyadicCube, Interval, Sequence[int]]


class CubeSet:
    """Deduplicated cubes in deterministic (shift, level, index) order."""

    __slots__ = ("_cubes",)

    def __init__(self, cubes: Iterable[DyadicCube] = ()):
        self._cubes = tuple(sorted(set(cubes)))

    def __iter__(self) -> Iterator[DyadicCube]:
        return iter(self._cubes)

    def __len__(self) -> int:
        return len(self._cubes)

    def __getitem__(self, i):
        return self._cubes[i]

    def __contains__(self, cube) -> bool:
        return cube in set(self._cubes)

    def __eq__(self, other) -> bool:
        if isinstance(other, CubeSet):
            return self._cubes == other._cubes
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._cubes)

    def __repr__(self) -> str:
        return f"CubeSet({list(self._cubes)!r})"

    @property
    def shifts(self) -> set[int]:
        return {c.shift for c in self._cubes}


@dataclass(frozen=True)
class Domain:
    depth: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError("depth must be an integer >= 1")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def n_cells(self) -> int:
        return 2**self.depth

    @property
    def cell_measure(self) -> float:
        return self.length / self.n_cells

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.cell_measure

    # -- lattice bookkeeping -------------------------------------------------

    def side_cells(self, level: int) -> int:
        return 2 ** (self.depth - level)

    def offset(self, shift: int, level: int) -> int:
        """Position (in cells, reduced mod side) of the lattice boundaries."""
        _check_shift(shift)
        c = self.side_cells(level)
        sign = 1 if level % 2 == 0 else -1
        return (shift * sign * jacobsthal(self.depth - level)) % c

    def cube_count(self, shift: int, level: int) -> int:
        return 2**level + (1 if self.offset(shift, level) else 0)

    def cube_range(self, cube: CubeLike) -> Interval:
        if not isinstance(cube, DyadicCube):
            lo, hi = int(cube[0]), int(cube[1])
            if not 0 <= lo < hi <= self.n_cells:
                raise ValueError(f"empty or out-of-domain interval {(lo, hi)}")
            return lo, hi
        self._check_cube(cube)
        c = self.side_cells(cube.level)
        off = self.offset(cube.shift, cube.level)
        if off == 0:
            return cube.index * c, (cube.index + 1) * c
        lo = max(0, off + (cube.index - 1) * c)
        hi = min(self.n_cells, off + cube.index * c)
        return lo, hi

    def measure(self, cube: CubeLike) -> float:
        lo, hi = self.cube_range(cube)
        return (hi - lo) * self.cell_measure

    def cube_at(self, shift: int, level: int, cell: int) -> DyadicCube:
        """The cube of the given lattice and level containing ``cell``."""
        c = self.side_cells(level)
        off = self.offset(shift, level)
        if off == 0:
            return DyadicCube(shift, level, cell // c)
        return DyadicCube(shift, level, (cell - off) // c + 1)

    def level_ranges(self, shift: int, level: int) -> tuple[np.ndarray, np.ndarray]:
        return _level_ranges(self.depth, shift, level)

    def cubes(self, shift: int, level: int | None = None) -> CubeSet:
        levels = range(self.depth + 1) if level is None else [level]
        return CubeSet(
            DyadicCube(shift, k, i) for k in levels for i in range(self.cube_count(shift, k))
        )

    def top_cubes(self, shift: int = 0) -> CubeSet:
        return self.cubes(shift, 0)

    def _check_cube(self, cube: DyadicCube) -> None:
        _check_shift(cube.shift)
        if not 0 <= cube.level <= self.depth:
            raise ValueError(f"level {cube.level} outside [0, {self.depth}]")
        if not 0 <= cube.index < self.cube_count(cube.shift, cube.level):
            raise ValueError(f"index {cube.index} invalid for {cube}")

    # -- tree navigation -----------------------------------------------------

    def children(self, cube: DyadicCube) -> CubeSet:
        if cube.level >= self.depth:
            raise ValueError("leaf cube")
        lo, hi = self.cube_range(cube)
        first = self.cube_at(cube.shift, cube.level + 1, lo)
        last = self.cube_at(cube.shift, cube.level + 1, hi - 1)
        return CubeSet(
            DyadicCube(cube.shift, cube.level + 1, i) for i in range(first.index, last.index + 1)
        )

    def parent(self, cube: DyadicCube) -> DyadicCube:
        if cube.level == 0:
            raise ValueError("top cube has no parent")
        lo, _ = self.cube_range(cube)
        return self.cube_at(cube.shift, cube.level - 1, lo)

    def descendants(self, cube: DyadicCube) -> list[DyadicCube]:
        """All cubes of the same lattice contained in ``cube`` (itself included)."""
        lo, hi = self.cube_range(cube)
        out = []
        for k in range(cube.level, self.depth + 1):
            a = self.cube_at(cube.shift, k, lo).index
            b = self.cube_at(cube.shift, k, hi - 1).index
            out.extend(DyadicCube(cube.shift, k, i) for i in range(a, b + 1))
        return out

    def contains(self, outer: CubeLike, inner: CubeLike) -> bool:
        a, b = self.cube_range(outer)
        c, d = self.cube_range(inner)
        return a <= c and d <= b

    # -- dilations -----------------------------------------------------------

    def triple(self, cube: CubeLike) -> Interval:
        """Concentric 3Q clamped to the domain, as a cell range."""
        lo, hi = self.cube_range(cube)
        side = hi - lo
        return max(0, lo - side), min(self.n_cells, hi + side)

    def containing_cube(self, cube: CubeLike) -> DyadicCube:
        """Smallest cube of the three lattices containing the given range.

        Ties go to the lower shift.
        """
        lo, hi = self.cube_range(cube)
        best = None
        for s in SHIFTS:
            for k in range(self.depth, -1, -1):
                a = self.cube_at(s, k, lo)
                if a == self.cube_at(s, k, hi - 1):
                    a_lo, a_hi = self.cube_range(a)
                    if best is None or a_hi - a_lo < best[0]:
                        best = (a_hi - a_lo, a)
                    break
        return best[1]

    def containing_triple(self, cube: CubeLike) -> DyadicCube:
        """A shifted cube R with Q inside R and |R| <= 3|Q|."""
        return self.containing_cube(cube)


def _check_shift(shift: int) -> None:
    if shift not in SHIFTS:
        raise ValueError(f"shift must be one of {SHIFTS}")


@lru_cache(maxsize=None)
def _level_ranges(depth: int, shift: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    dom = Domain(depth)
    c = dom.side_cells(level)
    off = dom.offset(shift, level)
    n = dom.n_cells
    if off == 0:
        lo = np.arange(0, n, c)
        hi = lo + c
    else:
        starts = off + (np.arange(2**level + 1) - 1) * c
        lo = np.maximum(starts, 0)
        hi = np.minimum(starts + c, n)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def lattice_groups(domain: Domain, kind: str) -> list[tuple[np.ndarray, int]]:
    """Cube families grouped by length: a list of (left ends, length in cells).

    ``kind`` is ``"dyadic<s>"`` for one lattice, ``"shifted3"`` for the union of
    the three lattices, or ``"exact"`` for every grid interval.
    """
    return _lattice_groups(domain.depth, kind)


@lru_cache(maxsize=None)
def _lattice_groups(depth: int, kind: str) -> list[tuple[np.ndarray, int]]:
    n = 2**depth
    if kind == "exact":
        return [(np.arange(n - ell + 1), ell) for ell in range(1, n + 1)]
    if kind == "shifted3":
        shifts = SHIFTS
    elif kind.startswith("dyadic"):
        shifts = (int(kind[6:] or 0),)
        _check_shift(shifts[0])
    else:
        raise ValueError(f"unknown cube kind {kind!r}")
    by_len: dict[int, set[int]] = {}
    for s in shifts:
        for k in range(depth + 1):
            lo, hi = _level_ranges(depth, s, k)
            for a, b in zip(lo.tolist(), hi.tolist()):
                by_len.setdefault(b - a, set()).add(a)
    return [(np.array(sorted(v)), ell) for ell, v in sorted(by_len.items())]


@dataclass(frozen=True)
class WhitneyCover:
    cubes: CubeSet
    no_complement: bool = False
    # cells that no cube of the admissible ratio can reach at this resolution;
    # they are covered by single-cell cubes instead
    resolution_limited: CubeSet = CubeSet()


WHITNEY_RATIO = 8.0


def whitney_decomposition(domain: Domain, open_set: np.ndarray) -> WhitneyCover:
    """Maximal shift-0 cubes inside ``open_set`` far from its complement.

    A cube Q is admissible when dist(Q, complement) > 8 diam(Q), where the
    complement includes everything outside the domain.  Selecting maximal
    admissible cubes makes the ratio fall in (8, 17].  Cells closer than eight
    cells to the complement cannot host an admissible cube; they are returned
    as single cells and listed in ``resolution_limited``.
    """
    mask = np.asarray(open_set, dtype=bool)
    n = domain.n_cells
    if mask.shape != (n,):
        raise ValueError("mask length must equal the number of cells")
    if not mask.any():
        return WhitneyCover(CubeSet())
    if mask.all():
        return WhitneyCover(CubeSet([DyadicCube(0, 0, 0)]), no_complement=True)

    dist_left, dist_right = complement_gaps(mask)
    chosen: list[DyadicCube] = []
    limited: list[DyadicCube] = []
    covered = np.zeros(n, dtype=bool)
    for k in range(domain.depth + 1):
        c = domain.side_cells(k)
        for i in range(2**k):
            lo, hi = i * c, (i + 1) * c
            if covered[lo] or not mask[lo:hi].all():
                continue
            gap = min(dist_left[lo], dist_right[hi - 1])
            if gap > WHITNEY_RATIO * c:
                chosen.append(DyadicCube(0, k, i))
                covered[lo:hi] = True
    for x in np.flatnonzero(mask & ~covered):
        cube = DyadicCube(0, domain.depth, int(x))
        chosen.append(cube)
        limited.append(cube)
    return WhitneyCover(CubeSet(chosen), resolution_limited=CubeSet(limited))


def complement_gaps(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cells between each cell and the nearest complement cell on each side."""
    n = mask.size
    idx = np.arange(n)
    comp = ~mask
    # nearest complement index to the left (exterior sits at -1)
    left = np.where(comp, idx, -1)
    left = np.maximum.accumulate(left)
    right = np.where(comp, idx, n)
    right = np.minimum.accumulate(right[::-1])[::-1]
    return idx - left - 1, right - idx - 1


def whitney_ratio(domain: Domain, open_set: np.ndarray, cube: DyadicCube) -> float:
    """dist(Q, complement) / diam(Q) recomputed from scratch."""
    mask = np.asarray(open_set, dtype=bool)
    lo, hi = domain.cube_range(cube)
    comp = np.flatnonzero(~mask)
    gaps = [lo, domain.n_cells - hi]  # exterior on both sides
    if comp.size:
        left = comp[comp < lo]
        right = comp[comp >= hi]
        if left.size:
            gaps.append(lo - left.max() - 1)
        if right.size:
            gaps.append(right.min() - hi)
    return min(gaps) / (hi - lo)
