"""Finite T0 spaces, d-functions and stratifications.

Opens are ``frozenset`` objects of point names.  The empty open is never
listed; everything downstream treats it as carrying the zero module.

Extended integers are plain ``int`` values together with ``math.inf`` and
``-math.inf``; only comparisons and ``min``/``max`` are ever applied to them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence, Union

Open = frozenset
ExtInt = Union[int, float]
DFunction = Mapping[str, ExtInt]

INF = math.inf
NEG_INF = -math.inf

SOFT_MAX_POINTS = 6
SOFT_MAX_OPENS = 64


class SiteError(ValueError):
    """An invalid space, stratification or d-function."""


def parse_extint(x) -> ExtInt:
    if isinstance(x, str):
        t = x.strip().lower()
        if t in ("+inf", "inf", "infinity", "+infinity"):
            return INF
        if t in ("-inf", "-infinity"):
            return NEG_INF
        try:
            return int(t)
        except ValueError:
            raise SiteError(f"not an extended integer: {x!r}") from None
    if isinstance(x, bool):
        raise SiteError(f"not an extended integer: {x!r}")
    if isinstance(x, float):
        if math.isinf(x):
            return x
        if x.is_integer():
            return int(x)
        raise SiteError(f"not an extended integer: {x!r}")
    return int(x)


def format_extint(x: ExtInt):
    if x == INF:
        return "+inf"
    if x == NEG_INF:
        return "-inf"
    return int(x)


@dataclass(frozen=True)
class FinSpace:
    """A finite T0 topological space given by its open sets.

    ``opens`` lists the nonempty opens; they are stored sorted by size and then
    by the position of their points in ``points``.
    """

    points: tuple
    opens: tuple = field(default=())

    def __init__(self, points: Sequence[str], opens: Iterable[Iterable[str]]):
        pts = tuple(str(p) for p in points)
        if len(set(pts)) != len(pts):
            dup = sorted({p for p in pts if pts.count(p) > 1})
            raise SiteError(f"duplicate point names: {dup}")
        index = {p: i for i, p in enumerate(pts)}
        ops = set()
        for o in opens:
            s = frozenset(str(p) for p in o)
            unknown = s - set(pts)
            if unknown:
                raise SiteError(f"open set mentions unknown points {sorted(unknown)}")
            if s:
                ops.add(s)
        ordered = tuple(sorted(ops, key=lambda s: (len(s), sorted(index[p] for p in s))))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "opens", ordered)
        self._validate()
        if len(pts) > SOFT_MAX_POINTS or len(ordered) > SOFT_MAX_OPENS:
            warnings.warn(
                f"space with {len(pts)} points and {len(ordered)} opens exceeds the soft size cap",
                stacklevel=2,
            )

    def _validate(self):
        full = frozenset(self.points)
        if not self.points:
            raise SiteError("a space needs at least one point")
        ops = set(self.opens)
        if full not in ops:
            raise SiteError("lattice not closed under union: the full set of points is not open")
        for a, b in combinations(self.opens, 2):
            if a | b not in ops:
                raise SiteError(f"lattice not closed under union: {self.fmt(a)} | {self.fmt(b)}")
            inter = a & b
            if inter and inter not in ops:
                raise SiteError(f"lattice not closed under intersection: {self.fmt(a)} & {self.fmt(b)}")
        seen = {}
        for p in self.points:
            m = self.min_open(p)
            if m in seen:
                raise SiteError(f"T0 violated: points {seen[m]} and {p} have the same open neighborhoods")
            seen[m] = p

    # ------------------------------------------------------------------

    @property
    def full(self) -> Open:
        return frozenset(self.points)

    def index(self, p: str) -> int:
        return self.points.index(p)

    def fmt(self, s: Iterable[str]) -> str:
        return "{" + ",".join(p for p in self.points if p in s) + "}"

    def key(self, s: Iterable[str]) -> str:
        """Stable string name of a point set, e.g. ``"a,b"``."""
        return ",".join(p for p in self.points if p in s)

    def open_from_key(self, key) -> Open:
        names = key if isinstance(key, (list, tuple)) else [t for t in str(key).split(",") if t.strip()]
        s = frozenset(str(t).strip() for t in names)
        if s not in self._open_set:
            raise SiteError(f"{self.fmt(s)} is not a nonempty open set")
        return s

    @cached_property
    def _open_set(self) -> frozenset:
        return frozenset(self.opens)

    def is_open(self, s: Iterable[str]) -> bool:
        s = frozenset(s)
        return not s or s in self._open_set

    @cached_property
    def _min_opens(self) -> dict:
        out = {}
        for p in self.points:
            m = self.full
            for o in self.opens:
                if p in o:
                    m = m & o
            out[p] = m
        return out

    def min_open(self, p: str) -> Open:
        """Smallest open containing ``p``."""
        if p not in self._min_opens:
            raise SiteError(f"unknown point {p!r}")
        return self._min_opens[p]

    def closure(self, s: Iterable[str]) -> frozenset:
        s = frozenset(s)
        return frozenset(q for q in self.points if self.min_open(q) & s)

    def open_hull(self, s: Iterable[str]) -> frozenset:
        """Smallest open containing ``s``."""
        out = frozenset()
        for p in s:
            out |= self.min_open(p)
        return out

    def is_closed(self, s: Iterable[str]) -> bool:
        return self.is_open(self.full - frozenset(s))

    def is_locally_closed(self, s: Iterable[str]) -> bool:
        s = frozenset(s)
        return self.closure(s) & self.open_hull(s) == s

    def specializes(self, p: str, q: str) -> bool:
        """True when ``q`` lies in the closure of ``p`` (every open containing ``q`` contains ``p``)."""
        return p in self.min_open(q)

    @cached_property
    def strict_pairs(self) -> tuple:
        """All pairs ``(U, V)`` of opens with ``V`` strictly inside ``U``."""
        return tuple((u, v) for u in self.opens for v in self.opens if v < u)

    @cached_property
    def covering_pairs(self) -> tuple:
        """Pairs ``(U, V)``, ``V < U``, with no open strictly between them."""
        out = []
        for u, v in self.strict_pairs:
            if not any(v < w < u for w in self.opens):
                out.append((u, v))
        return tuple(out)

    def subopens(self, u: Open) -> tuple:
        return tuple(v for v in self.opens if v <= u)

    def minimal_points(self, u: Open) -> tuple:
        return tuple(p for p in self.points if p in u)

    def describe(self) -> dict:
        return {"points": list(self.points), "opens": [sorted(o, key=self.index) for o in self.opens]}


def sierpinski() -> FinSpace:
    return FinSpace(["o", "c"], [["o"], ["o", "c"]])


def three_point() -> FinSpace:
    return FinSpace(["a", "b", "c"], [["a"], ["b"], ["a", "b"], ["a", "b", "c"]])


def discrete(n: int) -> FinSpace:
    pts = [f"p{i}" for i in range(n)]
    opens = [list(c) for k in range(1, n + 1) for c in combinations(pts, k)]
    return FinSpace(pts, opens)


# ---------------------------------------------------------------------------
# d-functions


def check_d(space: FinSpace, d: DFunction) -> dict:
    missing = [p for p in space.points if p not in d]
    if missing:
        raise SiteError(f"d-function is not defined at {missing}")
    extra = [p for p in d if p not in space.points]
    if extra:
        raise SiteError(f"d-function mentions unknown points {extra}")
    return {p: parse_extint(d[p]) for p in space.points}


def superlevel(space: FinSpace, d: DFunction, n: ExtInt) -> frozenset:
    return frozenset(p for p in space.points if d[p] >= n)


def admissibility_witness(space: FinSpace, d: DFunction, closed: bool = False) -> Optional[tuple]:
    """First threshold ``n`` whose superlevel set fails to be open (or closed).

    Returns ``(n, superlevel set)`` or ``None`` when every threshold passes.
    Only the values taken by ``d`` need checking.
    """
    d = check_d(space, d)
    test = space.is_closed if closed else space.is_open
    for n in sorted(set(d.values())):
        s = superlevel(space, d, n)
        if not test(s):
            return n, s
    return None


def d_is_admissible(space: FinSpace, d: DFunction) -> bool:
    """Every superlevel set ``{p : d(p) >= n}`` is open."""
    return admissibility_witness(space, d) is None


def d_is_closed_admissible(space: FinSpace, d: DFunction) -> bool:
    """Every superlevel set ``{p : d(p) >= n}`` is closed; the condition truncation needs."""
    return admissibility_witness(space, d, closed=True) is None


def n_of_open(space: FinSpace, d: DFunction, c: Open) -> ExtInt:
    """Minimum of ``d`` over a nonempty open."""
    if not c:
        raise SiteError("n_of_open is not defined on the empty open")
    return min(d[p] for p in c)


def truncation_level(space: FinSpace, d: DFunction, c: Open) -> ExtInt:
    """Maximum of ``d`` over a nonempty open.

    When ``d`` is closed-admissible this is monotone in the right direction
    (smaller opens get smaller levels) and equals ``d(p)`` on ``min_open(p)``.
    """
    if not c:
        raise SiteError("truncation_level is not defined on the empty open")
    return max(d[p] for p in c)


# ---------------------------------------------------------------------------
# stratifications


@dataclass(frozen=True)
class Stratification:
    """A partition of the points into locally closed strata, each with a perversity."""

    space: FinSpace
    strata: tuple
    perversity: tuple

    def __init__(self, space: FinSpace, strata: Sequence[Iterable[str]], perversity: Sequence[int]):
        st = tuple(frozenset(s) for s in strata)
        pv = tuple(int(x) for x in perversity)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "strata", st)
        object.__setattr__(self, "perversity", pv)
        if len(st) != len(pv):
            raise SiteError("one perversity value is needed per stratum")
        if not st or any(not s for s in st):
            raise SiteError("strata must be nonempty")
        covered = set()
        for s in st:
            if s & covered:
                raise SiteError(f"strata overlap at {sorted(s & covered)}")
            covered |= s
        if covered != set(space.points):
            raise SiteError(f"strata miss points {sorted(set(space.points) - covered)}")
        for s in st:
            if not space.is_locally_closed(s):
                raise SiteError(f"stratum {space.fmt(s)} is not locally closed")

    def stratum_of(self, p: str) -> int:
        for a, s in enumerate(self.strata):
            if p in s:
                return a
        raise SiteError(f"unknown point {p!r}")


def d_from_perversity(space: FinSpace, strat: Stratification) -> dict:
    """The d-function constant on each stratum with value its perversity."""
    if strat.space != space:
        raise SiteError("stratification lives on a different space")
    return {p: strat.perversity[strat.stratum_of(p)] for p in space.points}
