"""Bounded chain complexes of presheaves.

Sign conventions used throughout:

* ``shift(X, k)_n = X_{n-k}`` with differential ``(-1)^k d``;
* ``cone(f)_n = X_{n-1} + Y_n`` with ``d(x, y) = (-dx, f x + dy)``;
* ``hofib(f) = shift(cone(f), -1)``, so ``hofib_n = X_n + Y_{n+1}`` with
  ``d(x, y) = (dx, -f x - dy)``;
* tensor products use ``d(x (x) y) = dx (x) y + (-1)^{|x|} x (x) dy``;
* the mapping complex uses ``D(phi) = d phi - (-1)^k phi d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .linalg import (
    FPModule,
    HomModule,
    ModHom,
    Ring,
    annihilator,
    block_diag,
    cokernel,
    eye,
    hstack,
    is_iso,
    kernel,
    matmul,
    vstack,
    zeros,
)
from .presheaf import (
    Presheaf,
    PresheafCokernel,
    PresheafHom,
    Sheafification,
    SumData,
    cell_presheaf,
    constant_presheaf,
    free_presheaf,
    sheafify_hom,
    tensor_data,
    zero_presheaf,
)
from .site import FinSpace, Open


class ComplexError(ValueError):
    """A malformed complex or chain map; ``where`` locates the failure."""

    def __init__(self, msg: str, where: Optional[dict] = None):
        super().__init__(msg)
        self.where = where or {}


# ---------------------------------------------------------------------------
# homology of a single module complex


class CycleData(NamedTuple):
    """Cycles ``Z`` (with inclusion ``iota``) and homology ``H = Z / B``.

    ``pi`` is the projection ``Z -> H`` and ``section`` gives, for each
    generator of ``H``, a representative in ``Z`` coordinates.
    """

    Z: FPModule
    iota: ModHom
    H: FPModule
    pi: ModHom
    section: np.ndarray

    def cycle_reps(self, ring: Ring) -> np.ndarray:
        """Representatives of homology generators as chain-level vectors."""
        return self.iota.target.reduce(matmul(ring, self.iota.matrix, self.section))

    def classes(self, ring: Ring, cycles: np.ndarray) -> Optional[np.ndarray]:
        """Homology classes of chain-level cycles, or ``None`` if some column is not a cycle."""
        z = self.iota.preimage(cycles)
        if z is None:
            return None
        return self.pi(z)


def cycle_data(c: FPModule, d_out: ModHom, d_in: ModHom) -> CycleData:
    """Homology at ``c`` of ``... -d_in-> c -d_out-> ...``."""
    ring = c.ring
    if d_out.is_zero():
        z, iota = c, ModHom.identity(c)
    else:
        z, iota = kernel(d_out)
    if d_in.is_zero() or d_in.source.ngens == 0:
        return CycleData(z, iota, z, ModHom.identity(z), eye(z.ngens, ring))
    b = iota.preimage(d_in.matrix)
    if b is None:
        raise ComplexError("d o d is not zero")
    ck = cokernel(ModHom(d_in.source, z, b))
    return CycleData(z, iota, ck.module, ck.projection, ck.section)


def induced_on_homology(ring: Ring, src: CycleData, tgt: CycleData, matrix: np.ndarray) -> np.ndarray:
    """Matrix of the map on homology induced by a chain-level ``matrix``."""
    if src.H.ngens == 0:
        return zeros(tgt.H.ngens, 0)
    reps = matmul(ring, matrix, src.iota.matrix, src.section)
    cls = tgt.classes(ring, tgt.iota.target.reduce(reps))
    if cls is None:
        raise ComplexError("map does not send cycles to cycles")
    return cls


@dataclass(eq=False)
class ModuleComplex:
    """A bounded complex of plain modules; ``diffs[n]`` maps degree ``n`` to ``n - 1``."""

    ring: Ring
    modules: dict
    diffs: dict
    _cd: dict = field(default_factory=dict, repr=False)

    def module(self, n: int) -> FPModule:
        return self.modules.get(n, FPModule.zero_module(self.ring))

    def diff(self, n: int) -> ModHom:
        src, tgt = self.module(n), self.module(n - 1)
        m = self.diffs.get(n)
        return ModHom(src, tgt, m if m is not None else zeros(tgt.ngens, src.ngens))

    def cycle_data(self, n: int) -> CycleData:
        if n not in self._cd:
            self._cd[n] = cycle_data(self.module(n), self.diff(n), self.diff(n + 1))
        return self._cd[n]

    def homology(self, n: int) -> FPModule:
        return self.cycle_data(n).H

    @property
    def degrees(self) -> list:
        return sorted(self.modules)


# ---------------------------------------------------------------------------
# complexes of presheaves


@dataclass(eq=False)
class PComplex:
    """Chain complex of presheaves with terms in degrees ``lo..hi``.

    ``diffs[n]`` is the differential from degree ``n`` to ``n - 1``.  An empty
    complex has ``lo > hi``.
    """

    space: FinSpace
    ring: Ring
    lo: int
    hi: int
    terms: dict
    diffs: dict
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for n in range(self.lo, self.hi + 1):
            if n not in self.terms:
                raise ComplexError(f"missing term in degree {n}", {"degree": n})
        for n in range(self.lo + 1, self.hi + 1):
            if n not in self.diffs:
                self.diffs[n] = PresheafHom.zero(self.terms[n], self.terms[n - 1])

    @classmethod
    def build(cls, space: FinSpace, ring: Ring, terms: Mapping, diffs: Mapping, check: bool = True) -> "PComplex":
        """Build from terms (dropping zero ends) and audit when ``check``."""
        degs = [n for n, t in terms.items() if not t.is_zero()]
        if not degs:
            return zero_complex(space, ring)
        lo, hi = min(degs), max(degs)
        tm = {n: terms.get(n) or zero_presheaf(space, ring) for n in range(lo, hi + 1)}
        dm = {}
        for n in range(lo + 1, hi + 1):
            d = diffs.get(n)
            dm[n] = d if d is not None and d.source is tm[n] and d.target is tm[n - 1] else (
                PresheafHom(tm[n], tm[n - 1], d.comps) if d is not None else PresheafHom.zero(tm[n], tm[n - 1]))
        x = cls(space, ring, lo, hi, tm, dm)
        if check:
            x.audit()
        return x

    # access --------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    def term(self, n: int) -> Presheaf:
        if self.lo <= n <= self.hi:
            return self.terms[n]
        key = ("zero",)
        if key not in self._cache:
            self._cache[key] = zero_presheaf(self.space, self.ring)
        return self._cache[key]

    def diff(self, n: int) -> PresheafHom:
        if self.lo < n <= self.hi:
            return self.diffs[n]
        return PresheafHom.zero(self.term(n), self.term(n - 1))

    def module(self, n: int, u: Open) -> FPModule:
        return self.term(n)[u]

    def dmat(self, n: int, u: Open) -> np.ndarray:
        if self.lo < n <= self.hi:
            return self.diffs[n].comps[u]
        return zeros(self.module(n - 1, u).ngens, self.module(n, u).ngens)

    def dhom(self, n: int, u: Open) -> ModHom:
        return ModHom(self.module(n, u), self.module(n - 1, u), self.dmat(n, u))

    @property
    def degrees(self) -> range:
        return range(self.lo, self.hi + 1)

    def at(self, u: Open) -> ModuleComplex:
        """The module complex of sections over ``u``."""
        key = ("at", u)
        if key not in self._cache:
            self._cache[key] = ModuleComplex(
                self.ring, {n: self.module(n, u) for n in self.degrees},
                {n: self.dmat(n, u) for n in range(self.lo + 1, self.hi + 1)})
        return self._cache[key]

    def cycle_data(self, n: int, u: Open) -> CycleData:
        key = ("cd", n, u)
        if key not in self._cache:
            self._cache[key] = cycle_data(self.module(n, u), self.dhom(n, u), self.dhom(n + 1, u))
        return self._cache[key]

    def is_zero(self) -> bool:
        return all(self.terms[n].is_zero() for n in self.degrees)

    @property
    def is_levelwise_free(self) -> bool:
        return all(self.terms[n].is_levelwise_free for n in self.degrees)

    # audits --------------------------------------------------------------

    def audit(self) -> "PComplex":
        sp = self.space
        for n in range(self.lo + 1, self.hi + 1):
            bad = self.diffs[n].naturality_failure()
            if bad is not None:
                u, v = bad
                where = {"degree": n, "open": sp.key(u)}
                if v is None:
                    raise ComplexError(f"differential in degree {n} is not well defined at {sp.fmt(u)}", where)
                where["restricted_to"] = sp.key(v)
                raise ComplexError(
                    f"differential in degree {n} is not natural on {sp.fmt(u)} -> {sp.fmt(v)}", where)
        for n in range(self.lo + 2, self.hi + 1):
            for u in sp.opens:
                dd = matmul(self.ring, self.dmat(n - 1, u), self.dmat(n, u))
                if not self.module(n - 2, u).is_zero_element(dd):
                    raise ComplexError(f"d o d is not zero in degree {n} at {sp.fmt(u)}",
                                       {"degree": n, "open": sp.key(u)})
        return self

    def describe(self) -> dict:
        return {str(n): self.terms[n].describe() for n in self.degrees}


def zero_complex(space: FinSpace, ring: Ring) -> PComplex:
    return PComplex(space, ring, 0, -1, {}, {})


def window(*cs: PComplex) -> tuple[int, int]:
    nonempty = [c for c in cs if not c.is_empty]
    if not nonempty:
        return 0, -1
    return min(c.lo for c in nonempty), max(c.hi for c in nonempty)


def same_shape(*cs: PComplex):
    for c in cs[1:]:
        if c.space != cs[0].space or c.ring != cs[0].ring:
            raise ComplexError("complexes over different spaces or rings")


# ---------------------------------------------------------------------------
# chain maps


@dataclass(eq=False)
class ChainMap:
    source: PComplex
    target: PComplex
    comps: dict

    def __post_init__(self):
        same_shape(self.source, self.target)

    @property
    def space(self) -> FinSpace:
        return self.source.space

    @property
    def ring(self) -> Ring:
        return self.source.ring

    @property
    def window(self) -> tuple[int, int]:
        return window(self.source, self.target)

    def comp(self, n: int) -> PresheafHom:
        h = self.comps.get(n)
        s, t = self.source.term(n), self.target.term(n)
        if h is None:
            return PresheafHom.zero(s, t)
        if h.source is not s or h.target is not t:
            return PresheafHom(s, t, h.comps)
        return h

    def mat(self, n: int, u: Open) -> np.ndarray:
        h = self.comps.get(n)
        if h is None:
            return zeros(self.target.module(n, u).ngens, self.source.module(n, u).ngens)
        return h.comps[u]

    def at(self, n: int, u: Open) -> ModHom:
        return ModHom(self.source.module(n, u), self.target.module(n, u), self.mat(n, u))

    def failure(self) -> Optional[dict]:
        lo, hi = self.window
        for n in range(lo, hi + 1):
            bad = self.comp(n).naturality_failure()
            if bad is not None:
                return {"degree": n, "open": self.space.key(bad[0]), "reason": "not natural"}
        for n in range(lo, hi + 2):
            for u in self.space.opens:
                lhs = matmul(self.ring, self.target.dmat(n, u), self.mat(n, u))
                rhs = matmul(self.ring, self.mat(n - 1, u), self.source.dmat(n, u))
                if not self.target.module(n - 1, u).is_zero_element(lhs - rhs):
                    return {"degree": n, "open": self.space.key(u), "reason": "does not commute with d"}
        return None

    def audit(self) -> "ChainMap":
        bad = self.failure()
        if bad:
            raise ComplexError(f"chain map {bad['reason']} in degree {bad['degree']} at {{{bad['open']}}}", bad)
        return self

    def compose(self, other: "ChainMap") -> "ChainMap":
        """``self`` after ``other``."""
        lo, hi = window(other.source, self.target)
        comps = {}
        for n in range(lo, hi + 1):
            comps[n] = PresheafHom(other.source.term(n), self.target.term(n), {
                u: self.target.module(n, u).reduce(matmul(self.ring, self.mat(n, u), other.mat(n, u)))
                for u in self.space.opens})
        return ChainMap(other.source, self.target, comps)

    def _combine(self, other: "ChainMap", a, b) -> "ChainMap":
        lo, hi = self.window
        comps = {}
        for n in range(lo, hi + 1):
            comps[n] = PresheafHom(self.source.term(n), self.target.term(n), {
                u: self.target.module(n, u).reduce(a * self.mat(n, u) + b * other.mat(n, u))
                for u in self.space.opens})
        return ChainMap(self.source, self.target, comps)

    def __add__(self, other: "ChainMap") -> "ChainMap":
        return self._combine(other, 1, 1)

    def __sub__(self, other: "ChainMap") -> "ChainMap":
        return self._combine(other, 1, -1)

    def __neg__(self) -> "ChainMap":
        return self._combine(self, -1, 0)

    def is_zero(self) -> bool:
        lo, hi = self.window
        return all(self.target.module(n, u).is_zero_element(self.mat(n, u))
                   for n in range(lo, hi + 1) for u in self.space.opens)

    def equals(self, other: "ChainMap") -> bool:
        return (self - other).is_zero()

    def is_levelwise_surjective(self, min_degree: Optional[int] = None) -> Optional[tuple]:
        """``None`` when surjective everywhere, else the first failing ``(degree, open)``."""
        from .linalg import is_surjective

        lo, hi = self.window
        for n in range(lo, hi + 1):
            if min_degree is not None and n < min_degree:
                continue
            for u in self.space.opens:
                if not is_surjective(self.at(n, u)):
                    return n, u
        return None

    def is_levelwise_iso(self) -> bool:
        lo, hi = self.window
        return all(is_iso(self.at(n, u)) for n in range(lo, hi + 1) for u in self.space.opens)

    @classmethod
    def identity(cls, x: PComplex) -> "ChainMap":
        return cls(x, x, {n: PresheafHom.identity(x.terms[n]) for n in x.degrees})

    @classmethod
    def zero(cls, source: PComplex, target: PComplex) -> "ChainMap":
        return cls(source, target, {})

    @classmethod
    def from_matrices(cls, source: PComplex, target: PComplex, mats: Mapping) -> "ChainMap":
        """``mats[n][U]`` gives the component matrices; missing entries are zero."""
        comps = {}
        for n, per in mats.items():
            s, t = source.term(n), target.term(n)
            comps[n] = PresheafHom(s, t, {
                u: t[u].reduce(per[u]) if u in per else zeros(t[u].ngens, s[u].ngens) for u in source.space.opens})
        return cls(source, target, comps)


# ---------------------------------------------------------------------------
# homology and weak equivalences


def homology(x: PComplex, n: int) -> Presheaf:
    """The homology presheaf ``H_n(X)`` with induced restrictions."""
    key = ("H", n)
    if key in x._cache:
        return x._cache[key]
    sp, ring = x.space, x.ring
    cds = {u: x.cycle_data(n, u) for u in sp.opens}
    vals = {u: cds[u].H for u in sp.opens}
    res = {}
    for (u, v) in sp.strict_pairs:
        res[(u, v)] = induced_on_homology(ring, cds[u], cds[v], x.term(n).res[(u, v)])
    h = Presheaf(sp, ring, vals, res)
    x._cache[key] = h
    return h


def homology_map(f: ChainMap, n: int) -> PresheafHom:
    sp, ring = f.space, f.ring
    hs, ht = homology(f.source, n), homology(f.target, n)
    return PresheafHom(hs, ht, {
        u: induced_on_homology(ring, f.source.cycle_data(n, u), f.target.cycle_data(n, u), f.mat(n, u))
        for u in sp.opens})


@dataclass
class WeakEqReport:
    presheaf_iso: bool
    sheaf_iso: bool
    stalkwise_iso: bool
    witnesses: dict
    direct_stalkwise_iso: bool = True

    def as_dict(self) -> dict:
        return {
            "presheaf_iso": self.presheaf_iso,
            "sheaf_iso": self.sheaf_iso,
            "stalkwise_iso": self.stalkwise_iso,
            "witnesses": self.witnesses,
        }


def classify(f: ChainMap) -> WeakEqReport:
    """Test ``f`` for presheaf, sheaf and stalkwise homology isomorphism."""
    sp = f.space
    lo, hi = f.window
    wit = {}
    pre = sh = st = direct = True
    for n in range(lo, hi + 1):
        hf = homology_map(f, n)
        for u in sp.opens:
            if not is_iso(hf.at(u)):
                if pre:
                    wit["presheaf_iso"] = {"open": sp.key(u), "degree": n}
                pre = False
                break
        lsrc, ltgt = Sheafification(hf.source), Sheafification(hf.target)
        lh = sheafify_hom(hf, lsrc, ltgt)
        for u in sp.opens:
            if not is_iso(lh.at(u)):
                if sh:
                    wit["sheaf_iso"] = {"open": sp.key(u), "degree": n}
                sh = False
                break
        for p in sp.points:
            if not is_iso(lh.at(sp.min_open(p))):
                if st:
                    wit["stalkwise_iso"] = {"point": p, "degree": n}
                st = False
                break
        for p in sp.points:
            if not is_iso(hf.at(sp.min_open(p))):
                direct = False
                break
    return WeakEqReport(pre, sh, st, wit, direct)


def quasi_iso_failure(f: ChainMap, opens: Optional[Iterable[Open]] = None) -> Optional[tuple]:
    """First ``(degree, open)`` where ``H(f)`` is not an isomorphism, else ``None``."""
    sp = f.space
    opens = list(opens) if opens is not None else list(sp.opens)
    lo, hi = f.window
    for n in range(lo, hi + 1):
        for u in opens:
            s, t = f.source.cycle_data(n, u), f.target.cycle_data(n, u)
            if s.H.ngens == 0 and t.H.ngens == 0:
                continue
            m = induced_on_homology(f.ring, s, t, f.mat(n, u))
            if not is_iso(ModHom(s.H, t.H, m)):
                return n, u
    return None


def is_presheaf_quasi_iso(f: ChainMap) -> bool:
    return quasi_iso_failure(f) is None


def is_stalkwise_iso(f: ChainMap) -> bool:
    """Direct stalk test: homology of ``f`` at every minimal open is an isomorphism."""
    sp = f.space
    return quasi_iso_failure(f, {sp.min_open(p) for p in sp.points}) is None


def stalk_homology(x: PComplex, n: int, p: str) -> FPModule:
    return x.cycle_data(n, x.space.min_open(p)).H


# ---------------------------------------------------------------------------
# shifts, cones, fibers


def shift(x: PComplex, k: int) -> PComplex:
    """``shift(X, k)_n = X_{n-k}`` with differential multiplied by ``(-1)^k``."""
    if x.is_empty:
        return x
    sign = -1 if k % 2 else 1
    terms = {n + k: x.terms[n] for n in x.degrees}
    diffs = {n + k: x.diffs[n].scale(sign) if sign < 0 else x.diffs[n] for n in range(x.lo + 1, x.hi + 1)}
    return PComplex(x.space, x.ring, x.lo + k, x.hi + k, terms, diffs)


def shift_map(f: ChainMap, k: int, source: Optional[PComplex] = None, target: Optional[PComplex] = None) -> ChainMap:
    s = source or shift(f.source, k)
    t = target or shift(f.target, k)
    lo, hi = f.window
    return ChainMap(s, t, {n + k: PresheafHom(s.term(n + k), t.term(n + k), f.comp(n).comps) for n in range(lo, hi + 1)})


class Cone(NamedTuple):
    complex: PComplex
    inclusion: ChainMap  # Y -> cone(f)
    projection: ChainMap  # cone(f) -> shift(X, 1)


def cone_data(f: ChainMap) -> Cone:
    x, y = f.source, f.target
    sp, ring = f.space, f.ring
    lo, hi = window(shift(x, 1), y)
    terms, sums = {}, {}
    for n in range(lo, hi + 1):
        sums[n] = SumData([x.term(n - 1), y.term(n)])
        terms[n] = sums[n].sum
    diffs = {}
    for n in range(lo + 1, hi + 1):
        comps = {}
        for u in sp.opens:
            top = hstack([-x.dmat(n - 1, u), zeros(x.module(n - 2, u).ngens, y.module(n, u).ngens)],
                         x.module(n - 2, u).ngens)
            bot = hstack([f.mat(n - 1, u), y.dmat(n, u)], y.module(n - 1, u).ngens)
            comps[u] = terms[n - 1][u].reduce(vstack([top, bot], terms[n][u].ngens))
        diffs[n] = PresheafHom(terms[n], terms[n - 1], comps)
    c = PComplex(sp, ring, lo, hi, terms, diffs) if lo <= hi else zero_complex(sp, ring)
    sx = shift(x, 1)
    inc = ChainMap(y, c, {n: PresheafHom(y.term(n), c.term(n), sums[n].inclusions[1].comps)
                          for n in range(lo, hi + 1)})
    proj = ChainMap(c, sx, {n: PresheafHom(c.term(n), sx.term(n), sums[n].projections[0].comps)
                            for n in range(lo, hi + 1)})
    return Cone(c, inc, proj)


def cone(f: ChainMap) -> PComplex:
    return cone_data(f).complex


class Fiber(NamedTuple):
    complex: PComplex
    projection: ChainMap  # hofib(f) -> X, (x, y) -> x
    homotopy: dict  # degree n -> PresheafHom hofib_n -> Y_{n+1}, with dH + Hd = f o projection


def hofib_data(f: ChainMap) -> Fiber:
    cd = cone_data(f)
    fib = shift(cd.complex, -1)
    x, y = f.source, f.target
    sp = f.space
    proj, hom = {}, {}
    for n in fib.degrees:
        t = fib.term(n)
        pc, hc = {}, {}
        for u in sp.opens:
            nx, ny = x.module(n, u).ngens, y.module(n + 1, u).ngens
            p = zeros(nx, nx + ny)
            p[:, :nx] = eye(nx, f.ring)
            h = zeros(ny, nx + ny)
            h[:, nx:] = -eye(ny, f.ring)
            pc[u] = p
            hc[u] = y.module(n + 1, u).reduce(h)
        proj[n] = PresheafHom(t, x.term(n), pc)
        hom[n] = PresheafHom(t, y.term(n + 1), hc)
    return Fiber(fib, ChainMap(fib, x, proj), hom)


def hofib(f: ChainMap) -> PComplex:
    return shift(cone(f), -1)


# ---------------------------------------------------------------------------
# tensor products


class TotalTensor:
    """Total tensor complex with its block bookkeeping.

    ``blocks[n]`` lists ``(i, j)`` with ``i + j = n``; ``offsets[n][u]`` gives
    the coordinate offset of each block at ``u``.
    """

    def __init__(self, x: PComplex, y: PComplex):
        same_shape(x, y)
        sp, ring = x.space, x.ring
        self.x, self.y = x, y
        self.pieces = {}
        for i in x.degrees:
            for j in y.degrees:
                self.pieces[(i, j)] = tensor_data(x.terms[i], y.terms[j])
        if x.is_empty or y.is_empty:
            self.complex = zero_complex(sp, ring)
            self.blocks, self.offsets = {}, {}
            return
        lo, hi = x.lo + y.lo, x.hi + y.hi
        self.blocks = {n: [(i, n - i) for i in x.degrees if y.lo <= n - i <= y.hi] for n in range(lo, hi + 1)}
        terms, self.offsets = {}, {}
        for n in range(lo, hi + 1):
            parts = [self.pieces[b][0] for b in self.blocks[n]]
            terms[n] = SumData(parts).sum
            self.offsets[n] = {}
            for u in sp.opens:
                o, offs = 0, {}
                for b in self.blocks[n]:
                    offs[b] = o
                    o += self.pieces[b][0][u].ngens
                self.offsets[n][u] = offs
        diffs = {}
        for n in range(lo + 1, hi + 1):
            comps = {}
            for u in sp.opens:
                m = zeros(terms[n - 1][u].ngens, terms[n][u].ngens)
                for (i, j) in self.blocks[n]:
                    src_tm = self.pieces[(i, j)][1][u]
                    c0 = self.offsets[n][u][(i, j)]
                    c1 = c0 + src_tm.module.ngens
                    if (i - 1, j) in self.pieces:
                        tgt_tm = self.pieces[(i - 1, j)][1][u]
                        r0 = self.offsets[n - 1][u][(i - 1, j)]
                        blk = src_tm.hom(x.dmat(i, u), eye(y.module(j, u).ngens, ring), tgt_tm)
                        m[r0:r0 + tgt_tm.module.ngens, c0:c1] += blk
                    if (i, j - 1) in self.pieces:
                        tgt_tm = self.pieces[(i, j - 1)][1][u]
                        r0 = self.offsets[n - 1][u][(i, j - 1)]
                        blk = src_tm.hom(eye(x.module(i, u).ngens, ring), y.dmat(j, u), tgt_tm)
                        m[r0:r0 + tgt_tm.module.ngens, c0:c1] += blk * (-1 if i % 2 else 1)
                comps[u] = terms[n - 1][u].reduce(m)
            diffs[n] = PresheafHom(terms[n], terms[n - 1], comps)
        self.complex = PComplex(sp, ring, lo, hi, terms, diffs)


def tensor_total(x: PComplex, y: PComplex) -> PComplex:
    return TotalTensor(x, y).complex


def tensor_maps(f: ChainMap, g: ChainMap, source: Optional[TotalTensor] = None,
                target: Optional[TotalTensor] = None) -> ChainMap:
    """``f (x) g`` between total tensor complexes."""
    s = source or TotalTensor(f.source, g.source)
    t = target or TotalTensor(f.target, g.target)
    sp = f.space
    comps = {}
    lo, hi = window(s.complex, t.complex)
    for n in range(lo, hi + 1):
        cm = {}
        for u in sp.opens:
            m = zeros(t.complex.module(n, u).ngens, s.complex.module(n, u).ngens)
            for b in s.blocks.get(n, []):
                if b not in t.offsets.get(n, {}).get(u, {}):
                    continue
                i, j = b
                stm, ttm = s.pieces[b][1][u], t.pieces[b][1][u]
                blk = stm.hom(f.mat(i, u), g.mat(j, u), ttm)
                r0, c0 = t.offsets[n][u][b], s.offsets[n][u][b]
                m[r0:r0 + ttm.module.ngens, c0:c0 + stm.module.ngens] = blk
            cm[u] = t.complex.module(n, u).reduce(m)
        comps[n] = PresheafHom(s.complex.term(n), t.complex.term(n), cm)
    return ChainMap(s.complex, t.complex, comps)


# ---------------------------------------------------------------------------
# sheafification, quotients and subcomplexes


class SheafifiedComplex(NamedTuple):
    complex: PComplex
    unit: ChainMap


def sheafify_complex(x: PComplex) -> SheafifiedComplex:
    """Levelwise sheafification together with the unit ``X -> L X``."""
    sp, ring = x.space, x.ring
    if x.is_empty:
        return SheafifiedComplex(x, ChainMap.identity(x))
    sh = {n: Sheafification(x.terms[n]) for n in x.degrees}
    terms = {n: sh[n].sheaf for n in x.degrees}
    diffs = {n: sheafify_hom(x.diffs[n], sh[n], sh[n - 1]) for n in range(x.lo + 1, x.hi + 1)}
    lx = PComplex(sp, ring, x.lo, x.hi, terms, diffs)
    return SheafifiedComplex(lx, ChainMap(x, lx, {n: sh[n].unit for n in x.degrees}))


class Quotient(NamedTuple):
    complex: PComplex
    projection: ChainMap
    section: dict  # degree -> open -> matrix (target coordinates of generator lifts)


def cokernel_complex(f: ChainMap) -> Quotient:
    """Levelwise cokernel of a chain map."""
    y = f.target
    sp, ring = f.space, f.ring
    if y.is_empty:
        return Quotient(y, ChainMap.identity(y), {})
    cks = {n: PresheafCokernel(f.comp(n)) for n in y.degrees}
    terms = {n: cks[n].module for n in y.degrees}
    diffs = {}
    for n in range(y.lo + 1, y.hi + 1):
        diffs[n] = PresheafHom(terms[n], terms[n - 1], {
            u: terms[n - 1][u].reduce(matmul(ring, cks[n - 1].projection.comps[u], y.dmat(n, u), cks[n].section[u]))
            for u in sp.opens})
    q = PComplex(sp, ring, y.lo, y.hi, terms, diffs)
    proj = ChainMap(y, q, {n: cks[n].projection for n in y.degrees})
    return Quotient(q, proj, {n: cks[n].section for n in y.degrees})


def subcomplex(x: PComplex, gens: Mapping) -> tuple[PComplex, ChainMap]:
    """Subcomplex generated levelwise by ``gens[n][U]``; must be closed under d and restriction."""
    from .presheaf import subpresheaf

    sp, ring = x.space, x.ring
    if x.is_empty:
        return x, ChainMap.identity(x)
    subs, incs = {}, {}
    for n in x.degrees:
        subs[n], incs[n] = subpresheaf(x.terms[n], gens[n])
    diffs = {}
    for n in range(x.lo + 1, x.hi + 1):
        comps = {}
        for u in sp.opens:
            img = matmul(ring, x.dmat(n, u), incs[n].comps[u])
            pre = incs[n - 1].at(u).preimage(x.module(n - 1, u).reduce(img)) if subs[n][u].ngens else \
                zeros(subs[n - 1][u].ngens, 0)
            if pre is None:
                raise ComplexError("generators are not closed under the differential", {"degree": n, "open": sp.key(u)})
            comps[u] = pre
        diffs[n] = PresheafHom(subs[n], subs[n - 1], comps)
    s = PComplex(sp, ring, x.lo, x.hi, subs, diffs)
    return s, ChainMap(s, x, incs)


def direct_sum_complex(*cs: PComplex) -> PComplex:
    same_shape(*cs)
    sp, ring = cs[0].space, cs[0].ring
    lo, hi = window(*cs)
    if lo > hi:
        return zero_complex(sp, ring)
    terms = {n: SumData([c.term(n) for c in cs]).sum for n in range(lo, hi + 1)}
    diffs = {n: PresheafHom(terms[n], terms[n - 1], {u: block_diag([c.dmat(n, u) for c in cs]) for u in sp.opens})
             for n in range(lo + 1, hi + 1)}
    return PComplex(sp, ring, lo, hi, terms, diffs)


def sum_maps(s: PComplex, parts: Sequence[PComplex]) -> tuple[list, list]:
    """Inclusions and projections for ``s = direct_sum_complex(*parts)``."""
    sp, ring = s.space, s.ring
    incs, projs = [], []
    offs = {(n, u): 0 for n in s.degrees for u in sp.opens}
    for c in parts:
        ic, pc = {}, {}
        for n in s.degrees:
            a, b = {}, {}
            for u in sp.opens:
                k, tot = c.module(n, u).ngens, s.module(n, u).ngens
                m = zeros(tot, k)
                o = offs[(n, u)]
                for t in range(k):
                    m[o + t, t] = ring.one
                a[u], b[u] = m, m.T.copy()
                offs[(n, u)] += k
            ic[n] = PresheafHom(c.term(n), s.term(n), a)
            pc[n] = PresheafHom(s.term(n), c.term(n), b)
        incs.append(ChainMap(c, s, ic))
        projs.append(ChainMap(s, c, pc))
    return incs, projs


# ---------------------------------------------------------------------------
# standard complexes


def single(space: FinSpace, ring: Ring, f: Presheaf, n: int = 0) -> PComplex:
    """``F[n]``: the presheaf ``F`` concentrated in degree ``n``."""
    return PComplex(space, ring, n, n, {n: f}, {})


def sphere(space: FinSpace, ring: Ring, c: Iterable[str], n: int, order=0) -> PComplex:
    """``R_C[n]``."""
    return single(space, ring, free_presheaf(space, ring, c, order), n)


def disk(space: FinSpace, ring: Ring, c: Iterable[str], n: int) -> PComplex:
    """``R_C`` in degrees ``n + 1`` and ``n`` joined by the identity."""
    r = free_presheaf(space, ring, c)
    r2 = free_presheaf(space, ring, c)
    d = PresheafHom(r2, r, PresheafHom.identity(r).comps)
    return PComplex(space, ring, n, n + 1, {n + 1: r2, n: r}, {n + 1: d})


def unit_interval(space: FinSpace, ring: Ring) -> PComplex:
    """``R u`` in degree 1 and ``R a + R b`` in degree 0 with ``d u = a - b``."""
    one = constant_presheaf(space, ring)
    two = cell_presheaf(space, ring, [(space.full, 0), (space.full, 0)])
    d = PresheafHom(one, two, {u: np.array([[ring.one], [-ring.one]], dtype=object) for u in space.opens})
    return PComplex(space, ring, 0, 1, {1: one, 0: two}, {1: d})


def unit_complex(space: FinSpace, ring: Ring) -> PComplex:
    """``R[0]``, the tensor unit."""
    return single(space, ring, constant_presheaf(space, ring), 0)


def cell_complex(space: FinSpace, ring: Ring, cells: Mapping, diffs: Mapping) -> PComplex:
    """Complex with ``cells[n]`` a list of ``(C, order)`` and ``diffs[n][k]`` the
    boundary of cell ``k`` of degree ``n`` as an element of the degree ``n-1`` term at ``C``."""
    from .presheaf import cell_hom

    terms = {n: cell_presheaf(space, ring, cs) for n, cs in cells.items() if cs}
    if not terms:
        return zero_complex(space, ring)
    lo, hi = min(terms), max(terms)
    for n in range(lo, hi + 1):
        terms.setdefault(n, cell_presheaf(space, ring, []))
    ds = {}
    for n in range(lo + 1, hi + 1):
        elems = diffs.get(n, [])
        if terms[n].cells and len(elems) != len(terms[n].cells):
            raise ComplexError(f"need one boundary per cell in degree {n}")
        ds[n] = cell_hom(terms[n], terms[n - 1], elems) if terms[n].cells else \
            PresheafHom.zero(terms[n], terms[n - 1])
    return PComplex(space, ring, lo, hi, terms, ds).audit()


def simplicial_chains(simplices: Iterable[Iterable]) -> tuple[dict, dict]:
    """Simplicial chains of the complex generated by ``simplices``.

    Returns ``(basis, boundary)``: ``basis[k]`` is the sorted list of
    ``k``-simplices (as sorted vertex tuples) and ``boundary[k]`` the integer
    matrix from degree ``k`` to ``k - 1``.
    """
    faces = set()
    for s in simplices:
        s = tuple(sorted(s))
        if not s:
            continue
        for k in range(1, len(s) + 1):
            faces.update(combinations(s, k))
    if not faces:
        raise ValueError("a simplicial complex needs at least one vertex")
    top = max(len(f) for f in faces) - 1
    basis = {k: sorted(f for f in faces if len(f) == k + 1) for k in range(top + 1)}
    boundary = {}
    for k in range(1, top + 1):
        idx = {f: i for i, f in enumerate(basis[k - 1])}
        m = zeros(len(basis[k - 1]), len(basis[k]))
        for c, s in enumerate(basis[k]):
            for t in range(len(s)):
                m[idx[s[:t] + s[t + 1:]], c] += (-1) ** t
        boundary[k] = m
    return basis, boundary


def constant_chains(space: FinSpace, ring: Ring, simplices: Iterable[Iterable]) -> PComplex:
    """Simplicial chains over the ring, as a complex of constant presheaves."""
    basis, boundary = simplicial_chains(simplices)
    terms = {k: cell_presheaf(space, ring, [(space.full, 0)] * len(b)) for k, b in basis.items()}
    diffs = {k: PresheafHom(terms[k], terms[k - 1], {u: ring.fix(boundary[k].copy()) for u in space.opens})
             for k in boundary}
    return PComplex(space, ring, 0, max(basis), terms, diffs)


def simplicial_tensor(x: PComplex, simplices: Iterable[Iterable]) -> PComplex:
    return tensor_total(x, constant_chains(x.space, x.ring, simplices))


# ---------------------------------------------------------------------------
# mapping complexes


class HomSpace:
    """Natural transformations ``F -> G`` between two presheaves as a module.

    ``module`` is the module of natural maps; ``families(vecs)`` turns
    coordinate columns into per-open matrices and ``coords(comps)`` goes back.
    Cell presheaves use the Yoneda description ``Hom(R_C/(m), G) = ann_m G(C)``.
    """

    def __init__(self, f: Presheaf, g: Presheaf):
        self.f, self.g = f, g
        sp, ring = f.space, f.ring
        self.ring = ring
        if f.cells is not None:
            self.mode = "cells"
            parts, incs = [], []
            for c, m in f.cells:
                a, inc = annihilator(g[c], m)
                parts.append(a)
                incs.append(inc)
            self.parts, self.incs = parts, incs
            self.module = FPModule(ring, tuple(o for a in parts for o in a.orders))
            self.offs = np.cumsum([0] + [a.ngens for a in parts]).tolist()
            return
        self.mode = "generic"
        self.homs = {u: HomModule(f[u], g[u]) for u in sp.opens}
        amb_orders = tuple(o for u in sp.opens for o in self.homs[u].module.orders)
        self.ambient = FPModule(ring, amb_orders)
        self.aoffs = {}
        o = 0
        for u in sp.opens:
            self.aoffs[u] = o
            o += self.homs[u].module.ngens
        rows, tgt_orders = [], []
        for (u, v) in sp.covering_pairs:
            hv = HomModule(f[u], g[v])
            blk = zeros(hv.module.ngens, self.ambient.ngens)
            hu = self.homs[u]
            basis_u = hu.to_matrices(eye(hu.module.ngens, ring))
            for k, phi in enumerate(basis_u):
                blk[:, self.aoffs[u] + k] += hv.coordinates([matmul(ring, g.res[(u, v)], phi)])[:, 0]
            hvv = self.homs[v]
            basis_v = hvv.to_matrices(eye(hvv.module.ngens, ring))
            for k, phi in enumerate(basis_v):
                blk[:, self.aoffs[v] + k] -= hv.coordinates([matmul(ring, phi, f.res[(u, v)])])[:, 0]
            rows.append(blk)
            tgt_orders.extend(hv.module.orders)
        cmod = FPModule(ring, tuple(tgt_orders))
        cons = ModHom(self.ambient, cmod, cmod.reduce(vstack(rows, self.ambient.ngens)))
        self.module, self.inc = kernel(cons)

    def families(self, vecs: np.ndarray) -> list[dict]:
        sp, ring, f, g = self.f.space, self.ring, self.f, self.g
        out = []
        for c in range(vecs.shape[1]):
            col = vecs[:, c:c + 1]
            if self.mode == "cells":
                elems = []
                for i, (cc, _) in enumerate(f.cells):
                    part = col[self.offs[i]:self.offs[i + 1]]
                    elems.append(self.incs[i](part) if part.shape[0] else zeros(g[cc].ngens, 1))
                comps = {}
                for u in sp.opens:
                    cols = [matmul(ring, g.restriction(f.cells[i][0], u), elems[i])
                            for i, (cc, _) in enumerate(f.cells) if u <= cc]
                    comps[u] = g[u].reduce(hstack(cols, g[u].ngens))
                out.append(comps)
            else:
                amb = matmul(ring, self.inc.matrix, col)
                comps = {}
                for u in sp.opens:
                    h = self.homs[u]
                    comps[u] = h.to_matrices(amb[self.aoffs[u]:self.aoffs[u] + h.module.ngens])[0]
                out.append(comps)
        return out

    def coords(self, comps_list: Sequence[dict]) -> Optional[np.ndarray]:
        sp, f, g = self.f.space, self.f, self.g
        if not comps_list:
            return zeros(self.module.ngens, 0)
        cols = []
        for comps in comps_list:
            if self.mode == "cells":
                blocks = []
                for i, (cc, _) in enumerate(f.cells):
                    k = [j for j, (c2, _) in enumerate(f.cells) if cc <= c2].index(i)
                    y = g[cc].reduce(comps[cc][:, k:k + 1])
                    if self.parts[i].ngens == 0:
                        if not g[cc].is_zero_element(y):
                            return None
                        continue
                    pre = self.incs[i].preimage(y)
                    if pre is None:
                        return None
                    blocks.append(pre)
                cols.append(vstack(blocks, 1))
            else:
                amb = vstack([self.homs[u].coordinates([comps[u]]) for u in sp.opens], 1)
                pre = self.inc.preimage(amb)
                if pre is None:
                    return None
                cols.append(pre)
        return self.module.reduce(hstack(cols, self.module.ngens))


class MappingComplex:
    """``Hom(X, Y)`` as a complex of modules in the requested degrees.

    Degree ``k`` is the sum over ``n`` of natural maps ``X_n -> Y_{n+k}``.
    """

    def __init__(self, x: PComplex, y: PComplex, degrees: Optional[Iterable[int]] = None):
        same_shape(x, y)
        self.x, self.y = x, y
        ring = x.ring
        self.ring = ring
        if degrees is None:
            if x.is_empty or y.is_empty:
                degrees = []
            else:
                degrees = range(y.lo - x.hi, y.hi - x.lo + 1)
        degrees = sorted(set(degrees))
        self.degrees = degrees
        self.spaces = {}
        modules, self.offsets = {}, {}
        for k in set(degrees) | {k - 1 for k in degrees}:
            parts = []
            offs = {}
            o = 0
            for n in x.degrees:
                if y.lo <= n + k <= y.hi:
                    hs = self.spaces.setdefault((n, k), HomSpace(x.terms[n], y.terms[n + k]))
                    offs[n] = (o, o + hs.module.ngens)
                    o += hs.module.ngens
                    parts.append(hs.module)
            modules[k] = FPModule(ring, tuple(o_ for p in parts for o_ in p.orders))
            self.offsets[k] = offs
        self.modules = modules
        diffs = {}
        for k in degrees:
            diffs[k] = self._diff_matrix(k)
        self.complex = ModuleComplex(ring, {k: modules[k] for k in modules}, diffs)

    def families(self, k: int, vecs: np.ndarray) -> list[dict]:
        """Columns of degree-``k`` coordinates as ``{n: {U: matrix}}`` families."""
        out = [dict() for _ in range(vecs.shape[1])]
        for n, (a, b) in self.offsets[k].items():
            fam = self.spaces[(n, k)].families(vecs[a:b])
            for c in range(vecs.shape[1]):
                out[c][n] = fam[c]
        return out

    def coords(self, k: int, fams: Sequence[dict]) -> Optional[np.ndarray]:
        x, y, sp = self.x, self.y, self.x.space
        blocks = []
        for n, (a, b) in self.offsets[k].items():
            per = []
            for fam in fams:
                comps = fam.get(n)
                if comps is None:
                    comps = {u: zeros(y.module(n + k, u).ngens, x.module(n, u).ngens) for u in sp.opens}
                per.append(comps)
            c = self.spaces[(n, k)].coords(per)
            if c is None:
                return None
            blocks.append(c)
        return vstack(blocks, len(fams))

    def _apply_d(self, k: int, fam: dict) -> dict:
        x, y, ring, sp = self.x, self.y, self.ring, self.x.space
        sign = -1 if k % 2 else 1
        out = {}
        for n in x.degrees:
            if not (y.lo <= n + k - 1 <= y.hi):
                continue
            comps = {}
            for u in sp.opens:
                m = zeros(y.module(n + k - 1, u).ngens, x.module(n, u).ngens)
                if n in fam:
                    m = m + matmul(ring, y.dmat(n + k, u), fam[n][u])
                if n - 1 in fam:
                    m = m - sign * matmul(ring, fam[n - 1][u], x.dmat(n, u))
                comps[u] = y.module(n + k - 1, u).reduce(m)
            out[n] = comps
        return out

    def _diff_matrix(self, k: int) -> np.ndarray:
        src = self.modules[k]
        fams = self.families(k, eye(src.ngens, self.ring))
        images = [self._apply_d(k, f) for f in fams]
        c = self.coords(k - 1, images)
        if c is None:
            raise ComplexError("differential of the mapping complex left the natural maps")
        return c

    def homology(self, k: int = 0) -> FPModule:
        return self.complex.homology(k)

    def chain_map(self, fam: dict) -> ChainMap:
        x, y = self.x, self.y
        comps = {n: PresheafHom(x.terms[n], y.term(n), fam[n]) for n in fam}
        return ChainMap(x, y, comps)

    def family_of(self, f: ChainMap, k: int = 0) -> dict:
        return {n: {u: f.mat(n, u) for u in self.x.space.opens}
                for n in self.x.degrees if self.y.lo <= n + k <= self.y.hi}


def mapping_complex(x: PComplex, y: PComplex, degrees: Optional[Iterable[int]] = None) -> MappingComplex:
    return MappingComplex(x, y, degrees)


def chain_maps(x: PComplex, y: PComplex) -> list[ChainMap]:
    """Generators of the module of chain maps ``X -> Y``."""
    mc = MappingComplex(x, y, [0])
    cd = mc.complex.cycle_data(0)
    fams = mc.families(0, cd.iota.matrix)
    return [mc.chain_map(f) for f in fams]


class HomotopyClasses(NamedTuple):
    module: FPModule
    mapping: MappingComplex

    def class_of(self, f: ChainMap) -> np.ndarray:
        mc = self.mapping
        c = mc.coords(0, [mc.family_of(f)])
        if c is None:
            raise ComplexError("not a natural family")
        cls = mc.complex.cycle_data(0).classes(mc.ring, c)
        if cls is None:
            raise ComplexError("not a chain map")
        return cls

    def representatives(self) -> list[ChainMap]:
        mc = self.mapping
        reps = mc.complex.cycle_data(0).cycle_reps(mc.ring)
        return [mc.chain_map(f) for f in mc.families(0, reps)]


def homotopy_classes(x: PComplex, y: PComplex) -> HomotopyClasses:
    """Chain homotopy classes of maps ``X -> Y`` (degree-zero homology of the mapping complex)."""
    mc = MappingComplex(x, y, [0, 1])
    return HomotopyClasses(mc.homology(0), mc)


def null_homotopy(f: ChainMap) -> Optional[dict]:
    """A family ``H_n: X_n -> Y_{n+1}`` with ``dH + Hd = f``, or ``None``."""
    mc = MappingComplex(f.source, f.target, [0, 1])
    c = mc.coords(0, [mc.family_of(f)])
    if c is None:
        return None
    d1 = mc.complex.diff(1)
    pre = d1.preimage(c)
    if pre is None:
        return None
    return mc.families(1, pre)[0]


def unit_iso(x: PComplex) -> tuple[ChainMap, ChainMap]:
    """The canonical isomorphisms ``X (x) R[0] -> X`` and back."""
    tt = TotalTensor(x, unit_complex(x.space, x.ring))
    t = tt.complex
    sp = x.space
    fwd, bwd = {}, {}
    for n in x.degrees:
        a, b = {}, {}
        for u in sp.opens:
            k = x.module(n, u).ngens
            tm = tt.pieces[(n, 0)][1][u]
            # X_n(u) (x) R: pair (i, 0) for each generator i, none dropped
            m = zeros(t.module(n, u).ngens, k)
            for i in range(k):
                m[tm.keep.index(i), i] = x.ring.one
            b[u] = m
            a[u] = m.T.copy()
        fwd[n] = PresheafHom(t.term(n), x.term(n), a)
        bwd[n] = PresheafHom(x.term(n), t.term(n), b)
    return ChainMap(t, x, fwd), ChainMap(x, t, bwd)
