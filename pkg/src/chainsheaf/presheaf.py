"""Presheaves of finitely presented modules on a finite space.

A presheaf stores a module at every nonempty open and a restriction matrix for
every strict inclusion ``V < U`` (target ``F(V)``, source ``F(U)``).  Only the
covering inclusions need to be supplied; the rest are composed and checked for
path independence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .linalg import (
    FPModule,
    ModHom,
    Ring,
    TensorModule,
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
from .site import FinSpace, Open, SiteError


class PresheafError(ValueError):
    """A malformed presheaf or presheaf homomorphism."""


def _paths_restriction(space: FinSpace, ring: Ring, values, cover_res):
    """Compose covering restrictions into all strict restrictions, checking path independence."""
    res = {}
    for (u, v) in space.covering_pairs:
        if (u, v) not in cover_res:
            raise PresheafError(f"missing restriction {space.fmt(u)} -> {space.fmt(v)}")
        res[(u, v)] = values[v].reduce(cover_res[(u, v)])
    # opens sorted by size: process targets from large gaps downward
    for u in sorted(space.opens, key=len, reverse=True):
        below = sorted((v for v in space.opens if v < u), key=len, reverse=True)
        for v in below:
            if (u, v) in res:
                continue
            found = None
            for w in space.opens:
                if v < w < u and (u, w) in res and (w, v) in res:
                    found = values[v].reduce(matmul(ring, res[(w, v)], res[(u, w)]))
                    break
            res[(u, v)] = found
    for (u, v) in space.strict_pairs:
        for w in space.opens:
            if v < w < u:
                comp = values[v].reduce(matmul(ring, res[(w, v)], res[(u, w)]))
                if not values[v].is_zero_element(comp - res[(u, v)]):
                    raise PresheafError(
                        f"restrictions do not compose: {space.fmt(u)} -> {space.fmt(w)} -> {space.fmt(v)}"
                    )
    return res


@dataclass(frozen=True, eq=False)
class Presheaf:
    space: FinSpace
    ring: Ring
    values: Mapping
    res: Mapping
    cells: Optional[tuple] = None

    def __post_init__(self):
        for u in self.space.opens:
            if u not in self.values:
                raise PresheafError(f"no value at {self.space.fmt(u)}")
            if self.values[u].ring != self.ring:
                raise PresheafError(f"value at {self.space.fmt(u)} is over the wrong ring")
        for (u, v) in self.space.strict_pairs:
            m = self.res.get((u, v))
            if m is None:
                raise PresheafError(f"missing restriction {self.space.fmt(u)} -> {self.space.fmt(v)}")
            h = ModHom(self.values[u], self.values[v], m)
            if not h.is_well_defined():
                raise PresheafError(f"restriction {self.space.fmt(u)} -> {self.space.fmt(v)} is not well defined")

    @classmethod
    def from_covering(cls, space: FinSpace, ring: Ring, values: Mapping, cover_res: Mapping,
                      cells: Optional[tuple] = None) -> "Presheaf":
        values = dict(values)
        res = _paths_restriction(space, ring, values, cover_res)
        return cls(space, ring, values, res, cells)

    def __getitem__(self, u: Open) -> FPModule:
        return self.values[u]

    def restriction(self, u: Open, v: Open) -> np.ndarray:
        if u == v:
            return eye(self.values[u].ngens, self.ring)
        if not v < u:
            raise PresheafError(f"{self.space.fmt(v)} is not inside {self.space.fmt(u)}")
        return self.res[(u, v)]

    def restriction_hom(self, u: Open, v: Open) -> ModHom:
        return ModHom(self.values[u], self.values[v], self.restriction(u, v))

    def is_zero(self) -> bool:
        return all(self.values[u].is_zero() for u in self.space.opens)

    @property
    def is_levelwise_free(self) -> bool:
        return all(self.values[u].free_rank == self.values[u].ngens for u in self.space.opens)

    def describe(self) -> dict:
        return {self.space.key(u): self.values[u].describe() for u in self.space.opens}

    def same_shape(self, other: "Presheaf") -> bool:
        return self.space == other.space and self.ring == other.ring

    def structurally_equal(self, other: "Presheaf") -> bool:
        if not self.same_shape(other):
            return False
        for u in self.space.opens:
            if self.values[u] != other.values[u]:
                return False
        for k in self.space.strict_pairs:
            if not np.array_equal(self.res[k], other.res[k]):
                return False
        return True


@dataclass(frozen=True, eq=False)
class PresheafHom:
    source: Presheaf
    target: Presheaf
    comps: Mapping

    def __post_init__(self):
        s = self.source.space
        if not self.source.same_shape(self.target):
            raise PresheafError("source and target live over different spaces or rings")
        for u in s.opens:
            m = self.comps.get(u)
            if m is None or m.shape != (self.target[u].ngens, self.source[u].ngens):
                raise PresheafError(f"component at {s.fmt(u)} missing or of wrong shape")

    @property
    def space(self) -> FinSpace:
        return self.source.space

    @property
    def ring(self) -> Ring:
        return self.source.ring

    def __getitem__(self, u: Open) -> np.ndarray:
        return self.comps[u]

    def at(self, u: Open) -> ModHom:
        return ModHom(self.source[u], self.target[u], self.comps[u])

    def naturality_failure(self) -> Optional[tuple]:
        """First ``(U, V)`` whose square does not commute, or a bad component ``(U, None)``."""
        for u in self.space.opens:
            if not self.at(u).is_well_defined():
                return (u, None)
        for (u, v) in self.space.strict_pairs:
            lhs = matmul(self.ring, self.target.res[(u, v)], self.comps[u])
            rhs = matmul(self.ring, self.comps[v], self.source.res[(u, v)])
            if not self.target[v].is_zero_element(lhs - rhs):
                return (u, v)
        return None

    def is_natural(self) -> bool:
        return self.naturality_failure() is None

    def audit(self) -> "PresheafHom":
        bad = self.naturality_failure()
        if bad is not None:
            u, v = bad
            if v is None:
                raise PresheafError(f"component at {self.space.fmt(u)} is not well defined")
            raise PresheafError(f"naturality fails on {self.space.fmt(u)} -> {self.space.fmt(v)}")
        return self

    def compose(self, other: "PresheafHom") -> "PresheafHom":
        """``self`` after ``other``."""
        return PresheafHom(other.source, self.target, {
            u: self.target[u].reduce(matmul(self.ring, self.comps[u], other.comps[u])) for u in self.space.opens
        })

    def __add__(self, other: "PresheafHom") -> "PresheafHom":
        return PresheafHom(self.source, self.target, {
            u: self.target[u].reduce(self.comps[u] + other.comps[u]) for u in self.space.opens
        })

    def scale(self, c) -> "PresheafHom":
        return PresheafHom(self.source, self.target, {
            u: self.target[u].reduce(self.comps[u] * c) for u in self.space.opens
        })

    def __neg__(self) -> "PresheafHom":
        return self.scale(-1)

    def __sub__(self, other: "PresheafHom") -> "PresheafHom":
        return self + (-other)

    def is_zero(self) -> bool:
        return all(self.target[u].is_zero_element(self.comps[u]) for u in self.space.opens)

    def equals(self, other: "PresheafHom") -> bool:
        return (self - other).is_zero()

    def is_iso(self) -> bool:
        return all(is_iso(self.at(u)) for u in self.space.opens)

    @classmethod
    def identity(cls, f: Presheaf) -> "PresheafHom":
        return cls(f, f, {u: eye(f[u].ngens, f.ring) for u in f.space.opens})

    @classmethod
    def zero(cls, source: Presheaf, target: Presheaf) -> "PresheafHom":
        return cls(source, target, {u: zeros(target[u].ngens, source[u].ngens) for u in source.space.opens})


# ---------------------------------------------------------------------------
# constructors


def zero_presheaf(space: FinSpace, ring: Ring) -> Presheaf:
    z = FPModule.zero_module(ring)
    return Presheaf(space, ring, {u: z for u in space.opens},
                    {k: zeros(0, 0) for k in space.strict_pairs}, cells=())


def cell_presheaf(space: FinSpace, ring: Ring, cells: Sequence[tuple]) -> Presheaf:
    """Direct sum of cyclic free presheaves ``R_C / (m)`` given as ``(C, m)`` pairs."""
    cells = tuple((frozenset(c), ring.canonical(ring.coerce(m))) for c, m in cells)
    for c, m in cells:
        if c not in space._open_set:
            raise SiteError(f"{space.fmt(c)} is not a nonempty open set")
        if m != 0 and ring.is_unit(m):
            raise PresheafError("a cell order must not be a unit")
    values = {}
    idx = {}
    for u in space.opens:
        idx[u] = [i for i, (c, _) in enumerate(cells) if u <= c]
        values[u] = FPModule(ring, tuple(cells[i][1] for i in idx[u]))
    res = {}
    for (u, v) in space.strict_pairs:
        m = zeros(len(idx[v]), len(idx[u]))
        for a, i in enumerate(idx[u]):
            m[idx[v].index(i), a] = ring.one
        res[(u, v)] = m
    return Presheaf(space, ring, values, res, cells=cells)


def free_presheaf(space: FinSpace, ring: Ring, c: Iterable[str], order=0) -> Presheaf:
    """``R_C``: the ring on opens inside ``C``, zero elsewhere (optionally ``R_C / (order)``)."""
    c = frozenset(c)
    if c not in space._open_set:
        raise SiteError(f"{space.fmt(c)} is not a nonempty open set")
    return cell_presheaf(space, ring, [(c, order)])


def constant_presheaf(space: FinSpace, ring: Ring, module: Optional[FPModule] = None) -> Presheaf:
    """The constant presheaf with value ``module`` (default the ring itself)."""
    module = module if module is not None else FPModule.free(ring, 1)
    return cell_presheaf(space, ring, [(space.full, o) for o in module.orders])


def cell_index(f: Presheaf, u: Open) -> list:
    """Cell numbers whose coordinates appear, in order, at ``u`` (cell presheaves only)."""
    if f.cells is None:
        raise PresheafError("not a cell presheaf")
    return [i for i, (c, _) in enumerate(f.cells) if u <= c]


# ---------------------------------------------------------------------------
# Yoneda


def hom_from_element(c: Open, x: np.ndarray, target: Presheaf, order=0) -> PresheafHom:
    """The map ``R_C -> X`` (or ``R_C/(order) -> X``) sending the generator to ``x`` in ``X(C)``."""
    space, ring = target.space, target.ring
    src = free_presheaf(space, ring, c, order)
    x = np.asarray(x, dtype=object).reshape(-1, 1)
    comps = {}
    for u in space.opens:
        if u <= c:
            comps[u] = target[u].reduce(matmul(ring, target.restriction(c, u), x))
        else:
            comps[u] = zeros(target[u].ngens, 0)
    return PresheafHom(src, target, comps)


def element_of_hom(f: PresheafHom, c: Open) -> np.ndarray:
    """Image of the generator of ``R_C`` at ``C``; inverse of :func:`hom_from_element`."""
    return f.comps[c][:, 0:1].copy()


def cell_hom(source: Presheaf, target: Presheaf, elements: Sequence[np.ndarray]) -> PresheafHom:
    """Map out of a cell presheaf determined by one element of ``target(C_i)`` per cell."""
    space, ring = source.space, source.ring
    cells = source.cells
    if cells is None or len(elements) != len(cells):
        raise PresheafError("need one element per cell of a cell presheaf")
    comps = {}
    for u in space.opens:
        idx = cell_index(source, u)
        cols = [matmul(ring, target.restriction(cells[i][0], u), np.asarray(elements[i], dtype=object).reshape(-1, 1))
                for i in idx]
        comps[u] = target[u].reduce(hstack(cols, target[u].ngens))
    return PresheafHom(source, target, comps)


# ---------------------------------------------------------------------------
# abelian structure


class SumData:
    """A direct sum with its inclusions and projections."""

    def __init__(self, parts: Sequence[Presheaf]):
        if not parts:
            raise PresheafError("empty direct sum")
        space, ring = parts[0].space, parts[0].ring
        for p in parts:
            if not p.same_shape(parts[0]):
                raise PresheafError("direct sum of presheaves over different spaces or rings")
        values = {u: FPModule(ring, tuple(o for p in parts for o in p[u].orders)) for u in space.opens}
        res = {k: block_diag([p.res[k] for p in parts]) for k in space.strict_pairs}
        cells = None
        if all(p.cells is not None for p in parts):
            cells = tuple(c for p in parts for c in p.cells)
        self.sum = Presheaf(space, ring, values, res, cells)
        self.parts = list(parts)
        self.inclusions = []
        self.projections = []
        offsets = {u: 0 for u in space.opens}
        for p in parts:
            inc, proj = {}, {}
            for u in space.opens:
                n, k = values[u].ngens, p[u].ngens
                i = zeros(n, k)
                o = offsets[u]
                for a in range(k):
                    i[o + a, a] = ring.one
                inc[u] = i
                proj[u] = i.T.copy()
                offsets[u] += k
            self.inclusions.append(PresheafHom(p, self.sum, inc))
            self.projections.append(PresheafHom(self.sum, p, proj))


def direct_sum(*parts: Presheaf) -> Presheaf:
    return SumData(parts).sum


def direct_sum_hom(*homs: PresheafHom) -> PresheafHom:
    src = SumData([h.source for h in homs]).sum
    tgt = SumData([h.target for h in homs]).sum
    return PresheafHom(src, tgt, {u: block_diag([h.comps[u] for h in homs]) for u in src.space.opens})


def _induced_restrictions(space, ring, sub_values, inclusions, ambient: Presheaf):
    """Restrictions of a levelwise submodule, found by solving through the inclusions."""
    res = {}
    for (u, v) in space.strict_pairs:
        img = matmul(ring, ambient.res[(u, v)], inclusions[u].matrix)
        pre = inclusions[v].preimage(ambient[v].reduce(img)) if sub_values[u].ngens else zeros(sub_values[v].ngens, 0)
        if pre is None:
            raise PresheafError("subpresheaf is not closed under restriction")
        res[(u, v)] = pre
    return res


def subpresheaf(ambient: Presheaf, gens: Mapping) -> tuple[Presheaf, PresheafHom]:
    """Levelwise submodule generated by ``gens[U]`` (columns); must be closed under restriction."""
    from .linalg import submodule

    space, ring = ambient.space, ambient.ring
    vals, incs = {}, {}
    for u in space.opens:
        vals[u], incs[u] = submodule(ambient[u], gens[u])
    res = _induced_restrictions(space, ring, vals, incs, ambient)
    sub = Presheaf(space, ring, vals, res)
    return sub, PresheafHom(sub, ambient, {u: incs[u].matrix for u in space.opens})


def kernel_presheaf(f: PresheafHom) -> tuple[Presheaf, PresheafHom]:
    space, ring = f.space, f.ring
    vals, incs = {}, {}
    for u in space.opens:
        vals[u], incs[u] = kernel(f.at(u))
    res = _induced_restrictions(space, ring, vals, incs, f.source)
    k = Presheaf(space, ring, vals, res)
    return k, PresheafHom(k, f.source, {u: incs[u].matrix for u in space.opens})


def image_presheaf(f: PresheafHom) -> tuple[Presheaf, PresheafHom]:
    return subpresheaf(f.target, {u: f.comps[u] for u in f.space.opens})


class PresheafCokernel:
    """Levelwise cokernel with projection and a levelwise set-theoretic section."""

    def __init__(self, f: PresheafHom):
        space, ring = f.space, f.ring
        cks = {u: cokernel(f.at(u)) for u in space.opens}
        vals = {u: cks[u].module for u in space.opens}
        res = {}
        for (u, v) in space.strict_pairs:
            m = matmul(ring, cks[v].projection.matrix, f.target.res[(u, v)], cks[u].section)
            res[(u, v)] = vals[v].reduce(m)
        self.module = Presheaf(space, ring, vals, res)
        self.projection = PresheafHom(f.target, self.module, {u: cks[u].projection.matrix for u in space.opens})
        self.section = {u: cks[u].section for u in space.opens}


def cokernel_presheaf(f: PresheafHom) -> tuple[Presheaf, PresheafHom]:
    c = PresheafCokernel(f)
    return c.module, c.projection


# ---------------------------------------------------------------------------
# tensor products


def tensor(f: Presheaf, g: Presheaf) -> Presheaf:
    """Levelwise tensor product over the base ring."""
    return tensor_data(f, g)[0]


def tensor_data(f: Presheaf, g: Presheaf) -> tuple[Presheaf, dict]:
    """Tensor product together with the per-open :class:`TensorModule` bookkeeping."""
    if not f.same_shape(g):
        raise PresheafError("tensor of presheaves over different spaces or rings")
    space, ring = f.space, f.ring
    tm = {u: TensorModule(f[u], g[u]) for u in space.opens}
    vals = {u: tm[u].module for u in space.opens}
    res = {(u, v): tm[u].hom(f.res[(u, v)], g.res[(u, v)], tm[v]) for (u, v) in space.strict_pairs}
    cells = None
    if f.cells is not None and g.cells is not None:
        cells = _tensor_cells(ring, f.cells, g.cells, tm, space)
    return Presheaf(space, ring, vals, res, cells), tm


def _tensor_cells(ring, fc, gc, tm, space):
    out = []
    for i, (c, a) in enumerate(fc):
        for j, (d, b) in enumerate(gc):
            o = ring.gcd(a, b)
            if o != 0 and ring.is_unit(o):
                continue
            cd = c & d
            if not cd:
                continue
            out.append((cd, o))
    # only valid as a cell description when coordinates line up with cell order
    for u in space.opens:
        if len([1 for c, _ in out if u <= c]) != tm[u].module.ngens:
            return None
    return tuple(out)


def tensor_hom(f: PresheafHom, g: PresheafHom, source: Optional[tuple] = None,
               target: Optional[tuple] = None) -> PresheafHom:
    """``f (x) g`` between levelwise tensor products."""
    s, stm = source if source is not None else tensor_data(f.source, g.source)
    t, ttm = target if target is not None else tensor_data(f.target, g.target)
    return PresheafHom(s, t, {u: stm[u].hom(f.comps[u], g.comps[u], ttm[u]) for u in s.space.opens})


# ---------------------------------------------------------------------------
# stalks, supports, sheafification


def stalk(f: Presheaf, p: str) -> FPModule:
    return f[f.space.min_open(p)]


def stalk_hom(h: PresheafHom, p: str) -> ModHom:
    return h.at(h.space.min_open(p))


def support(f: Presheaf) -> frozenset:
    """Points with nonzero stalk."""
    return frozenset(p for p in f.space.points if not stalk(f, p).is_zero())


support_of_module_presheaf = support


class Sheafification:
    """One-step sheafification on a finite space.

    ``L(U)`` is the module of families ``(x_p)_{p in U}`` with ``x_p`` in
    ``F(U_p)`` that agree under restriction whenever ``U_q < U_p``; ``unit``
    is the map ``F -> L`` induced by restrictions.
    """

    def __init__(self, f: Presheaf):
        space, ring = f.space, f.ring
        self.source = f
        pts = {u: [p for p in space.points if p in u] for u in space.opens}
        self.points = pts
        mins = {p: space.min_open(p) for p in space.points}
        prod, incs, vals, offsets = {}, {}, {}, {}
        for u in space.opens:
            blocks = [f[mins[p]] for p in pts[u]]
            prod[u] = FPModule(ring, tuple(o for b in blocks for o in b.orders))
            offs = np.cumsum([0] + [b.ngens for b in blocks]).tolist()
            rows = []
            tgt_orders = []
            for a, p in enumerate(pts[u]):
                for b, q in enumerate(pts[u]):
                    if mins[q] < mins[p]:
                        r = f.res[(mins[p], mins[q])]
                        block = zeros(f[mins[q]].ngens, prod[u].ngens)
                        block[:, offs[a]:offs[a + 1]] = r
                        block[:, offs[b]:offs[b + 1]] -= eye(f[mins[q]].ngens, ring)
                        rows.append(block)
                        tgt_orders.extend(f[mins[q]].orders)
            cons = vstack(rows, prod[u].ngens)
            cmod = FPModule(ring, tuple(tgt_orders))
            vals[u], incs[u] = kernel(ModHom(prod[u], cmod, cmod.reduce(cons)))
            offsets[u] = offs
        res = {}
        for (u, v) in space.strict_pairs:
            proj = zeros(prod[v].ngens, prod[u].ngens)
            ou, ov = offsets[u], offsets[v]
            for b, q in enumerate(pts[v]):
                a = pts[u].index(q)
                n = ov[b + 1] - ov[b]
                proj[ov[b]:ov[b + 1], ou[a]:ou[a + 1]] = eye(n, ring)
            img = matmul(ring, proj, incs[u].matrix)
            pre = incs[v].preimage(prod[v].reduce(img)) if vals[u].ngens else zeros(vals[v].ngens, 0)
            res[(u, v)] = pre
        self.sheaf = Presheaf(space, ring, vals, res)
        unit = {}
        for u in space.opens:
            col = vstack([f.restriction(u, mins[p]) for p in pts[u]], f[u].ngens)
            pre = incs[u].preimage(prod[u].reduce(col)) if f[u].ngens else zeros(vals[u].ngens, 0)
            unit[u] = pre
        self.unit = PresheafHom(f, self.sheaf, unit)
        self.product_inclusions = incs
        self.products = prod


def sheafify(f: Presheaf) -> tuple[Presheaf, PresheafHom]:
    s = Sheafification(f)
    return s.sheaf, s.unit


def sheafify_hom(h: PresheafHom, src: Optional[Sheafification] = None,
                 tgt: Optional[Sheafification] = None) -> PresheafHom:
    """``L(h)``, computed on the product coordinates and pulled back through the inclusions."""
    space, ring = h.space, h.ring
    src = src or Sheafification(h.source)
    tgt = tgt or Sheafification(h.target)
    comps = {}
    for u in space.opens:
        pts = src.points[u]
        blocks = [h.comps[space.min_open(p)] for p in pts]
        big = block_diag(blocks)
        img = matmul(ring, big, src.product_inclusions[u].matrix)
        if src.sheaf[u].ngens == 0:
            comps[u] = zeros(tgt.sheaf[u].ngens, 0)
            continue
        pre = tgt.product_inclusions[u].preimage(tgt.products[u].reduce(img))
        if pre is None:
            raise PresheafError("sheafified map does not land in compatible families")
        comps[u] = pre
    return PresheafHom(src.sheaf, tgt.sheaf, comps)


def is_sheaf(f: Presheaf) -> bool:
    return Sheafification(f).unit.is_iso()


def is_iso_presheaf_hom(h: PresheafHom) -> bool:
    return h.is_iso()
