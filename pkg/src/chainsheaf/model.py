"""The projective model structure on complexes of presheaves, made executable.

Generating cofibrations are ``i_{C,n}: R_C[n] -> D_C(n)`` and
``j_{C,n}: 0 -> D_C(n)``, where ``D_C(n)`` is ``R_C`` in degrees ``n+1`` and
``n`` joined by the identity.  A map ``f: X -> Y`` has the right lifting
property against ``j_{C,n}`` exactly when ``f_{n+1}(C)`` is onto, and against
``i_{C,n}`` exactly when ``X_{n+1}(C)`` maps onto

    W_n(C) = {(x, y) in X_n(C) + Y_{n+1}(C) : dx = 0, f x = dy}.

Lifts are found by solving those linear systems.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .chain import (
    ChainMap,
    PComplex,
    TotalTensor,
    cokernel_complex,
    direct_sum_complex,
    disk,
    quasi_iso_failure,
    single,
    sphere,
    sum_maps,
    tensor_maps,
    unit_complex,
    unit_interval,
    unit_iso,
    window,
    zero_complex,
)
from .linalg import FPModule, ModHom, cokernel, eye, hstack, kernel, matmul, vstack, zeros
from .presheaf import (
    PresheafHom,
    SumData,
    cell_presheaf,
    hom_from_element,
)
from .site import FinSpace, Open


class ModelError(ValueError):
    """Invalid input to a model-structure operation."""


# ---------------------------------------------------------------------------
# generators


@dataclass(eq=False)
class GenCof:
    kind: str
    open: Open
    degree: int
    realized: ChainMap

    def __repr__(self):
        return f"{self.kind}_{{{self.realized.space.key(self.open)},{self.degree}}}"


def gen_cof(space: FinSpace, ring, kind: str, c, n: int) -> GenCof:
    """``i_{C,n}`` or ``j_{C,n}`` as a chain map."""
    c = frozenset(c)
    if c not in space.opens:
        raise ModelError(f"{space.fmt(c)} is not a nonempty open set")
    tgt = disk(space, ring, c, n)
    if kind == "i":
        src = sphere(space, ring, c, n)
        m = ChainMap(src, tgt, {n: PresheafHom(src.terms[n], tgt.terms[n], PresheafHom.identity(src.terms[n]).comps)})
    elif kind == "j":
        src = zero_complex(space, ring)
        m = ChainMap(src, tgt, {})
    else:
        raise ModelError(f"unknown generator kind {kind!r}")
    return GenCof(kind, c, n, m)


def generators(f: ChainMap, kind: str) -> list[GenCof]:
    """All ``kind`` generators in the degree window ``[lo - 1, hi + 1]`` of ``f``."""
    lo, hi = f.window
    if lo > hi:
        return []
    return [gen_cof(f.space, f.ring, kind, c, n) for n in range(lo - 1, hi + 2) for c in f.space.opens]


# ---------------------------------------------------------------------------
# fibrations


def is_fibration(f: ChainMap) -> bool:
    """Levelwise surjective at every open and degree."""
    return f.is_levelwise_surjective() is None


def is_fibration_nonneg(f: ChainMap) -> bool:
    """Levelwise surjective in degrees ``>= 1`` (the variant for nonnegatively graded complexes)."""
    return f.is_levelwise_surjective(min_degree=1) is None


def is_acyclic_fibration(f: ChainMap) -> bool:
    return is_fibration(f) and quasi_iso_failure(f) is None


# ---------------------------------------------------------------------------
# lifting


@dataclass(eq=False)
class LiftingSquare:
    """``top: A -> X``, ``bottom: B -> Y`` with ``right o top = bottom o left``."""

    left: ChainMap
    right: ChainMap
    top: ChainMap
    bottom: ChainMap
    generator: Optional[GenCof] = None

    def commutes(self) -> bool:
        return self.right.compose(self.top).equals(self.bottom.compose(self.left))

    def audit(self) -> "LiftingSquare":
        if not self.commutes():
            raise ModelError("lifting square does not commute")
        return self


class LiftResult(NamedTuple):
    lift: Optional[ChainMap]
    witness: Optional[dict]

    @property
    def found(self) -> bool:
        return self.lift is not None


def _yoneda_map(src_complex: PComplex, tgt_complex: PComplex, c: Open, elems: dict) -> ChainMap:
    """Chain map out of a disk or sphere on ``R_C``: ``elems[n]`` is the image of the generator in degree ``n``."""
    comps = {}
    for n, x in elems.items():
        h = hom_from_element(c, x, tgt_complex.term(n))
        comps[n] = PresheafHom(src_complex.term(n), tgt_complex.term(n), h.comps)
    return ChainMap(src_complex, tgt_complex, comps)


def square_for(gen: GenCof, right: ChainMap, x0: Optional[np.ndarray], y: np.ndarray) -> LiftingSquare:
    """The square against ``gen`` given by ``y`` in ``Y_{n+1}(C)`` (and ``x0`` in ``X_n(C)`` for ``i``)."""
    c, n = gen.open, gen.degree
    xs, ys = right.source, right.target
    ring = right.ring
    a, b = gen.realized.source, gen.realized.target
    dy = ys.module(n, c).reduce(matmul(ring, ys.dmat(n + 1, c), y))
    bottom = _yoneda_map(b, ys, c, {n + 1: y, n: dy})
    if gen.kind == "j":
        top = ChainMap(a, xs, {})
    else:
        top = _yoneda_map(a, xs, c, {n: x0})
    return LiftingSquare(gen.realized, right, top, bottom, gen)


def _lift_system(right: ChainMap, c: Open, n: int) -> ModHom:
    """``X_{n+1}(C) -> X_n(C) + Y_{n+1}(C)``, ``x -> (dx, f x)``."""
    xs, ys = right.source, right.target
    tgt = FPModule(right.ring, xs.module(n, c).orders + ys.module(n + 1, c).orders)
    m = vstack([xs.dmat(n + 1, c), right.mat(n + 1, c)], xs.module(n + 1, c).ngens)
    return ModHom(xs.module(n + 1, c), tgt, tgt.reduce(m))


def solve_lift(sq: LiftingSquare) -> LiftResult:
    """Lift in a square whose left side is a generating cofibration.

    The returned lift is audited against both triangles.
    """
    gen = sq.generator
    if gen is None:
        raise ModelError("solve_lift needs a generating cofibration on the left")
    c, n = gen.open, gen.degree
    f = sq.right
    ring = f.ring
    xs = f.source
    y = sq.bottom.mat(n + 1, c)[:, 0:1] if sq.bottom.target.module(n + 1, c).ngens else zeros(0, 1)
    if gen.kind == "j":
        h = ModHom(xs.module(n + 1, c), f.target.module(n + 1, c), f.mat(n + 1, c))
        x = h.preimage(y)
        if x is None:
            return LiftResult(None, {"generator": repr(gen), "system": "f x = y", "open": f.space.key(c),
                                     "degree": n + 1, "y": [ring.to_json(v) for v in y[:, 0]]})
    else:
        x0 = sq.top.mat(n, c)[:, 0:1] if xs.module(n, c).ngens else zeros(0, 1)
        h = _lift_system(f, c, n)
        x = h.preimage(vstack([x0, y], 1))
        if x is None:
            return LiftResult(None, {"generator": repr(gen), "system": "dx' = x, f x' = y", "open": f.space.key(c),
                                     "degree": n + 1, "x": [ring.to_json(v) for v in x0[:, 0]],
                                     "y": [ring.to_json(v) for v in y[:, 0]]})
    dx = xs.module(n, c).reduce(matmul(ring, xs.dmat(n + 1, c), x))
    lift = _yoneda_map(gen.realized.target, xs, c, {n + 1: x, n: dx})
    if not lift.compose(sq.left).equals(sq.top) or not f.compose(lift).equals(sq.bottom):
        raise ModelError("internal error: lift failed its audit")
    return LiftResult(lift, None)


def corner_module(f: ChainMap, c: Open, n: int) -> tuple[FPModule, ModHom]:
    """``W_n(C)`` with its inclusion into ``X_n(C) + Y_{n+1}(C)``."""
    xs, ys = f.source, f.target
    ring = f.ring
    amb = FPModule(ring, xs.module(n, c).orders + ys.module(n + 1, c).orders)
    tgt = FPModule(ring, xs.module(n - 1, c).orders + ys.module(n, c).orders)
    top = hstack([xs.dmat(n, c), zeros(xs.module(n - 1, c).ngens, ys.module(n + 1, c).ngens)],
                 xs.module(n - 1, c).ngens)
    bot = hstack([f.mat(n, c), -ys.dmat(n + 1, c)], ys.module(n, c).ngens)
    m = vstack([top, bot], amb.ngens)
    return kernel(ModHom(amb, tgt, tgt.reduce(m)))


def squares(f: ChainMap, gen: GenCof) -> list[LiftingSquare]:
    """Squares against ``gen`` whose solvability decides the lifting property.

    Lifts exist for every square iff they exist for these, since the solvable
    squares form a submodule.
    """
    c, n = gen.open, gen.degree
    ys = f.target
    if gen.kind == "j":
        mod = ys.module(n + 1, c)
        basis = eye(mod.ngens, f.ring)
        return [square_for(gen, f, None, basis[:, k:k + 1]) for k in range(mod.ngens)]
    w, inc = corner_module(f, c, n)
    nx = f.source.module(n, c).ngens
    out = []
    for k in range(w.ngens):
        col = inc.matrix[:, k:k + 1]
        out.append(square_for(gen, f, col[:nx], col[nx:]))
    return out


def has_rlp(f: ChainMap, kind: str) -> tuple[bool, Optional[dict]]:
    """Right lifting property against every ``kind`` generator in the degree window."""
    for gen in generators(f, kind):
        for sq in squares(f, gen):
            r = solve_lift(sq)
            if not r.found:
                return False, r.witness
    return True, None


# ---------------------------------------------------------------------------
# factorization


@dataclass(eq=False)
class Factorization:
    middle: PComplex
    first: ChainMap
    second: ChainMap
    attachments: list = field(default_factory=list)  # (open key, degree) in attachment order

    def audit(self, original: ChainMap) -> dict:
        comp = self.second.compose(self.first).equals(original)
        q = cokernel_complex(self.first).complex
        free = q.is_levelwise_free
        split = all(self.first.at(n, u).matrix.shape[1] == 0 or _is_split_injection(self.first.at(n, u))
                    for n in self.middle.degrees for u in self.middle.space.opens)
        acyc = is_acyclic_fibration(self.second)
        return {"composite": comp, "cokernel_free": free, "split_injective": split, "acyclic_fibration": acyc}


def _is_split_injection(h: ModHom) -> bool:
    """Coordinate inclusion onto a summand (the only form produced by cell attachment)."""
    m = h.matrix
    for j in range(m.shape[1]):
        col = [i for i in range(m.shape[0]) if m[i, j] != 0]
        if len(col) != 1 or m[col[0], j] != 1 or h.target.orders[col[0]] != h.source.orders[j]:
            return False
    rows = [next(i for i in range(m.shape[0]) if m[i, j] != 0) for j in range(m.shape[1])]
    return len(set(rows)) == len(rows)


MAX_FACTOR_STEPS = 64


def factor_cof_acyclicfib(f: ChainMap) -> Factorization:
    """Factor ``f`` as a relative cell map followed by an acyclic fibration.

    Degrees are processed upward.  At degree ``n`` and each open ``C``
    (largest opens first) a free cell ``R_C`` is attached in degree ``n + 1``
    for every generator of the cokernel of ``M_{n+1}(C) -> W_n(C)``, with
    boundary and image read off from the generator.
    """
    x, y = f.source, f.target
    sp, ring = f.space, f.ring
    lo, hi = window(x, y)
    if lo > hi:
        return Factorization(x, ChainMap.identity(x), ChainMap.zero(x, y), [])
    cells = {}  # degree -> list of (open, boundary in M_{n-1}(open), value in Y_n(open))
    mids = {}  # degree -> SumData([X_n, cells_n])
    attachments = []

    def mid_term(n):
        if n not in mids:
            cp = cell_presheaf(sp, ring, [(c, 0) for c, _, _ in cells.get(n, [])])
            mids[n] = SumData([x.term(n), cp])
        return mids[n]

    def mid_d(n, u, pending):
        """Matrix of ``M_n(u) -> M_{n-1}(u)`` with the cells of degree ``n`` in ``pending``."""
        tgt = mid_term(n - 1).sum
        nx = x.module(n, u).ngens
        cols = [vstack([x.dmat(n, u), zeros(tgt[u].ngens - x.module(n - 1, u).ngens, nx)], nx)]
        for c, bd, _ in pending:
            if u <= c:
                cols.append(matmul(ring, tgt.restriction(c, u), bd))
        return tgt[u].reduce(hstack(cols, tgt[u].ngens))

    def mid_q(n, u, pending):
        cols = [f.mat(n, u)]
        for c, _, val in pending:
            if u <= c:
                cols.append(matmul(ring, y.term(n).restriction(c, u), val))
        return y.module(n, u).reduce(hstack(cols, y.module(n, u).ngens))

    n = lo - 1
    steps = 0
    top = hi
    while n <= top:
        steps += 1
        if steps > MAX_FACTOR_STEPS:
            raise ModelError("factorization did not terminate within the step cap")
        mn = mid_term(n).sum
        pending = []
        for c in sorted(sp.opens, key=lambda o: (-len(o), sp.opens.index(o))):
            # corner W_n(C) for the current middle
            amb = FPModule(ring, mn[c].orders + y.module(n + 1, c).orders)
            tgt_prev = mid_term(n - 1).sum[c]
            tgt = FPModule(ring, tgt_prev.orders + y.module(n, c).orders)
            dn = mid_d(n, c, cells.get(n, []))
            qn = mid_q(n, c, cells.get(n, []))
            m = vstack([hstack([dn, zeros(tgt_prev.ngens, y.module(n + 1, c).ngens)], tgt_prev.ngens),
                        hstack([qn, -y.dmat(n + 1, c)], y.module(n, c).ngens)], amb.ngens)
            w, inc = kernel(ModHom(amb, tgt, tgt.reduce(m)))
            if w.ngens == 0:
                continue
            # image of M_{n+1}(C) with the cells attached so far
            nx1 = x.module(n + 1, c).ngens
            dcols = [vstack([x.dmat(n + 1, c), zeros(mn[c].ngens - x.module(n, c).ngens, nx1)], nx1)]
            qcols = [f.mat(n + 1, c)]
            for cc, bd, val in pending:
                if c <= cc:
                    dcols.append(matmul(ring, mn.restriction(cc, c), bd))
                    qcols.append(matmul(ring, y.term(n + 1).restriction(cc, c), val))
            k = nx1 + sum(1 for cc, _, _ in pending if c <= cc)
            img = vstack([hstack(dcols, mn[c].ngens), hstack(qcols, y.module(n + 1, c).ngens)], k)
            pre = inc.preimage(amb.reduce(img))
            if pre is None:
                raise ModelError("internal error: chain-level image left the corner module")
            ck = cokernel(ModHom(FPModule.free(ring, k), w, pre))
            if ck.module.ngens == 0:
                continue
            reps = amb.reduce(matmul(ring, inc.matrix, ck.section))
            for j in range(reps.shape[1]):
                bd = mn[c].reduce(reps[:mn[c].ngens, j:j + 1])
                val = y.module(n + 1, c).reduce(reps[mn[c].ngens:, j:j + 1])
                pending.append((c, bd, val))
                attachments.append((sp.key(c), n + 1))
        if pending:
            cells.setdefault(n + 1, []).extend(pending)
            mids.pop(n + 1, None)
            top = max(top, n + 1)
        n += 1

    deg_lo = lo
    deg_hi = max(top, hi)
    terms = {k: mid_term(k).sum for k in range(deg_lo, deg_hi + 1)}
    diffs = {k: PresheafHom(terms[k], terms[k - 1], {u: mid_d(k, u, cells.get(k, [])) for u in sp.opens})
             for k in range(deg_lo + 1, deg_hi + 1)}
    mid = PComplex(sp, ring, deg_lo, deg_hi, terms, diffs)
    while not mid.is_empty and mid.terms[mid.lo].is_zero() and mid.lo < mid.hi:
        mid = _trim_low(mid)
    first = ChainMap(x, mid, {k: PresheafHom(x.term(k), mid.term(k), mid_term(k).inclusions[0].comps)
                              for k in mid.degrees if k in mids})
    second = ChainMap(mid, y, {k: PresheafHom(mid.term(k), y.term(k), {u: mid_q(k, u, cells.get(k, []))
                                                                       for u in sp.opens})
                               for k in mid.degrees})
    return Factorization(mid, first, second, attachments)


def _trim_low(c: PComplex) -> PComplex:
    terms = {n: c.terms[n] for n in range(c.lo + 1, c.hi + 1)}
    diffs = {n: c.diffs[n] for n in range(c.lo + 2, c.hi + 1)}
    return PComplex(c.space, c.ring, c.lo + 1, c.hi, terms, diffs)


def cofibrant_replacement(x: PComplex) -> Factorization:
    """Factor ``0 -> X``; the middle is a complex of free cells mapping to ``X`` by an acyclic fibration."""
    return factor_cof_acyclicfib(ChainMap(zero_complex(x.space, x.ring), x, {}))


# ---------------------------------------------------------------------------
# pushout-products and cylinders


@dataclass(eq=False)
class PushoutProduct:
    map: ChainMap  # pushout -> Y1 (x) Y2
    pushout: PComplex
    projection: ChainMap  # (Y1 (x) X2) + (X1 (x) Y2) -> pushout
    legs: tuple  # tensor totals (X1X2, Y1X2, X1Y2, Y1Y2)


def pushout_product(f1: ChainMap, f2: ChainMap) -> PushoutProduct:
    """The map from ``Y1 (x) X2 +_{X1 (x) X2} X1 (x) Y2`` to ``Y1 (x) Y2``."""
    x1, y1, x2, y2 = f1.source, f1.target, f2.source, f2.target
    t_xx, t_yx, t_xy, t_yy = (TotalTensor(x1, x2), TotalTensor(y1, x2), TotalTensor(x1, y2), TotalTensor(y1, y2))
    id_x1, id_x2, id_y1, id_y2 = (ChainMap.identity(c) for c in (x1, x2, y1, y2))
    a = tensor_maps(f1, id_x2, t_xx, t_yx)  # X1X2 -> Y1X2
    b = tensor_maps(id_x1, f2, t_xx, t_xy)  # X1X2 -> X1Y2
    s = direct_sum_complex(t_yx.complex, t_xy.complex)
    incs, _ = sum_maps(s, [t_yx.complex, t_xy.complex])
    diff = incs[0].compose(a) - incs[1].compose(b)
    q = cokernel_complex(diff)
    c1 = tensor_maps(id_y1, f2, t_yx, t_yy)  # Y1X2 -> Y1Y2
    c2 = tensor_maps(f1, id_y2, t_xy, t_yy)  # X1Y2 -> Y1Y2
    sp, ring = f1.space, f1.ring
    comps = {}
    yy = t_yy.complex
    for n in q.complex.degrees:
        cm = {}
        for u in sp.opens:
            both = hstack([c1.mat(n, u), c2.mat(n, u)], yy.module(n, u).ngens)
            cm[u] = yy.module(n, u).reduce(matmul(ring, both, q.section[n][u]))
        comps[n] = PresheafHom(q.complex.term(n), yy.term(n), cm)
    m = ChainMap(q.complex, yy, comps)
    return PushoutProduct(m, q.complex, q.projection, (t_xx.complex, t_yx.complex, t_xy.complex, yy))


@dataclass(eq=False)
class Cylinder:
    ends: PComplex  # X (x) (R + R)[0], a copy of X + X
    obj: PComplex  # X (x) U
    inclusion: ChainMap
    projection: ChainMap
    fold: ChainMap  # ends -> X


def cylinder(x: PComplex) -> Cylinder:
    """``X + X -> X (x) U -> X`` with ``U`` the unit interval complex."""
    sp, ring = x.space, x.ring
    u = unit_interval(sp, ring)
    two = single(sp, ring, u.terms[0], 0)
    one = unit_complex(sp, ring)
    i = ChainMap(two, u, {0: PresheafHom.identity(u.terms[0])})
    eps_mat = {w: np.array([[ring.one, ring.one]], dtype=object) for w in sp.opens}
    eps = ChainMap(u, one, {0: PresheafHom(u.terms[0], one.terms[0], eps_mat)})
    fold2 = ChainMap(two, one, {0: PresheafHom(two.terms[0], one.terms[0], eps_mat)})
    idx = ChainMap.identity(x)
    t_two, t_u, t_one = TotalTensor(x, two), TotalTensor(x, u), TotalTensor(x, one)
    back, _ = unit_iso(x)
    back = ChainMap(t_one.complex, x, back.comps)
    inc = tensor_maps(idx, i, t_two, t_u)
    proj = back.compose(tensor_maps(idx, eps, t_u, t_one))
    fold = back.compose(tensor_maps(idx, fold2, t_two, t_one))
    return Cylinder(t_two.complex, t_u.complex, inc, proj, fold)
