"""t-structures from d-functions, and their truncations.

Membership is a stalk condition and works for any d-function:
``X`` is in ``D_{>=n}`` when ``H_k(X)_p = 0`` for ``k < d(p) + n`` and in
``D_{<=n}`` when ``H_k(X)_p = 0`` for ``k > d(p) + n``.

Truncation is a subcomplex construction.  At an open ``C`` put
``m(C) = max_{p in C} d(p)``; the subcomplex ``X_{>=0}`` is ``X_k(C)`` for
``k > m(C)``, the cycles for ``k = m(C)`` and zero below.  This is closed
under restriction exactly when ``m`` shrinks with ``C``, which is guaranteed
when every superlevel set ``{d >= n}`` is closed; ``truncate`` requires that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional

import numpy as np

from .chain import (
    ChainMap,
    PComplex,
    cokernel_complex,
    cone_data,
    hofib,
    hofib_data,
    homotopy_classes,
    induced_on_homology,
    stalk_homology,
    subcomplex,
    window,
)
from .linalg import ZZ, FPModule, ModHom, eye, is_iso, is_surjective, localize_at_prime, matmul, prime_factors, \
    tensor_residue, zeros
from .presheaf import PresheafHom
from .site import (
    ExtInt,
    FinSpace,
    SiteError,
    Stratification,
    admissibility_witness,
    check_d,
    d_from_perversity,
    format_extint,
    truncation_level,
)


class TStructureError(ValueError):
    """A precondition on the d-function failed; ``witness`` names the bad threshold."""

    def __init__(self, msg: str, witness: Optional[dict] = None):
        super().__init__(msg)
        self.witness = witness or {}


@dataclass(frozen=True, eq=False)
class TStructure:
    """A d-function on a space.

    ``admissible`` records whether every superlevel set is open;
    ``truncatable`` whether every superlevel set is closed, which is what the
    subcomplex truncation needs.
    """

    space: FinSpace
    d: Mapping
    admissible: bool = field(init=False)
    truncatable: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d", check_d(self.space, self.d))
        object.__setattr__(self, "admissible", admissibility_witness(self.space, self.d) is None)
        object.__setattr__(self, "truncatable", admissibility_witness(self.space, self.d, closed=True) is None)

    @classmethod
    def constant(cls, space: FinSpace, value: ExtInt) -> "TStructure":
        return cls(space, {p: value for p in space.points})

    def require_truncatable(self):
        w = admissibility_witness(self.space, self.d, closed=True)
        if w is not None:
            n, s = w
            raise TStructureError(
                f"superlevel set d >= {format_extint(n)} is {self.space.fmt(s)}, which is not closed",
                {"threshold": format_extint(n), "set": sorted(s, key=self.space.index)})

    def level(self, c, shift: int = 0) -> ExtInt:
        return truncation_level(self.space, self.d, c) + shift


# ---------------------------------------------------------------------------
# membership


def _stalk_window(x: PComplex) -> range:
    return range(x.lo, x.hi + 1) if not x.is_empty else range(0)


def membership_failure(x: PComplex, t: TStructure, side: str, n: int = 0) -> Optional[dict]:
    """First ``(point, degree)`` violating ``D_{>=n}`` (``side='geq'``) or ``D_{<=n}``."""
    sp = t.space
    if x.space != sp:
        raise TStructureError("complex and t-structure live on different spaces")
    for p in sp.points:
        cut = t.d[p] + n
        for k in _stalk_window(x):
            bad = k < cut if side == "geq" else k > cut
            if bad and not stalk_homology(x, k, p).is_zero():
                return {"point": p, "degree": k}
    return None


def in_D_geq(x: PComplex, t: TStructure, n: int = 0) -> bool:
    return membership_failure(x, t, "geq", n) is None


def in_D_leq(x: PComplex, t: TStructure, n: int = 0) -> bool:
    return membership_failure(x, t, "leq", n) is None


def in_D_geq0(x: PComplex, t: TStructure) -> bool:
    return in_D_geq(x, t, 0)


def in_D_leq0(x: PComplex, t: TStructure) -> bool:
    return in_D_leq(x, t, 0)


# ---------------------------------------------------------------------------
# truncation


class TruncationTriangle(NamedTuple):
    below: PComplex  # X_{>=0}
    map_in: ChainMap
    map_out: ChainMap
    above: PComplex  # X_{<=-1}

    def is_short_exact(self) -> bool:
        from .linalg import kernel

        x = self.map_in.target
        for n in x.degrees:
            for u in x.space.opens:
                i, q = self.map_in.at(n, u), self.map_out.at(n, u)
                if i.matrix.shape[1] and not kernel(i)[0].is_zero():
                    return False
                if not is_surjective(q):
                    return False
                # image(i) == kernel(q): q o i = 0 and ker q inside image i
                if not q.compose(i).is_zero():
                    return False
                kq, kinc = kernel(q)
                if kq.ngens and i.preimage(kinc.matrix) is None:
                    return False
        return True


def truncate(x: PComplex, t: TStructure, shift: int = 0) -> TruncationTriangle:
    """``X_{>=shift} -> X -> X_{<=shift-1}`` for the t-structure ``t``."""
    t.require_truncatable()
    sp, ring = x.space, x.ring
    if x.is_empty:
        from .chain import ChainMap as CM

        return TruncationTriangle(x, CM.identity(x), CM.identity(x), x)
    gens = {}
    for k in x.degrees:
        gens[k] = {}
        for u in sp.opens:
            lvl = t.level(u, shift)
            mod = x.module(k, u)
            if k > lvl:
                gens[k][u] = eye(mod.ngens, ring)
            elif k == lvl:
                gens[k][u] = x.cycle_data(k, u).iota.matrix
            else:
                gens[k][u] = zeros(mod.ngens, 0)
    below, inc = subcomplex(x, gens)
    q = cokernel_complex(inc)
    return TruncationTriangle(below, inc, q.projection, q.complex)


def classical_truncation_oracle(x: PComplex, n: int) -> dict:
    """Good truncation ``tau_{>=n}`` computed open by open, as generator columns.

    Independent of :func:`truncate`: cycles come straight from a nullspace of
    ``[d | relations of X_{k-1}(U)]``, with no presheaf bookkeeping.
    """
    from .linalg import hstack, nullspace

    out = {}
    for u in x.space.opens:
        for k in x.degrees:
            mod = x.module(k, u)
            if k > n:
                out[(k, u)] = eye(mod.ngens, x.ring)
            elif k == n:
                tgt = x.module(k - 1, u)
                big = hstack([x.dmat(k, u), tgt.relation_columns], tgt.ngens)
                out[(k, u)] = mod.reduce(nullspace(big, x.ring)[:mod.ngens, :])
            else:
                out[(k, u)] = zeros(mod.ngens, 0)
    return out


def same_submodule(m: FPModule, a: np.ndarray, b: np.ndarray) -> bool:
    """Whether the columns of ``a`` and ``b`` span the same submodule of ``m``."""
    from .linalg import LinearSolver, hstack

    def inside(p, q):
        if p.shape[1] == 0:
            return True
        sol = LinearSolver(hstack([q, m.relation_columns], m.ngens), m.ring).solve(p)
        return sol is not None

    return inside(a, b) and inside(b, a)


# ---------------------------------------------------------------------------
# n-equivalences and the t-factorization


def n_equivalence_failure(f: ChainMap, t: TStructure, n: int) -> Optional[dict]:
    """Stalk test: ``H_k(f)_p`` iso for ``k < d(p) + n`` and onto at ``k = d(p) + n``."""
    sp = f.space
    lo, hi = f.window
    for p in sp.points:
        u = sp.min_open(p)
        cut = t.d[p] + n
        for k in range(lo, hi + 1):
            if k > cut:
                continue
            s, tg = f.source.cycle_data(k, u), f.target.cycle_data(k, u)
            h = ModHom(s.H, tg.H, induced_on_homology(f.ring, s, tg, f.mat(k, u)))
            if k < cut and not is_iso(h):
                return {"point": p, "degree": k, "needs": "iso"}
            if k == cut and not is_surjective(h):
                return {"point": p, "degree": k, "needs": "surjection"}
    return None


def is_n_equivalence(f: ChainMap, t: TStructure, n: int) -> bool:
    return n_equivalence_failure(f, t, n) is None


def is_n_equivalence_via_fiber(f: ChainMap, t: TStructure, n: int) -> bool:
    return in_D_geq(hofib(f), t, n)


def is_co_n_equivalence(f: ChainMap, t: TStructure, n: int) -> bool:
    """The homotopy fiber lies in ``D_{<=n-1}``."""
    return in_D_leq(hofib(f), t, n - 1)


class TFactorization(NamedTuple):
    middle: PComplex
    g: ChainMap
    h: ChainMap
    fiber_part: PComplex  # the truncated fiber F_{>=n}


def factor_t(f: ChainMap, t: TStructure, n: int) -> TFactorization:
    """Factor ``f`` as an ``n``-equivalence ``g`` followed by a co-``n``-equivalence ``h``.

    With ``F = hofib(f)``, ``p: F -> X`` and ``H`` the null-homotopy of
    ``f o p``, the middle object is the cone of ``F_{>=n} -> F -> X``;
    ``g(x) = (0, x)`` and ``h(phi, x) = f x + H(phi)``, so ``h o g = f``.
    """
    t.require_truncatable()
    x, y = f.source, f.target
    sp, ring = f.space, f.ring
    fib = hofib_data(f)
    tri = truncate(fib.complex, t, n)
    iota = tri.map_in
    g0 = fib.projection.compose(iota)
    cd = cone_data(g0)
    w = cd.complex
    g = ChainMap(x, w, cd.inclusion.comps)
    comps = {}
    lo, hi = window(w, y)
    for k in range(lo, hi + 1):
        cm = {}
        for u in sp.opens:
            nphi = tri.below.module(k - 1, u).ngens
            nx = x.module(k, u).ngens
            left = matmul(ring, fib.homotopy[k - 1].comps[u], iota.mat(k - 1, u)) if (k - 1) in fib.homotopy \
                else zeros(y.module(k, u).ngens, nphi)
            m = zeros(y.module(k, u).ngens, w.module(k, u).ngens)
            m[:, :nphi] = left
            m[:, nphi:nphi + nx] = f.mat(k, u)
            cm[u] = y.module(k, u).reduce(m)
        comps[k] = PresheafHom(w.term(k), y.term(k), cm)
    h = ChainMap(w, y, comps)
    return TFactorization(w, g, h, tri.below)


def heart_project(x: PComplex, t: TStructure) -> PComplex:
    """``(X_{>=0})_{<=0}``."""
    below = truncate(x, t, 0).below
    return truncate(below, t, 1).above


# ---------------------------------------------------------------------------
# refined d-functions over the integers


@dataclass(frozen=True)
class RefinedDFunction:
    """Cutoffs indexed by ``(point, prime)``; ``0`` stands for the generic prime.

    ``fallback[p]`` is the cutoff for every prime not listed in ``primes``.
    """

    values: Mapping
    primes: tuple
    fallback: Mapping

    def cutoff(self, p: str, prime: int) -> ExtInt:
        if prime in self.primes and (p, prime) in self.values:
            return self.values[(p, prime)]
        return self.fallback[p]

    @classmethod
    def constant_fibers(cls, d: Mapping, primes: Iterable[int] = (0,)) -> "RefinedDFunction":
        primes = tuple(primes)
        return cls({(p, q): v for p, v in d.items() for q in primes}, primes, dict(d))


class RefinedReport(NamedTuple):
    member: bool
    witness: Optional[dict]
    relevant_primes: tuple


def refined_membership(x: PComplex, rd: RefinedDFunction, mode: str = "localize") -> RefinedReport:
    """Test ``(H_k(X)_p)_q = 0`` (or its residue-field version) for ``k < rd(p, q)``.

    Primes outside ``rd.primes`` share the fallback cutoff; among them only
    those dividing an invariant factor can behave differently from a generic
    prime, so those are detected and tested one by one, and one generic
    undeclared prime stands in for the rest.
    """
    if x.ring != ZZ:
        raise TStructureError("refined membership needs the integers as base ring")
    if mode not in ("localize", "residue"):
        raise TStructureError(f"unknown mode {mode!r}")
    sp = x.space
    relevant = set()
    for p in sp.points:
        for k in _stalk_window(x):
            for dfac in stalk_homology(x, k, p).invariant_factors:
                relevant.update(prime_factors(dfac))
    for p in sp.points:
        for k in _stalk_window(x):
            h = stalk_homology(x, k, p)
            primes = set(rd.primes) | relevant | {0}
            checks = [(q, rd.cutoff(p, q)) for q in sorted(primes)]
            checks.append((None, rd.fallback[p]))  # a generic undeclared prime
            for q, cut in checks:
                if not k < cut:
                    continue
                if q is None:
                    nonzero = h.free_rank > 0
                else:
                    loc = localize_at_prime(h, q) if mode == "localize" else tensor_residue(h, q)
                    nonzero = not loc.is_zero()
                if nonzero:
                    return RefinedReport(False, {"point": p, "degree": k, "prime": q if q is not None else "generic"},
                                         tuple(sorted(relevant)))
    return RefinedReport(True, None, tuple(sorted(relevant)))


def in_D_geq0_refined(x: PComplex, rd: RefinedDFunction, mode: str = "localize") -> bool:
    return refined_membership(x, rd, mode).member


def module_vanishes_at(m: FPModule, prime: int, mode: str) -> bool:
    loc = localize_at_prime(m, prime) if mode == "localize" else tensor_residue(m, prime)
    return loc.is_zero()


# ---------------------------------------------------------------------------
# presheaf-level classes of maps


def normalize_iprime(f: ChainMap, iprime) -> dict:
    """Turn a generator set into ``{open: top degree}`` after checking downward closure.

    Accepts a mapping ``open -> top degree`` (``math.inf`` allowed) or a set of
    ``(open, degree)`` pairs, which must contain every degree from the bottom
    of the window ``lo - 1`` up to its maximum for each open it mentions.
    """
    sp = f.space
    lo, _ = f.window
    if isinstance(iprime, Mapping):
        out = {}
        for c, top in iprime.items():
            c = frozenset(c)
            if c not in sp.opens:
                raise SiteError(f"{sp.fmt(c)} is not a nonempty open set")
            out[c] = top
        return out
    per = {}
    for c, m in iprime:
        c = frozenset(c)
        if c not in sp.opens:
            raise SiteError(f"{sp.fmt(c)} is not a nonempty open set")
        per.setdefault(c, set()).add(int(m))
    out = {}
    for c, ms in per.items():
        top = max(ms)
        need = set(range(min(lo - 1, top), top + 1))
        if not need <= ms:
            raise TStructureError(f"generator set is not downward closed at {sp.fmt(c)}",
                                  {"open": sp.key(c), "missing": sorted(need - ms)})
        out[c] = top
    return out


def w_iprime_classify(f: ChainMap, iprime) -> bool:
    """``H_{m-1}(f)(C)`` iso and ``H_m(f)(C)`` onto whenever ``i_{C,m}`` is in the set."""
    tops = normalize_iprime(f, iprime)
    lo, hi = f.window
    for c, top in tops.items():
        last = min(top, hi + 1)
        for m in range(lo - 1, int(last) + 1 if last != -math.inf else lo - 1):
            for k, need in ((m - 1, "iso"), (m, "onto")):
                s, tg = f.source.cycle_data(k, c), f.target.cycle_data(k, c)
                h = ModHom(s.H, tg.H, induced_on_homology(f.ring, s, tg, f.mat(k, c)))
                if need == "iso" and not is_iso(h):
                    return False
                if need == "onto" and not is_surjective(h):
                    return False
    return True


# ---------------------------------------------------------------------------
# perverse t-structures


def perverse_direct(x: PComplex, strat: Stratification, side: str = "geq") -> bool:
    """Stratumwise condition: ``H_n(X)_q = 0`` for ``n < p(a)`` (or ``n > p(a)``), ``q`` in ``S_a``."""
    for a, s in enumerate(strat.strata):
        pa = strat.perversity[a]
        for q in s:
            for k in _stalk_window(x):
                bad = k < pa if side == "geq" else k > pa
                if bad and not stalk_homology(x, k, q).is_zero():
                    return False
    return True


def perverse_tstructure(strat: Stratification) -> TStructure:
    return TStructure(strat.space, d_from_perversity(strat.space, strat))


# ---------------------------------------------------------------------------
# orthogonality


def orthogonality_group(x: PComplex, y: PComplex, t: TStructure) -> FPModule:
    """Homotopy classes from a cofibrant model of ``X_{>=0}`` to ``Y_{<=-1}``."""
    from .model import cofibrant_replacement

    below = truncate(x, t).below
    above = truncate(y, t).above
    q = cofibrant_replacement(below).middle
    return homotopy_classes(q, above).module
