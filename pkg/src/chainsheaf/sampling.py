"""Seeded random complexes, maps and d-functions for property checks."""

from __future__ import annotations

import random
from typing import Sequence

import numpy as np

from .chain import (
    ChainMap,
    PComplex,
    cell_complex,
    chain_maps,
    cokernel_complex,
    direct_sum_complex,
    disk,
    sheafify_complex,
    sum_maps,
    zero_complex,
)
from .linalg import ZZ, FPModule, ModHom, Ring, kernel, vstack, zeros
from .site import INF, NEG_INF, FinSpace, d_is_closed_admissible, sierpinski, three_point


def spaces() -> list[FinSpace]:
    return [sierpinski(), three_point()]


def _orders(ring: Ring, torsion: bool) -> list:
    if ring != ZZ or not torsion:
        return [0]
    return [0, 0, 0, 2, 3, 4, 6]


def random_element(rng: random.Random, gens: np.ndarray, mod: FPModule, spread: int = 2) -> np.ndarray:
    """Random small combination of the columns of ``gens``."""
    if gens.shape[1] == 0:
        return zeros(mod.ngens, 1)
    coeffs = np.array([[rng.randint(-spread, spread)] for _ in range(gens.shape[1])], dtype=object)
    return mod.reduce(mod.ring.fix(gens @ coeffs))


def random_cell_complex(rng: random.Random, space: FinSpace, ring: Ring, lo: int = 0, span: int = 3,
                        max_rank: int = 3, torsion: bool = True) -> PComplex:
    """Complex of cyclic free cells ``R_C/(m)`` with random boundaries.

    Each cell's boundary is a random element of the cycles at ``C`` killed by
    ``m``, so ``d o d = 0`` and every boundary is well defined.
    """
    opens = list(space.opens)
    cells, diffs = {}, {}
    x = None
    for k in range(lo, lo + span):
        count = rng.randint(0, max_rank)
        cs = [(rng.choice(opens), ring.coerce(rng.choice(_orders(ring, torsion)))) for _ in range(count)]
        bds = []
        if k > lo and x is not None:
            for c, m in cs:
                mod = x.module(k - 1, c)
                dn = x.dmat(k - 1, c)
                tgt = x.module(k - 2, c)
                rows = [dn]
                orders = list(tgt.orders)
                if m != 0:
                    rows.append(mod.reduce(np.eye(mod.ngens, dtype=object) * m))
                    orders += list(mod.orders)
                tmod = FPModule(ring, tuple(orders))
                big = vstack(rows, mod.ngens)
                _, inc = kernel(ModHom(mod, tmod, tmod.reduce(big)))
                bds.append(random_element(rng, inc.matrix, mod))
        else:
            bds = [None] * len(cs)
        cells[k] = cs
        diffs[k] = bds
        x = cell_complex(space, ring, {j: cells[j] for j in cells},
                         {j: diffs[j] for j in cells if j > min(cells) and cells[j]})
    return x


def random_complex(rng: random.Random, space: FinSpace, ring: Ring, lo: int = 0, span: int = 3,
                   max_rank: int = 3, torsion: bool = True, generic: bool = True) -> PComplex:
    """A random complex; with ``generic`` some instances are sheafified so their terms are not cell sums."""
    x = random_cell_complex(rng, space, ring, lo, span, max_rank, torsion)
    if generic and rng.random() < 0.3:
        x = sheafify_complex(x).complex
    return x


def random_chain_map(rng: random.Random, x: PComplex, y: PComplex, spread: int = 2) -> ChainMap:
    """Random small combination of generators of the chain maps ``X -> Y``."""
    gens = chain_maps(x, y)
    out = ChainMap.zero(x, y)
    for g in gens:
        c = rng.randint(-spread, spread)
        if c:
            out = out + g._combine(g, c, 0)
    return out


def random_disks(rng: random.Random, space: FinSpace, ring: Ring, lo: int, hi: int, count: int) -> PComplex:
    parts = [disk(space, ring, rng.choice(space.opens), rng.randint(lo, hi)) for _ in range(count)]
    return direct_sum_complex(*parts) if parts else zero_complex(space, ring)


def projection_from_sum(x: PComplex, k: PComplex) -> ChainMap:
    s = direct_sum_complex(x, k)
    _, projs = sum_maps(s, [x, k])
    return projs[0]


def inclusion_into_sum(x: PComplex, k: PComplex) -> ChainMap:
    s = direct_sum_complex(x, k)
    incs, _ = sum_maps(s, [x, k])
    return incs[0]


def lifting_instance(rng: random.Random, space: FinSpace, ring: Ring, max_rank: int = 3) -> tuple[str, ChainMap]:
    """A random right-hand map from a mix that covers every verdict combination."""
    from .model import cofibrant_replacement

    kind = rng.choice(["random", "proj", "proj_disks", "sum_with_id", "cofibrant", "quotient", "inclusion"])
    lo = rng.randint(-1, 1)
    span = rng.randint(1, 3)

    def rc():
        return random_complex(rng, space, ring, lo, span, max_rank)

    if kind == "random":
        x, y = rc(), rc()
        return kind, random_chain_map(rng, x, y)
    if kind == "proj":
        return kind, projection_from_sum(rc(), rc())
    if kind == "proj_disks":
        return kind, projection_from_sum(rc(), random_disks(rng, space, ring, lo - 1, lo + span - 1, rng.randint(1, 2)))
    if kind == "sum_with_id":
        x, y = rc(), rc()
        g = random_chain_map(rng, x, y)
        s = direct_sum_complex(x, y)
        _, projs = sum_maps(s, [x, y])
        return kind, g.compose(projs[0]) + projs[1]
    if kind == "cofibrant":
        return kind, cofibrant_replacement(rc()).second
    if kind == "quotient":
        x, y = rc(), rc()
        g = random_chain_map(rng, x, y)
        return kind, cokernel_complex(g).projection
    return kind, inclusion_into_sum(rc(), rc())


def random_d(rng: random.Random, space: FinSpace, closed: bool = True, allow_inf: bool = True,
             values: Sequence = (-1, 0, 1)) -> dict:
    """Random d-function whose superlevel sets are closed (or open when ``closed`` is false)."""
    from .site import d_is_admissible

    pool = list(values) + ([INF, NEG_INF] if allow_inf else [])
    test = d_is_closed_admissible if closed else d_is_admissible
    for _ in range(1000):
        d = {p: rng.choice(pool) for p in space.points}
        if test(space, d):
            return d
    return {p: 0 for p in space.points}


def closed_admissible_ds(space: FinSpace) -> list[dict]:
    """Three fixed d-functions with closed superlevel sets, one of them non-constant."""
    pts = space.points
    out = [{p: 0 for p in pts}]
    # d(p) = number of points generalizing p grows along specialization
    spec = {p: len([q for q in pts if space.specializes(q, p)]) - 1 for p in pts}
    out.append(spec)
    mixed = {p: (INF if spec[p] == max(spec.values()) else -1) for p in pts}
    out.append(mixed)
    return out
