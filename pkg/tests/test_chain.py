import random

import numpy as np
import pytest

from chainsheaf.chain import (
    ChainMap,
    ComplexError,
    PComplex,
    cell_complex,
    classify,
    cone,
    cone_data,
    disk,
    hofib_data,
    homology,
    homology_map,
    homotopy_classes,
    mapping_complex,
    null_homotopy,
    shift,
    shift_map,
    sheafify_complex,
    simplicial_chains,
    simplicial_tensor,
    single,
    sphere,
    stalk_homology,
    tensor_total,
    unit_complex,
    unit_interval,
    unit_iso,
    zero_complex,
)
from chainsheaf.linalg import GF, ZZ, FPModule, kernel, solve
from chainsheaf.presheaf import free_presheaf
from chainsheaf.sampling import random_cell_complex, random_chain_map, random_complex
from chainsheaf.site import discrete, sierpinski, three_point

SPACES = [sierpinski(), three_point(), discrete(2)]


def col(*vals):
    return np.array([[v] for v in vals], dtype=object)


def exact_at(a, b):
    """``image(a) == kernel(b)`` for composable module maps."""
    if not b.compose(a).is_zero():
        return False
    _, inc = kernel(b)
    return all(solve(a, inc.matrix[:, i:i + 1]) is not None for i in range(inc.matrix.shape[1]))


def test_unit_interval_homology():
    for s in SPACES:
        u = unit_interval(s, ZZ)
        h0 = homology(u, 0)
        for o in s.opens:
            assert h0[o].free_rank == 1 and not h0[o].invariant_factors
        assert homology(u, 1).is_zero()
        assert homology(u, 2).is_zero() and homology(u, -1).is_zero()


def test_disk_and_sphere_homology():
    s = three_point()
    c = frozenset({"a", "b"})
    dk = disk(s, ZZ, c, 2)
    assert all(homology(dk, n).is_zero() for n in range(1, 5))
    sp = sphere(s, ZZ, c, 3)
    assert homology(sp, 3).structurally_equal(free_presheaf(s, ZZ, c))
    assert homology(sp, 2).is_zero()


def test_d_squared_diagnostic():
    s = sierpinski()
    full = s.full
    with pytest.raises(ComplexError) as err:
        cell_complex(s, ZZ, {0: [(full, 0)], 1: [(full, 0)], 2: [(full, 0)]}, {1: [col(1)], 2: [col(1)]})
    assert err.value.where["degree"] == 2
    assert err.value.where["open"] in {"o", "o,c"}


def test_identity_classifies_as_everything():
    rng = random.Random(3)
    x = random_complex(rng, three_point(), ZZ)
    rep = classify(ChainMap.identity(x))
    assert rep.presheaf_iso and rep.sheaf_iso and rep.stalkwise_iso and not rep.witnesses


def test_acyclic_to_zero_is_weak_equivalence():
    s = three_point()
    dk = disk(s, ZZ, s.full, 0)
    rep = classify(ChainMap.zero(dk, zero_complex(s, ZZ)))
    assert rep.presheaf_iso and rep.stalkwise_iso


def test_sheafification_unit_on_non_sheaf_homology():
    s = three_point()
    x = cell_complex(s, ZZ, {0: [(s.full, 0), (frozenset({"a"}), 0), (frozenset({"b"}), 0)]}, {})
    rep = classify(sheafify_complex(x).unit)
    assert rep.stalkwise_iso and rep.sheaf_iso
    assert not rep.presheaf_iso
    assert rep.witnesses["presheaf_iso"]["degree"] == 0


def test_cone_of_identity_is_acyclic():
    rng = random.Random(11)
    x = random_complex(rng, sierpinski(), ZZ)
    c = cone(ChainMap.identity(x))
    assert all(homology(c, n).is_zero() for n in c.degrees)


def test_cone_of_zero_source():
    rng = random.Random(5)
    s = three_point()
    y = random_complex(rng, s, ZZ)
    c = cone(ChainMap.zero(zero_complex(s, ZZ), y))
    for n in y.degrees:
        for u in s.opens:
            assert c.module(n, u) == y.module(n, u)
            if n > y.lo:
                assert (c.dmat(n, u) == y.dmat(n, u)).all()


def test_shift_signs():
    s = sierpinski()
    x = unit_interval(s, ZZ)
    sx = shift(x, 1)
    assert (sx.lo, sx.hi) == (1, 2)
    assert (sx.dmat(2, s.full) == -x.dmat(1, s.full)).all()
    assert (shift(sx, -1).dmat(1, s.full) == x.dmat(1, s.full)).all()


@pytest.mark.parametrize("seed", range(8))
def test_hofib_long_exact_sequence(seed):
    rng = random.Random(seed)
    s = rng.choice(SPACES)
    ring = rng.choice([ZZ, GF(2)])
    x = random_complex(rng, s, ring, span=3)
    y = random_complex(rng, s, ring, span=3)
    f = random_chain_map(rng, x, y)
    fib = hofib_data(f)
    back = shift_map(cone_data(f).inclusion, -1, target=fib.complex)
    lo = min(x.lo, y.lo) - 2
    hi = max(x.hi, y.hi) + 1
    for n in range(lo, hi + 1):
        for u in s.opens:
            hp = homology_map(fib.projection, n).at(u)
            hf = homology_map(f, n).at(u)
            hb = homology_map(back, n).at(u)
            hf1 = homology_map(f, n + 1).at(u)
            assert exact_at(hp, hf)
            assert exact_at(hb, hp)
            assert exact_at(hf1, hb)


def test_tensor_with_unit():
    rng = random.Random(2)
    x = random_complex(rng, three_point(), ZZ)
    fwd, bwd = unit_iso(x)
    fwd.audit()
    bwd.audit()
    assert fwd.compose(bwd).equals(ChainMap.identity(x))
    assert fwd.is_levelwise_iso()


def test_tensor_of_spheres():
    s = three_point()
    for c in s.opens:
        for d in s.opens:
            t = tensor_total(sphere(s, ZZ, c, 1), sphere(s, ZZ, d, -2))
            r = free_presheaf(s, ZZ, c & d) if c & d else None
            if r is None:
                assert t.is_zero()
            else:
                assert (t.lo, t.hi) == (-1, -1)
                assert t.term(-1).structurally_equal(r)


def test_tensor_koszul_square_zero():
    rng = random.Random(9)
    s = sierpinski()
    x = random_complex(rng, s, ZZ, span=3)
    y = random_complex(rng, s, ZZ, span=3)
    tensor_total(x, y).audit()


def test_unit_interval_squared_is_unit():
    s = three_point()
    u = unit_interval(s, ZZ)
    uu = tensor_total(u, u)
    for o in s.opens:
        h = homology(uu, 0)[o]
        assert h.free_rank == 1 and not h.invariant_factors
    assert all(homology(uu, n).is_zero() for n in (1, 2))


def test_homotopy_classes_from_free_sphere():
    rng = random.Random(4)
    s = three_point()
    y = random_complex(rng, s, ZZ, lo=-1, span=3)
    h0 = homology(y, 0)
    for c in s.opens:
        hc = homotopy_classes(sphere(s, ZZ, c, 0), y)
        assert hc.module.isomorphic(h0[c])


def test_disk_identity_is_null_homotopic():
    s = sierpinski()
    dk = disk(s, ZZ, s.full, 0)
    hc = homotopy_classes(dk, dk)
    assert hc.module.is_zero()
    assert null_homotopy(ChainMap.identity(dk)) is not None
    assert null_homotopy(ChainMap.identity(sphere(s, ZZ, s.full, 0))) is None


def test_identity_class_is_nonzero_on_sphere():
    s = sierpinski()
    x = sphere(s, ZZ, s.full, 0)
    hc = homotopy_classes(x, x)
    assert hc.module.free_rank == 1
    assert hc.class_of(ChainMap.identity(x)).any()


def test_mapping_complex_from_zero():
    rng = random.Random(1)
    s = sierpinski()
    y = random_complex(rng, s, ZZ)
    mc = mapping_complex(zero_complex(s, ZZ), y)
    assert mc.complex.module(0).is_zero()


def test_simplicial_chains_of_circle():
    basis, bd = simplicial_chains([[0, 1], [1, 2], [0, 2]])
    assert [len(basis[k]) for k in (0, 1)] == [3, 3]
    assert bd[1].tolist() == [[-1, -1, 0], [1, 0, -1], [0, 1, 1]]


def test_simplicial_tensor_point_and_triangle():
    s = three_point()
    x = single(s, ZZ, free_presheaf(s, ZZ, {"a", "b"}), 0)
    pt = simplicial_tensor(x, [[0]])
    assert pt.term(0).structurally_equal(x.term(0))
    full = simplicial_tensor(x, [[0, 1, 2]])
    for n in range(0, 3):
        for o in s.opens:
            assert full.cycle_data(n, o).H.isomorphic(x.cycle_data(n, o).H if n == 0 else FPModule.zero_module(ZZ))


@pytest.mark.parametrize("seed", range(3))
def test_suspension_by_circle(seed):
    rng = random.Random(seed)
    s = rng.choice(SPACES)
    x = random_cell_complex(rng, s, ZZ, span=2, torsion=False)
    sx = simplicial_tensor(x, [[0, 1], [1, 2], [0, 2]])
    for n in range(x.lo, x.hi + 2):
        for o in s.opens:
            a, b = x.cycle_data(n, o).H, x.cycle_data(n - 1, o).H
            both = FPModule(ZZ, a.orders + b.orders)
            assert sx.cycle_data(n, o).H.isomorphic(both)


def test_stalk_homology_of_free_sphere():
    s = sierpinski()
    x = sphere(s, ZZ, {"o"}, 2)
    assert not stalk_homology(x, 2, "o").is_zero()
    assert stalk_homology(x, 2, "c").is_zero()


def test_unit_complex_is_constant():
    s = three_point()
    r = unit_complex(s, ZZ)
    assert isinstance(r, PComplex) and (r.lo, r.hi) == (0, 0)
