import itertools
import random

import numpy as np
import pytest

from chainsheaf.linalg import GF, ZZ, FPModule, is_iso
from chainsheaf.presheaf import (
    PresheafError,
    PresheafHom,
    cokernel_presheaf,
    constant_presheaf,
    direct_sum,
    element_of_hom,
    free_presheaf,
    hom_from_element,
    is_sheaf,
    kernel_presheaf,
    sheafify,
    stalk,
    stalk_hom,
    support,
    tensor,
    zero_presheaf,
)
from chainsheaf.sampling import random_complex
from chainsheaf.site import discrete, sierpinski, three_point

SPACES = [sierpinski(), three_point(), discrete(2)]


def test_free_presheaf_whole_space_is_constant():
    s = three_point()
    r = free_presheaf(s, ZZ, s.full)
    assert r.structurally_equal(constant_presheaf(s, ZZ))


def test_free_presheaf_on_open_point():
    s = sierpinski()
    r = free_presheaf(s, ZZ, {"o"})
    assert r[frozenset({"o"})].free_rank == 1
    assert r[s.full].is_zero()


def test_free_presheaf_support_and_stalks():
    for s in SPACES:
        for c in s.opens:
            r = free_presheaf(s, ZZ, c)
            assert support(r) == c
            for p in s.points:
                assert stalk(r, p).is_zero() == (p not in c)


def test_support_examples():
    s = three_point()
    assert support(zero_presheaf(s, ZZ)) == frozenset()
    assert support(constant_presheaf(s, ZZ)) == s.full


def _all_matrices(rows, cols, p):
    for entries in itertools.product(range(p), repeat=rows * cols):
        yield np.array(entries, dtype=object).reshape(rows, cols)


def _count_homs_brute_force(src, tgt, p):
    """Count natural families of matrices over F_p by enumeration."""
    space = src.space
    choices = [list(_all_matrices(tgt[u].ngens, src[u].ngens, p)) for u in space.opens]
    count = 0
    for pick in itertools.product(*choices):
        h = PresheafHom(src, tgt, dict(zip(space.opens, pick)))
        if h.is_natural():
            count += 1
    return count


def test_yoneda_count_over_f2():
    s = sierpinski()
    f2 = GF(2)
    x = constant_presheaf(s, f2)
    r = free_presheaf(s, f2, {"o"})
    assert _count_homs_brute_force(r, x, 2) == 2


@pytest.mark.parametrize("seed", range(4))
def test_yoneda_count_matches_value_dimension(seed):
    rng = random.Random(seed)
    f2 = GF(2)
    s = rng.choice([sierpinski(), three_point()])
    x = random_complex(rng, s, f2, lo=0, span=1, max_rank=2).term(0)
    for c in s.opens:
        assert _count_homs_brute_force(free_presheaf(s, f2, c), x, 2) == 2 ** x[c].ngens


@pytest.mark.parametrize("seed", range(6))
def test_yoneda_round_trip(seed):
    rng = random.Random(seed)
    s = rng.choice(SPACES)
    x = random_complex(rng, s, ZZ, lo=0, span=1).term(0)
    for c in s.opens:
        elt = np.array([[rng.randint(-3, 3)] for _ in range(x[c].ngens)], dtype=object)
        h = hom_from_element(c, elt, x).audit()
        assert x[c].is_zero_element(element_of_hom(h, c) - elt)


def test_sheafify_constant_on_three_point():
    s = three_point()
    k = GF(3)
    sh, unit = sheafify(constant_presheaf(s, k))
    ab = frozenset({"a", "b"})
    assert sh[ab].free_rank == 2
    assert not unit.is_iso()
    assert not is_sheaf(constant_presheaf(s, k))


def test_sheafify_restores_missing_sections():
    s = three_point()
    f = direct_sum(free_presheaf(s, ZZ, {"a"}), free_presheaf(s, ZZ, {"b"}))
    ab = frozenset({"a", "b"})
    assert f[ab].is_zero()
    assert not is_sheaf(f)
    sh, _ = sheafify(f)
    assert sh[ab].free_rank == 2 and not sh[ab].invariant_factors
    assert is_sheaf(sh)


def test_sheaf_examples():
    s = sierpinski()
    assert is_sheaf(constant_presheaf(s, ZZ))
    assert is_sheaf(zero_presheaf(s, ZZ))
    _, unit = sheafify(constant_presheaf(s, ZZ))
    assert unit.is_iso()


@pytest.mark.parametrize("seed", range(10))
def test_sheafification_is_idempotent_and_stalkwise(seed):
    rng = random.Random(seed)
    s = rng.choice(SPACES)
    f = random_complex(rng, s, ZZ, lo=0, span=1).term(0)
    sh, unit = sheafify(f)
    unit.audit()
    assert is_sheaf(sh)
    assert sheafify(sh)[1].is_iso()
    for p in s.points:
        assert is_iso(stalk_hom(unit, p))


def test_stalk_hom_of_identity():
    s = three_point()
    f = constant_presheaf(s, ZZ, FPModule(ZZ, (0, 4)))
    ident = PresheafHom.identity(f)
    for p in s.points:
        h = stalk_hom(ident, p)
        assert (h.matrix == np.eye(2, dtype=int)).all()


def test_tensor_of_free_presheaves_is_intersection():
    for s in SPACES:
        for c1, c2 in itertools.product(s.opens, repeat=2):
            t = tensor(free_presheaf(s, ZZ, c1), free_presheaf(s, ZZ, c2))
            if c1 & c2:
                assert t.structurally_equal(free_presheaf(s, ZZ, c1 & c2))
            else:
                assert t.is_zero()


def test_tensor_with_unit_and_coprime_torsion():
    s = three_point()
    f = constant_presheaf(s, ZZ, FPModule(ZZ, (0, 6)))
    t = tensor(f, constant_presheaf(s, ZZ))
    for u in s.opens:
        assert t[u] == f[u]
    z2 = constant_presheaf(s, ZZ, FPModule(ZZ, (2,)))
    z3 = constant_presheaf(s, ZZ, FPModule(ZZ, (3,)))
    assert tensor(z2, z3).is_zero()


def test_tensor_rejects_mismatch():
    with pytest.raises(PresheafError):
        tensor(constant_presheaf(sierpinski(), ZZ), constant_presheaf(sierpinski(), GF(2)))


def test_kernel_and_cokernel_examples():
    s = three_point()
    c = frozenset({"a", "b"})
    r = free_presheaf(s, ZZ, c)
    k, _ = kernel_presheaf(PresheafHom.identity(r))
    assert k.is_zero()
    q, _ = cokernel_presheaf(PresheafHom.zero(r, r))
    for u in s.opens:
        assert q[u] == r[u]
    rr = direct_sum(r, r)
    fold = PresheafHom(rr, r, {u: np.array([[1, 1]] * r[u].ngens, dtype=object).reshape(r[u].ngens, -1)
                                if r[u].ngens else np.zeros((0, rr[u].ngens), dtype=object)
                                for u in s.opens}).audit()
    k, inc = kernel_presheaf(fold)
    for p in s.points:
        st = stalk(k, p)
        assert st.free_rank == (1 if p in c else 0) and not st.invariant_factors


def test_naturality_audit_catches_bad_components():
    s = sierpinski()
    f = constant_presheaf(s, ZZ)
    comps = {frozenset({"o"}): np.array([[1]], dtype=object), s.full: np.array([[2]], dtype=object)}
    with pytest.raises(PresheafError):
        PresheafHom(f, f, comps).audit()
