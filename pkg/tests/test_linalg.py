from fractions import Fraction
from itertools import combinations
from math import gcd

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainsheaf.linalg import (
    GF,
    QQ,
    ZZ,
    FPModule,
    HomModule,
    ModHom,
    Ring,
    TensorModule,
    as_mat,
    cokernel,
    det,
    eye,
    is_injective,
    is_iso,
    is_surjective,
    is_zero,
    kernel,
    localize_at_prime,
    matmul,
    nullspace,
    present,
    smith_form,
    snf,
    solve,
    tensor_residue,
    zeros,
)


def mat(rows):
    return np.array(rows, dtype=object)


def minors_oracle(m):
    """Invariant factors from gcds of k x k minors."""
    rows, cols = m.shape
    out, prev = [], 1
    for k in range(1, min(rows, cols) + 1):
        g = 0
        for r in combinations(range(rows), k):
            for c in combinations(range(cols), k):
                g = gcd(g, int(det(m[np.ix_(r, c)], ZZ)))
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


small_int_matrices = st.integers(1, 4).flatmap(
    lambda r: st.integers(1, 4).flatmap(
        lambda c: st.lists(st.lists(st.integers(-9, 9), min_size=c, max_size=c), min_size=r, max_size=r)))


def test_snf_identity():
    u, s, v = snf(eye(2, ZZ))
    assert (u == eye(2, ZZ)).all() and (s == eye(2, ZZ)).all() and (v == eye(2, ZZ)).all()


def test_snf_zero():
    u, s, v = snf(zeros(2, 3))
    assert (s == zeros(2, 3)).all()
    assert (u == eye(2, ZZ)).all() and (v == eye(3, ZZ)).all()


def test_snf_worked_example():
    m = mat([[2, 4], [6, 8]])
    u, s, v = snf(m)
    assert [s[0, 0], s[1, 1]] == [2, 4]
    assert minors_oracle(m) == [2, 4]
    assert (matmul(ZZ, u, m, v) == s).all()


@settings(max_examples=150, deadline=None)
@given(small_int_matrices)
def test_snf_matches_minor_gcds(rows):
    m = mat(rows)
    f = smith_form(m, ZZ)
    assert (matmul(ZZ, f.u, m, f.v) == f.s).all()
    assert (matmul(ZZ, f.u, f.u_inv) == eye(m.shape[0], ZZ)).all()
    assert (matmul(ZZ, f.v_inv, f.v) == eye(m.shape[1], ZZ)).all()
    assert [int(d) for d in f.diagonal] == minors_oracle(m)
    off = f.s.copy()
    for i in range(f.rank):
        off[i, i] = 0
    assert not off.any()


def test_snf_large_entries_stay_fast():
    # entries from a cycle basis that used to blow up under plain Euclid steps
    m = mat([[1, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 2, 0, 0],
             [5, 0, 0, 0, 0, 0, 9, 0, 8, 0, 0, 0, 0, 12, 0],
             [0, 4, 8, 0, 1, 4, 0, 0, 0, 9, 0, 8, 0, 0, 12],
             [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
             [-6, -1, 1, 2, -20, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0],
             [-13596, -2266, -4210, 8988, 219940, 6087, 0, 0, 0, 0, 0, 0, 0, 0, 0],
             [0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
             [0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
             [-83010, -13835, -25704, 54876, 1342836, 37164, 0, 0, 0, 0, 0, 0, 0, 0, 0]])
    f = smith_form(m, ZZ)
    assert f.diagonal == [1] * 8 + [2]
    assert max(abs(int(x)) for x in f.v.flat) < 10**20


@pytest.mark.parametrize("ring", [QQ, GF(2), GF(5)])
def test_snf_over_fields_is_rank(ring):
    m = ring.fix(mat([[1, 2, 3], [2, 4, 6], [0, 5, 1]]))
    f = smith_form(m, ring)
    assert all(d == ring.one for d in f.diagonal)
    assert (ring.fix(matmul(ring, f.u, m, f.v)) == f.s).all()
    assert f.rank == 2


def test_fp_entries_reduced_before_pivoting():
    # mod 5 this is [[0, 1], [0, 3]]
    f = smith_form(mat([[5, 1], [10, 3]]), GF(5))
    assert f.rank == 1


def test_cokernel_examples():
    z = FPModule.free(ZZ, 1)
    c = cokernel(ModHom.make(z, z, [[2]]))
    assert c.module.invariant_factors == (2,) and c.module.free_rank == 0
    assert cokernel(ModHom.identity(z)).module.is_zero()
    c0 = cokernel(ModHom.zero(z, z))
    assert c0.module.free_rank == 1


def test_kernel_examples():
    z1, z2 = FPModule.free(ZZ, 1), FPModule.free(ZZ, 2)
    k, inc = kernel(ModHom.zero(z2, z1))
    assert k.free_rank == 2
    k, inc = kernel(ModHom.make(z2, z1, [[1, 1]]))
    assert k.free_rank == 1 and not k.invariant_factors
    col = [int(x) for x in inc.matrix[:, 0]]
    assert col in ([1, -1], [-1, 1])
    k, _ = kernel(ModHom.make(z1, z2, [[1], [0]]))
    assert k.is_zero()


def test_solve_examples():
    z = FPModule.free(ZZ, 1)
    assert int(solve(ModHom.identity(z), [7])[0, 0]) == 7
    assert solve(ModHom.make(z, z, [[2]]), [3]) is None
    z6 = FPModule(ZZ, (6,))
    x = solve(ModHom.make(z6, z6, [[2]]), [4])
    assert x is not None and (2 * int(x[0, 0])) % 6 == 4
    # the enumerated solutions of 2x = 4 mod 6 are 2 and 5
    assert int(x[0, 0]) % 6 in (2, 5)


def test_iso_predicates():
    z, z3 = FPModule.free(ZZ, 1), FPModule(ZZ, (3,))
    assert is_iso(ModHom.identity(z))
    two = ModHom.make(z, z, [[2]])
    assert is_injective(two) and not is_surjective(two)
    assert is_iso(ModHom.make(z3, z3, [[2]]))
    assert is_zero(FPModule.zero_module(ZZ)) and not is_zero(z3)


def test_localization_examples():
    m = FPModule(ZZ, (0, 6))
    loc = localize_at_prime(m, 2)
    assert loc.free_rank == 1 and loc.invariant_factors == (2,)
    assert tensor_residue(FPModule(ZZ, (6,)), 5).is_zero()
    q = localize_at_prime(FPModule.free(ZZ, 1), 0)
    assert q.free_rank == 1 and not q.invariant_factors
    assert localize_at_prime(FPModule(ZZ, (3,)), 2).is_zero()
    assert not localize_at_prime(FPModule(ZZ, (3,)), 3).is_zero()
    with pytest.raises(ValueError):
        localize_at_prime(m, 4)


def test_present_normalizes_relations():
    m, to_new, from_new = present(ZZ, 2, mat([[2, 0], [4, 6]]))
    assert m.free_rank == 0 and sorted(m.invariant_factors) == [2, 6]
    # to_new o from_new is the identity on the new generators
    assert m.is_zero_element(matmul(ZZ, to_new, from_new) - eye(m.ngens, ZZ))


def test_tensor_of_coprime_torsion_is_zero():
    assert TensorModule(FPModule(ZZ, (2,)), FPModule(ZZ, (3,))).module.is_zero()
    t = TensorModule(FPModule(ZZ, (4,)), FPModule(ZZ, (6,))).module
    assert t.invariant_factors == (2,)


def test_hom_module_counts():
    # Hom(Z/4, Z/6) = Z/2 and Hom(Z, Z/6) = Z/6
    assert HomModule(FPModule(ZZ, (4,)), FPModule(ZZ, (6,))).module.invariant_factors == (2,)
    assert HomModule(FPModule.free(ZZ, 1), FPModule(ZZ, (6,))).module.invariant_factors == (6,)
    assert HomModule(FPModule(ZZ, (6,)), FPModule.free(ZZ, 1)).module.is_zero()


@settings(max_examples=80, deadline=None)
@given(small_int_matrices)
def test_kernel_and_cokernel_are_exact(rows):
    m = mat(rows)
    src, tgt = FPModule.free(ZZ, m.shape[1]), FPModule.free(ZZ, m.shape[0])
    h = ModHom.make(src, tgt, m)
    k, inc = kernel(h)
    assert h.compose(inc).is_zero()
    assert k.free_rank == m.shape[1] - len(minors_oracle(m))
    c = cokernel(h)
    assert c.projection.compose(h).is_zero()
    assert is_surjective(c.projection)
    # rank-nullity for the cokernel over the integers
    assert c.module.free_rank == m.shape[0] - len(minors_oracle(m))
    assert sorted(d for d in minors_oracle(m) if d != 1) == sorted(int(d) for d in c.module.invariant_factors)


def test_nullspace_over_integers():
    n = nullspace(mat([[1, 1, 0], [0, 0, 0]]), ZZ)
    assert n.shape[1] == 2
    assert not matmul(ZZ, mat([[1, 1, 0]]), n).any()


def test_rationals_and_parsing():
    assert Ring.parse("Q") == QQ and Ring.parse("Fp:7") == GF(7)
    with pytest.raises(ValueError):
        Ring.parse("Fp:8")
    with pytest.raises(ValueError):
        Ring.parse("R")
    m = as_mat([[Fraction(1, 2), 1]], QQ, (1, 2))
    f = smith_form(m, QQ)
    assert f.rank == 1
