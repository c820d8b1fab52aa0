"""Acceptance runs at full size; each prints one PASS/FAIL line.

Run ``python tests/test_acceptance.py`` for the lines alone, or let pytest
collect it. Criteria 8, 9 and 13 appear twice. The plain lines sample
d-functions whose superlevel sets are open, which is the stated hypothesis.
The ``closed`` lines sample d-functions whose superlevel sets are closed,
which is what truncation needs. The open lines are expected to fail; the
reason is in test_tstruct.py::test_no_subcomplex_truncation_for_open_only_d.
"""
import time

import pytest

from chainsheaf.linalg import ZZ
from chainsheaf.sampling import random_chain_map, random_complex, random_d, spaces
from chainsheaf.site import d_is_admissible, d_is_closed_admissible
from chainsheaf.tstruct import (
    TStructure,
    factor_t,
    is_co_n_equivalence,
    is_n_equivalence,
    orthogonality_group,
)
from chainsheaf.verify import REFINED_TABLE, instance_rng, run_suite, truncation_checks

SEED = 2026
LINES = []  # printed in the terminal summary by conftest.py


def line(tag, ok, detail):
    text = f"{'PASS' if ok else 'FAIL'} criterion {tag}: {detail}"
    LINES.append(text)
    if __name__ == "__main__":
        print(text, flush=True)
    return ok


def suite_line(tag, name, instances, limit=None, extra=None):
    rep = run_suite(name, SEED, instances)
    ok = rep.passed and (limit is None or rep.elapsed < limit)
    if extra is not None:
        ok = ok and extra(rep)
    detail = (f"{name}, {rep.instances} instances, {rep.fixed_checks} fixed checks, "
              f"{len(rep.failures)} failures, {rep.elapsed:.1f}s")
    if limit is not None:
        detail += f" (limit {limit}s)"
    line(tag, ok, detail)
    return ok, rep


def test_01_lifting_agreement():
    ok, rep = suite_line("1", "lifting_agreement", 200, limit=60)
    assert ok, rep.failures[:3]


def test_02_factorization():
    ok, rep = suite_line("2", "factorization", 100)
    assert ok, rep.failures[:3]


def test_03_tensor_identities():
    ok, rep = suite_line("3", "tensor_identities", 50, extra=lambda r: r.fixed_checks > 0)
    assert ok, rep.failures[:3]


def test_04_pushout_product_shape():
    ok, rep = suite_line("4", "pushout_product", 0, extra=lambda r: r.fixed_checks > 0)
    assert ok, rep.failures[:3]


def test_05_monoid():
    ok, rep = suite_line("5", "monoid", 50)
    assert ok, rep.failures[:3]


def test_06_flatness():
    ok, rep = suite_line("6", "flatness", 50)
    assert ok, rep.failures[:3]


def test_07_sheafification_unit():
    ok, rep = suite_line("7", "sheafification_unit", 100, extra=lambda r: r.fixed_checks >= 10)
    assert ok, rep.failures[:3]


def test_08_truncation_closed():
    ok, rep = suite_line("8 closed", "truncation", 100)
    assert ok, rep.failures[:3]


def test_09_orthogonality_closed():
    ok, rep = suite_line("9 closed", "orthogonality", 50, limit=120)
    assert ok, rep.failures[:3]


def test_10_perverse():
    ok, rep = suite_line("10", "perverse", 50)
    assert ok, rep.failures[:3]


def test_11_refined():
    ok, rep = suite_line("11", "refined", 50, extra=lambda r: r.fixed_checks == len(REFINED_TABLE))
    assert ok, rep.failures[:3]


def test_12_suspension():
    ok, rep = suite_line("12", "suspension", 10)
    assert ok, rep.failures[:3]


def test_13_tfactor_closed():
    ok, rep = suite_line("13 closed", "tfactor", 50)
    assert ok, rep.failures[:3]


# the same three criteria with d-functions satisfying only the open condition


def _open_instances(count, body):
    """Run ``body(rng, space, d)`` on ``count`` seeded instances with open-condition d."""
    fails, open_only = [], 0
    for i in range(count):
        rng = instance_rng(SEED, i)
        sp = rng.choice(spaces())
        d = random_d(rng, sp, closed=False)
        assert d_is_admissible(sp, d)
        if not d_is_closed_admissible(sp, d):
            open_only += 1
        try:
            bad = body(rng, sp, d)
        except Exception as exc:  # a refused or broken truncation is a failed instance
            bad = f"{type(exc).__name__}: {exc}"
        if bad:
            fails.append((i, bad))
    return fails, open_only


def _open_line(tag, count, body, t0):
    fails, open_only = _open_instances(count, body)
    detail = f"{count} instances, {open_only} with a non-closed superlevel set, {len(fails)} failures"
    if fails:
        detail += f"; first: instance {fails[0][0]}, {fails[0][1]}"
    line(tag, not fails, f"{detail}, {time.perf_counter() - t0:.1f}s")
    return fails


def _truncation_body(rng, sp, d):
    x = random_complex(rng, sp, ZZ, lo=rng.randint(-1, 1), span=rng.randint(1, 4))
    bad = truncation_checks(x, TStructure(sp, d))
    return bad and bad["reason"]


def _orthogonality_body(rng, sp, d):
    x = random_complex(rng, sp, ZZ, lo=rng.randint(-1, 1), span=rng.randint(1, 3), max_rank=2)
    y = random_complex(rng, sp, ZZ, lo=rng.randint(-1, 1), span=rng.randint(1, 3), max_rank=2)
    g = orthogonality_group(x, y, TStructure(sp, d))
    return None if g.is_zero() else f"nonzero group {g.describe()}"


def _tfactor_body(rng, sp, d):
    x = random_complex(rng, sp, ZZ, lo=rng.randint(-1, 1), span=rng.randint(1, 3), max_rank=2)
    y = random_complex(rng, sp, ZZ, lo=rng.randint(-1, 1), span=rng.randint(1, 3), max_rank=2)
    f = random_chain_map(rng, x, y)
    t, n = TStructure(sp, d), rng.choice((-1, 0, 1))
    fac = factor_t(f, t, n)
    ok = (fac.h.compose(fac.g).equals(f) and is_n_equivalence(fac.g, t, n)
          and is_co_n_equivalence(fac.h, t, n))
    return None if ok else "factorization audit failed"


OPEN_REASON = ("no truncation triangle exists for the constant sheaf on the Sierpinski space "
               "with d(o) = 1, d(c) = 0")


@pytest.mark.xfail(strict=True, reason=OPEN_REASON)
def test_08_truncation_open_condition():
    assert not _open_line("8", 100, _truncation_body, time.perf_counter())


@pytest.mark.xfail(strict=True, reason=OPEN_REASON)
def test_09_orthogonality_open_condition():
    assert not _open_line("9", 50, _orthogonality_body, time.perf_counter())


@pytest.mark.xfail(strict=True, reason=OPEN_REASON)
def test_13_tfactor_open_condition():
    assert not _open_line("13", 50, _tfactor_body, time.perf_counter())


def test_open_condition_counterexample_is_sampled():
    """The open-condition runs above must actually hit non-closed d-functions."""
    _, open_only = _open_instances(100, lambda rng, sp, d: None)
    assert open_only > 0


if __name__ == "__main__":
    order = [test_01_lifting_agreement, test_02_factorization, test_03_tensor_identities,
             test_04_pushout_product_shape, test_05_monoid, test_06_flatness, test_07_sheafification_unit,
             test_08_truncation_open_condition, test_08_truncation_closed,
             test_09_orthogonality_open_condition, test_09_orthogonality_closed,
             test_10_perverse, test_11_refined, test_12_suspension,
             test_13_tfactor_open_condition, test_13_tfactor_closed]
    for fn in order:
        try:
            fn()
        except AssertionError:
            pass
