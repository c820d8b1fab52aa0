import itertools

import pytest

from chainsheaf.site import (
    INF,
    NEG_INF,
    FinSpace,
    SiteError,
    Stratification,
    admissibility_witness,
    d_from_perversity,
    d_is_admissible,
    d_is_closed_admissible,
    discrete,
    format_extint,
    n_of_open,
    parse_extint,
    sierpinski,
    three_point,
    truncation_level,
)


def test_min_open_sierpinski():
    s = sierpinski()
    assert s.min_open("o") == {"o"}
    assert s.min_open("c") == {"o", "c"}


def test_min_open_three_point():
    s = three_point()
    assert s.min_open("c") == s.full
    assert s.min_open("a") == {"a"}


@pytest.mark.parametrize("space", [sierpinski(), three_point(), discrete(3)])
def test_min_open_is_smallest(space):
    for p in space.points:
        m = space.min_open(p)
        assert space.is_open(m) and p in m
        for u in space.opens:
            if p in u:
                assert m <= u
    assert len({space.min_open(p) for p in space.points}) == len(space.points)


def test_lattice_validation():
    with pytest.raises(SiteError, match="lattice not closed under union"):
        FinSpace(["o", "c"], [["o"]])
    with pytest.raises(SiteError, match="intersection"):
        FinSpace(["a", "b", "c"], [["a", "b"], ["b", "c"], ["a", "b", "c"]])
    with pytest.raises(SiteError, match="duplicate"):
        FinSpace(["a", "a"], [["a"]])
    with pytest.raises(SiteError, match="T0"):
        FinSpace(["a", "b"], [["a", "b"]])
    with pytest.raises(SiteError, match="unknown points"):
        FinSpace(["a"], [["a"], ["z"]])


def test_soft_cap_warns():
    with pytest.warns(UserWarning, match="soft size cap"):
        discrete(7)


def test_closure_and_local_closedness():
    s = three_point()
    assert s.closure({"a"}) == {"a", "c"}
    assert s.is_closed({"c"}) and not s.is_closed({"a"})
    assert s.is_locally_closed({"a"}) and s.is_locally_closed({"c"})
    chain = FinSpace(["x", "y", "z"], [["x"], ["x", "y"], ["x", "y", "z"]])
    assert not chain.is_locally_closed({"x", "z"})
    assert s.specializes("a", "c") and not s.specializes("c", "a")


def test_covering_pairs_three_point():
    s = three_point()
    names = {(s.key(u), s.key(v)) for u, v in s.covering_pairs}
    assert names == {("a,b", "a"), ("a,b", "b"), ("a,b,c", "a,b")}


def test_extint_parsing():
    assert parse_extint("+inf") == INF and parse_extint("-inf") == NEG_INF
    assert parse_extint(3) == 3 and parse_extint("-2") == -2
    assert format_extint(INF) == "+inf" and format_extint(-1) == -1
    with pytest.raises(SiteError):
        parse_extint(1.5)
    with pytest.raises(SiteError):
        parse_extint("inf-ish")


def test_admissibility_examples():
    s = sierpinski()
    assert d_is_admissible(s, {"o": 0, "c": 0})
    assert d_is_admissible(s, {"o": 1, "c": 0})
    assert not d_is_admissible(s, {"o": 0, "c": 1})
    n, bad = admissibility_witness(s, {"o": 0, "c": 1})
    assert n == 1 and bad == {"c"}
    assert d_is_closed_admissible(s, {"o": 0, "c": 1})
    assert not d_is_closed_admissible(s, {"o": 1, "c": 0})


def test_admissibility_matches_all_thresholds():
    s = three_point()
    values = [NEG_INF, -1, 0, 1, INF]
    for vals in itertools.product(values, repeat=3):
        d = dict(zip(s.points, vals))
        # enumerate every threshold in the extended range, not only taken values
        direct = all(s.is_open({p for p in s.points if d[p] >= n}) for n in [NEG_INF, -2, -1, 0, 1, 2, INF])
        assert d_is_admissible(s, d) == direct


def test_d_must_be_total():
    with pytest.raises(SiteError, match="not defined"):
        d_is_admissible(sierpinski(), {"o": 0})


def test_n_of_open():
    s = sierpinski()
    assert n_of_open(s, {"o": 4, "c": 4}, s.full) == 4
    assert n_of_open(s, {"o": 1, "c": 0}, s.full) == 0
    assert n_of_open(s, {"o": NEG_INF, "c": 3}, s.full) == NEG_INF
    with pytest.raises(SiteError):
        n_of_open(s, {"o": 0, "c": 0}, frozenset())


def test_n_of_open_antitone_for_admissible_d():
    s = three_point()
    for vals in itertools.product([NEG_INF, 0, 1, INF], repeat=3):
        d = dict(zip(s.points, vals))
        if not d_is_admissible(s, d):
            continue
        for u in s.opens:
            for v in s.opens:
                if v <= u:
                    assert n_of_open(s, d, v) >= n_of_open(s, d, u)


def test_truncation_level_on_min_opens():
    s = three_point()
    d = {"a": 0, "b": 0, "c": 2}
    assert d_is_closed_admissible(s, d)
    for p in s.points:
        assert truncation_level(s, d, s.min_open(p)) == d[p]


def test_perversity_examples():
    s = sierpinski()
    assert d_from_perversity(s, Stratification(s, [["o", "c"]], [0])) == {"o": 0, "c": 0}
    assert d_from_perversity(s, Stratification(s, [["o"], ["c"]], [1, 0])) == {"o": 1, "c": 0}
    assert d_from_perversity(s, Stratification(s, [["o"], ["c"]], [2, 2])) == {"o": 2, "c": 2}


def test_perversity_reproduces_strata():
    s = three_point()
    strat = Stratification(s, [["a", "b"], ["c"]], [1, -1])
    d = d_from_perversity(s, strat)
    for n in set(d.values()):
        layer = {p for p in s.points if d[p] >= n} - {p for p in s.points if d[p] >= n + 1}
        expected = set().union(*(strat.strata[a] for a in range(2) if strat.perversity[a] == n))
        assert layer == expected


def test_stratification_validation():
    s = three_point()
    with pytest.raises(SiteError, match="overlap"):
        Stratification(s, [["a", "b"], ["b", "c"]], [0, 0])
    with pytest.raises(SiteError, match="miss"):
        Stratification(s, [["a"]], [0])
    with pytest.raises(SiteError, match="one perversity"):
        Stratification(s, [["a", "b", "c"]], [0, 1])
    chain = FinSpace(["x", "y", "z"], [["x"], ["x", "y"], ["x", "y", "z"]])
    with pytest.raises(SiteError, match="locally closed"):
        Stratification(chain, [["x", "z"], ["y"]], [0, 0])
