import random
from pathlib import Path

import pytest

from chainsheaf.chain import ChainMap, sphere, unit_interval
from chainsheaf.formats import (
    FormatError,
    complex_from_doc,
    complex_to_doc,
    complexes_equal,
    d_to_doc,
    dump_document,
    load_document,
    map_from_doc,
    map_to_doc,
    parse_complex,
    parse_d,
    parse_ring,
    parse_site,
    parse_stratification,
    ring_text,
    serialize_complex,
    site_to_doc,
)
from chainsheaf.linalg import GF, QQ, ZZ
from chainsheaf.sampling import random_chain_map, random_complex
from chainsheaf.site import INF, NEG_INF, discrete, sierpinski, three_point

DATA = Path(__file__).resolve().parent.parent / "data"


def test_parse_sites():
    assert parse_site("{points: [o, c], opens: [[o], [o, c]]}") == sierpinski()
    assert parse_site((DATA / "three_point.yaml").read_text()) == three_point()
    with pytest.raises(FormatError, match="lattice not closed under union"):
        parse_site("{points: [o, c], opens: [[o]]}")
    with pytest.raises(FormatError, match="duplicate"):
        parse_site("{points: [o, o], opens: [[o]]}")
    with pytest.raises(FormatError, match="T0"):
        parse_site("{points: [a, b], opens: [[a, b]]}")
    with pytest.raises(FormatError):
        parse_site("points: [a")


def test_site_round_trip():
    for s in (sierpinski(), three_point(), discrete(3)):
        assert parse_site(dump_document(site_to_doc(s))) == s


def test_rings():
    assert parse_ring("Z") == ZZ and parse_ring("Q") == QQ and parse_ring("Fp:5") == GF(5)
    assert ring_text(GF(7)) == "Fp:7"
    with pytest.raises(FormatError):
        parse_ring("Fp:6")


def test_unit_interval_document_matches_builtin():
    s = sierpinski()
    x = parse_complex((DATA / "U.yaml").read_text(), s, ZZ)
    assert complexes_equal(x, unit_interval(s, ZZ))


def test_single_term_document():
    s = sierpinski()
    x = parse_complex("ring: Z\ndegrees:\n- degree: 0\n  modules:\n  - {open: [o], rank: 1}\n"
                      "  - {open: [o, c], rank: 1}\n  restrictions:\n  - {from: [o, c], to: [o], matrix: [[1]]}\n",
                      s, ZZ)
    assert complexes_equal(x, sphere(s, ZZ, s.full, 0))


def test_d_squared_diagnostic():
    s = sierpinski()
    text = """
ring: Z
degrees:
- degree: 0
  modules: [{open: [o, c], rank: 1}]
- degree: 1
  modules: [{open: [o, c], rank: 1}]
  differential: [{open: [o, c], matrix: [[1]]}]
- degree: 2
  modules: [{open: [o, c], rank: 1}]
  differential: [{open: [o, c], matrix: [[1]]}]
"""
    with pytest.raises(FormatError, match="d o d") as err:
        parse_complex(text, s, ZZ)
    assert err.value.where == {"degree": 2, "open": "o,c"}


def test_non_natural_differential_diagnostic():
    s = sierpinski()
    text = """
ring: Z
degrees:
- degree: 0
  modules: [{open: [o], rank: 1}, {open: [o, c], rank: 1}]
  restrictions: [{from: [o, c], to: [o], matrix: [[1]]}]
- degree: 1
  modules: [{open: [o], rank: 1}, {open: [o, c], rank: 1}]
  restrictions: [{from: [o, c], to: [o], matrix: [[1]]}]
  differential: [{open: [o], matrix: [[1]]}, {open: [o, c], matrix: [[2]]}]
"""
    with pytest.raises(FormatError, match="not natural") as err:
        parse_complex(text, s, ZZ)
    assert err.value.where["degree"] == 1
    assert {err.value.where["open"], err.value.where["restricted_to"]} == {"o,c", "o"}


def test_dimension_mismatch_and_bad_entries():
    s = sierpinski()
    with pytest.raises(FormatError, match="shape|rows|columns"):
        parse_complex("ring: Z\ndegrees:\n- degree: 0\n  modules: [{open: [o], rank: 2}, {open: [o, c], rank: 1}]\n"
                      "  restrictions: [{from: [o, c], to: [o], matrix: [[1]]}]\n", s, ZZ)
    with pytest.raises(FormatError):
        parse_complex("ring: Z\ndegrees:\n- degree: 0\n  modules: [{open: [o], rank: 1}, {open: [o, c], rank: 1}]\n"
                      "  restrictions: [{from: [o, c], to: [o], matrix: [[0.5]]}]\n", s, ZZ)
    with pytest.raises(FormatError, match="not open|not a nonempty open"):
        parse_complex("ring: Z\ndegrees:\n- degree: 0\n  modules: [{open: [c], rank: 1}]\n", s, ZZ)


def test_rational_entries():
    s = sierpinski()
    x = parse_complex("ring: Q\ndegrees:\n- degree: 0\n  modules: [{open: [o], rank: 1}, {open: [o, c], rank: 1}]\n"
                      "  restrictions: [{from: [o, c], to: [o], matrix: [['1/2']]}]\n", s, QQ)
    assert x.module(0, s.full).ngens == 1


@pytest.mark.parametrize("seed", range(15))
def test_complex_round_trip(seed):
    rng = random.Random(seed)
    s = rng.choice([sierpinski(), three_point(), discrete(2)])
    ring = rng.choice([ZZ, QQ, GF(2), GF(3)])
    x = random_complex(rng, s, ring)
    doc = complex_to_doc(x)
    y = complex_from_doc(load_document(dump_document(doc)), s, ring)
    assert complexes_equal(x, y)
    assert serialize_complex(y) == serialize_complex(x)
    assert complex_to_doc(y) == doc


@pytest.mark.parametrize("seed", range(5))
def test_map_round_trip(seed):
    rng = random.Random(seed)
    s = rng.choice([sierpinski(), three_point()])
    x, y = random_complex(rng, s, ZZ), random_complex(rng, s, ZZ)
    f = random_chain_map(rng, x, y)
    g = map_from_doc(load_document(dump_document(map_to_doc(f))), s, ZZ)
    lo, hi = f.window
    for n in range(lo, hi + 1):
        for u in s.opens:
            assert (g.mat(n, u) == f.mat(n, u)).all()


def test_map_documents_reference_files():
    s = sierpinski()
    base = DATA

    def load(ref):
        return load_document((base / ref).read_text())

    f = map_from_doc(load_document((DATA / "disk_to_sphere.yaml").read_text()), s, ZZ, load=load)
    assert isinstance(f, ChainMap)
    f.audit()


def test_bad_map_is_located():
    s = sierpinski()
    doc = {"source": complex_to_doc(sphere(s, ZZ, s.full, 0)), "target": complex_to_doc(sphere(s, ZZ, s.full, 0)),
           "components": [{"degree": 0, "open": ["o", "c"], "matrix": [[1]]}, {"degree": 0, "open": ["o"], "matrix": [[2]]}]}
    with pytest.raises(FormatError):
        map_from_doc(doc, s, ZZ)


def test_d_documents():
    s = sierpinski()
    assert parse_d("{o: '+inf', c: -inf}", s) == {"o": INF, "c": NEG_INF}
    assert parse_d("d: {o: 1, c: 0}", s) == {"o": 1, "c": 0}
    assert parse_d(dump_document(d_to_doc({"o": INF, "c": 2}, s)), s) == {"o": INF, "c": 2}
    with pytest.raises(FormatError):
        parse_d("{o: 1}", s)
    with pytest.raises(FormatError):
        parse_d("{o: 1.5, c: 0}", s)


def test_stratification_document():
    s = three_point()
    st = parse_stratification((DATA / "strata_3pt.yaml").read_text(), s)
    assert st.perversity == (0, 1)
    with pytest.raises(FormatError):
        parse_stratification("{strata: [[a, b]], perversity: [0]}", s)
