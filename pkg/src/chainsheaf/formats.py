"""Text documents for sites, complexes, d-functions and stratifications.

All documents are YAML (JSON is accepted too).  Opens are written as lists of
point names and matrices as row-major lists whose entries are integers or
``"p/q"`` strings.  A complex document looks like::

    ring: Z
    degrees:
      - degree: 0
        modules:
          - {open: [a], rank: 2, relations: [[2], [0]]}
        restrictions:
          - {from: [a, b], to: [a], matrix: [[1, 0], [0, 1]]}
        differential:
          - {open: [a], matrix: [[1, 1]]}

``relations`` has one column per relation; ``differential`` maps this degree
to the one below.  Omitted modules are zero and omitted matrices are zero.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Mapping, Optional

import numpy as np
import yaml

from .chain import ComplexError, PComplex
from .linalg import FPModule, Ring, as_mat, matmul, present, zeros
from .presheaf import Presheaf, PresheafError, PresheafHom
from .site import (
    DFunction,
    FinSpace,
    Open,
    SiteError,
    Stratification,
    check_d,
    format_extint,
    parse_extint,
)


class FormatError(ValueError):
    """A document could not be parsed; ``where`` locates the problem."""

    def __init__(self, msg: str, where: Optional[dict] = None):
        super().__init__(msg)
        self.where = where or {}


def load_document(text: str) -> Any:
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise FormatError(f"not a YAML/JSON document: {exc}") from None


def dump_document(doc: Any) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)


def ring_text(ring: Ring) -> str:
    return f"Fp:{ring.p}" if ring.kind == "Fp" else str(ring)


def parse_ring(text: str) -> Ring:
    try:
        return Ring.parse(str(text))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# sites


def site_from_doc(doc: Any) -> FinSpace:
    if not isinstance(doc, Mapping) or "points" not in doc or "opens" not in doc:
        raise FormatError("a site needs 'points' and 'opens'")
    points = [str(p) for p in doc["points"]]
    opens = [[str(p) for p in o] for o in doc["opens"]]
    try:
        return FinSpace(points, opens)
    except SiteError as exc:
        raise FormatError(str(exc)) from None


def parse_site(text: str) -> FinSpace:
    return site_from_doc(load_document(text))


def site_to_doc(space: FinSpace) -> dict:
    return {"points": list(space.points), "opens": [_open_list(space, u) for u in space.opens]}


def _open_list(space: FinSpace, u: Open) -> list:
    return [p for p in space.points if p in u]


def _open(space: FinSpace, names: Any, where: dict) -> Open:
    if not isinstance(names, (list, tuple)):
        raise FormatError("an open set is a list of point names", where)
    u = frozenset(str(p) for p in names)
    if u not in space.opens:
        raise FormatError(f"{space.fmt(u)} is not a nonempty open set of the site", where)
    return u


# ---------------------------------------------------------------------------
# matrices


def _entry(x: Any, ring: Ring, where: dict):
    try:
        if isinstance(x, str):
            x = Fraction(x.strip())
        elif isinstance(x, float):
            raise ValueError("use integers or 'p/q' strings, not floats")
        return ring.coerce(x)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise FormatError(f"bad matrix entry {x!r}: {exc}", where) from None


def matrix_from_doc(rows: Any, ring: Ring, shape: tuple, where: dict) -> np.ndarray:
    if rows is None:
        return zeros(*shape)
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise FormatError("a matrix is a list of rows", where)
    n, k = shape
    if len(rows) == 0 and (n == 0 or k == 0):
        return zeros(n, k)
    if len(rows) != n or any(len(r) != k for r in rows):
        got = (len(rows), len(rows[0]) if rows else 0)
        raise FormatError(f"matrix has shape {got}, expected {shape}", where)
    return as_mat([[_entry(x, ring, where) for x in r] for r in rows], ring, shape=shape)


def matrix_to_doc(m: np.ndarray, ring: Ring) -> list:
    return [[ring.to_json(x) for x in row] for row in m.tolist()]


# ---------------------------------------------------------------------------
# complexes


class _Presented:
    """A module given as ``R^rank / relations`` with its normal form."""

    def __init__(self, ring: Ring, rank: int, relations: np.ndarray):
        self.rank = rank
        self.relations = relations
        self.module, self.to_new, self.from_new = present(ring, rank, relations)

    def convert(self, m: np.ndarray, source: "_Presented", ring: Ring) -> np.ndarray:
        return self.module.reduce(matmul(ring, self.to_new, m, source.from_new))

    def respects(self, m: np.ndarray, source: "_Presented", ring: Ring) -> bool:
        """Whether ``m`` (in the raw coordinates) sends relations of ``source`` to relations here."""
        if source.relations.shape[1] == 0:
            return True
        img = matmul(ring, self.to_new, m, source.relations)
        return self.module.is_zero_element(img)


def complex_from_doc(doc: Any, space: FinSpace, ring: Ring) -> PComplex:
    return _complex_from_doc(doc, space, ring)[0]


def _complex_from_doc(doc: Any, space: FinSpace, ring: Ring) -> tuple[PComplex, dict]:
    if not isinstance(doc, Mapping):
        raise FormatError("a complex document is a mapping with 'degrees'")
    if "ring" in doc and parse_ring(doc["ring"]) != ring:
        raise FormatError(f"complex is over {doc['ring']}, workspace ring is {ring_text(ring)}")
    entries = doc.get("degrees") or []
    if not isinstance(entries, list):
        raise FormatError("'degrees' is a list")
    by_degree = {}
    for e in entries:
        if not isinstance(e, Mapping) or "degree" not in e:
            raise FormatError("each entry of 'degrees' needs a 'degree'")
        n = int(e["degree"])
        if n in by_degree:
            raise FormatError(f"degree {n} appears twice", {"degree": n})
        by_degree[n] = e
    if not by_degree:
        from .chain import zero_complex

        return zero_complex(space, ring), {}
    lo, hi = min(by_degree), max(by_degree)
    pres = {}
    for n in range(lo, hi + 1):
        e = by_degree.get(n, {})
        given = {}
        for item in e.get("modules") or []:
            where = {"degree": n}
            u = _open(space, item.get("open"), where)
            where["open"] = space.key(u)
            if u in given:
                raise FormatError("module given twice", where)
            rank = int(item.get("rank", 0))
            rel = item.get("relations")
            k = len(rel[0]) if rel else 0
            given[u] = _Presented(ring, rank, matrix_from_doc(rel, ring, (rank, k), where))
        for u in space.opens:
            pres[(n, u)] = given.get(u) or _Presented(ring, 0, zeros(0, 0))

    terms = {}
    for n in range(lo, hi + 1):
        e = by_degree.get(n, {})
        raw = {}
        for item in e.get("restrictions") or []:
            where = {"degree": n}
            u = _open(space, item.get("from"), where)
            v = _open(space, item.get("to"), where)
            where.update({"from": space.key(u), "to": space.key(v)})
            if not v < u:
                raise FormatError("restrictions go from an open to a strictly smaller one", where)
            pu, pv = pres[(n, u)], pres[(n, v)]
            m = matrix_from_doc(item.get("matrix"), ring, (pv.rank, pu.rank), where)
            if not pv.respects(m, pu, ring):
                raise FormatError("restriction does not respect the relations", where)
            raw[(u, v)] = pv.convert(m, pu, ring)
        values = {u: pres[(n, u)].module for u in space.opens}
        cover = {}
        for (u, v) in space.covering_pairs:
            cover[(u, v)] = raw.get((u, v), zeros(values[v].ngens, values[u].ngens))
        try:
            f = Presheaf.from_covering(space, ring, values, cover)
        except PresheafError as exc:
            raise FormatError(f"degree {n}: {exc}", {"degree": n}) from None
        for (u, v), m in raw.items():
            if not values[v].is_zero_element(m - f.restriction(u, v)):
                raise FormatError("restriction disagrees with the composite of covering restrictions",
                                  {"degree": n, "from": space.key(u), "to": space.key(v)})
        terms[n] = f

    diffs = {}
    for n in range(lo + 1, hi + 1):
        e = by_degree.get(n, {})
        comps = {u: zeros(terms[n - 1][u].ngens, terms[n][u].ngens) for u in space.opens}
        for item in e.get("differential") or []:
            where = {"degree": n}
            u = _open(space, item.get("open"), where)
            where["open"] = space.key(u)
            ps, pt = pres[(n, u)], pres[(n - 1, u)]
            m = matrix_from_doc(item.get("matrix"), ring, (pt.rank, ps.rank), where)
            if not pt.respects(m, ps, ring):
                raise FormatError("differential does not respect the relations", where)
            comps[u] = pt.convert(m, ps, ring)
        diffs[n] = PresheafHom(terms[n], terms[n - 1], comps)
    if lo in by_degree and by_degree[lo].get("differential"):
        raise FormatError("the lowest degree cannot have a differential", {"degree": lo})
    try:
        return PComplex(space, ring, lo, hi, terms, diffs).audit(), pres
    except ComplexError as exc:
        raise FormatError(str(exc), getattr(exc, "where", {})) from None


def parse_complex(text: str, space: FinSpace, ring: Ring) -> PComplex:
    return complex_from_doc(load_document(text), space, ring)


def complex_to_doc(x: PComplex) -> dict:
    """Canonical document: normalized presentations, covering restrictions only."""
    sp, ring = x.space, x.ring
    out = {"ring": ring_text(ring), "degrees": []}
    for n in x.degrees:
        e = {"degree": n}
        mods = []
        for u in sp.opens:
            m = x.module(n, u)
            if m.is_zero():
                continue
            item = {"open": _open_list(sp, u), "rank": m.ngens}
            rel = m.relation_columns
            if rel.shape[1]:
                item["relations"] = matrix_to_doc(rel, ring)
            mods.append(item)
        e["modules"] = mods
        res = []
        for (u, v) in sp.covering_pairs:
            if x.module(n, u).is_zero() or x.module(n, v).is_zero():
                continue
            res.append({"from": _open_list(sp, u), "to": _open_list(sp, v),
                        "matrix": matrix_to_doc(x.term(n).restriction(u, v), ring)})
        if res:
            e["restrictions"] = res
        if n > x.lo:
            d = []
            for u in sp.opens:
                if x.module(n, u).is_zero() or x.module(n - 1, u).is_zero():
                    continue
                d.append({"open": _open_list(sp, u), "matrix": matrix_to_doc(x.dmat(n, u), ring)})
            if d:
                e["differential"] = d
        out["degrees"].append(e)
    return out


def serialize_complex(x: PComplex) -> str:
    return dump_document(complex_to_doc(x))


def complexes_equal(a: PComplex, b: PComplex) -> bool:
    """Same window, same term presheaves and same differential matrices."""
    if a.space != b.space or a.ring != b.ring or list(a.degrees) != list(b.degrees):
        return False
    for n in a.degrees:
        if not a.term(n).structurally_equal(b.term(n)):
            return False
        if n > a.lo and any(not np.array_equal(a.dmat(n, u), b.dmat(n, u)) for u in a.space.opens):
            return False
    return True


# ---------------------------------------------------------------------------
# chain maps


def map_from_doc(doc: Any, space: FinSpace, ring: Ring, load=None):
    """A chain map document: ``source``, ``target`` and ``components``.

    ``source`` and ``target`` are inline complex documents or, when ``load``
    is given, strings passed to ``load`` to fetch one.  Each component is
    ``{degree, open, matrix}`` in the raw coordinates of those documents;
    omitted components are zero.
    """
    from .chain import ChainMap

    if not isinstance(doc, Mapping) or "source" not in doc or "target" not in doc:
        raise FormatError("a chain map needs 'source' and 'target'")
    ends = []
    for key in ("source", "target"):
        sub = doc[key]
        if isinstance(sub, str):
            if load is None:
                raise FormatError(f"{key} is a path but no loader is available")
            sub = load(sub)
        try:
            ends.append(_complex_from_doc(sub, space, ring))
        except FormatError as exc:
            raise FormatError(f"{key}: {exc}", {key: exc.where}) from None
    (x, px), (y, py) = ends
    empty = _Presented(ring, 0, zeros(0, 0))
    mats = {}
    for item in doc.get("components") or []:
        n = int(item.get("degree"))
        where = {"degree": n}
        u = _open(space, item.get("open"), where)
        where["open"] = space.key(u)
        ps, pt = px.get((n, u), empty), py.get((n, u), empty)
        m = matrix_from_doc(item.get("matrix"), ring, (pt.rank, ps.rank), where)
        if not pt.respects(m, ps, ring):
            raise FormatError("component does not respect the relations", where)
        mats.setdefault(n, {})[u] = pt.convert(m, ps, ring)
    f = ChainMap.from_matrices(x, y, mats)
    bad = f.failure()
    if bad:
        raise FormatError(f"not a chain map: {bad['reason']} in degree {bad['degree']} at {{{bad['open']}}}", bad)
    return f


def map_to_doc(f) -> dict:
    sp, ring = f.space, f.ring
    comps = []
    lo, hi = f.window
    for n in range(lo, hi + 1):
        for u in sp.opens:
            m = f.mat(n, u)
            if m.size and any(x != 0 for x in m.flat):
                comps.append({"degree": n, "open": _open_list(sp, u), "matrix": matrix_to_doc(m, ring)})
    return {"source": complex_to_doc(f.source), "target": complex_to_doc(f.target), "components": comps}


# ---------------------------------------------------------------------------
# d-functions and stratifications


def d_from_doc(doc: Any, space: FinSpace) -> DFunction:
    if isinstance(doc, Mapping) and "d" in doc and isinstance(doc["d"], Mapping):
        doc = doc["d"]
    if not isinstance(doc, Mapping):
        raise FormatError("a d-function maps point names to integers or '+inf'/'-inf'")
    try:
        d = {str(p): parse_extint(v) for p, v in doc.items()}
        check_d(space, d)
    except (SiteError, ValueError) as exc:
        raise FormatError(str(exc)) from None
    return d


def parse_d(text: str, space: FinSpace) -> DFunction:
    return d_from_doc(load_document(text), space)


def d_to_doc(d: Mapping, space: FinSpace) -> dict:
    return {p: format_extint(d[p]) for p in space.points}


def stratification_from_doc(doc: Any, space: FinSpace) -> Stratification:
    if not isinstance(doc, Mapping) or "strata" not in doc or "perversity" not in doc:
        raise FormatError("a stratification needs 'strata' and 'perversity'")
    try:
        return Stratification(space, [[str(p) for p in s] for s in doc["strata"]], list(doc["perversity"]))
    except (SiteError, ValueError, TypeError) as exc:
        raise FormatError(str(exc)) from None


def parse_stratification(text: str, space: FinSpace) -> Stratification:
    return stratification_from_doc(load_document(text), space)


def stratification_to_doc(s: Stratification) -> dict:
    sp = s.space
    return {"strata": [_open_list(sp, st) for st in s.strata], "perversity": list(s.perversity)}


# ---------------------------------------------------------------------------
# structured output pieces


def module_record(m: FPModule) -> dict:
    return m.describe()


def complex_record(x: PComplex) -> dict:
    return {"window": [x.lo, x.hi], "terms": x.describe()}
