"""Command line entry point.

Exit status: 0 success, 1 usage or parse error, 2 failed precondition,
3 failed property suite.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional

from . import formats
from .chain import (
    ChainMap,
    ComplexError,
    PComplex,
    classify,
    homology,
    homotopy_classes,
    sheafify_complex,
    tensor_total,
    zero_complex,
)
from .formats import FormatError
from .linalg import Ring
from .model import ModelError, factor_cof_acyclicfib, has_rlp, is_acyclic_fibration, is_fibration
from .presheaf import PresheafError, is_sheaf
from .site import FinSpace, SiteError, format_extint
from .tstruct import (
    TStructure,
    TStructureError,
    factor_t,
    heart_project,
    is_co_n_equivalence,
    is_n_equivalence,
    membership_failure,
    perverse_direct,
    perverse_tstructure,
    truncate,
)
from .verify import SUITES, run_suite

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_PROPERTY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# workspace


class Workspace:
    def __init__(self, args):
        self.args = args
        self.ring: Ring = formats.parse_ring(args.ring)
        self._space: Optional[FinSpace] = None

    @property
    def space(self) -> FinSpace:
        if self._space is None:
            if not self.args.site:
                raise FormatError("this subcommand needs --site")
            self._space = formats.parse_site(_read(self.args.site))
        return self._space

    def complex(self, path: str) -> PComplex:
        try:
            return formats.parse_complex(_read(path), self.space, self.ring)
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}", exc.where) from None

    def chain_map(self, path: str):
        base = Path(path).parent

        def load(ref):
            return formats.load_document(_read(str(base / ref)))

        try:
            return formats.map_from_doc(formats.load_document(_read(path)), self.space, self.ring, load)
        except FormatError as exc:
            raise FormatError(f"{path}: {exc}", exc.where) from None

    def d(self) -> dict:
        if not self.args.d:
            raise FormatError("this subcommand needs --d")
        return formats.parse_d(_read(self.args.d), self.space)

    def tstructure(self) -> TStructure:
        return TStructure(self.space, self.d())


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# rendering


def _complex_text(x: PComplex, label: str) -> list[str]:
    sp = x.space
    if x.is_empty:
        return [f"{label}: 0"]
    out = [f"{label}: degrees {x.lo}..{x.hi}"]
    for n in x.degrees:
        parts = [f"{{{sp.key(u)}}} {x.module(n, u)}" for u in sp.opens]
        out.append(f"  {n}: " + "; ".join(parts))
    return out


def _presheaf_text(f, label: str) -> list[str]:
    sp = f.space
    return [f"{label}: " + "; ".join(f"{{{sp.key(u)}}} {f[u]}" for u in sp.opens)]


def _emit(args, record: dict, lines: list[str]):
    if args.format == "structured":
        sys.stdout.write(json.dumps(record, sort_keys=True, default=_jsonable) + "\n")
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _jsonable(x):
    if isinstance(x, (set, frozenset)):
        return sorted(x)
    try:
        return int(x)
    except (TypeError, ValueError):
        return str(x)


def _d_record(d: dict) -> dict:
    return {p: format_extint(v) for p, v in d.items()}


# ---------------------------------------------------------------------------
# subcommands


def cmd_homology(ws: Workspace, args) -> int:
    x = ws.complex(args.complex)
    degrees = [args.degree] if args.degree is not None else list(x.degrees)
    rec, lines = {"homology": {}}, []
    for n in degrees:
        h = homology(x, n)
        rec["homology"][str(n)] = h.describe()
        lines += _presheaf_text(h, f"H_{n}")
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_classify(ws: Workspace, args) -> int:
    rep = classify(ws.chain_map(args.map))
    rec = rep.as_dict()
    lines = [f"{k}: {str(v).lower()}" for k, v in rec.items() if k != "witnesses"]
    lines += [f"  witness {k}: {v}" for k, v in rep.witnesses.items()]
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_sheafify(ws: Workspace, args) -> int:
    x = ws.complex(args.complex)
    sh = sheafify_complex(x)
    already = all(is_sheaf(x.term(n)) for n in x.degrees)
    rep = classify(sh.unit)
    rec = {"input_is_levelwise_sheaf": already, "sheafified": formats.complex_record(sh.complex),
           "unit": rep.as_dict()}
    lines = [f"levelwise sheaf already: {str(already).lower()}"] + _complex_text(sh.complex, "L X")
    lines.append(f"unit: presheaf_iso {str(rep.presheaf_iso).lower()}, stalkwise_iso {str(rep.stalkwise_iso).lower()}")
    if args.output:
        Path(args.output).write_text(formats.serialize_complex(sh.complex))
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_lift(ws: Workspace, args) -> int:
    f = ws.chain_map(args.map)
    kinds = [args.kind] if args.kind else ["j", "i"]
    rec = {"fibration": is_fibration(f), "acyclic_fibration": is_acyclic_fibration(f), "rlp": {}}
    lines = [f"fibration: {str(rec['fibration']).lower()}", f"acyclic fibration: {str(rec['acyclic_fibration']).lower()}"]
    for k in kinds:
        ok, wit = has_rlp(f, k)
        wit = {key: _jsonable(v) if not isinstance(v, (str, int, list, dict)) else v
               for key, v in (wit or {}).items()}
        rec["rlp"][k] = {"holds": ok, "witness": wit or None}
        lines.append(f"RLP against {k}-generators: {str(ok).lower()}" + (f"  (fails at {wit})" if wit else ""))
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_factor(ws: Workspace, args) -> int:
    if args.cofibrant:
        x = ws.complex(args.target)
        original = ChainMap(zero_complex(x.space, x.ring), x, {})
    else:
        original = ws.chain_map(args.target)
    fac = factor_cof_acyclicfib(original)
    audit = fac.audit(original)
    rec = {"middle": formats.complex_record(fac.middle), "attachments": [list(a) for a in fac.attachments],
           "audit": audit}
    lines = _complex_text(fac.middle, "middle")
    lines.append(f"cells attached: {len(fac.attachments)}")
    lines += [f"audit {k}: {str(v).lower()}" for k, v in audit.items()]
    if args.output:
        Path(args.output).write_text(formats.serialize_complex(fac.middle))
    _emit(args, rec, lines)
    return EXIT_OK if all(audit.values()) else EXIT_PROPERTY


def cmd_truncate(ws: Workspace, args) -> int:
    x, t = ws.complex(args.complex), ws.tstructure()
    tri = truncate(x, t, args.shift)
    exact = tri.is_short_exact()
    rec = {"below": formats.complex_record(tri.below), "above": formats.complex_record(tri.above),
           "short_exact": exact}
    lines = _complex_text(tri.below, f"X_{{>={args.shift}}}") + _complex_text(tri.above, f"X_{{<={args.shift - 1}}}")
    lines.append(f"short exact: {str(exact).lower()}")
    if args.output:
        Path(args.output).write_text(formats.serialize_complex(tri.below))
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_member(ws: Workspace, args) -> int:
    x, t = ws.complex(args.complex), ws.tstructure()
    wit = membership_failure(x, t, args.side, args.shift)
    label = f"D_{{{'>=' if args.side == 'geq' else '<='}{args.shift}}}"
    rec = {"side": args.side, "shift": args.shift, "member": wit is None, "witness": wit,
           "d": _d_record(t.d), "open_condition": t.admissible, "closed_condition": t.truncatable}
    lines = [f"in {label}: {str(wit is None).lower()}"]
    if wit:
        lines.append(f"  witness: {wit}")
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_heart(ws: Workspace, args) -> int:
    x, t = ws.complex(args.complex), ws.tstructure()
    h = heart_project(x, t)
    rec = {"heart": formats.complex_record(h)}
    _emit(args, rec, _complex_text(h, "heart part"))
    return EXIT_OK


def cmd_tfactor(ws: Workspace, args) -> int:
    f, t = ws.chain_map(args.map), ws.tstructure()
    n = args.n
    fac = factor_t(f, t, n)
    checks = {
        "composite": fac.h.compose(fac.g).equals(f),
        "n_equivalence": is_n_equivalence(fac.g, t, n),
        "co_n_equivalence": is_co_n_equivalence(fac.h, t, n),
    }
    rec = {"n": n, "middle": formats.complex_record(fac.middle), "checks": checks}
    lines = _complex_text(fac.middle, "middle") + [f"{k}: {str(v).lower()}" for k, v in checks.items()]
    _emit(args, rec, lines)
    return EXIT_OK if all(checks.values()) else EXIT_PROPERTY


def cmd_perverse(ws: Workspace, args) -> int:
    x = ws.complex(args.complex)
    strat = formats.parse_stratification(_read(args.strata), ws.space)
    t = perverse_tstructure(strat)
    rec = {"d": _d_record(t.d)}
    lines = [f"d = {_d_record(t.d)}"]
    for side in ("geq", "leq"):
        via_d = membership_failure(x, t, side, 0) is None
        direct = perverse_direct(x, strat, side)
        rec[side] = {"via_d": via_d, "direct": direct}
        lines.append(f"{side} 0: via d {str(via_d).lower()}, stratumwise {str(direct).lower()}")
    _emit(args, rec, lines)
    return EXIT_OK


def cmd_tensor(ws: Workspace, args) -> int:
    x, y = ws.complex(args.left), ws.complex(args.right)
    t = tensor_total(x, y)
    rec = {"tensor": formats.complex_record(t)}
    if args.output:
        Path(args.output).write_text(formats.serialize_complex(t))
    _emit(args, rec, _complex_text(t, "X (x) Y"))
    return EXIT_OK


def cmd_maps(ws: Workspace, args) -> int:
    x, y = ws.complex(args.source), ws.complex(args.target)
    hc = homotopy_classes(x, y)
    rec = {"homotopy_classes": hc.module.describe()}
    _emit(args, rec, [f"[X, Y] = {hc.module}"])
    return EXIT_OK


def cmd_verify(ws: Workspace, args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    ring = formats.parse_ring(args.ring) if args.ring_given else None
    reports = [run_suite(n, args.seed, args.instances, ring) for n in names]
    rec = {"reports": [r.as_dict() for r in reports], "passed": all(r.passed for r in reports)}
    lines = []
    for r in reports:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.suite}: {status} ({r.instances} instances, {r.fixed_checks} fixed checks, seed {r.seed})")
        for f in r.failures:
            lines.append(f"  {json.dumps(f, sort_keys=True, default=_jsonable)}")
    _emit(args, rec, lines)
    return EXIT_OK if rec["passed"] else EXIT_PROPERTY


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--site", help="site document (points and opens)")
    common.add_argument("--ring", default=None, help="Z, Q or Fp:<p> (default Z)")
    common.add_argument("--format", choices=["text", "structured"], default="text")

    p = _Parser(prog="chainsheaf", description="Chain complexes of presheaves on finite spaces.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.set_defaults(fn=fn)
        return s

    s = add("homology", cmd_homology, "homology presheaves")
    s.add_argument("complex")
    s.add_argument("--degree", type=int)

    s = add("classify", cmd_classify, "presheaf, sheaf and stalkwise quasi-isomorphism tests")
    s.add_argument("map")

    s = add("sheafify", cmd_sheafify, "levelwise sheafification")
    s.add_argument("complex")
    s.add_argument("--output", help="write the sheafified complex here")

    s = add("lift", cmd_lift, "lifting against generating cofibrations")
    s.add_argument("map")
    s.add_argument("--kind", choices=["i", "j"])

    s = add("factor", cmd_factor, "cofibration / acyclic fibration factorization")
    s.add_argument("target", help="chain map document, or a complex with --cofibrant")
    s.add_argument("--cofibrant", action="store_true", help="factor 0 -> X for the given complex X")
    s.add_argument("--output", help="write the middle complex here")

    for name, fn, help_ in (("truncate", cmd_truncate, "truncation triangle"),
                            ("member", cmd_member, "membership in D_{>=n} or D_{<=n}"),
                            ("heart", cmd_heart, "projection to the heart")):
        s = add(name, fn, help_)
        s.add_argument("complex")
        s.add_argument("--d", help="d-function document")
        if name != "heart":
            s.add_argument("--shift", "--degree", dest="shift", type=int, default=0)
        if name == "member":
            s.add_argument("--side", choices=["geq", "leq"], default="geq")
        if name == "truncate":
            s.add_argument("--output", help="write X_{>=n} here")

    s = add("tfactor", cmd_tfactor, "n-equivalence / co-n-equivalence factorization")
    s.add_argument("map")
    s.add_argument("--d", help="d-function document")
    s.add_argument("--n", "--degree", dest="n", type=int, default=0)

    s = add("perverse", cmd_perverse, "perverse membership from a stratification")
    s.add_argument("complex")
    s.add_argument("--strata", required=True, help="stratification document")

    s = add("tensor", cmd_tensor, "total tensor product")
    s.add_argument("left")
    s.add_argument("right")
    s.add_argument("--output", help="write the tensor complex here")

    s = add("maps", cmd_maps, "homotopy classes of chain maps")
    s.add_argument("source")
    s.add_argument("target")

    s = add("verify", cmd_verify, "seeded property suites")
    s.add_argument("suite", choices=sorted(SUITES) + ["all"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--instances", type=int, default=20)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    args.ring_given = args.ring is not None
    if args.ring is None:
        args.ring = "Z"
    try:
        ws = Workspace(args)
        return args.fn(ws, args)
    except FormatError as exc:
        _fail(args, "parse", str(exc), exc.where)
        return EXIT_PARSE
    except (TStructureError, ModelError) as exc:
        _fail(args, "precondition", str(exc), getattr(exc, "witness", {}))
        return EXIT_PRECONDITION
    except (SiteError, ComplexError, PresheafError) as exc:
        _fail(args, "precondition", str(exc), getattr(exc, "where", {}))
        return EXIT_PRECONDITION


def _fail(args, kind: str, msg: str, witness: Any):
    if getattr(args, "format", "text") == "structured":
        sys.stdout.write(json.dumps({"error": kind, "message": msg, "witness": witness or None},
                                    sort_keys=True, default=_jsonable) + "\n")
    print(f"{kind} error: {msg}" + (f" {json.dumps(witness, default=_jsonable)}" if witness else ""),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
