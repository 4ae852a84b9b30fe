"""Command-line front end.

Problem documents are JSON::

    {
      "measure":  {"atoms": [{"x": 0.5, "mass": 1.0}],
                   "continuous": {"density": "lebesgue", "n_nodes": 512}},
      "operator": {"dim_H": 1, "rank": 1, "commutativity": true,
                   "atoms": [{"alpha": [[[0, 0]]], "c": [[[1.4142135623730951, 0]]]}],
                   "continuous": {"alpha": {"poly": [[[[0, 0]]], [[[1, 0]]]]}, "c": [[[1, 0]]]}},
      "run":      {"z": [[0, 2]], "zgrid": [-2, 2, 0.01, 100, 16, 16], "tol": 1e-10}
    }

Matrices are lists of rows whose entries are ``[re, im]`` pairs (plain
numbers are accepted as real entries).  ``{"poly": [M0, M1, ...]}`` stands
for ``M0 + M1 x + ...`` on the continuous part.

Exit codes: 0 success / criterion holds, 1 usage, schema or refusal,
2 criterion fails, 3 inconclusive or inapplicable.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys

import jsonschema
import numpy as np

from .cauchy import DEFAULT_TOL, kernel_mass, resolvent_apply, sweep
from .charfunc import char_fn_batch, det_char_fn
from .criteria import ZGrid, compute_report
from .errors import DissimError, UnsupportedFormError
from .measure import Measure
from .operator_model import OperatorSpec, commutativity_defect, hermitian_defects
from .oracle import direct_char_fn, direct_resolvent

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_UNDECIDED = 0, 1, 2, 3

_entry = {"oneOf": [{"type": "number"},
                    {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_matrix = {"type": "array", "minItems": 1,
           "items": {"type": "array", "minItems": 1, "items": _entry}}
_matrix_or_poly = {"oneOf": [_matrix, {"type": "object", "required": ["poly"],
                                       "additionalProperties": False,
                                       "properties": {"poly": {"type": "array", "minItems": 1,
                                                               "items": _matrix}}}]}

SCHEMA = {
    "type": "object",
    "required": ["measure", "operator"],
    "properties": {
        "measure": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "atoms": {"type": "array", "items": {
                    "type": "object", "required": ["x", "mass"], "additionalProperties": False,
                    "properties": {"x": {"type": "number", "minimum": 0, "maximum": 1},
                                   "mass": {"type": "number", "exclusiveMinimum": 0}}}},
                "continuous": {
                    "type": "object", "required": ["density"], "additionalProperties": False,
                    "properties": {
                        "density": {"oneOf": [
                            {"const": "lebesgue"},
                            {"type": "object", "required": ["nodes", "weights"],
                             "additionalProperties": False,
                             "properties": {
                                 "nodes": {"type": "array", "minItems": 1,
                                           "items": {"type": "number", "minimum": 0, "maximum": 1}},
                                 "weights": {"type": "array", "minItems": 1,
                                             "items": {"type": "number", "exclusiveMinimum": 0}}}}]},
                        "n_nodes": {"type": "integer", "minimum": 4}}},
            },
        },
        "operator": {
            "type": "object",
            "required": ["dim_H", "rank"],
            "additionalProperties": False,
            "properties": {
                "dim_H": {"type": "integer", "minimum": 1},
                "rank": {"type": "integer", "minimum": 1},
                "commutativity": {"type": "boolean"},
                "atoms": {"type": "array", "items": {
                    "type": "object", "required": ["alpha", "c"], "additionalProperties": False,
                    "properties": {"alpha": _matrix, "c": _matrix}}},
                "continuous": {"type": "object", "required": ["alpha", "c"],
                               "additionalProperties": False,
                               "properties": {"alpha": _matrix_or_poly, "c": _matrix_or_poly}},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "z": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                 "minItems": 2, "maxItems": 2}},
                "zgrid": {"type": "array", "items": {"type": "number"}, "minItems": 6, "maxItems": 6},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "analyses": {"type": "array", "items": {
                    "enum": ["lrg", "utb", "c3", "carleson", "nu", "charfn", "oracle"]}},
            },
        },
    },
}


class DocumentError(DissimError):
    """The problem document is unreadable, malformed or inconsistent."""


# -- deterministic output -------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return "%.17g" % (x + 0.0)
    raise TypeError(type(x))


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with sorted keys and floats printed with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (complex, np.complexfloating)):
        return "[" + _fmt(obj.real) + ", " + _fmt(obj.imag) + "]"
    return _fmt(obj)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else ("%.17g" % (v + 0.0)) for v in row) + "\n")
    return buf.getvalue()


# -- document loading -----------------------------------------------------

def _mat(m, shape, where):
    rows = []
    for row in m:
        rows.append([complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row])
    if any(len(r) != len(rows[0]) for r in rows):
        raise DocumentError(f"{where}: ragged matrix")
    a = np.array(rows, complex)
    if a.shape != shape:
        raise DocumentError(f"{where}: expected shape {shape}, got {a.shape}")
    return a


def _fn(spec_entry, shape, where):
    if isinstance(spec_entry, dict):
        coeffs = [_mat(M, shape, f"{where}.poly[{k}]") for k, M in enumerate(spec_entry["poly"])]
    else:
        coeffs = [_mat(spec_entry, shape, where)]

    def f(x, coeffs=coeffs):
        out = np.zeros(shape, complex)
        for M in reversed(coeffs):
            out = out * x + M
        return out
    return f


def read_document(path):
    """Parse and schema-check a problem document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        msgs = ["/".join(str(p) for p in e.path) + ": " + e.message for e in errors]
        raise DocumentError("schema violation: " + "; ".join(msgs))
    return doc


def build_arrays(doc):
    """Measure plus raw node arrays ``(alpha, c)`` and evaluators, before validation."""
    md, od = doc["measure"], doc["operator"]
    n, r = od["dim_H"], od["rank"]
    atoms = [(a["x"], a["mass"]) for a in md.get("atoms", [])]
    op_atoms = od.get("atoms", [])
    if len(op_atoms) != len(atoms):
        raise DocumentError(f"measure has {len(atoms)} atom(s) but operator lists {len(op_atoms)}")
    order = np.argsort([a[0] for a in atoms], kind="stable")
    atoms = [atoms[i] for i in order]
    op_atoms = [op_atoms[i] for i in order]
    cont = md.get("continuous")
    try:
        if cont is None:
            m = Measure.atomic([a[0] for a in atoms], [a[1] for a in atoms])
        elif cont["density"] == "lebesgue":
            m = Measure.from_density("lebesgue", n_nodes=cont.get("n_nodes", 512), atoms=atoms)
        else:
            d = cont["density"]
            if len(d["nodes"]) != len(d["weights"]):
                raise DocumentError("continuous nodes and weights differ in length")
            m = Measure([a[0] for a in atoms], [a[1] for a in atoms], d["nodes"], d["weights"])
    except DocumentError:
        raise
    except DissimError as exc:
        raise DocumentError(f"measure: {exc}") from exc
    afn = cfn = None
    if m.has_continuous:
        if "continuous" not in od:
            raise DocumentError("operator.continuous is required when the measure has a continuous part")
        afn = _fn(od["continuous"]["alpha"], (n, n), "operator.continuous.alpha")
        cfn = _fn(od["continuous"]["c"], (n, r), "operator.continuous.c")
    A = np.zeros((m.n_nodes, n, n), complex)
    C = np.zeros((m.n_nodes, n, r), complex)
    for k, a in enumerate(op_atoms):
        i = m.atom_nodes[k]
        A[i] = _mat(a["alpha"], (n, n), f"operator.atoms[{order[k]}].alpha")
        C[i] = _mat(a["c"], (n, r), f"operator.atoms[{order[k]}].c")
    for i in m.cont_nodes:
        A[i] = afn(m.positions[i])
        C[i] = cfn(m.positions[i])
    return m, A, C, afn, cfn


def load_spec(doc) -> OperatorSpec:
    m, A, C, afn, cfn = build_arrays(doc)
    try:
        return OperatorSpec(m, A, C, doc["operator"].get("commutativity"), afn, cfn)
    except DissimError as exc:
        raise DocumentError(f"operator: {exc}") from exc


def _run(doc):
    return doc.get("run", {})


def _zlist(args, doc):
    if args.z:
        return np.array([_parse_z(s) for s in args.z])
    run = _run(doc)
    if "z" in run:
        return np.array([complex(a, b) for a, b in run["z"]])
    if args.zgrid or "zgrid" in run:
        return _grid(args, doc, None).points
    return np.array([2j])


def _parse_z(s):
    s = s.strip()
    if "," in s:
        a, b = s.split(",")
        return complex(float(a), float(b))
    return complex(s.replace("i", "j"))


def _grid(args, doc, spec):
    g = args.zgrid if args.zgrid else _run(doc).get("zgrid")
    if g is None:
        return ZGrid.for_spec(spec)
    if isinstance(g, str):
        g = [float(v) for v in g.split(",")]
    if len(g) != 6:
        raise DocumentError("--zgrid needs re_min,re_max,im_min,im_max,nx,ny")
    return ZGrid.explicit(g[0], g[1], g[2], g[3], int(g[4]), int(g[5]))


def _tol(args, doc):
    return args.tol if args.tol is not None else _run(doc).get("tol", DEFAULT_TOL)


# -- commands -------------------------------------------------------------

def cmd_validate(args):
    doc = read_document(args.path)
    m, A, C, _, _ = build_arrays(doc)
    herm = hermitian_defects(A)
    bad = [float(x) for x, d in zip(m.positions, herm)
           if d > 1e-12 * max(1.0, float(np.abs(A).max()))]
    tr = float(np.sum(np.sum(np.abs(C) ** 2, axis=(1, 2)) * m.masses))
    out = {"hermitian_defect": float(herm.max()) if herm.size else 0.0,
           "trace_integral": tr, "total_mass": m.total_mass, "nodes": m.n_nodes}
    problems = []
    if bad:
        problems.append(f"alpha is not Hermitian at node(s) {bad}")
    if not math.isfinite(tr):
        problems.append("trace of k is not integrable")
    if not bad:
        spec = OperatorSpec(m, A, C, None)
        out["commutativity_defect"] = commutativity_defect(spec)
        out["commuting"] = bool(spec.commutativity)
        if doc["operator"].get("commutativity") and not spec.commutativity:
            problems.append("commutativity declared but k(x,x) and alpha(x) do not commute")
    out["status"] = "ok" if not problems else "invalid"
    out["problems"] = problems
    return dumps(out) + "\n", EXIT_OK if not problems else EXIT_USAGE


def _char_rows(spec, zs, tol):
    r = spec.r
    rows = []
    for z in zs:
        try:
            S = sweep(spec, [z], tol, inverse=False).values[0, 0]
            det = complex(np.linalg.det(S))
            row = [z.real, z.imag]
            for v in S.ravel():
                row += [v.real, v.imag]
            row += [det.real, det.imag, float(r - np.sum(np.abs(S) ** 2)), "ok"]
        except DissimError as exc:
            row = [z.real, z.imag] + ["nan"] * (2 * r * r + 3) + ["error: " + str(exc).replace(",", ";")]
        rows.append(row)
    return rows


def cmd_charfn(args):
    doc = read_document(args.path)
    spec = load_spec(doc)
    r = spec.r
    head = ["re_z", "im_z"]
    for a in range(r):
        for b in range(r):
            head += [f"re_S{a}{b}", f"im_S{a}{b}"]
    head += ["re_det", "im_det", "trace_defect", "status"]
    return _csv(head, _char_rows(spec, _zlist(args, doc), _tol(args, doc))), EXIT_OK


def cmd_det(args):
    doc = read_document(args.path)
    spec = load_spec(doc)
    tol = _tol(args, doc)
    rows = []
    for z in _zlist(args, doc):
        try:
            S = sweep(spec, [z], tol, inverse=False).values[0, 0]
            det = complex(np.linalg.det(S))
            row = [z.real, z.imag, det.real, det.imag, abs(det), float(spec.r - np.sum(np.abs(S) ** 2))]
            try:
                f = det_char_fn(spec, z)
                row += [f.real, f.imag, "ok"]
            except UnsupportedFormError:
                row += ["nan", "nan", "ok; product form unsupported"]
        except DissimError as exc:
            row = [z.real, z.imag] + ["nan"] * 6 + ["error: " + str(exc).replace(",", ";")]
        rows.append(row)
    head = ["re_z", "im_z", "re_det", "im_det", "abs_det", "trace_defect",
            "re_det_formula", "im_det_formula", "status"]
    return _csv(head, rows), EXIT_OK


def _verdict_exit(rep, spec):
    v = rep.verdict_2_6 if spec.r == 1 else rep.verdict_2_5
    return {"holds": EXIT_OK, "fails": EXIT_FAIL}.get(v.status, EXIT_UNDECIDED)


def _report_dict(rep):
    out = {}
    for k, v in rep.__dict__.items():
        if k.startswith("verdict"):
            out[k] = {"status": v.status, "reasons": list(v.reasons), "checks": v.checks}
        else:
            out[k] = v
    return out


def cmd_criteria(args):
    doc = read_document(args.path)
    spec = load_spec(doc)
    grid = _grid(args, doc, spec)
    rep = compute_report(spec, grid, tol=_tol(args, doc), analyses=_run(doc).get("analyses"))
    return dumps(_report_dict(rep)) + "\n", _verdict_exit(rep, spec)


def _oracle(spec, zs, tol):
    dS = dD = dR = 0.0
    rng = np.random.default_rng(0)
    h = rng.normal(size=(spec.measure.n_nodes, spec.n)) + 1j * rng.normal(size=(spec.measure.n_nodes, spec.n))
    Ss = char_fn_batch(spec, zs, tol)
    for S, z in zip(Ss, zs):
        D = direct_char_fn(spec, z)
        dS = max(dS, float(np.abs(S - D).max()))
        dD = max(dD, abs(np.linalg.det(S) - np.linalg.det(D)))
        f = resolvent_apply(spec, z, h)
        g = direct_resolvent(spec, z, h)
        dR = max(dR, float(np.linalg.norm(f - g) / np.linalg.norm(g)))
    return {"max_abs_S": dS, "max_abs_det": float(dD), "max_rel_resolvent": dR, "n_z": len(zs)}


def cmd_oracle(args):
    doc = read_document(args.path)
    spec = load_spec(doc)
    if not spec.is_atomic:
        raise DocumentError("the oracle needs a purely atomic measure")
    zs = _zlist(args, doc) if (args.z or args.zgrid or "z" in _run(doc) or "zgrid" in _run(doc)) \
        else ZGrid.for_spec(spec, 8, 8).points
    return dumps(_oracle(spec, zs, _tol(args, doc))) + "\n", EXIT_OK


def cmd_report(args):
    doc = read_document(args.path)
    spec = load_spec(doc)
    tol = _tol(args, doc)
    analyses = _run(doc).get("analyses")
    out = {"dim_H": spec.n, "rank": spec.r, "nodes": spec.measure.n_nodes,
           "total_mass": spec.measure.total_mass, "commuting": bool(spec.commutativity),
           "kernel_mass": kernel_mass(spec)}
    zs = _zlist(args, doc)
    if analyses is None or "charfn" in analyses:
        Ss = char_fn_batch(spec, zs, tol)
        out["charfn"] = [{"z": complex(z), "det": complex(np.linalg.det(S)),
                          "trace_defect": float(spec.r - np.sum(np.abs(S) ** 2))}
                         for S, z in zip(Ss, zs)]
    if (analyses is None or "oracle" in analyses) and spec.is_atomic:
        out["oracle"] = _oracle(spec, zs, tol)
    crit = None if analyses is None else [a for a in analyses if a not in ("charfn", "oracle")]
    code = EXIT_OK
    if crit is None or crit:
        rep = compute_report(spec, _grid(args, doc, spec), tol=tol, analyses=crit)
        out["criteria"] = _report_dict(rep)
        code = _verdict_exit(rep, spec)
    return dumps(out) + "\n", code


COMMANDS = {"validate": cmd_validate, "charfn": cmd_charfn, "det": cmd_det,
            "criteria": cmd_criteria, "oracle": cmd_oracle, "report": cmd_report}


def build_parser():
    p = argparse.ArgumentParser(prog="dissim", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        s = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        s.add_argument("path", help="problem document (JSON)")
        s.add_argument("--zgrid", help="re_min,re_max,im_min,im_max,nx,ny")
        s.add_argument("--z", action="append", help="spectral parameter 're,im' (repeatable)")
        s.add_argument("--tol", type=float, default=None, help=f"solver tolerance (default {DEFAULT_TOL:g})")
        s.add_argument("--out", help="write output to this file instead of stdout")
    return p


def _join_values(argv):
    """Attach values such as ``-2,2,...`` to their flag so they are not read as options."""
    out, it = [], iter(argv)
    for a in it:
        if a in ("--zgrid", "--z"):
            v = next(it, None)
            out.append(a if v is None else f"{a}={v}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_values(argv))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        text, code = COMMANDS[args.command](args)
    except (DissimError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
