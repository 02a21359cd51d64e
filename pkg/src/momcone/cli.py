"""Command-line entry point: ``momcone PROBLEM.json [flags]``.

The problem file is JSON, validated against ``PROBLEM_SCHEMA`` before
anything is solved.  Polynomials are term lists
``[{"exponents": [2, 0], "coeff": 1.0}, ...]`` or, as a convenience,
strings such as ``"x1^2*x2 - 3"``.

Exit codes: 0 for a definitive verified verdict, 2 for inconclusive
results (or a certificate that failed re-verification), 1 for input
errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, apps, feascert
from .algebra import Poly, Support, Tms, basis, homogeneous_basis, parse_poly, riesz_pairing
from .errors import MomconeError, ProblemFileError
from .extraction import verify_measure
from .hierarchy import MomentLP, build_relaxation, verify_sos_witness
from .linopt import INFEASIBLE_KIND, OPTIMAL, solve_moment_lp, span_problem
from .membership import MEMBER, NOT_MEMBER, check_moment_membership, check_poly_membership
from .momkit import SemialgSet
from .options import Options
from .sdp import write_sdpa

TASKS = ["optimize", "feasible", "membership-moment", "membership-poly", "certify", "kfull",
         "cp-complete", "copositive-margin", "soep"]

_POLY = {
    "oneOf": [
        {"type": "string"},
        {"type": "array", "items": {
            "type": "object",
            "properties": {"exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                           "coeff": {"type": "number"}},
            "required": ["exponents", "coeff"],
            "additionalProperties": False}},
    ]
}
_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": ["number", "null"]}}}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "task": {"enum": TASKS},
        "n": {"type": "integer", "minimum": 1},
        "side": {"enum": ["moment", "dual"]},
        "support": {"oneOf": [
            {"type": "string", "pattern": "^(full|homogeneous):[0-9]+$"},
            {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
        ]},
        "K": {"oneOf": [
            {"type": "object",
             "properties": {"preset": {"enum": sorted(apps.PRESETS)}, "n": {"type": "integer", "minimum": 1}},
             "required": ["preset"], "additionalProperties": False},
            {"type": "object",
             "properties": {"h": {"type": "array", "items": _POLY}, "g": {"type": "array", "items": _POLY},
                            "ball_radius": {"type": "number", "exclusiveMinimum": 0}},
             "additionalProperties": False},
        ]},
        "c": _POLY,
        "f": _POLY,
        "a": {"type": "array", "items": _POLY},
        "b": {"type": "array", "items": {"type": "number"}},
        "y": {"type": "array", "items": {"type": "number"}},
        "matrix": _MATRIX,
        "objective": {"enum": ["MinTrace", "Feasibility"]},
        "B": _MATRIX,
        "directions": {"type": "array", "items": _MATRIX},
        "lin": {"type": "array", "items": _POLY},
        "ell": {"type": "array", "items": {"type": "number"}},
        "options": {
            "type": "object",
            "properties": {
                "max_order": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "tol_rank": {"type": "number", "exclusiveMinimum": 0},
                "tol_gap": {"type": "number", "exclusiveMinimum": 0},
                "tol_feas": {"type": "number", "exclusiveMinimum": 0},
                "ball_radius": {"type": "number", "exclusiveMinimum": 0},
                "deep_membership": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["task"],
    "additionalProperties": False,
}

_REQUIRED = {
    "optimize": ["n", "support", "K", "c", "a", "b"],
    "feasible": ["n", "K"],
    "membership-moment": ["n", "support", "K", "y"],
    "membership-poly": ["n", "K", "f"],
    "certify": ["n", "K", "a"],
    "kfull": ["n", "support", "K"],
    "cp-complete": ["matrix"],
    "copositive-margin": ["B", "directions", "ell"],
    "soep": ["n", "f"],
}


# ------------------------------------------------------------------ decoding

def _path(parts) -> str:
    return "/".join(str(p) for p in parts) or "<root>"


def validate(doc: dict, path: str | None = None) -> None:
    """Schema plus per-task required fields; raises ``ProblemFileError``."""
    v = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ProblemFileError(f"{_path(e.absolute_path)}: {e.message}", path)
    missing = [k for k in _REQUIRED[doc["task"]] if k not in doc]
    if missing:
        raise ProblemFileError(f"<root>: task {doc['task']!r} needs field(s) {', '.join(missing)}", path)


def _poly(spec, n: int, where: str) -> Poly:
    try:
        if isinstance(spec, str):
            return parse_poly(spec, n)
        return Poly.from_terms(n, spec)
    except (ValueError, MomconeError) as exc:
        raise ProblemFileError(f"{where}: {exc}") from None


def _support(spec, n: int) -> Support:
    if isinstance(spec, str):
        kind, d = spec.split(":")
        return basis(n, int(d)) if kind == "full" else homogeneous_basis(n, int(d))
    for i, alpha in enumerate(spec):
        if len(alpha) != n:
            raise ProblemFileError(f"support/{i}: exponent has length {len(alpha)}, expected {n}")
    return Support(n, spec)


def _set(spec, n: int) -> SemialgSet:
    if "preset" in spec:
        m = spec.get("n", n)
        if m != n:
            raise ProblemFileError(f"K/n: preset dimension {m} differs from n = {n}")
        return apps.PRESETS[spec["preset"]](n)
    h = [_poly(p, n, f"K/h/{i}") for i, p in enumerate(spec.get("h", []))]
    g = [_poly(p, n, f"K/g/{i}") for i, p in enumerate(spec.get("g", []))]
    return SemialgSet(n, h, g, ball_radius=spec.get("ball_radius"))


_APP_TASKS = ("cp-complete", "copositive-margin", "soep")


def _options(doc: dict, args) -> Options:
    o = dict(doc.get("options", {}))
    if doc.get("task") in _APP_TASKS:
        # the application drivers search for a measure by default
        o.setdefault("deep_membership", True)
    for key in ("max_order", "seed", "tol_rank", "tol_gap", "ball_radius"):
        val = getattr(args, key, None)
        if val is not None:
            o[key] = val
    if getattr(args, "deep_membership", False):
        o["deep_membership"] = True
    return Options(**o)


def _matrix(rows, where: str) -> list:
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            raise ProblemFileError(f"{where}/{i}: row has length {len(r)}, expected {n}")
    return rows


def load_problem(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc}", str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}", str(path)) from None
    if not isinstance(doc, dict):
        raise ProblemFileError("<root>: the problem must be a JSON object", str(path))
    validate(doc, str(path))
    return doc


# ------------------------------------------------------------------ serialization

def _clean(obj):
    """JSON-safe copy: numpy to lists, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (Tms,)):
        return {"support": [list(a) for a in obj.support.indices], "values": _clean(obj.values)}
    return obj


def _measure_json(mu):
    return None if mu is None else {"atoms": mu.atoms.tolist(), "weights": mu.weights.tolist()}


# ------------------------------------------------------------------ tasks

def _run_optimize(doc, opts, n):
    A = _support(doc["support"], n)
    K = _set(doc["K"], n)
    a = [_poly(p, n, f"a/{i}") for i, p in enumerate(doc["a"])]
    lp = MomentLP(A, a, np.asarray(doc["b"], dtype=float), _poly(doc["c"], n, "c"), K)
    out = solve_moment_lp(lp, opts)
    rep = out.to_json()
    ok = out.kind in (OPTIMAL, INFEASIBLE_KIND)
    if out.kind == OPTIMAL:
        mrep = verify_measure(out.measure, out.y_star, K, max(opts.tol_feas, 1e-9))
        rep["measure_verified"] = bool(mrep)
        ok &= bool(mrep)
        if out.witness is not None:
            rep["witness_residual"] = verify_sos_witness(lp.c_of(out.lambda_star), out.witness).residual
    elif out.kind == INFEASIBLE_KIND:
        good = out.witness is not None and feascert.verify_moment_certificate(
            out.lambda_star, a, lp.b, out.witness)
        rep["certificate_verified"] = good
        ok &= good
    return rep, ok, lp


def _cert_ok(cert: feascert.Certificate, a=None, b=None, c=None, K=None, tol=1e-6) -> bool:
    kind = cert.kind
    if kind == feascert.MOMENT_INFEASIBLE:
        return feascert.verify_moment_certificate(cert.lam, a, b, cert.sos_witness)
    if kind == feascert.DUAL_INFEASIBLE or kind == feascert.NOT_FULL:
        return bool(verify_measure(cert.measure, cert.y_witness, K, tol)) and \
            feascert.verify_dual_refutation(c, a, cert.y_witness, tol)
    if kind == feascert.FEASIBLE_POINT and cert.measure is not None:
        if not verify_measure(cert.measure, cert.y_witness, K, tol):
            return False
        return all(abs(riesz_pairing(p, cert.y_witness) - bi) <= tol * (1 + abs(bi)) for p, bi in zip(a, b))
    if kind in (feascert.FEASIBLE_POINT, feascert.KFULL_WITNESS) and cert.sos_witness is not None:
        target = c
        for li, p in zip(cert.lam, a):
            target = target - float(li) * p
        return bool(verify_sos_witness(target, cert.sos_witness))
    return False


def _run_feasible(doc, opts, n):
    K = _set(doc["K"], n)
    side = doc.get("side", "moment")
    a = [_poly(p, n, f"a/{i}") for i, p in enumerate(doc.get("a", []))]
    if side == "moment":
        for k in ("support", "a", "b"):
            if k not in doc:
                raise ProblemFileError(f"<root>: moment feasibility needs field {k!r}")
        A = _support(doc["support"], n)
        b = np.asarray(doc["b"], dtype=float)
        c = _poly(doc["c"], n, "c") if "c" in doc else None
        cert = feascert.find_feasible_moment(a, b, A, K, opts, c=c)
        ok = cert.definitive and _cert_ok(cert, a, b, K=K)
        A1 = feascert._with_zero(A)
        dump = MomentLP(A1, a, b, c if c is not None else feascert.positive_objective(A1), K)
    else:
        if "c" not in doc:
            raise ProblemFileError("<root>: dual feasibility needs field 'c'")
        c = _poly(doc["c"], n, "c")
        cert = feascert.find_feasible_dual(c, a, K, opts)
        ok = cert.definitive and _cert_ok(cert, a, None, c, K)
        dump = None
    return cert.to_json(), ok, dump


def _run_certify(doc, opts, n):
    K = _set(doc["K"], n)
    a = [_poly(p, n, f"a/{i}") for i, p in enumerate(doc["a"])]
    if doc.get("side", "moment") == "moment":
        if "b" not in doc:
            raise ProblemFileError("<root>: a moment certificate needs field 'b'")
        b = np.asarray(doc["b"], dtype=float)
        cert = feascert.certify_moment_infeasible(a, b, K, opts)
        ok = cert is not None and _cert_ok(cert, a, b, K=K)
    else:
        if "c" not in doc:
            raise ProblemFileError("<root>: a dual certificate needs field 'c'")
        c = _poly(doc["c"], n, "c")
        cert = feascert.certify_dual_infeasible(c, a, K, opts)
        ok = cert is not None and _cert_ok(cert, a, None, c, K)
    rep = cert.to_json() if cert is not None else {"kind": feascert.INCONCLUSIVE,
                                                  "message": "no certificate up to the maximum order"}
    return rep, ok, None


def _run_kfull(doc, opts, n):
    A = _support(doc["support"], n)
    K = _set(doc["K"], n)
    cert = feascert.k_fullness(A, K, opts)
    c = Poly.constant(n, -1.0)
    mons = [Poly.monomial(alpha, -1.0) for alpha in A.indices]
    ok = cert.definitive and _cert_ok(cert, mons, None, c, K)
    return cert.to_json(), ok, None


def _run_membership_moment(doc, opts, n):
    A = _support(doc["support"], n)
    if len(doc["y"]) != len(A):
        raise ProblemFileError(f"y: {len(doc['y'])} values for a support of size {len(A)}")
    K = _set(doc["K"], n)
    y = Tms(A, np.asarray(doc["y"], dtype=float))
    v = check_moment_membership(y, K, opts)
    rep = {"kind": v.kind, "order": v.order, "flat_order": v.flat_order, "measure": _measure_json(v.measure),
           "certificate": None if v.certificate is None else v.certificate.tolist(),
           "history": v.history, "message": v.message}
    ok = False
    if v.kind == MEMBER:
        ok = bool(verify_measure(v.measure, y, K, max(opts.tol_feas, 1e-9)))
    elif v.kind == NOT_MEMBER:
        mons = [Poly.monomial(alpha) for alpha in A.indices]
        target = Poly(n)
        for li, p in zip(v.certificate, mons):
            target = target + float(li) * p
        ok = bool(verify_sos_witness(target, v.witness)) and float(v.certificate @ y.values) < 0
    return rep, ok, None


def _run_membership_poly(doc, opts, n):
    K = _set(doc["K"], n)
    f = _poly(doc["f"], n, "f")
    v = check_poly_membership(f, K, opts)
    rep = {"kind": v.kind, "order": v.order, "f_k": v.f_k, "point": v.point, "value": v.value,
           "witness": None if v.witness is None else v.witness.to_json(), "history": v.history,
           "message": v.message}
    ok = False
    if v.kind == MEMBER and v.witness is None:
        ok = v.f_k == math.inf      # empty K
    elif v.kind == MEMBER:
        ok = bool(verify_sos_witness(f - Poly.constant(n, v.f_k), v.witness))
    elif v.kind == NOT_MEMBER:
        ok = f(v.point) < 0 and K.violation(v.point) <= 1e-6
    return rep, ok, None


def _run_cp(doc, opts, n_unused):
    rows = _matrix(doc["matrix"], "matrix")
    P = apps.PartialSymMatrix.from_rows(rows)
    objective = doc.get("objective", "MinTrace")
    res = apps.cp_completion(P, objective, opts)
    rep = res.outcome.to_json()
    rep["matrix"] = res.matrix
    rep["factors"] = res.factors
    ok = res.kind == INFEASIBLE_KIND
    if res.kind == OPTIMAL:
        rep["factorization_error"] = res.factorization_error()
        ok = res.factorization_error() <= 1e-6 and bool(np.all(res.factors >= -1e-8))
    return rep, ok, apps.cp_moment_lp(P, objective)


def _run_copositive(doc, opts, n_unused):
    B = np.asarray(_matrix(doc["B"], "B"), dtype=float)
    D = [np.asarray(_matrix(m, f"directions/{i}"), dtype=float) for i, m in enumerate(doc["directions"])]
    out = apps.copositivity_margin(B, D, doc["ell"], opts)
    ok = out.kind in (OPTIMAL, INFEASIBLE_KIND)
    if out.kind == OPTIMAL:
        ok = bool(verify_measure(out.measure, out.y_star, apps.simplex_set(B.shape[0]), max(opts.tol_feas, 1e-9)))
    return out.to_json(), ok, apps.copositivity_lp(B, D, doc["ell"])


def _run_soep(doc, opts, n):
    f = _poly(doc["f"], n, "f")
    d = f.degree
    try:
        F = apps.SoepForm.from_poly(f, d)
        lin = [apps.SoepForm.from_poly(_poly(p, n, f"lin/{i}"), d) for i, p in enumerate(doc.get("lin", []))]
    except (ValueError, MomconeError) as exc:
        raise ProblemFileError(f"f: {exc}") from None
    K = _set(doc["K"], n) if "K" in doc else apps.sphere_set(n)
    ell = doc.get("ell", [1.0] * len(lin))
    if len(ell) != len(lin):
        raise ProblemFileError(f"ell: {len(ell)} weights for {len(lin)} forms")
    res = apps.soep_check(F, lin, ell, opts, K)
    rep = res.outcome.to_json()
    rep["lam"] = res.lam
    rep["linear_forms"] = res.linear_forms
    rep["decomposition_residual"] = res.residual
    ok = res.kind == OPTIMAL and res.residual <= 1e-6
    lp = span_problem(F.to_tms(), [q.to_tms() for q in lin], ell, F.support, K).lp
    return rep, ok, lp


_DISPATCH = {
    "optimize": _run_optimize,
    "feasible": _run_feasible,
    "certify": _run_certify,
    "kfull": _run_kfull,
    "membership-moment": _run_membership_moment,
    "membership-poly": _run_membership_poly,
    "cp-complete": _run_cp,
    "copositive-margin": _run_copositive,
    "soep": _run_soep,
}


def run(doc: dict, opts: Options) -> tuple[dict, int, object]:
    """Solve one validated problem.

    Returns ``(report, exit_code, lp)`` where ``lp`` is the ``MomentLP``
    behind the task (``None`` for pure certificate searches).
    """
    n = doc.get("n", 0)
    rep, ok, dump = _DISPATCH[doc["task"]](doc, opts, n)
    rep = dict(rep)
    kind = rep.get("kind")
    definitive = kind not in (None, "Inconclusive", "OrderLimit")
    rep["verified"] = bool(ok)
    if definitive and not ok:
        rep["flag"] = "certificate failed re-verification"
    code = 0 if definitive and ok else 2
    return {"task": doc["task"], **rep}, code, dump


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momcone", description="Linear optimization over moment cones.")
    ap.add_argument("problem", help="JSON problem file")
    ap.add_argument("--max-order", type=int, dest="max_order")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--tol-rank", type=float, dest="tol_rank")
    ap.add_argument("--tol-gap", type=float, dest="tol_gap")
    ap.add_argument("--ball-radius", type=float, dest="ball_radius")
    ap.add_argument("--deep-membership", action="store_true", dest="deep_membership")
    ap.add_argument("--json-out", metavar="PATH", dest="json_out")
    ap.add_argument("--dump-sdp", metavar="PATH", dest="dump_sdp",
                    help="write the first relaxation in SDPA sparse format")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def _summary(rep: dict) -> str:
    lines = [f"task: {rep['task']}", f"verdict: {rep.get('kind')}"]
    for key in ("order", "c_min", "b_max", "gap_closed", "lambda", "lam", "f_k"):
        if rep.get(key) is not None:
            lines.append(f"{key}: {rep[key]}")
    hist = rep.get("history") or []
    if hist and "c_k" in hist[0]:
        lines.append("order  status        c_k              b_k              flat")
        for h in hist:
            ck = "" if h.get("c_k") is None else f"{h['c_k']:.9g}"
            bk = "" if h.get("b_k") is None else f"{h['b_k']:.9g}"
            lines.append(f"{h['k']:>5}  {h['status']:<12}  {ck:<15}  {bk:<15}  {h.get('flat')}")
    lines.append(f"verified: {rep.get('verified')}")
    if rep.get("message"):
        lines.append(f"note: {rep['message']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        doc = load_problem(args.problem)
        opts = _options(doc, args)
        rep, code, dump = run(doc, opts)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MomconeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.dump_sdp:
        if dump is None:
            print("warning: --dump-sdp needs a task with a moment problem", file=sys.stderr)
        else:
            write_sdpa(build_relaxation(dump, dump.min_order()), args.dump_sdp)
    rep["timing"] = {"seconds": round(time.perf_counter() - t0, 3)}
    text = json.dumps(_clean(rep), indent=2, sort_keys=True)
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")
    print(_summary(_clean(rep)))
    return code


if __name__ == "__main__":
    sys.exit(main())
