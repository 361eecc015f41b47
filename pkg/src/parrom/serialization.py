"""JSON model files and report emission.

Every file carries ``"schema": 1``. Complex numbers are ``[re, im]`` pairs;
real matrices may use plain numbers. Floats are written with 17 significant
digits and keys are sorted, so parsing and re-emitting is byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from .errors import StructureError
from .model import ParametricStateSpace, PoleResidueMode, PoleResidueModel
from .paramfunc import ScalarParamFunction

SCHEMA_VERSION = 1


class IoError(OSError):
    """Report or model file could not be written or read."""


# canonical JSON ------------------------------------------------------------

def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite float {x}")
        # "-0" would re-parse as the integer 0 and break byte-identical round trips
        out.append(format(x + 0.0, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k + 1 < len(items) else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            parts = []
            for v in obj:
                buf = []
                _emit(v, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for k, val in enumerate(obj):
            out.append(pad)
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k + 1 < len(obj) else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj, indent: int = 1) -> str:
    out: list = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


# numbers and arrays ----------------------------------------------------------

def complex_to_json(z):
    z = complex(z)
    return [z.real, z.imag]


def array_to_json(a):
    """Nested lists; complex entries as ``[re, im]``."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.astype(float).tolist()


def array_from_json(data, ndim: int) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.ndim == ndim + 1 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    if a.ndim == ndim:
        return a
    raise StructureError(f"expected a {ndim}-D real array or [re, im] pairs, got shape {a.shape}")


def _complex_from_json(data) -> complex:
    if isinstance(data, (int, float)):
        return complex(data)
    re, im = data
    return complex(re, im)


# models ------------------------------------------------------------------------

def _terms_to_json(terms, key):
    return [{"coeff_exponents": fn.to_json(), key: array_to_json(v)} for fn, v in terms]


def _terms_from_json(data, key, np_, ndim):
    return tuple((ScalarParamFunction.from_json(t["coeff_exponents"], np_),
                  array_from_json(t[key], ndim)) for t in data)


def model_to_json(model) -> dict:
    if isinstance(model, ParametricStateSpace):
        return {"schema": SCHEMA_VERSION, "np": model.np,
                **{name: _terms_to_json(getattr(model, name + "_terms"), "matrix")
                   for name in ("E", "A", "B", "C")}}
    if isinstance(model, PoleResidueModel):
        modes = []
        for m in model.modes:
            d = {"lambda0": complex_to_json(m.lambda0),
                 "lambda_lin": [complex_to_json(z) for z in m.lambda_lin]}
            if m.rank_one:
                d["b"] = _terms_to_json(m.b_terms, "vector")
                d["c"] = _terms_to_json(m.c_terms, "vector")
            else:
                d["residue"] = _terms_to_json(m.residue_terms, "matrix")
            modes.append(d)
        return {"schema": SCHEMA_VERSION, "np": model.np, "ni": model.ni, "no": model.no,
                "real": model.real, "modes": modes}
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_json(data: dict):
    """Parse either schema; returns a ParametricStateSpace or a PoleResidueModel."""
    if data.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise StructureError(f"unsupported schema version {data.get('schema')}")
    try:
        np_ = int(data["np"])
        if "modes" in data:
            modes = []
            for d in data["modes"]:
                lam0 = _complex_from_json(d["lambda0"])
                lin = np.array([_complex_from_json(z) for z in d["lambda_lin"]], dtype=complex)
                if "residue" in d:
                    modes.append(PoleResidueMode(lam0, lin, residue_terms=_terms_from_json(
                        d["residue"], "matrix", np_, 2)))
                else:
                    modes.append(PoleResidueMode(lam0, lin, _terms_from_json(d["b"], "vector", np_, 1),
                                                 _terms_from_json(d["c"], "vector", np_, 1)))
            return PoleResidueModel(np_, int(data["ni"]), int(data["no"]), tuple(modes),
                                    bool(data.get("real", False)))
        return ParametricStateSpace(np_, *(_terms_from_json(data[name], "matrix", np_, 2)
                                           for name in ("E", "A", "B", "C")))
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"malformed model JSON: {exc}") from exc


def save_model(model, path):
    try:
        with open(path, "w") as fh:
            fh.write(canonical_dumps(model_to_json(model)))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StructureError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_json(data)


# reports -------------------------------------------------------------------------

def report_to_json(r) -> dict:
    d = {"id": r.condition_id, "mode": r.mode, "index": r.index,
         "lhs": array_to_json(r.lhs), "rhs": array_to_json(r.rhs),
         "abs_err": r.abs_err, "rel_err": r.rel_err,
         "degenerate": r.degenerate, "certified": r.certified}
    if r.sample is not None:
        d["sample"] = complex_to_json(r.sample)
    return d


def result_to_json(result) -> dict:
    return {"objective_history": [float(v) for v in result.objective_history],
            "grad_inf_norm": result.grad_inf_norm, "iterations": result.iterations,
            "converged": result.converged, "message": result.message,
            "rom": model_to_json(result.rom)}


def format_table(reports) -> str:
    lines = [f"{'condition':<16}{'mode':>5}{'index':>6}  {'rel_err':>11}"]
    for r in reports:
        idx = "-" if r.index is None else str(r.index)
        flag = "  degenerate" if r.degenerate else ("  uncertified" if not r.certified else "")
        lines.append(f"{r.condition_id:<16}{r.mode:>5}{idx:>6}  {r.rel_err:.4e}{flag}")
    return "\n".join(lines) + "\n"


def format_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "mode", "index", "abs_err", "rel_err", "degenerate", "certified"])
    for r in reports:
        w.writerow([r.condition_id, r.mode, "" if r.index is None else r.index,
                    format(r.abs_err, ".17g"), format(r.rel_err, ".17g"),
                    int(r.degenerate), int(r.certified)])
    return buf.getvalue()


def render_report(reports, result=None, fmt: str = "json", extra: Optional[dict] = None) -> str:
    if fmt == "json":
        doc = {"schema": SCHEMA_VERSION, "conditions": [report_to_json(r) for r in reports]}
        if result is not None:
            doc.update(result_to_json(result))
        doc.update(extra or {})
        return canonical_dumps(doc)
    if fmt == "csv":
        return format_csv(reports)
    if fmt == "table":
        return format_table(reports)
    raise ValueError(f"unknown report format {fmt!r}")


def emit_report(reports, result=None, fmt: str = "json", path=None, extra: Optional[dict] = None):
    """Write a report to ``path`` (stdout when None)."""
    text = render_report(reports, result, fmt, extra)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
