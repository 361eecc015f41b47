"""Command-line front end: ``norm``, ``reduce``, ``check`` and ``bench``.

Exit codes: 0 success, 1 convergence or certification failure, 2 usage
error, 3 internal inconsistency (the closed-form and quadrature checkers
disagree).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .benchmarks import BENCHMARKS, BenchmarkSpec, get_benchmark
from .conditions import (LEGEND, check_dynamics, check_general, check_io, cross_check_dynamics,
                         cross_check_io, max_rel_err)
from .errors import InternalInconsistency, ParromError, StructureError, UsageError
from .model import ParameterDomain, ParametricStateSpace, state_space_to_pole_residue, truncate_modes
from .norms import h2l2_error
from .optimize import (Conj2x2, ObjectiveContext, OptimizerConfig, bfgs_minimize, layout_from_model,
                       random_start, real_coordinates)
from .serialization import canonical_dumps, emit_report, load_model, model_to_json, save_model

log = logging.getLogger("parrom")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INCONSISTENT = 0, 1, 2, 3
DEFAULT_TOL = 1e-6


@dataclass
class RunConfig:
    command: str
    fom_path: Optional[str] = None
    rom_path: Optional[str] = None
    order: Optional[int] = None
    domain: Optional[ParameterDomain] = None
    benchmark: Optional[str] = None
    optimizer: dict = field(default_factory=dict)
    config_path: Optional[str] = None
    output: Optional[str] = None
    fmt: str = "json"
    tol: float = DEFAULT_TOL
    quad_order: Optional[int] = None
    init: str = "truncate"
    seed: int = 0
    free_b: bool = False
    log_path: Optional[str] = None

    def optimizer_config(self, grad_tol: Optional[float] = None) -> OptimizerConfig:
        settings = {}
        if self.config_path:
            try:
                with open(self.config_path) as fh:
                    settings.update(json.load(fh))
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read optimizer config {self.config_path}: {exc}") from exc
        if grad_tol is not None:
            settings.setdefault("grad_tol", grad_tol)
        settings.update(self.optimizer)
        if self.quad_order is not None:
            settings["quad_order"] = self.quad_order
        try:
            return OptimizerConfig.from_dict(settings)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_domain(text: str, quad_order: Optional[int] = None) -> ParameterDomain:
    """``"a:b"`` per axis, comma-separated for boxes."""
    try:
        bounds = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
        if any(len(b) != 2 for b in bounds):
            raise ValueError
    except ValueError:
        raise UsageError(f"bad domain {text!r}; expected 'a:b' or 'a:b,c:d'") from None
    lo, hi = np.array([b[0] for b in bounds]), np.array([b[1] for b in bounds])
    if not np.all(lo < hi):
        raise UsageError(f"empty domain {text!r}: need a < b on every axis")
    return ParameterDomain(lo, hi, quad_order or 64)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a value >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="parrom", description="H2xL2-optimal reduction of parametric diagonal LTI models.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, need_domain=True):
        sp.add_argument("--output", "-o", help="output file (default: stdout)")
        sp.add_argument("--format", dest="fmt", choices=("json", "csv", "table"), default="json")
        sp.add_argument("--quad-order", type=_positive_int, help="Gauss-Legendre nodes per axis")
        if need_domain:
            sp.add_argument("--domain", required=True, help="parameter box, e.g. 1:100 or 0:1,0:1")

    sp = sub.add_parser("norm", help="H2xL2 norm of a model or error between two models")
    sp.add_argument("--fom", required=True, help="model JSON")
    sp.add_argument("--rom", help="second model; the error norm is reported")
    common(sp)

    sp = sub.add_parser("reduce", help="minimize the H2xL2 error over a structured diagonal ROM")
    sp.add_argument("--fom", required=True)
    sp.add_argument("--order", "-r", type=_positive_int, required=True)
    sp.add_argument("--init", choices=("truncate", "random"), default="truncate")
    sp.add_argument("--seed", type=int, default=0, help="seed for --init random")
    sp.add_argument("--free-b", action="store_true", help="optimize B as well as C")
    sp.add_argument("--config", dest="config_path", help="optimizer settings JSON")
    sp.add_argument("--grad-tol", type=float)
    sp.add_argument("--max-iter", type=_positive_int)
    sp.add_argument("--log", dest="log_path", help="CSV iterate log (iter, J, grad_norm, step)")
    common(sp)

    sp = sub.add_parser("check", help="evaluate the interpolatory optimality conditions")
    sp.add_argument("--fom", required=True)
    sp.add_argument("--rom", required=True)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common(sp)

    sp = sub.add_parser("bench", help="run a built-in benchmark end to end")
    sp.add_argument("name", choices=sorted(BENCHMARKS))
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--config", dest="config_path")
    sp.add_argument("--grad-tol", type=float)
    sp.add_argument("--max-iter", type=_positive_int)
    sp.add_argument("--log", dest="log_path")
    common(sp, need_domain=False)
    return p


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(list(argv))
    if ns.command is None:
        raise UsageError("parrom: a command is required (norm, reduce, check, bench)")
    cfg = RunConfig(ns.command, output=ns.output, fmt=ns.fmt, quad_order=ns.quad_order)
    for name in ("tol", "seed", "init", "free_b", "config_path", "log_path"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    for name in ("grad_tol", "max_iter"):
        if getattr(ns, name, None) is not None:
            cfg.optimizer[name] = getattr(ns, name)
    if ns.command == "bench":
        cfg.benchmark = ns.name
        return cfg
    cfg.fom_path = ns.fom
    cfg.rom_path = getattr(ns, "rom", None)
    cfg.order = getattr(ns, "order", None)
    for path in (cfg.fom_path, cfg.rom_path, cfg.config_path):
        if path is not None and not os.path.isfile(path):
            raise UsageError(f"file not found: {path}")
    cfg.domain = parse_domain(ns.domain, ns.quad_order)
    return cfg


def _pole_residue(model, dom):
    if isinstance(model, ParametricStateSpace):
        return state_space_to_pole_residue(model, dom)
    return model


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def run_norm(cfg: RunConfig) -> int:
    fom = _pole_residue(load_model(cfg.fom_path), cfg.domain)
    if cfg.rom_path:
        rom = _pole_residue(load_model(cfg.rom_path), cfg.domain)
    else:
        rom = fom.with_modes(())
    bd = h2l2_error(fom, rom, cfg.domain)
    doc = {"schema": 1, **bd.to_json(), "norm": float(np.sqrt(max(bd.total_sq, 0.0)))}
    _write(canonical_dumps(doc), cfg.output)
    return EXIT_OK


def run_reduce(cfg: RunConfig) -> int:
    opt = cfg.optimizer_config()
    dom = cfg.domain.with_order(opt.quad_order)
    fom = _pole_residue(load_model(cfg.fom_path), dom)
    template = truncate_modes(fom, cfg.order)
    layout = layout_from_model(template, free_b=cfg.free_b)
    ctx = ObjectiveContext(fom, layout, template, dom)
    x0 = ctx.x0() if cfg.init == "truncate" else random_start(ctx, cfg.seed)
    result = bfgs_minimize(x0, ctx, opt)
    if cfg.log_path:
        result.write_csv(cfg.log_path)
    log.info("reduce: %s after %d iterations, J=%.6e, |g|=%.3e", result.message,
             result.iterations, result.objective_history[-1], result.grad_inf_norm)
    if cfg.output and cfg.output != "-":
        save_model(result.rom, cfg.output)
    else:
        _write(canonical_dumps(model_to_json(result.rom)), None)
    return EXIT_OK if result.converged else EXIT_FAIL


def _checks_for(fom, rom, dom):
    """Reports of every applicable checker plus the matching cross-check."""
    reports = list(check_general(fom, rom, dom))
    cross = None
    if rom.np == 1:
        try:
            reports += check_dynamics(fom, rom, float(dom.lo[0]), float(dom.hi[0]))
            cross = cross_check_dynamics(fom, rom, dom)
        except StructureError as exc:
            log.info("modified-function checker not applicable: %s", exc)
    elif rom.np == 2 and np.all(dom.lo == 0) and np.all(dom.hi == 1):
        try:
            reports += check_io(fom, rom)
            cross = cross_check_io(fom, rom, dom)
        except StructureError as exc:
            log.info("auxiliary-form checker not applicable: %s", exc)
    return reports, cross


def run_check(cfg: RunConfig) -> int:
    fom = _pole_residue(load_model(cfg.fom_path), cfg.domain)
    rom = _pole_residue(load_model(cfg.rom_path), cfg.domain)
    reports, cross = _checks_for(fom, rom, cfg.domain)
    extra = {"legend": LEGEND, "tolerance": cfg.tol}
    if cross is not None:
        extra["cross_check"] = {"max_rel_diff": cross.max_rel_diff, "tol": cross.tol}
    emit_report(reports, None, cfg.fmt, cfg.output, extra if cfg.fmt == "json" else None)
    if cross is not None:
        cross.raise_if_failed()
    return EXIT_OK if max_rel_err(reports) <= cfg.tol else EXIT_FAIL


def block_summary(rom, layout):
    """Real block coordinates of a ROM, one dict per block."""
    coords = real_coordinates(rom, layout)
    out, pos = [], 0
    for blk in layout.blocks:
        if isinstance(blk, Conj2x2):
            n = 2 + 2 * layout.np
            v = coords[pos:pos + n]
            out.append({"kind": "pair", "sigma": v[:1 + layout.np].tolist(),
                        "omega": v[1 + layout.np:].tolist()})
        else:
            n = 1 + layout.np
            out.append({"kind": "real", "lambda": coords[pos:pos + n].tolist()})
        pos += n
    return out


def _representatives(rom):
    """Index of one mode per conjugate pair or real pole."""
    reps, k = [], 0
    while k < rom.order:
        reps.append(k)
        k += 1 if rom.modes[k].is_real() else 2
    return reps


def run_bench(spec: BenchmarkSpec, cfg: RunConfig) -> int:
    opt = cfg.optimizer_config(grad_tol=spec.grad_tol)
    spec = spec.with_order(opt.quad_order)
    dom = spec.domain
    fom = spec.fom
    template = spec.initial_rom()
    layout = spec.layout()
    ctx = ObjectiveContext(fom, layout, template, dom)
    result = bfgs_minimize(ctx.x0(), ctx, opt)
    if cfg.log_path:
        result.write_csv(cfg.log_path)
    rom = result.rom
    reports, cross = _checks_for(fom, rom, dom)
    reps = _representatives(rom)
    summary = [{"id": r.condition_id, "mode": r.mode, "rel_err": r.rel_err}
               for r in reports if r.condition_id.startswith("dyn_") and r.mode in reps]
    extra = {"benchmark": spec.name, "tolerance": cfg.tol, "legend": LEGEND,
             "blocks": block_summary(rom, layout), "pair_summary": summary,
             "cross_check": {"max_rel_diff": cross.max_rel_diff, "tol": cross.tol}}
    emit_report(reports, result, cfg.fmt, cfg.output, extra if cfg.fmt == "json" else None)
    cross.raise_if_failed()
    if not result.converged:
        log.error("%s: optimizer did not converge (%s, |g|=%.3e)", spec.name, result.message,
                  result.grad_inf_norm)
        return EXIT_FAIL
    worst = max_rel_err(reports)
    if worst > cfg.tol:
        log.error("%s: largest relative residual %.3e exceeds %.1e", spec.name, worst, cfg.tol)
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PARROM_LOGLEVEL", "WARNING"),
                        format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
        if cfg.command == "bench":
            return run_bench(get_benchmark(cfg.benchmark), cfg)
        return {"norm": run_norm, "reduce": run_reduce, "check": run_check}[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InternalInconsistency as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except StructureError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParromError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
