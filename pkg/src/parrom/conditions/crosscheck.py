"""Agreement between the quadrature checker and the closed-form checkers.

For the one-parameter dynamics form with basis ``alpha in {1, q}``,
``beta = gamma = {1}``, line integration along ``s(q) = -conj(lambda(q))`` gives

    int H(s(q), q) dq     = G
    int H'(s(q), q) dq    = dG/ds_a + dG/ds_b
    int q H'(s(q), q) dq  = a dG/ds_a + b dG/ds_b

so both checkers must produce the same numbers on both sides. For the
input/output form the stacked quadrature values equal the moment-weighted
auxiliary values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InternalInconsistency
from ..model import ParameterDomain, PoleResidueModel
from ..paramfunc import ScalarParamFunction
from .dynamics import check_dynamics, eval_G, interpolation_points
from .general import ConditionBasis, check_general
from .io import _as_aux, _weighted_tangents, build_aux_tf, moment_weights

CROSS_TOL = 1e-8


@dataclass
class CrossCheckResult:
    max_rel_diff: float
    tol: float
    pairs: list = field(default_factory=list)   # (label, mode, rel_diff)

    @property
    def ok(self) -> bool:
        return self.max_rel_diff <= self.tol

    def raise_if_failed(self):
        if not self.ok:
            worst = max(self.pairs, key=lambda p: p[2])
            raise InternalInconsistency(
                f"checker disagreement {self.max_rel_diff:.3e} > {self.tol:.1e} "
                f"({worst[0]}, mode {worst[1]})")


def _rel(x, y):
    x, y = np.ravel(x), np.ravel(y)
    return float(np.linalg.norm(x - y) / max(np.linalg.norm(x), np.linalg.norm(y), 1e-300))


def _finish(pairs, tol):
    return CrossCheckResult(max((p[2] for p in pairs), default=0.0), tol, pairs)


def cross_check_dynamics(fom: PoleResidueModel, rom: PoleResidueModel, dom: ParameterDomain,
                         tol: float = CROSS_TOL) -> CrossCheckResult:
    """Compare every LHS and RHS of the quadrature and modified-function checkers."""
    a, b = float(dom.lo[0]), float(dom.hi[0])
    one, q = ScalarParamFunction.one(1), ScalarParamFunction.coordinate(0, 1)
    quad = check_general(fom, rom, dom, ConditionBasis((one, q), (one,), (one,)))
    closed = check_dynamics(fom, rom, a, b)
    by_key = {(r.condition_id, r.mode, r.index): r for r in quad}
    by_mode = {(r.condition_id, r.mode): r for r in closed}
    pairs = []
    for l, mode in enumerate(rom.modes):
        sa, sb = interpolation_points(mode, a, b)
        bv, cv = mode.b(np.array([a])), mode.c(np.array([a]))
        herm = {}
        for side, model in (("lhs", fom), ("rhs", rom)):
            _, Ga, Gb = eval_G(model, sa, sb, a, b)
            herm[side] = (cv.conj() @ (Ga + Gb) @ bv, cv.conj() @ (a * Ga + b * Gb) @ bv)
        for label, qr, ref in (
                ("right", by_key[("general_right", l, 0)], (by_mode[("dyn_right", l)].lhs,
                                                             by_mode[("dyn_right", l)].rhs)),
                ("left", by_key[("general_left", l, 0)], (by_mode[("dyn_left", l)].lhs,
                                                           by_mode[("dyn_left", l)].rhs)),
                ("hermite_1", by_key[("general_hermite", l, 0)], (herm["lhs"][0], herm["rhs"][0])),
                ("hermite_q", by_key[("general_hermite", l, 1)], (herm["lhs"][1], herm["rhs"][1]))):
            pairs.append((label + "_lhs", l, _rel(qr.lhs, ref[0])))
            pairs.append((label + "_rhs", l, _rel(qr.rhs, ref[1])))
    return _finish(pairs, tol)


def cross_check_io(fom, rom: PoleResidueModel, dom: ParameterDomain = None,
                   tol: float = CROSS_TOL) -> CrossCheckResult:
    """Compare the quadrature checker on ``[0, 1]^2`` with the auxiliary-form values.

    ``fom`` must be a pole-residue model here since quadrature needs ``H(s, q)``.
    """
    dom = dom or ParameterDomain(np.zeros(2), np.ones(2))
    one = ScalarParamFunction.one(2)
    q1, q2 = ScalarParamFunction.coordinate(0, 2), ScalarParamFunction.coordinate(1, 2)
    quad = check_general(fom, rom, dom, ConditionBasis((one,), (one, q1), (one, q2)))
    by_key = {(r.condition_id, r.mode, r.index): r for r in quad}
    AH, AHr = _as_aux(fom), build_aux_tf(rom)
    Wb, Wc = moment_weights(rom.ni, rom.no)
    no, ni = rom.no, rom.ni
    pairs = []
    for l, mode in enumerate(rom.modes):
        bb, cc = _weighted_tangents(mode, ni, no)
        sig = -np.conj(mode.lambda0)
        for side, M, dM, attr in (("lhs", AH(sig), AH.ds(sig), "lhs"), ("rhs", AHr(sig), AHr.ds(sig), "rhs")):
            right = Wc @ (M @ bb)
            left = (cc.conj() @ M) @ Wb
            quad_right = np.concatenate([getattr(by_key[("general_right", l, k)], attr) for k in (0, 1)])
            quad_left = np.concatenate([getattr(by_key[("general_left", l, j)], attr) for j in (0, 1)])
            quad_herm = getattr(by_key[("general_hermite", l, 0)], attr)
            pairs.append(("right_" + side, l, _rel(quad_right, right)))
            pairs.append(("left_" + side, l, _rel(quad_left, left)))
            pairs.append(("hermite_" + side, l, _rel(quad_herm, cc.conj() @ dM @ bb)))
    return _finish(pairs, tol)
