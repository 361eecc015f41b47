"""Conditions for models whose parameters enter only through the inputs and outputs.

On ``Q = [0, 1]^2`` a model of the form

    H(s, q) = H11(s) + q1 H12(s) + q2 H21(s) + q1 q2 H22(s)

is described by the auxiliary block transfer function
``AH(s) = [[H11, H12], [H21, H22]]`` through
``H(s, q) = [I, q2 I] AH(s) [I; q1 I]``. The ROM is
``Hr(s, q) = (C1 + q2 C2)(sI - A)^{-1}(B1 + q1 B2)`` with diagonal ``A``.
Integrating the quadrature-form conditions against the monomials turns them
into weighted bitangential Hermite conditions on ``AH``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import HypothesisFailure, Instability, StructureError
from ..model import PoleResidueModel
from .general import mode_is_degenerate
from .report import ConditionReport, ReportList

_GRAM = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])

# monomial exponents -> block (row, column) of AH
_BLOCK_OF = {(0, 0): (0, 0), (1, 0): (0, 1), (0, 1): (1, 0), (1, 1): (1, 1)}


def moment_weights(ni: int, no: int):
    """Moment matrices ``int_0^1 [1; q][1, q] dq (x) I`` for inputs and outputs."""
    return np.kron(_GRAM, np.eye(ni)), np.kron(_GRAM, np.eye(no))


@dataclass(frozen=True)
class AuxTransfer:
    """Pole-residue form of the ``2 no x 2 ni`` auxiliary block transfer function."""

    poles: np.ndarray        # (m,)
    residues: np.ndarray     # (m, 2 no, 2 ni)
    ni: int
    no: int

    def __call__(self, s) -> np.ndarray:
        return np.einsum("m,moi->oi", 1.0 / (s - self.poles), self.residues)

    def ds(self, s) -> np.ndarray:
        return np.einsum("m,moi->oi", -1.0 / (s - self.poles) ** 2, self.residues)

    def _left(self, q2):
        return np.hstack([np.eye(self.no), q2 * np.eye(self.no)])

    def _right(self, q1):
        return np.vstack([np.eye(self.ni), q1 * np.eye(self.ni)])

    def recombine(self, s, q1, q2, deriv=None) -> np.ndarray:
        """``H(s, q1, q2)`` or one of its partials (``"s"``, ``"q1"``, ``"q2"``), any complex q."""
        M = self.ds(s) if deriv == "s" else self(s)
        left = np.hstack([np.zeros((self.no, self.no)), np.eye(self.no)]) if deriv == "q2" \
            else self._left(q2)
        right = np.vstack([np.zeros((self.ni, self.ni)), np.eye(self.ni)]) if deriv == "q1" \
            else self._right(q1)
        return left @ M @ right

    def __sub__(self, other: "AuxTransfer") -> "AuxTransfer":
        return AuxTransfer(np.concatenate([self.poles, other.poles]),
                           np.concatenate([self.residues, -other.residues]), self.ni, self.no)


def _block_residue(mode, ni, no):
    R = np.zeros((2 * no, 2 * ni), dtype=complex)
    for fn, mat in mode.residue_expansion():
        (_, exps), = fn.terms
        if exps not in _BLOCK_OF:
            raise StructureError(f"residue term with exponents {exps} is not bilinear in (q1, q2)")
        i, j = _BLOCK_OF[exps]
        R[i * no:(i + 1) * no, j * ni:(j + 1) * ni] += mat
    return R


def _require_constant_poles(model):
    if model.np != 2:
        raise StructureError("input/output form needs exactly two parameters")
    if any(np.any(m.lambda_lin != 0) for m in model.modes):
        raise StructureError("input/output form needs parameter-independent poles")


def build_aux_tf(model: PoleResidueModel) -> AuxTransfer:
    """Auxiliary transfer function of a two-parameter model with constant poles."""
    _require_constant_poles(model)
    poles = np.array([m.lambda0 for m in model.modes], dtype=complex)
    res = np.array([_block_residue(m, model.ni, model.no) for m in model.modes], dtype=complex)
    return AuxTransfer(poles, res.reshape(len(poles), 2 * model.no, 2 * model.ni), model.ni, model.no)


def aux_from_blocks(H11: PoleResidueModel, H12: PoleResidueModel, H21: PoleResidueModel,
                    H22: PoleResidueModel) -> AuxTransfer:
    """Auxiliary transfer function assembled from four parameter-free blocks."""
    ni, no = H11.ni, H11.no
    poles, res = [], []
    for (i, j), blk in zip(((0, 0), (0, 1), (1, 0), (1, 1)), (H11, H12, H21, H22)):
        if (blk.ni, blk.no) != (ni, no):
            raise StructureError("blocks must share input and output dimensions")
        for m in blk.modes:
            if np.any(m.lambda_lin != 0):
                raise StructureError("block poles must not depend on parameters")
            R = np.zeros((2 * no, 2 * ni), dtype=complex)
            for fn, mat in m.residue_expansion():
                if any(e for _, exps in fn.terms for e in exps):
                    raise StructureError("block residues must not depend on parameters")
                R[i * no:(i + 1) * no, j * ni:(j + 1) * ni] += mat
            poles.append(m.lambda0)
            res.append(R)
    return AuxTransfer(np.array(poles, dtype=complex),
                       np.array(res, dtype=complex).reshape(len(poles), 2 * no, 2 * ni), ni, no)


def io_vectors(mode):
    """``(b1, b2, c1, c2)`` with ``b(q) = b1 + q1 b2`` and ``c(q) = c1 + q2 c2``."""
    if not mode.rank_one:
        raise StructureError("ROM modes must be rank one")
    b = [np.zeros(mode.ni, dtype=complex), np.zeros(mode.ni, dtype=complex)]
    c = [np.zeros(mode.no, dtype=complex), np.zeros(mode.no, dtype=complex)]
    for (terms, slots, k) in ((mode.b_terms, b, 0), (mode.c_terms, c, 1)):
        for fn, v in terms:
            for coef, exps in fn.terms:
                if exps == (0, 0):
                    slots[0] = slots[0] + coef * v
                elif exps == tuple(int(i == k) for i in range(2)):
                    slots[1] = slots[1] + coef * v
                else:
                    raise StructureError(f"term with exponents {exps} violates the input/output form")
    return b[0], b[1], c[0], c[1]


def _as_aux(model):
    return model if isinstance(model, AuxTransfer) else build_aux_tf(model)


def weighted_aux_error(fom, rom) -> float:
    """Squared error ``int_Q ||H - Hr||^2 dq`` via the moment-weighted auxiliary inner product."""
    E = _as_aux(fom) - _as_aux(rom)
    if np.any(E.poles.real >= 0):
        raise Instability("auxiliary transfer function has an unstable pole")
    Wb, Wc = moment_weights(E.ni, E.no)
    R = E.residues
    # tr(R_j^* Wc R_i Wb) / (-p_i - conj p_j)
    Rh = np.conj(np.transpose(R, (0, 2, 1)))
    tr = np.einsum("jab,bc,icd,da->ij", Rh, Wc, R, Wb)
    den = -E.poles[:, None] - E.poles.conj()[None, :]
    val = np.sum(tr / den)
    if abs(val.imag) > 1e-10 * (1 + abs(val.real)):
        raise StructureError("weighted auxiliary error is not real")
    return float(val.real)


def _weighted_tangents(mode, ni, no):
    b1, b2, c1, c2 = io_vectors(mode)
    Wb, Wc = moment_weights(ni, no)
    return Wb @ np.concatenate([b1, b2]), Wc @ np.concatenate([c1, c2])


def check_io(fom, rom: PoleResidueModel) -> ReportList:
    """Weighted bitangential Hermite conditions on the auxiliary transfer functions."""
    _require_constant_poles(rom)
    AH, AHr = _as_aux(fom), build_aux_tf(rom)
    if np.any(AH.poles.real >= 0) or np.any(AHr.poles.real >= 0):
        raise Instability("input/output form requires stable poles")
    out = ReportList()
    for l, mode in enumerate(rom.modes):
        degenerate = mode_is_degenerate(mode)
        bb, cc = _weighted_tangents(mode, rom.ni, rom.no)
        sig = -np.conj(mode.lambda0)
        M, Mr, dM, dMr = AH(sig), AHr(sig), AH.ds(sig), AHr.ds(sig)
        out.append(ConditionReport.build("io_right", l, None, M @ bb, Mr @ bb, degenerate))
        out.append(ConditionReport.build("io_left", l, None, cc.conj() @ M, cc.conj() @ Mr, degenerate))
        out.append(ConditionReport.build("io_hermite", l, None, cc.conj() @ dM @ bb,
                                         cc.conj() @ dMr @ bb, degenerate))
    return out


def check_io_lines(fom, rom: PoleResidueModel, q_samples) -> ReportList:
    """Line interpolation conditions of a SISO input/output-form pair.

    For mode ``l`` with weighted tangents ``bb``, ``cc`` define
    ``q1* = bb[1] / bb[0]`` and ``q2* = conj(cc[1] / cc[0])``. Then ``H`` and
    ``dH/dq2`` match on the line ``q1 = q1*``, ``H`` and ``dH/dq1`` match on
    ``q2 = q2*`` and ``dH/ds`` matches at ``(q1*, q2*)``, all at
    ``s = -conj(lambda_l)`` and for every complex sample on the free coordinate.
    Modes with ``bb[0] = 0`` or ``cc[0] = 0`` are listed in ``skipped``.
    """
    if rom.ni != 1 or rom.no != 1:
        raise StructureError("line conditions are stated for SISO models")
    _require_constant_poles(rom)
    AH, AHr = _as_aux(fom), build_aux_tf(rom)
    out = ReportList()
    for l, mode in enumerate(rom.modes):
        bb, cc = _weighted_tangents(mode, 1, 1)
        if bb[0] == 0 or cc[0] == 0:
            out.skipped.append(HypothesisFailure(
                f"mode {l}: weighted tangent has a zero leading entry, line conditions skipped"))
            continue
        q1s, q2s = bb[1] / bb[0], np.conj(cc[1] / cc[0])
        sig = -np.conj(mode.lambda0)
        for k, t in enumerate(q_samples):
            for cid, q1, q2, d in (("line_value_q1", q1s, t, None), ("line_dq2", q1s, t, "q2"),
                                   ("line_value_q2", t, q2s, None), ("line_dq1", t, q2s, "q1")):
                out.append(ConditionReport.build(cid, l, k, AH.recombine(sig, q1, q2, d),
                                                 AHr.recombine(sig, q1, q2, d), sample=complex(t)))
        out.append(ConditionReport.build("line_hermite", l, None, AH.recombine(sig, q1s, q2s, "s"),
                                         AHr.recombine(sig, q1s, q2s, "s")))
    return out
