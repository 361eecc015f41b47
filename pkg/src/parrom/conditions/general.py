"""Quadrature form of the interpolatory optimality conditions for separable diagonal ROMs.

For every mode ``l`` with pole ``lambda_l(q)`` and interpolation point
``sigma_l(q) = -conj(lambda_l(q))`` the conditions read

    int gamma_k(q) H(sigma_l(q), q) b_l(q) dq          = same with Hr
    int beta_j(q) c_l(q)^* H(sigma_l(q), q) dq         = same with Hr
    int alpha_i(q) c_l(q)^* H'(sigma_l(q), q) b_l(q) dq = same with Hr

where ``alpha_i``, ``beta_j``, ``gamma_k`` are the scalar functions of the
separable ROM matrices A, B and C.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import PoleHit, StructureError
from ..model import POLE_HIT_RTOL, ParameterDomain, PoleResidueModel, require_stable
from ..paramfunc import ScalarParamFunction
from .report import ConditionReport, ReportList

MIN_CERTIFY_ORDER = 16


@dataclass(frozen=True)
class ConditionBasis:
    """Weight functions for the Hermite (``alpha``), left (``beta``) and right (``gamma``) conditions."""

    alpha: tuple
    beta: tuple
    gamma: tuple


def _unique(fns):
    out = []
    for fn in fns:
        if not fn.is_zero() and fn not in out:
            out.append(fn)
    return tuple(out)


def default_basis(rom: PoleResidueModel) -> ConditionBasis:
    """Basis read off the ROM: ``{1, q_k}`` for affine poles, the term functions of b and c."""
    np_ = rom.np
    alpha = [ScalarParamFunction.one(np_)]
    for k in range(np_):
        if any(m.lambda_lin[k] != 0 for m in rom.modes):
            alpha.append(ScalarParamFunction.coordinate(k, np_))
    beta = _unique(fn for m in rom.modes for fn, _ in m.b_terms)
    gamma = _unique(fn for m in rom.modes for fn, _ in m.c_terms)
    return ConditionBasis(tuple(alpha), beta, gamma)


def _resolvent_at(poles, residues, sig):
    """``H(sig_n, q_n)`` and ``dH/ds`` for node-wise poles ``(N, m)`` and residues."""
    gap = sig[:, None] - poles
    scale = 1 + np.abs(sig)[:, None] + np.abs(poles)
    if np.any(np.abs(gap) < POLE_HIT_RTOL * scale):
        raise PoleHit("interpolation point coincides with a pole at a quadrature node")
    inv = 1.0 / gap
    H = np.einsum("nm,nmoi->noi", inv, residues)
    dH = -np.einsum("nm,nmoi->noi", inv * inv, residues)
    return H, dH


def mode_is_degenerate(mode) -> bool:
    return all(not np.any(v) for _, v in mode.b_terms) or all(not np.any(v) for _, v in mode.c_terms)


def check_general(fom: PoleResidueModel, rom: PoleResidueModel, dom: ParameterDomain,
                  basis: ConditionBasis = None) -> ReportList:
    """Evaluate all quadrature-form conditions by tensor Gauss-Legendre quadrature."""
    if not rom.rank_one:
        raise StructureError("ROM residues must be rank one")
    if (fom.np, fom.ni, fom.no) != (rom.np, rom.ni, rom.no) or fom.np != dom.np:
        raise StructureError("FOM, ROM and domain dimensions differ")
    require_stable(fom, dom, "full model")
    require_stable(rom, dom, "reduced model")
    certified = dom.quad_order >= MIN_CERTIFY_ORDER
    if not certified:
        warnings.warn(f"quadrature order {dom.quad_order} < {MIN_CERTIFY_ORDER}: "
                      "residuals are reported but not certified", stacklevel=2)
    basis = basis or default_basis(rom)
    Q, w = dom.tensor_rule()
    pf, Rf = fom.poles(Q), fom.residues(Q)
    pr, Rr = rom.poles(Q), rom.residues(Q)
    wa = [w * fn(Q) for fn in basis.alpha]
    wb = [w * fn(Q) for fn in basis.beta]
    wg = [w * fn(Q) for fn in basis.gamma]
    out = ReportList()
    for l, mode in enumerate(rom.modes):
        degenerate = mode_is_degenerate(mode)
        sig = -pr[:, l].conj()
        H, dH = _resolvent_at(pf, Rf, sig)
        Hr, dHr = _resolvent_at(pr, Rr, sig)
        b, c = mode.b(Q), mode.c(Q)
        Hb, Hrb = np.einsum("noi,ni->no", H, b), np.einsum("noi,ni->no", Hr, b)
        cH, cHr = np.einsum("no,noi->ni", c.conj(), H), np.einsum("no,noi->ni", c.conj(), Hr)
        cdHb = np.einsum("no,noi,ni->n", c.conj(), dH, b)
        cdHrb = np.einsum("no,noi,ni->n", c.conj(), dHr, b)
        for k, wk in enumerate(wg):
            out.append(ConditionReport.build("general_right", l, k, wk @ Hb, wk @ Hrb,
                                             degenerate, certified))
        for j, wj in enumerate(wb):
            out.append(ConditionReport.build("general_left", l, j, wj @ cH, wj @ cHr,
                                             degenerate, certified))
        for i, wi in enumerate(wa):
            out.append(ConditionReport.build("general_hermite", l, i, wi @ cdHb, wi @ cdHrb,
                                             degenerate, certified))
    return out
