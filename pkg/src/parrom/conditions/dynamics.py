"""Closed-form conditions for one parameter entering only the dynamics.

On ``Q = [a, b]`` with affine poles and constant residues the parameter
integrals of the quadrature-form conditions collapse onto the logarithmic
kernel

    f(s_a, s_b) = (b - a) / D * Log((s_b - sigma_b) / (s_a - sigma_a)),
    D = (s_b - sigma_b) - (s_a - sigma_a),

which is the integral of ``1 / (s(q) - sigma(q))`` along the straight lines
from ``s_a`` to ``s_b`` and ``sigma_a`` to ``sigma_b``. The modified functions
``G = sum_i f_{nu_i(a), nu_i(b)} Phi_i`` and ``Gr`` (same for the ROM) must
then interpolate bitangentially, with Hermite conditions in both arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BranchDomain, StructureError
from ..model import PoleResidueModel, require_stable
from ..model import ParameterDomain
from .general import mode_is_degenerate
from .report import ConditionReport, ReportList

# |rho| below this uses the power series of log(1 + rho) / rho
SERIES_RADIUS = 0.1
_N_SERIES = 40
_K = np.arange(_N_SERIES)
_PHI_COEF = (-1.0) ** _K / (_K + 1.0)                     # log(1+r)/r = sum c_k r^k
_DPHI_COEF = (_K[1:] * (-1.0) ** _K[1:]) / (_K[1:] + 1.0)  # derivative, powers r^(k-1)


@dataclass(frozen=True)
class LogKernelPoint:
    """Arguments of the kernel; both shifted arguments must lie in the open right half-plane."""

    s_a: complex
    s_b: complex
    sigma_a: complex
    sigma_b: complex
    a: float
    b: float

    def __post_init__(self):
        xa, xb = self.s_a - self.sigma_a, self.s_b - self.sigma_b
        if not (xa.real > 0 and xb.real > 0):
            raise BranchDomain(f"kernel arguments must have positive real part, got {xa} and {xb}")
        if not self.a < self.b:
            raise BranchDomain(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def shifted(self):
        return complex(self.s_a - self.sigma_a), complex(self.s_b - self.sigma_b)


def _series(rho):
    powers = rho ** _K
    return np.dot(_PHI_COEF, powers), np.dot(_DPHI_COEF, powers[:-1])


def f_kernel(pt: LogKernelPoint) -> complex:
    xa, xb = pt.shifted
    d = xb - xa
    rho = d / xa
    if abs(rho) < SERIES_RADIUS:
        phi, _ = _series(rho)
        return complex((pt.b - pt.a) * phi / xa)
    return complex((pt.b - pt.a) / d * np.log(xb / xa))


def f_kernel_partials(pt: LogKernelPoint):
    """``(df/ds_a, df/ds_b)``."""
    xa, xb = pt.shifted
    d = xb - xa
    rho = d / xa
    w = pt.b - pt.a
    if abs(rho) < SERIES_RADIUS:
        phi, dphi = _series(rho)
        return complex(-w * (phi + (1 + rho) * dphi) / xa ** 2), complex(w * dphi / xa ** 2)
    log = np.log(xb / xa)
    return complex(w * (log / d ** 2 - 1 / (xa * d))), complex(w * (1 / (xb * d) - log / d ** 2))


def _dyn_modes(model: PoleResidueModel):
    """Per mode ``(lambda0, lambda1, constant residue)``."""
    if model.np != 1:
        raise StructureError("dynamics form needs exactly one parameter")
    out = []
    for m in model.modes:
        R = np.zeros((model.no, model.ni), dtype=complex)
        for fn, mat in m.residue_expansion():
            (_, exps), = fn.terms
            if exps != (0,):
                raise StructureError("dynamics form needs parameter-independent residues")
            R = R + mat
        out.append((m.lambda0, complex(m.lambda_lin[0]), R))
    return out


def eval_G(model: PoleResidueModel, s_a: complex, s_b: complex, a: float, b: float):
    """Modified function ``G(s_a, s_b)`` and its two partials."""
    G = np.zeros((model.no, model.ni), dtype=complex)
    Ga = np.zeros_like(G)
    Gb = np.zeros_like(G)
    for lam0, lam1, R in _dyn_modes(model):
        pt = LogKernelPoint(s_a, s_b, lam0 + a * lam1, lam0 + b * lam1, a, b)
        f = f_kernel(pt)
        fa, fb = f_kernel_partials(pt)
        G += f * R
        Ga += fa * R
        Gb += fb * R
    return G, Ga, Gb


def interpolation_points(mode, a, b):
    return -np.conj(mode.pole(np.array([a]))), -np.conj(mode.pole(np.array([b])))


def check_dynamics(fom: PoleResidueModel, rom: PoleResidueModel, a: float, b: float) -> ReportList:
    """Lagrange and both Hermite conditions of the modified functions for every ROM mode."""
    if not rom.rank_one:
        raise StructureError("ROM residues must be rank one")
    _dyn_modes(fom)
    _dyn_modes(rom)
    dom = ParameterDomain.interval(a, b)
    require_stable(fom, dom, "full model")
    require_stable(rom, dom, "reduced model")
    out = ReportList()
    for l, mode in enumerate(rom.modes):
        degenerate = mode_is_degenerate(mode)
        sa, sb = interpolation_points(mode, a, b)
        G, Ga, Gb = eval_G(fom, sa, sb, a, b)
        Gr, Gra, Grb = eval_G(rom, sa, sb, a, b)
        bv, cv = mode.b(np.array([a])), mode.c(np.array([a]))
        ch = cv.conj()
        out.append(ConditionReport.build("dyn_right", l, None, G @ bv, Gr @ bv, degenerate))
        out.append(ConditionReport.build("dyn_left", l, None, ch @ G, ch @ Gr, degenerate))
        out.append(ConditionReport.build("dyn_dsa", l, None, ch @ Ga @ bv, ch @ Gra @ bv, degenerate))
        out.append(ConditionReport.build("dyn_dsb", l, None, ch @ Gb @ bv, ch @ Grb @ bv, degenerate))
    return out
