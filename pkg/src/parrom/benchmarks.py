"""Built-in single-parameter benchmark problems and published reference ROMs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (ParameterDomain, ParametricStateSpace, PoleResidueModel,
                    check_stability, state_space_to_pole_residue, truncate_modes)
from .optimize import DecisionLayout, layout_from_model
from .paramfunc import ScalarParamFunction

ONE = ScalarParamFunction.one(1)
P = ScalarParamFunction.coordinate(0, 1)


def _state_space(A0, A1, B, C) -> ParametricStateSpace:
    n = A0.shape[0]
    return ParametricStateSpace(1, ((ONE, np.eye(n)),), ((ONE, A0), (P, A1)),
                                ((ONE, B),), ((ONE, C),))


def synth6_state_space() -> ParametricStateSpace:
    """Three rotation blocks with frequencies 10, 30, 50 and damping ``-k p``.

    The third block uses damping ``-50 p``; a positive sign would make the
    system unstable on the whole parameter interval.
    """
    A0 = np.zeros((6, 6))
    A1 = np.zeros((6, 6))
    for blk, k in enumerate((10.0, 30.0, 50.0)):
        i = 2 * blk
        A0[i, i + 1], A0[i + 1, i] = k, -k
        A1[i, i] = A1[i + 1, i + 1] = -k
    B = np.array([[2.0], [0], [2], [0], [2], [0]])
    C = np.array([[1.0, 0, 1, 0, 1, 0]])
    return _state_space(A0, A1, B, C)


def penzl12_state_space() -> ParametricStateSpace:
    """Rotation block ``[[-1, p], [-p, -1]]`` followed by ``diag(-1, ..., -10)``."""
    A0 = np.diag([-1.0, -1.0] + [-float(k) for k in range(1, 11)])
    A1 = np.zeros((12, 12))
    A1[0, 1], A1[1, 0] = 1.0, -1.0
    v = np.array([5.0, 5.0] + [1.0] * 10)
    return _state_space(A0, A1, v[:, None], v[None, :])


@dataclass(frozen=True)
class BenchmarkSpec:
    """A FOM, its parameter box, ROM order and the decision layout used to reduce it."""

    name: str
    fom_ss: ParametricStateSpace
    domain: ParameterDomain
    r: int
    reference_rom: PoleResidueModel = None
    grad_tol: float = 1e-9

    @property
    def fom(self) -> PoleResidueModel:
        return state_space_to_pole_residue(self.fom_ss, self.domain)

    def initial_rom(self) -> PoleResidueModel:
        """FOM truncated to its first ``r`` states."""
        return truncate_modes(self.fom, self.r)

    def layout(self) -> DecisionLayout:
        """All pole coefficients and ``C`` free; ``B`` frozen at its truncated value."""
        return layout_from_model(self.initial_rom(), free_poles=True, free_b=False, free_c=True)

    def with_order(self, quad_order: int) -> "BenchmarkSpec":
        return BenchmarkSpec(self.name, self.fom_ss, self.domain.with_order(quad_order),
                             self.r, self.reference_rom, self.grad_tol)


def _rotation_rom(blocks, B, C, domain=None) -> PoleResidueModel:
    """ROM from real data: blocks are ``(sigma0, sigma1, omega0, omega1)`` or ``(lam0, lam1)``."""
    n = len(B)
    A0 = np.zeros((n, n))
    A1 = np.zeros((n, n))
    i = 0
    for blk in blocks:
        if len(blk) == 4:
            s0, s1, w0, w1 = blk
            A0[i, i] = A0[i + 1, i + 1] = s0
            A1[i, i] = A1[i + 1, i + 1] = s1
            A0[i, i + 1], A0[i + 1, i] = w0, -w0
            A1[i, i + 1], A1[i + 1, i] = w1, -w1
            i += 2
        else:
            A0[i, i], A1[i, i] = blk
            i += 1
    ss = _state_space(A0, A1, np.asarray(B, float)[:, None], np.asarray(C, float)[None, :])
    return state_space_to_pole_residue(ss, domain)


def synth6_published_rom() -> PoleResidueModel:
    """Converged order-4 ROM as printed (5 significant digits)."""
    return _rotation_rom([(-7.0213e-3, -11.014, 9.9975, 0.24074),
                          (-1.6795, -39.184, 29.261, 0.95464)],
                         [2, 0, 2, 0], [1.1211, -0.019113, 1.7966, 0.65666])


def penzl12_published_rom() -> PoleResidueModel:
    """Converged order-3 ROM as printed (5 significant digits)."""
    return _rotation_rom([(-1.0030, 7.2387e-6, 2.2567e-3, 1.0000), (-3.5530, 2.4940e-4)],
                         [2, 0, 1], [25.063, -0.053279, 8.7695])


def synth6() -> BenchmarkSpec:
    return BenchmarkSpec("synth6", synth6_state_space(), ParameterDomain.interval(0.02, 1.0), 4,
                         synth6_published_rom())


def penzl12() -> BenchmarkSpec:
    # The slope coordinates see q up to 100, which puts the Hessian near 1e8;
    # one ulp in x then moves the gradient by ~1e-7, so 1e-9 is not attainable.
    return BenchmarkSpec("penzl12", penzl12_state_space(), ParameterDomain.interval(1.0, 100.0), 3,
                         penzl12_published_rom(), grad_tol=1e-6)


BENCHMARKS = {"synth6": synth6, "penzl12": penzl12}


def get_benchmark(name: str) -> BenchmarkSpec:
    try:
        spec = BENCHMARKS[name]()
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None
    assert check_stability(spec.fom, spec.domain).stable
    return spec
