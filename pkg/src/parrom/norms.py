"""H2 inner products in pole-residue form, a frequency-domain oracle, and the H2xL2 error."""

from __future__ import annotations

import heapq
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import Instability, InternalInconsistency, NonConvergence
from .model import ParameterDomain, PoleResidueModel, require_stable

IMAG_RTOL = 1e-10


@dataclass(frozen=True)
class QuadratureRule1D:
    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float


def gauss_legendre(m: int, a: float, b: float) -> QuadratureRule1D:
    """``m``-point Gauss-Legendre rule on ``[a, b]``; exact to degree ``2m - 1``."""
    if m < 1 or not a < b:
        raise ValueError(f"need m >= 1 and a < b, got m={m}, [{a}, {b}]")
    x, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (b - a)
    return QuadratureRule1D(a + half * (x + 1.0), half * w, float(a), float(b))


@dataclass(frozen=True)
class ErrorBreakdown:
    """Squared H2xL2 error and its per-node H2 contributions."""

    total_sq: float
    per_node: list = field(default_factory=list)   # (q, h2_err_sq, weight)

    def to_json(self):
        return {"total_sq": self.total_sq,
                "per_node": [{"q": list(map(float, q)), "h2_err_sq": e, "weight": w}
                             for q, e, w in self.per_node]}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PARROM_THREADS", "1")))
    except ValueError:
        return 1


def inner_batch(pa, Ra, pb, Rb):
    """Batched ``<Ha, Hb>_H2`` over a leading node axis.

    ``pa`` is ``(N, ma)``, ``Ra`` is ``(N, ma, no, ni)``; likewise for ``b``.
    Returns a complex array ``(N,)``.
    """
    if pa.shape[1] == 0 or pb.shape[1] == 0:
        return np.zeros(pa.shape[0], dtype=complex)
    tr = np.einsum("nioa,njoa->nij", Ra, Rb.conj())
    den = -pa[:, :, None] - pb.conj()[:, None, :]
    return (tr / den).sum(axis=(1, 2))


def _stable_at(poles, what):
    if poles.size and np.any(poles.real >= 0):
        raise Instability(f"{what} has a pole with nonnegative real part")


def h2_inner_pr(m1: PoleResidueModel, m2: PoleResidueModel, q) -> complex:
    """Closed-form H2 inner product of two pole-residue models at a fixed ``q``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p1, p2 = m1.poles(q[None, :]), m2.poles(q[None, :])
    _stable_at(p1, "first model")
    _stable_at(p2, "second model")
    return complex(inner_batch(p1, m1.residues(q[None, :]), p2, m2.residues(q[None, :]))[0])


def _assemble_error(hh, hr, rr):
    val = hh - 2.0 * hr.real + rr
    scale = 1.0 + np.abs(hh) + np.abs(rr)
    if np.any(np.abs(val.imag) > IMAG_RTOL * scale):
        raise InternalInconsistency("squared H2 error has a non-negligible imaginary part")
    return val.real


def h2_error_sq_batch(fom: PoleResidueModel, rom: PoleResidueModel, Q, hh=None):
    """``||H(., q) - Hr(., q)||^2`` for every row of ``Q``."""
    pf, Rf = fom.poles(Q), fom.residues(Q)
    pr, Rr = rom.poles(Q), rom.residues(Q)
    _stable_at(pf, "full model")
    _stable_at(pr, "reduced model")
    if hh is None:
        hh = inner_batch(pf, Rf, pf, Rf)
    hr = inner_batch(pf, Rf, pr, Rr)
    rr = inner_batch(pr, Rr, pr, Rr)
    return _assemble_error(hh, hr, rr)


def h2_error_sq_at_q(fom: PoleResidueModel, rom: PoleResidueModel, q) -> float:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return float(h2_error_sq_batch(fom, rom, q[None, :])[0])


def h2l2_error(fom: PoleResidueModel, rom: PoleResidueModel, dom: ParameterDomain) -> ErrorBreakdown:
    """Tensor Gauss-Legendre approximation of the squared H2xL2 error."""
    require_stable(fom, dom, "full model")
    require_stable(rom, dom, "reduced model")
    nodes, weights = dom.tensor_rule()
    workers = _threads()
    if workers > 1 and len(nodes) >= 4 * workers:
        chunks = np.array_split(np.arange(len(nodes)), workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda idx: h2_error_sq_batch(fom, rom, nodes[idx]), chunks))
        errs = np.concatenate(parts)
    else:
        errs = h2_error_sq_batch(fom, rom, nodes)
    # fixed summation order keeps repeated runs bit-identical
    total = float(np.sum(weights * errs))
    return ErrorBreakdown(total, [(nodes[k], float(errs[k]), float(weights[k]))
                                  for k in range(len(nodes))])


# Gauss-Kronrod 7/15 on [-1, 1]
_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_WKFULL = np.concatenate([_WK[:-1], _WK[::-1]])
_WGFULL = np.zeros(15)
_WGFULL[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a, b):
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    vals = f(c + h * _NODES)
    k = h * np.dot(_WKFULL, vals)
    g = h * np.dot(_WGFULL, vals)
    return k, abs(k - g)


def adaptive_gk(f, breakpoints, rtol, max_intervals=20000):
    """Globally adaptive Gauss-Kronrod integration of a vectorized ``f``.

    Stops when the summed error estimate is at most ``rtol * |I|``.
    """
    heap = []
    total = 0.0
    err = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        val, e = _gk15(f, a, b)
        total += val
        err += e
        heapq.heappush(heap, (-e, a, b, val))
    n = len(heap)
    while err > rtol * abs(total) and err > 1e-300:
        if n >= max_intervals:
            raise NonConvergence(f"adaptive quadrature exceeded {max_intervals} intervals "
                                 f"(estimate {total}, error {err})")
        e, a, b, val = heapq.heappop(heap)
        m = 0.5 * (a + b)
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        total += v1 + v2 - val
        err += e1 + e2 + e
        heapq.heappush(heap, (-e1, a, m, v1))
        heapq.heappush(heap, (-e2, m, b, v2))
        n += 1
    # recompute from scratch to shed accumulated update roundoff
    total = sum(item[3] for item in heap)
    return total, err


def h2_norm_freq_oracle(model: PoleResidueModel, q, tol: float = 1e-9) -> float:
    """H2 norm by direct integration of ``||H(i w, q)||_F^2 / (2 pi)``.

    Uses ``w = tan(theta)`` on ``(-pi/2, pi/2)`` with breakpoints placed at
    the images of the pole imaginary parts, so narrow resonance peaks are
    never straddled by a single initial interval.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if not model.modes:
        return 0.0
    lam = model.poles(q)
    _stable_at(lam, "model")
    R = model.residues(q)

    def integrand(theta):
        w = np.tan(theta)
        Hw = np.einsum("kl,lij->kij", 1.0 / (1j * w[:, None] - lam[None, :]), R)
        return np.sum(np.abs(Hw) ** 2, axis=(1, 2)) * (1.0 + w * w) / (2.0 * np.pi)

    pts = [lam.imag]
    for k in (1.0, 10.0):
        pts += [lam.imag + k * lam.real, lam.imag - k * lam.real]
    bps = np.unique(np.concatenate([[-np.pi / 2, np.pi / 2], np.arctan(np.concatenate(pts))]))
    bps = bps[(bps >= -np.pi / 2) & (bps <= np.pi / 2)]
    val, _ = adaptive_gk(integrand, bps, tol)
    return float(np.sqrt(max(val, 0.0)))
