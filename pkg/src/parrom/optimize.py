"""Quasi-Newton minimization of the squared H2xL2 error over structured diagonal ROMs.

The reduced model is parameterized the way it would be written as a real
block-diagonal state-space model: 1x1 blocks carry a real affine pole,
2x2 rotation blocks ``[[sigma, omega], [-omega, sigma]]`` carry an affine
conjugate pair, and ``B``/``C`` are real parameter-separable matrices.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import Instability, StructureError
from .model import ParameterDomain, PoleResidueMode, PoleResidueModel, check_stability
from .norms import _assemble_error, inner_batch
from .paramfunc import ScalarParamFunction

log = logging.getLogger(__name__)

_REAL_TOL = 1e-12


@dataclass(frozen=True)
class Real1x1:
    """Real pole ``lambda0 + lin @ q``; flags mark free coordinates."""

    lambda0: bool = True
    lambda_lin: Optional[tuple] = None   # None means all free

    def flags(self, np_):
        lin = (True,) * np_ if self.lambda_lin is None else tuple(self.lambda_lin)
        return (self.lambda0,) + lin

    states = 1


@dataclass(frozen=True)
class Conj2x2:
    """Conjugate pair ``sigma(q) +- i omega(q)`` from a rotation block."""

    sigma0: bool = True
    sigma_lin: Optional[tuple] = None
    omega0: bool = True
    omega_lin: Optional[tuple] = None

    def flags(self, np_):
        sl = (True,) * np_ if self.sigma_lin is None else tuple(self.sigma_lin)
        ol = (True,) * np_ if self.omega_lin is None else tuple(self.omega_lin)
        return (self.sigma0,) + sl + (self.omega0,) + ol

    states = 2


@dataclass(frozen=True)
class DecisionLayout:
    """Which real coordinates of a block-structured ROM are optimized.

    Coordinate order: blocks first (``lambda0, lin...`` for a 1x1 block,
    ``sigma0, sigma_lin..., omega0, omega_lin...`` for a 2x2 block), then the
    real ``B`` entries ordered by (term, state, input), then the real ``C``
    entries ordered by (term, output, state).
    """

    np: int
    ni: int
    no: int
    blocks: tuple
    b_funcs: tuple
    c_funcs: tuple
    b_free: np.ndarray     # (n_bterms, r, ni) bool
    c_free: np.ndarray     # (n_cterms, no, r) bool

    def __post_init__(self):
        r = self.r
        b_free = np.asarray(self.b_free, dtype=bool).reshape(len(self.b_funcs), r, self.ni)
        c_free = np.asarray(self.c_free, dtype=bool).reshape(len(self.c_funcs), self.no, r)
        b_free.setflags(write=False)
        c_free.setflags(write=False)
        object.__setattr__(self, "b_free", b_free)
        object.__setattr__(self, "c_free", c_free)
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.free_mask.any():
            raise StructureError("layout has no free variables")

    @property
    def r(self) -> int:
        return sum(b.states for b in self.blocks)

    @property
    def free_mask(self) -> np.ndarray:
        flags = [f for blk in self.blocks for f in blk.flags(self.np)]
        return np.concatenate([np.array(flags, dtype=bool), self.b_free.ravel(), self.c_free.ravel()])

    @property
    def n_free(self) -> int:
        return int(self.free_mask.sum())


def layout_from_model(rom: PoleResidueModel, free_poles=True, free_b=False, free_c=True) -> DecisionLayout:
    """Layout mirroring the block structure of a real-realizable ROM.

    Conjugate pairs must be adjacent (as produced by the state-space
    conversion and by truncation).
    """
    if not rom.rank_one:
        raise StructureError("optimizable ROMs need rank-one residues")
    blocks = []
    k = 0
    while k < rom.order:
        mode = rom.modes[k]
        if mode.is_real():
            blocks.append(Real1x1(free_poles, (free_poles,) * rom.np))
            k += 1
        else:
            blocks.append(Conj2x2(free_poles, (free_poles,) * rom.np, free_poles, (free_poles,) * rom.np))
            k += 2
    first = rom.modes[0]
    b_funcs = tuple(fn for fn, _ in first.b_terms)
    c_funcs = tuple(fn for fn, _ in first.c_terms)
    r = sum(b.states for b in blocks)
    return DecisionLayout(rom.np, rom.ni, rom.no, tuple(blocks), b_funcs, c_funcs,
                          np.full((len(b_funcs), r, rom.ni), free_b),
                          np.full((len(c_funcs), rom.no, r), free_c))


def _check_funcs(mode, layout):
    if tuple(fn for fn, _ in mode.b_terms) != layout.b_funcs or \
            tuple(fn for fn, _ in mode.c_terms) != layout.c_funcs:
        raise StructureError("mode term functions do not match the layout")


def real_coordinates(rom: PoleResidueModel, layout: DecisionLayout) -> np.ndarray:
    """All real coordinates (free and frozen) of ``rom`` in layout order."""
    np_, r = layout.np, layout.r
    if not rom.rank_one or (rom.np, rom.ni, rom.no) != (np_, layout.ni, layout.no):
        raise StructureError("ROM does not conform to the layout")
    block_part = []
    B = np.zeros((len(layout.b_funcs), r, layout.ni))
    C = np.zeros((len(layout.c_funcs), layout.no, r))
    k = 0
    state = 0
    for blk in layout.blocks:
        if k >= rom.order:
            raise StructureError("ROM has fewer modes than the layout")
        m = rom.modes[k]
        _check_funcs(m, layout)
        if isinstance(blk, Real1x1):
            if not m.is_real():
                raise StructureError(f"mode {k} should be real")
            block_part += [m.lambda0.real] + list(m.lambda_lin.real)
            for t, (_, v) in enumerate(m.b_terms):
                B[t, state] = v.real
            for t, (_, v) in enumerate(m.c_terms):
                C[t, :, state] = v.real
            k += 1
        else:
            if k + 1 >= rom.order:
                raise StructureError("ROM ends inside a conjugate pair")
            partner = rom.modes[k + 1]
            conj = m.conj()
            if abs(partner.lambda0 - conj.lambda0) > 1e-12 * (1 + abs(m.lambda0)) or not all(
                    np.allclose(v1, v2, rtol=1e-12, atol=1e-14)
                    for (_, v1), (_, v2) in zip(partner.b_terms + partner.c_terms,
                                                conj.b_terms + conj.c_terms)):
                raise StructureError(f"modes {k}, {k + 1} are not a conjugate pair")
            block_part += [m.lambda0.real] + list(m.lambda_lin.real)
            block_part += [m.lambda0.imag] + list(m.lambda_lin.imag)
            for t, (_, v) in enumerate(m.b_terms):
                B[t, state] = 2 * v.real
                B[t, state + 1] = 2 * v.imag
            for t, (_, v) in enumerate(m.c_terms):
                C[t, :, state] = v.real
                C[t, :, state + 1] = v.imag
            k += 2
        state += blk.states
    if k != rom.order:
        raise StructureError("ROM has more modes than the layout")
    return np.concatenate([np.array(block_part, dtype=float), B.ravel(), C.ravel()])


def model_from_real(coords: np.ndarray, layout: DecisionLayout) -> PoleResidueModel:
    """Inverse of :func:`real_coordinates`."""
    np_, r = layout.np, layout.r
    nb = sum(len(blk.flags(np_)) for blk in layout.blocks)
    nB = len(layout.b_funcs) * r * layout.ni
    B = coords[nb:nb + nB].reshape(len(layout.b_funcs), r, layout.ni)
    C = coords[nb + nB:].reshape(len(layout.c_funcs), layout.no, r)
    modes = []
    pos = 0
    state = 0
    for blk in layout.blocks:
        if isinstance(blk, Real1x1):
            lam0, lin = coords[pos], coords[pos + 1:pos + 1 + np_]
            pos += 1 + np_
            b_terms = [(fn, B[t, state].astype(complex)) for t, fn in enumerate(layout.b_funcs)]
            c_terms = [(fn, C[t, :, state].astype(complex)) for t, fn in enumerate(layout.c_funcs)]
            modes.append(PoleResidueMode(lam0, lin.astype(complex), b_terms, c_terms))
        else:
            s0, sl = coords[pos], coords[pos + 1:pos + 1 + np_]
            w0, wl = coords[pos + 1 + np_], coords[pos + 2 + np_:pos + 2 + 2 * np_]
            pos += 2 + 2 * np_
            for sign in (1, -1):
                b_terms = [(fn, 0.5 * (B[t, state] + sign * 1j * B[t, state + 1]))
                           for t, fn in enumerate(layout.b_funcs)]
                c_terms = [(fn, C[t, :, state] + sign * 1j * C[t, :, state + 1])
                           for t, fn in enumerate(layout.c_funcs)]
                modes.append(PoleResidueMode(s0 + sign * 1j * w0, sl + sign * 1j * wl,
                                             b_terms, c_terms))
        state += blk.states
    return PoleResidueModel(np_, layout.ni, layout.no, tuple(modes), True)


def pack(rom: PoleResidueModel, layout: DecisionLayout) -> np.ndarray:
    """Free real coordinates of ``rom``."""
    return real_coordinates(rom, layout)[layout.free_mask]


def unpack(x: np.ndarray, layout: DecisionLayout, template: PoleResidueModel) -> PoleResidueModel:
    """ROM with free coordinates from ``x`` and frozen ones from ``template``."""
    coords = real_coordinates(template, layout)
    coords[layout.free_mask] = x
    return model_from_real(coords, layout)


@dataclass(frozen=True)
class OptimizerConfig:
    grad_tol: float = 1e-9
    max_iter: int = 10000
    fd_step: float = 1e-6
    armijo_c: float = 1e-4
    shrink: float = 0.5
    quad_order: int = 64
    max_backtracks: int = 60

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown optimizer settings: {sorted(unknown)}")
        return cls(**data)


@dataclass
class OptimizationResult:
    rom: PoleResidueModel
    x: np.ndarray
    objective_history: list
    grad_inf_norm: float
    iterations: int
    converged: bool
    message: str = ""
    step_log: list = field(default_factory=list)   # (iter, J, grad_norm, step)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "J", "grad_norm", "step"])
            for row in self.step_log:
                w.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])


class ObjectiveContext:
    """Everything the objective needs that does not change between iterates."""

    def __init__(self, fom: PoleResidueModel, layout: DecisionLayout,
                 template: PoleResidueModel, dom: ParameterDomain):
        if (fom.np, fom.ni, fom.no) != (layout.np, layout.ni, layout.no):
            raise StructureError("FOM and layout dimensions differ")
        self.fom = fom
        self.layout = layout
        self.template = template
        self.dom = dom
        self.coords0 = real_coordinates(template, layout)
        self.mask = layout.free_mask
        self.nodes, self.weights = dom.tensor_rule()
        self.vertices = dom.vertices()
        self.fom_poles = fom.poles(self.nodes)
        self.fom_res = fom.residues(self.nodes)
        if self.fom_poles.size and np.any(self.fom_poles.real >= 0) or not check_stability(fom, dom).stable:
            raise Instability("full model is not stable over the domain")
        self.hh = inner_batch(self.fom_poles, self.fom_res, self.fom_poles, self.fom_res)
        self.bvals = np.stack([fn(self.nodes) for fn in layout.b_funcs], axis=1)   # (N, Tb)
        self.cvals = np.stack([fn(self.nodes) for fn in layout.c_funcs], axis=1)   # (N, Tc)

    def rom(self, x) -> PoleResidueModel:
        coords = self.coords0.copy()
        coords[self.mask] = x
        return model_from_real(coords, self.layout)

    def x0(self) -> np.ndarray:
        return self.coords0[self.mask].copy()


def _stable_over(rom: PoleResidueModel, verts) -> bool:
    return bool(np.all(rom.poles(verts).real < 0)) if rom.order else True


def objective(x, ctx: ObjectiveContext) -> float:
    """Squared H2xL2 error of the unpacked ROM, or ``inf`` if it is unstable on the box."""
    rom = ctx.rom(np.asarray(x, dtype=float))
    if not _stable_over(rom, ctx.vertices):
        return np.inf
    pr, Rr = rom.poles(ctx.nodes), rom.residues(ctx.nodes)
    hr = inner_batch(ctx.fom_poles, ctx.fom_res, pr, Rr)
    rr = inner_batch(pr, Rr, pr, Rr)
    return float(np.sum(ctx.weights * _assemble_error(ctx.hh, hr, rr)))


def _mode_gradients(rom: PoleResidueModel, ctx: ObjectiveContext):
    """Per-mode sensitivities with ``dJ = 2 Re(g . dtheta)`` for pole, lin, b and c data."""
    Q, w = ctx.nodes, ctx.weights
    lam = rom.poles(Q)                      # (N, r)
    bv = rom.b_vectors(Q)                   # (N, r, ni)
    cv = rom.c_vectors(Q)                   # (N, r, no)
    R = np.einsum("nlo,nli->nloi", cv, bv.conj())
    mu = np.concatenate([lam, ctx.fom_poles], axis=1)
    T = np.concatenate([R, -ctx.fom_res], axis=1)      # residues of Hr - H
    sig = -lam.conj()
    inv = 1.0 / (sig[:, :, None] - mu[:, None, :])      # (N, r, M)
    X = np.einsum("nlm,nmoi->nloi", inv, T)
    dX = -np.einsum("nlm,nmoi->nloi", inv * inv, T)
    Xb = np.einsum("nloi,nli->nlo", X, bv)
    cX = np.einsum("nlo,nloi->nli", cv.conj(), X)
    cdXb = np.einsum("nlo,nloi,nli->nl", cv.conj(), dX, bv)
    g_lam = -cdXb.conj() * w[:, None]                  # (N, r)
    g_lam0 = g_lam.sum(axis=0)
    g_lin = np.einsum("nl,nk->lk", g_lam, Q)
    g_b = np.einsum("nli,nt,n->lti", cX, ctx.bvals, w)
    g_c = np.einsum("nlo,nt,n->lto", Xb.conj(), ctx.cvals, w)
    return g_lam0, g_lin, g_b, g_c


def grad_analytic(x, ctx: ObjectiveContext) -> np.ndarray:
    """Exact gradient of :func:`objective` (iterate must be stable)."""
    rom = ctx.rom(np.asarray(x, dtype=float))
    if not _stable_over(rom, ctx.vertices):
        raise Instability("gradient requested at an unstable iterate")
    g_lam0, g_lin, g_b, g_c = _mode_gradients(rom, ctx)
    layout = ctx.layout
    np_, r = layout.np, layout.r
    block_part = []
    gB = np.zeros((len(layout.b_funcs), r, layout.ni))
    gC = np.zeros((len(layout.c_funcs), layout.no, r))
    k = 0
    state = 0
    for blk in layout.blocks:
        if isinstance(blk, Real1x1):
            block_part += [2 * g_lam0[k].real] + list(2 * g_lin[k].real)
            gB[:, state, :] = 2 * g_b[k].real
            gC[:, :, state] = 2 * g_c[k].real
            k += 1
        else:
            p, m = k, k + 1
            block_part += [2 * (g_lam0[p] + g_lam0[m]).real] + list(2 * (g_lin[p] + g_lin[m]).real)
            block_part += [2 * (1j * (g_lam0[p] - g_lam0[m])).real] + \
                list(2 * (1j * (g_lin[p] - g_lin[m])).real)
            gB[:, state, :] = (g_b[p] + g_b[m]).real
            gB[:, state + 1, :] = (1j * (g_b[p] - g_b[m])).real
            gC[:, :, state] = 2 * (g_c[p] + g_c[m]).real
            gC[:, :, state + 1] = 2 * (1j * (g_c[p] - g_c[m])).real
            k += 2
        state += blk.states
    full = np.concatenate([np.array(block_part), gB.ravel(), gC.ravel()])
    return full[ctx.mask]


def grad_fd(x, ctx=None, step: float = 1e-6, fun: Optional[Callable] = None,
            richardson: bool = True) -> np.ndarray:
    """Finite-difference gradient of the objective (or of ``fun``).

    Central differences with step ``step * (1 + |x_k|)``, falling back to a
    one-sided difference where a probe is infeasible. With ``richardson`` the
    estimates at ``h`` and ``h / 2`` are combined to cancel the leading
    truncation term.
    """
    x = np.asarray(x, dtype=float)
    f = fun if fun is not None else (lambda z: objective(z, ctx))
    cache = {}

    def f0():
        if "f0" not in cache:
            cache["f0"] = f(x)
        return cache["f0"]

    def diff(k, h):
        """Difference quotient and its truncation order."""
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fp, fm = f(xp), f(xm)
        if np.isfinite(fp) and np.isfinite(fm):
            return (fp - fm) / (xp[k] - xm[k]), 2
        if np.isfinite(fp):
            return (fp - f0()) / (xp[k] - x[k]), 1
        if np.isfinite(fm):
            return (f0() - fm) / (x[k] - xm[k]), 1
        return np.nan, 1

    g = np.zeros_like(x)
    for k in range(x.size):
        h = step * (1.0 + abs(x[k]))
        d1, o1 = diff(k, h)
        if not richardson:
            g[k] = d1
            continue
        d2, o2 = diff(k, 0.5 * h)
        if o1 != o2:
            g[k] = d1 if o1 == 2 else d2
            continue
        g[k] = (2 ** o1 * d2 - d1) / (2 ** o1 - 1)
    return g


def bfgs_minimize(x0, ctx: Union[ObjectiveContext, None], cfg: OptimizerConfig = OptimizerConfig(),
                  fun: Optional[Callable] = None, grad: Optional[Callable] = None,
                  callback: Optional[Callable] = None) -> OptimizationResult:
    """BFGS with inverse-Hessian updates and an Armijo backtracking line search.

    The line search also backtracks on the ``inf`` returned for unstable
    iterates. Updates failing ``s.y > 1e-12 |s| |y|`` are skipped.
    ``fun``/``grad`` override the H2xL2 objective (used for testing on
    analytic functions); then ``ctx`` may be None.
    """
    f = fun if fun is not None else (lambda z: objective(z, ctx))
    g_fn = grad if grad is not None else (lambda z: grad_analytic(z, ctx))
    x = np.array(x0, dtype=float)
    fx = f(x)
    if not np.isfinite(fx):
        raise Instability("initial iterate is infeasible")
    g = g_fn(x)
    n = x.size
    Hinv = np.eye(n)
    scaled = False
    history = [fx]
    steps = [(0, fx, float(np.max(np.abs(g))), 0.0)]
    converged = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, cfg.max_iter + 1):
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= cfg.grad_tol:
            converged = True
            message = "gradient tolerance reached"
            it -= 1
            break
        p = -Hinv @ g
        slope = float(g @ p)
        if slope >= 0:
            Hinv = np.eye(n)
            scaled = False
            p = -g
            slope = float(g @ p)
        t = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            x_new = x + t * p
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new <= fx + cfg.armijo_c * t * slope and f_new < fx:
                accepted = True
                break
            t *= cfg.shrink
        if not accepted:
            if not np.allclose(Hinv, np.eye(n)):
                Hinv = np.eye(n)
                scaled = False
                continue
            message = "line search failed"
            it -= 1
            break
        g_new = g_fn(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                Hinv = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = Hinv + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s) \
                - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        assert f_new <= fx
        x, fx, g = x_new, f_new, g_new
        history.append(fx)
        steps.append((it, fx, float(np.max(np.abs(g))), t))
        if callback is not None:
            callback(it, x, fx, g)
    else:
        it = cfg.max_iter
        if float(np.max(np.abs(g))) <= cfg.grad_tol:
            converged = True
            message = "gradient tolerance reached"
    rom = ctx.rom(x) if ctx is not None else None
    return OptimizationResult(rom, x, history, float(np.max(np.abs(g))), it, converged, message, steps)


def random_start(ctx: ObjectiveContext, seed: int, scale: float = 0.1, tries: int = 100) -> np.ndarray:
    """Seeded random perturbation of the template's free coordinates that is stable on the box."""
    rng = np.random.default_rng(seed)
    x0 = ctx.x0()
    for _ in range(tries):
        x = x0 + scale * (1.0 + np.abs(x0)) * rng.standard_normal(x0.size)
        if np.isfinite(objective(x, ctx)):
            return x
    raise Instability(f"no stable random start found in {tries} draws")
