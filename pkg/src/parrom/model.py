"""Parametric LTI models: separable state-space form and diagonal pole-residue form.

A pole-residue model represents

    H(s, q) = sum_l  R_l(q) / (s - lambda_l(q))

with affine poles ``lambda_l(q) = lambda0 + lambda_lin @ q`` and residues
that are either rank one, ``R_l(q) = c_l(q) b_l(q)^*``, or general matrices.
Both ``b_l`` and ``c_l`` are parameter-separable sums of monomial functions
times constant complex vectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import Instability, PoleHit, StructureError
from .paramfunc import ScalarParamFunction

POLE_HIT_RTOL = 1e-12


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _as_points(q, np_):
    """Return ``(Q, single)`` with ``Q`` of shape ``(N, np)``."""
    q = np.asarray(q, dtype=float)
    if q.ndim <= 1:
        return q.reshape(1, np_), True
    return q, False


def _separable_eval(terms, Q, shape):
    """Evaluate ``sum_t f_t(Q) * V_t`` for all rows of ``Q``."""
    out = np.zeros((Q.shape[0],) + shape, dtype=complex)
    for fn, vec in terms:
        w = fn(Q)
        out += w.reshape((-1,) + (1,) * len(shape)) * vec
    return out


@dataclass(frozen=True)
class ParameterDomain:
    """Box ``[lo, hi]`` with Lebesgue measure and a per-axis Gauss-Legendre rule."""

    lo: np.ndarray
    hi: np.ndarray
    quad_order: int = 64

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lo), float)
        hi = _frozen(np.atleast_1d(self.hi), float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise StructureError("domain bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise StructureError(f"empty domain: lo={lo}, hi={hi}")
        if int(self.quad_order) < 1:
            raise StructureError("quad_order must be >= 1")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "quad_order", int(self.quad_order))

    @classmethod
    def interval(cls, a: float, b: float, quad_order: int = 64) -> "ParameterDomain":
        return cls(np.array([a]), np.array([b]), quad_order)

    @property
    def np(self) -> int:
        return self.lo.size

    def with_order(self, quad_order: int) -> "ParameterDomain":
        return ParameterDomain(self.lo, self.hi, quad_order)

    def vertices(self) -> np.ndarray:
        """All ``2**np`` corners, shape ``(2**np, np)``."""
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def tensor_rule(self):
        """Tensor Gauss-Legendre nodes ``(N, np)`` and weights ``(N,)``."""
        from .norms import gauss_legendre

        rules = [gauss_legendre(self.quad_order, a, b) for a, b in zip(self.lo, self.hi)]
        nodes = np.array(list(itertools.product(*(r.nodes for r in rules))))
        weights = np.array([np.prod(w) for w in itertools.product(*(r.weights for r in rules))])
        return nodes.reshape(-1, self.np), weights


@dataclass(frozen=True)
class ParametricStateSpace:
    """Parameter-separable model ``E(q) x' = A(q) x + B(q) u``, ``y = C(q) x``.

    Each of ``E_terms``, ``A_terms``, ``B_terms``, ``C_terms`` is a sequence of
    ``(ScalarParamFunction, matrix)`` pairs.
    """

    np: int
    E_terms: tuple
    A_terms: tuple
    B_terms: tuple
    C_terms: tuple

    def __post_init__(self):
        for name in ("E_terms", "A_terms", "B_terms", "C_terms"):
            terms = tuple((fn, _frozen(mat, complex if np.iscomplexobj(mat) else float))
                          for fn, mat in getattr(self, name))
            if not terms:
                raise StructureError(f"{name} is empty")
            shapes = {m.shape for _, m in terms}
            if len(shapes) != 1 or any(m.ndim != 2 for _, m in terms):
                raise StructureError(f"{name}: matrices must share one 2-D shape")
            if any(fn.np != self.np for fn, _ in terms):
                raise StructureError(f"{name}: parameter dimension mismatch")
            object.__setattr__(self, name, terms)
        n = self.n
        if self.E_terms[0][1].shape != (n, n):
            raise StructureError("E must be n x n")
        if self.B_terms[0][1].shape[0] != n or self.C_terms[0][1].shape[1] != n:
            raise StructureError("B/C dimensions inconsistent with A")

    @property
    def n(self) -> int:
        return self.A_terms[0][1].shape[0]

    @property
    def ni(self) -> int:
        return self.B_terms[0][1].shape[1]

    @property
    def no(self) -> int:
        return self.C_terms[0][1].shape[0]

    @staticmethod
    def _assemble(terms, q):
        return sum(fn(q) * mat for fn, mat in terms)

    def E(self, q):
        return self._assemble(self.E_terms, q)

    def A(self, q):
        return self._assemble(self.A_terms, q)

    def B(self, q):
        return self._assemble(self.B_terms, q)

    def C(self, q):
        return self._assemble(self.C_terms, q)

    def transfer(self, s, q):
        """Dense resolvent evaluation ``C (sE - A)^{-1} B``."""
        q = np.asarray(q, dtype=float)
        return self.C(q) @ np.linalg.solve(s * self.E(q) - self.A(q), self.B(q))

    def is_real(self) -> bool:
        return not any(np.iscomplexobj(m) and np.any(m.imag != 0)
                       for name in ("E_terms", "A_terms", "B_terms", "C_terms")
                       for _, m in getattr(self, name))


@dataclass(frozen=True)
class PoleResidueMode:
    """One first-order term ``R(q) / (s - lambda(q))``.

    Rank-one modes set ``b_terms`` and ``c_terms`` with ``R = c b^*``;
    full-residue modes set ``residue_terms`` instead.
    """

    lambda0: complex
    lambda_lin: np.ndarray
    b_terms: tuple = ()
    c_terms: tuple = ()
    residue_terms: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "lambda0", complex(self.lambda0))
        object.__setattr__(self, "lambda_lin", _frozen(np.atleast_1d(self.lambda_lin)))
        object.__setattr__(self, "b_terms",
                           tuple((fn, _frozen(np.ravel(v))) for fn, v in self.b_terms))
        object.__setattr__(self, "c_terms",
                           tuple((fn, _frozen(np.ravel(v))) for fn, v in self.c_terms))
        if self.residue_terms is not None:
            if self.b_terms or self.c_terms:
                raise StructureError("a mode is either rank-one or full-residue, not both")
            terms = tuple((fn, _frozen(np.atleast_2d(m))) for fn, m in self.residue_terms)
            if not terms:
                raise StructureError("full-residue mode needs at least one term")
            object.__setattr__(self, "residue_terms", terms)
        elif not self.b_terms or not self.c_terms:
            raise StructureError("rank-one mode needs both b_terms and c_terms")
        fns = [fn for fn, _ in self.b_terms + self.c_terms + (self.residue_terms or ())]
        if any(fn.np != self.np for fn in fns):
            raise StructureError("term functions disagree with the pole's parameter dimension")
        if not np.all(np.isfinite(self.lambda_lin)) or not np.isfinite(self.lambda0):
            raise StructureError("non-finite pole data")

    @property
    def np(self) -> int:
        return self.lambda_lin.size

    @property
    def rank_one(self) -> bool:
        return self.residue_terms is None

    @property
    def ni(self) -> int:
        if self.rank_one:
            return self.b_terms[0][1].size
        return self.residue_terms[0][1].shape[1]

    @property
    def no(self) -> int:
        if self.rank_one:
            return self.c_terms[0][1].size
        return self.residue_terms[0][1].shape[0]

    def pole(self, q):
        Q, single = _as_points(q, self.np)
        lam = self.lambda0 + Q @ self.lambda_lin
        return lam[0] if single else lam

    def b(self, q):
        Q, single = _as_points(q, self.np)
        out = _separable_eval(self.b_terms, Q, (self.ni,))
        return out[0] if single else out

    def c(self, q):
        Q, single = _as_points(q, self.np)
        out = _separable_eval(self.c_terms, Q, (self.no,))
        return out[0] if single else out

    def residue(self, q):
        Q, single = _as_points(q, self.np)
        if self.rank_one:
            out = np.einsum("ni,nj->nij", self.c(Q), self.b(Q).conj())
        else:
            out = _separable_eval(self.residue_terms, Q, (self.no, self.ni))
        return out[0] if single else out

    def residue_expansion(self):
        """Residue as a list of ``(function, matrix)`` pairs in canonical grouping."""
        if not self.rank_one:
            pairs = list(self.residue_terms)
        else:
            pairs = [(fc * fb, np.outer(vc, vb.conj()))
                     for fc, vc in self.c_terms for fb, vb in self.b_terms]
        grouped: dict = {}
        for fn, mat in pairs:
            for coef, exps in fn.terms:
                grouped[exps] = grouped.get(exps, 0) + coef * mat
        np_ = self.np
        return [(ScalarParamFunction.monomial(e), m) for e, m in sorted(grouped.items())
                if np.any(m != 0) or np_ == 0]

    def conj(self) -> "PoleResidueMode":
        if self.rank_one:
            return PoleResidueMode(self.lambda0.conjugate(), self.lambda_lin.conj(),
                                   tuple((fn, v.conj()) for fn, v in self.b_terms),
                                   tuple((fn, v.conj()) for fn, v in self.c_terms))
        return PoleResidueMode(self.lambda0.conjugate(), self.lambda_lin.conj(),
                               residue_terms=tuple((fn, m.conj()) for fn, m in self.residue_terms))

    def is_real(self) -> bool:
        data = [np.array([self.lambda0]), self.lambda_lin]
        data += [v for _, v in self.b_terms + self.c_terms + (self.residue_terms or ())]
        return all(np.all(d.imag == 0) for d in data)


@dataclass(frozen=True)
class PoleResidueModel:
    """Sum of pole-residue modes sharing ``np``, ``ni`` and ``no``.

    ``real`` flags a real-realizable model: every mode with complex data has
    its conjugate among the modes.
    """

    np: int
    ni: int
    no: int
    modes: tuple = ()
    real: bool = False

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        for mode in modes:
            if (mode.np, mode.ni, mode.no) != (self.np, self.ni, self.no):
                raise StructureError(
                    f"mode dims (np={mode.np}, ni={mode.ni}, no={mode.no}) "
                    f"do not match model ({self.np}, {self.ni}, {self.no})")
        if self.real:
            unmatched = [m for m in modes if not m.is_real()]
            while unmatched:
                m = unmatched.pop(0)
                partner = next((k for k, o in enumerate(unmatched) if _same_mode(o, m.conj())), None)
                if partner is None:
                    raise StructureError("model flagged real but a complex mode has no conjugate partner")
                unmatched.pop(partner)

    @property
    def order(self) -> int:
        return len(self.modes)

    @property
    def rank_one(self) -> bool:
        return all(m.rank_one for m in self.modes)

    def poles(self, q):
        """Poles at one point ``(r,)`` or many ``(N, r)``."""
        Q, single = _as_points(q, self.np)
        if not self.modes:
            out = np.zeros((Q.shape[0], 0), dtype=complex)
        else:
            out = np.stack([m.pole(Q) for m in self.modes], axis=1)
        return out[0] if single else out

    def residues(self, q):
        """Residues at one point ``(r, no, ni)`` or many ``(N, r, no, ni)``."""
        Q, single = _as_points(q, self.np)
        if not self.modes:
            out = np.zeros((Q.shape[0], 0, self.no, self.ni), dtype=complex)
        else:
            out = np.stack([m.residue(Q) for m in self.modes], axis=1)
        return out[0] if single else out

    def b_vectors(self, q):
        Q, single = _as_points(q, self.np)
        out = np.stack([m.b(Q) for m in self.modes], axis=1)
        return out[0] if single else out

    def c_vectors(self, q):
        Q, single = _as_points(q, self.np)
        out = np.stack([m.c(Q) for m in self.modes], axis=1)
        return out[0] if single else out

    def with_modes(self, modes, real=None) -> "PoleResidueModel":
        return PoleResidueModel(self.np, self.ni, self.no, tuple(modes),
                                self.real if real is None else real)

    def __add__(self, other: "PoleResidueModel") -> "PoleResidueModel":
        if (other.np, other.ni, other.no) != (self.np, self.ni, self.no):
            raise StructureError("cannot add models of different dimensions")
        return PoleResidueModel(self.np, self.ni, self.no, self.modes + other.modes,
                                self.real and other.real)

    def scaled(self, alpha: float) -> "PoleResidueModel":
        """Model times a real scalar (scales the output side)."""
        modes = []
        for m in self.modes:
            if m.rank_one:
                modes.append(PoleResidueMode(m.lambda0, m.lambda_lin, m.b_terms,
                                             tuple((fn, alpha * v) for fn, v in m.c_terms)))
            else:
                modes.append(PoleResidueMode(m.lambda0, m.lambda_lin, residue_terms=tuple(
                    (fn, alpha * r) for fn, r in m.residue_terms)))
        return self.with_modes(modes)

    @classmethod
    def empty(cls, np_: int, ni: int, no: int) -> "PoleResidueModel":
        return cls(np_, ni, no, (), True)


def _same_mode(a: PoleResidueMode, b: PoleResidueMode, tol=1e-14) -> bool:
    if a.rank_one != b.rank_one or abs(a.lambda0 - b.lambda0) > tol * (1 + abs(a.lambda0)):
        return False
    if not np.allclose(a.lambda_lin, b.lambda_lin, rtol=tol, atol=tol):
        return False
    ta = a.b_terms + a.c_terms + (a.residue_terms or ())
    tb = b.b_terms + b.c_terms + (b.residue_terms or ())
    return len(ta) == len(tb) and all(
        fa == fb and np.allclose(va, vb, rtol=tol, atol=tol) for (fa, va), (fb, vb) in zip(ta, tb))


def _check_pole_hit(s, lam):
    gap = np.abs(s - lam)
    bad = gap < POLE_HIT_RTOL * (1 + np.abs(s) + np.abs(lam))
    if np.any(bad):
        raise PoleHit(f"s={s} coincides with pole {lam[np.argmax(bad)]}")


def eval_transfer(model: PoleResidueModel, s: complex, q) -> np.ndarray:
    """Transfer function value ``H(s, q)`` as an ``no x ni`` matrix."""
    if not model.modes:
        return np.zeros((model.no, model.ni), dtype=complex)
    lam = model.poles(q)
    _check_pole_hit(s, lam)
    return np.einsum("l,lij->ij", 1.0 / (s - lam), model.residues(q))


def eval_transfer_ds(model: PoleResidueModel, s: complex, q) -> np.ndarray:
    """Derivative ``dH/ds (s, q)``."""
    if not model.modes:
        return np.zeros((model.no, model.ni), dtype=complex)
    lam = model.poles(q)
    _check_pole_hit(s, lam)
    return np.einsum("l,lij->ij", -1.0 / (s - lam) ** 2, model.residues(q))


class StabilityVerdict(NamedTuple):
    stable: bool
    mode: Optional[int] = None
    vertex: Optional[np.ndarray] = None


def check_stability(model: PoleResidueModel, dom: ParameterDomain) -> StabilityVerdict:
    """Vertex test of ``Re lambda_l(q) < 0`` over the box.

    Exact because the real part of every pole is affine in ``q``.
    """
    if model.np != dom.np:
        raise StructureError(f"model has {model.np} parameters, domain has {dom.np}")
    verts = dom.vertices()
    for l, mode in enumerate(model.modes):
        re = mode.pole(verts).real
        if np.any(re >= 0):
            k = int(np.argmax(re >= 0))   # first violating vertex
            return StabilityVerdict(False, l, verts[k])
    return StabilityVerdict(True)


def require_stable(model: PoleResidueModel, dom: ParameterDomain, what="model"):
    verdict = check_stability(model, dom)
    if not verdict.stable:
        raise Instability(
            f"{what}: mode {verdict.mode} has Re(pole) >= 0 at q={verdict.vertex}",
            mode=verdict.mode, vertex=verdict.vertex)


def _affine_pole(terms, np_):
    """Combine ``sum_k f_k(q) * z_k`` (complex scalars) into affine form."""
    lam0 = 0j
    lin = np.zeros(np_, dtype=complex)
    grouped: dict = {}
    for fn, z in terms:
        for coef, exps in fn.terms:
            grouped[exps] = grouped.get(exps, 0j) + coef * z
    for exps, val in grouped.items():
        if val == 0:
            continue
        deg = sum(exps)
        if deg == 0:
            lam0 += val
        elif deg == 1:
            lin[exps.index(1)] += val
        else:
            raise StructureError("pole is not affine in the parameters")
    return lam0, lin


def _block_partition(mats, n):
    """Split ``range(n)`` into 1x1 and 2x2 diagonal blocks shared by all ``mats``."""
    nz = np.zeros((n, n), dtype=bool)
    for m in mats:
        nz |= (m != 0)
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and (nz[i, i + 1] or nz[i + 1, i]):
            blocks.append((i, i + 1))
            i += 2
        else:
            blocks.append((i,))
            i += 1
    mask = np.zeros((n, n), dtype=bool)
    for blk in blocks:
        mask[np.ix_(blk, blk)] = True
    if np.any(nz & ~mask):
        raise StructureError("A terms are not block diagonal in 1x1/2x2 blocks")
    return blocks


def state_space_to_pole_residue(sys: ParametricStateSpace,
                                dom: Optional[ParameterDomain] = None) -> PoleResidueModel:
    """Diagonalize a block-structured state-space model into pole-residue form.

    Every ``A`` term must be block diagonal with a common partition into 1x1
    blocks and 2x2 rotation blocks ``[[sigma, omega], [-omega, sigma]]``. A
    rotation block contributes the conjugate pair ``sigma +- i omega``.
    """
    np_, n = sys.np, sys.n
    e_sum: dict = {}
    for fn, mat in sys.E_terms:
        for coef, exps in fn.terms:
            e_sum[exps] = e_sum.get(exps, 0) + coef * mat
    for exps, mat in e_sum.items():
        target = np.eye(n) if sum(exps) == 0 else np.zeros((n, n))
        if not np.allclose(mat, target, rtol=0, atol=1e-14):
            raise StructureError("E(q) must be the identity")
    if (0,) * np_ not in e_sum:
        raise StructureError("E(q) must be the identity")

    blocks = _block_partition([m for _, m in sys.A_terms], n)
    modes = []
    for blk in blocks:
        if len(blk) == 1:
            i = blk[0]
            lam0, lin = _affine_pole([(fn, complex(m[i, i])) for fn, m in sys.A_terms], np_)
            b_terms = [(fn, np.conj(m[i, :])) for fn, m in sys.B_terms]
            c_terms = [(fn, m[:, i]) for fn, m in sys.C_terms]
            modes.append(PoleResidueMode(lam0, lin, b_terms, c_terms))
            continue
        i, j = blk
        pole_terms = []
        for fn, m in sys.A_terms:
            sig, om = m[i, i], m[i, j]
            if m[j, j] != sig or m[j, i] != -om:
                raise StructureError(f"block ({i}, {j}) is not in rotation form")
            pole_terms.append((fn, complex(sig) + 1j * complex(om)))
        lam0, lin = _affine_pole(pole_terms, np_)
        # A = V diag(l+, l-) V^{-1} with V = [[1, 1], [i, -i]]
        for sign in (1, -1):
            b_terms = [(fn, 0.5 * (np.conj(m[i, :]) + sign * 1j * np.conj(m[j, :])))
                       for fn, m in sys.B_terms]
            c_terms = [(fn, m[:, i] + sign * 1j * m[:, j]) for fn, m in sys.C_terms]
            if sign == 1:
                modes.append(PoleResidueMode(lam0, lin, b_terms, c_terms))
            else:
                modes.append(PoleResidueMode(lam0.conjugate(), lin.conj(), b_terms, c_terms))
    model = PoleResidueModel(np_, sys.ni, sys.no, tuple(modes), sys.is_real())
    if dom is not None:
        require_stable(model, dom, "converted model")
    return model


def truncate_modes(model: PoleResidueModel, r: int) -> PoleResidueModel:
    """Keep the first ``r`` states; a conjugate pair counts as two states and is kept whole."""
    kept = []
    count = 0
    k = 0
    modes = model.modes
    while count < r and k < len(modes):
        m = modes[k]
        if model.real and not m.is_real():
            if count + 2 > r:
                raise StructureError(f"order {r} would split a conjugate pair")
            kept.extend(modes[k:k + 2])
            count += 2
            k += 2
        else:
            kept.append(m)
            count += 1
            k += 1
    if count != r:
        raise StructureError(f"model has fewer than {r} states")
    return model.with_modes(kept)
