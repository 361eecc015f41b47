"""Monomial-sum scalar functions of the parameter vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import StructureError


@dataclass(frozen=True)
class ScalarParamFunction:
    """A real polynomial ``sum_t coef_t * prod_k q_k**e_tk``.

    Terms are stored in canonical form (merged, zero coefficients dropped,
    sorted by exponent tuple), so equality of two instances is equality of
    the functions.
    """

    np: int
    terms: tuple[tuple[float, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        if self.np < 1:
            raise StructureError("parameter dimension must be >= 1")
        merged: dict[tuple[int, ...], float] = {}
        for coef, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.np:
                raise StructureError(
                    f"exponent vector {exps} does not have length {self.np}")
            if any(e < 0 for e in exps):
                raise StructureError(f"negative exponent in {exps}")
            coef = float(coef)
            if not np.isfinite(coef):
                raise StructureError("non-finite coefficient")
            merged[exps] = merged.get(exps, 0.0) + coef
        canon = tuple(sorted(((c, e) for e, c in merged.items() if c != 0.0),
                             key=lambda t: t[1]))
        object.__setattr__(self, "terms", canon)

    # constructors
    @classmethod
    def constant(cls, value: float, np_: int) -> "ScalarParamFunction":
        return cls(np_, ((value, (0,) * np_),))

    @classmethod
    def one(cls, np_: int) -> "ScalarParamFunction":
        return cls.constant(1.0, np_)

    @classmethod
    def coordinate(cls, k: int, np_: int, coef: float = 1.0) -> "ScalarParamFunction":
        exps = [0] * np_
        exps[k] = 1
        return cls(np_, ((coef, tuple(exps)),))

    @classmethod
    def monomial(cls, exps: Sequence[int], coef: float = 1.0) -> "ScalarParamFunction":
        return cls(len(exps), ((coef, tuple(exps)),))

    @classmethod
    def from_json(cls, data: Iterable, np_: int) -> "ScalarParamFunction":
        terms = []
        for item in data:
            coef, exps = item
            terms.append((float(coef), tuple(int(e) for e in exps)))
        return cls(np_, tuple(terms))

    def to_json(self) -> list:
        return [[c, list(e)] for c, e in self.terms]

    def __call__(self, q):
        """Evaluate at one point (shape ``(np,)``) or many (``(N, np)``)."""
        q = np.asarray(q)
        single = q.ndim <= 1
        Q = np.atleast_2d(q.reshape(-1, self.np) if single else q)
        out = np.zeros(Q.shape[0], dtype=np.result_type(Q.dtype, float))
        for coef, exps in self.terms:
            val = np.full(Q.shape[0], coef, dtype=out.dtype)
            for k, e in enumerate(exps):
                if e:
                    val = val * Q[:, k] ** e
            out = out + val
        return out[0] if single else out

    def __mul__(self, other):
        if isinstance(other, ScalarParamFunction):
            if other.np != self.np:
                raise StructureError("parameter dimensions differ")
            terms = []
            for c1, e1 in self.terms:
                for c2, e2 in other.terms:
                    terms.append((c1 * c2, tuple(a + b for a, b in zip(e1, e2))))
            return ScalarParamFunction(self.np, tuple(terms))
        return ScalarParamFunction(self.np, tuple((c * float(other), e) for c, e in self.terms))

    __rmul__ = __mul__

    def __add__(self, other: "ScalarParamFunction") -> "ScalarParamFunction":
        if other.np != self.np:
            raise StructureError("parameter dimensions differ")
        return ScalarParamFunction(self.np, self.terms + other.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def affine_coefficients(self):
        """Return ``(c0, lin)`` with ``f(q) = c0 + lin @ q``, or None if not affine."""
        c0 = 0.0
        lin = np.zeros(self.np)
        for coef, exps in self.terms:
            deg = sum(exps)
            if deg == 0:
                c0 += coef
            elif deg == 1:
                lin[exps.index(1)] += coef
            else:
                return None
        return c0, lin

    def single_monomial(self):
        """Return ``(coef, exps)`` if the function is one monomial, else None."""
        if len(self.terms) != 1:
            return None
        return self.terms[0]

    def integrate_box(self, lo, hi) -> float:
        """Exact integral over the box ``prod_k [lo_k, hi_k]``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        total = 0.0
        for coef, exps in self.terms:
            val = coef
            for k, e in enumerate(exps):
                val *= (hi[k] ** (e + 1) - lo[k] ** (e + 1)) / (e + 1)
            total += val
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for c, e in self.terms:
            mono = "*".join(
                f"q{k + 1}" + (f"^{p}" if p > 1 else "") for k, p in enumerate(e) if p)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)
