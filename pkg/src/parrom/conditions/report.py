"""Condition residual records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

REL_FLOOR = 1e-300

CONDITION_IDS = (
    # quadrature form, any separable diagonal ROM
    "general_right", "general_left", "general_hermite",
    # auxiliary block form, parameters only in inputs and outputs
    "io_right", "io_left", "io_hermite",
    # line interpolation, SISO input/output form
    "line_value_q1", "line_dq2", "line_value_q2", "line_dq1", "line_hermite",
    # modified-function form, one parameter in the dynamics
    "dyn_right", "dyn_left", "dyn_dsa", "dyn_dsb",
)

LEGEND = {
    "general_right": "right tangential Lagrange, integral weighted by an output function",
    "general_left": "left tangential Lagrange, integral weighted by an input function",
    "general_hermite": "bitangential Hermite in s, integral weighted by a pole function",
    "io_right": "right Lagrange of the auxiliary block transfer function",
    "io_left": "left Lagrange of the auxiliary block transfer function",
    "io_hermite": "bitangential Hermite of the auxiliary block transfer function",
    "line_value_q1": "value along the line q1 = q1*(mode), sample is q2",
    "line_dq2": "q2-derivative along the line q1 = q1*(mode), sample is q2",
    "line_value_q2": "value along the line q2 = q2*(mode), sample is q1",
    "line_dq1": "q1-derivative along the line q2 = q2*(mode), sample is q1",
    "line_hermite": "s-derivative at (q1*, q2*)",
    "dyn_right": "Lagrange of G (right tangential)",
    "dyn_left": "Lagrange of G (left tangential); SISO collapses it onto dyn_right",
    "dyn_dsa": "Hermite interpolation of dG/ds_a",
    "dyn_dsb": "Hermite interpolation of dG/ds_b",
}


@dataclass(frozen=True)
class ConditionReport:
    """Both sides of one interpolation condition and their discrepancy.

    ``rel_err`` divides by the Frobenius norm of the full-model side.
    ``index`` is the weight-function index or, for line conditions, the
    sample index. ``certified`` is False when the evaluation was too coarse to
    count as evidence.
    """

    condition_id: str
    mode: int
    index: Optional[int]
    lhs: np.ndarray
    rhs: np.ndarray
    abs_err: float
    rel_err: float
    degenerate: bool = False
    certified: bool = True
    sample: Optional[complex] = None

    @classmethod
    def build(cls, condition_id, mode, index, lhs, rhs, degenerate=False, certified=True,
              sample=None) -> "ConditionReport":
        if condition_id not in CONDITION_IDS:
            raise ValueError(f"unknown condition id {condition_id!r}")
        lhs = np.asarray(lhs, dtype=complex)
        rhs = np.asarray(rhs, dtype=complex)
        if degenerate:
            return cls(condition_id, mode, index, lhs, rhs, 0.0, 0.0, True, certified, sample)
        abs_err = float(np.linalg.norm(np.ravel(lhs - rhs)))
        rel_err = abs_err / max(float(np.linalg.norm(np.ravel(lhs))), REL_FLOOR)
        return cls(condition_id, mode, index, lhs, rhs, abs_err, rel_err, False, certified, sample)


class ReportList(list):
    """List of reports that also carries the modes skipped for a failed hypothesis."""

    def __init__(self, reports=(), skipped=()):
        super().__init__(reports)
        self.skipped = list(skipped)


def max_rel_err(reports) -> float:
    return max((r.rel_err for r in reports), default=0.0)
