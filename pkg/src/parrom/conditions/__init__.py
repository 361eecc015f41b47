"""Interpolatory necessary optimality conditions and their residual reports."""

from .crosscheck import CROSS_TOL, CrossCheckResult, cross_check_dynamics, cross_check_io
from .dynamics import LogKernelPoint, check_dynamics, eval_G, f_kernel, f_kernel_partials
from .general import ConditionBasis, check_general, default_basis
from .io import (AuxTransfer, aux_from_blocks, build_aux_tf, check_io, check_io_lines,
                 moment_weights, weighted_aux_error)
from .report import CONDITION_IDS, LEGEND, ConditionReport, ReportList, max_rel_err

__all__ = [
    "AuxTransfer", "CONDITION_IDS", "CROSS_TOL", "ConditionBasis", "ConditionReport",
    "CrossCheckResult", "LEGEND", "LogKernelPoint", "ReportList", "aux_from_blocks",
    "build_aux_tf", "check_dynamics", "check_general", "check_io", "check_io_lines",
    "cross_check_dynamics", "cross_check_io", "default_basis", "eval_G", "f_kernel",
    "f_kernel_partials", "max_rel_err", "moment_weights", "weighted_aux_error",
]
