import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parrom.benchmarks import get_benchmark
from parrom.conditions import (ConditionBasis, ConditionReport, LogKernelPoint, build_aux_tf,
                               check_dynamics, check_general, check_io, check_io_lines,
                               cross_check_dynamics, cross_check_io, default_basis, eval_G, f_kernel,
                               f_kernel_partials, max_rel_err, moment_weights, weighted_aux_error)
from parrom.conditions.report import ReportList
from parrom.errors import BranchDomain, HypothesisFailure, InternalInconsistency, StructureError
from parrom.model import (ParameterDomain, PoleResidueMode, PoleResidueModel, eval_transfer,
                          eval_transfer_ds)
from parrom.norms import adaptive_gk, gauss_legendre, h2l2_error
from parrom.paramfunc import ScalarParamFunction as F

from _builders import ONE1, io_pair, io_state_space, kernel_point, UNIT_SQUARE

E = np.e


def kernel_oracle(pt):
    xa, xb = pt.shifted
    f = lambda q: 1.0 / (xa + (q - pt.a) / (pt.b - pt.a) * (xb - xa))
    val, _ = adaptive_gk(f, [pt.a, pt.b], 1e-13)
    return val


def perturbed(rom, eps, seed=0):
    """Every residue vector and pole moved by a relative ``eps``."""
    rng = np.random.default_rng(seed)
    modes = []
    for m in rom.modes:
        modes.append(PoleResidueMode(m.lambda0 * (1 + eps * rng.normal()), m.lambda_lin,
                                     m.b_terms, tuple((fn, v * (1 + eps * rng.normal()))
                                                      for fn, v in m.c_terms)))
    return rom.with_modes(modes, real=False)


# kernel -------------------------------------------------------------------------

def test_kernel_examples():
    assert f_kernel(LogKernelPoint(2, 2, 0, 0, 0, 1)) == pytest.approx(0.5, rel=1e-15)
    assert f_kernel(LogKernelPoint(1, E, 0, 0, 0, 1)) == pytest.approx(1 / (E - 1), rel=1e-15)
    assert f_kernel(LogKernelPoint(1, E, 0, 0, 0, 1)).real == pytest.approx(0.581977, abs=1e-6)


@pytest.mark.parametrize("args", [(-1, 1, 0, 0, 0, 1), (1, 1j, 0, 0, 0, 1), (1, 1, 0, 0, 1, 1)])
def test_kernel_domain_errors(args):
    with pytest.raises(BranchDomain):
        LogKernelPoint(*args)


@given(st.integers(0, 2 ** 31))
def test_kernel_matches_quadrature(seed):
    pt = kernel_point(np.random.default_rng(seed))
    ref = kernel_oracle(pt)
    assert abs(f_kernel(pt) - ref) <= 1e-10 * abs(ref)


@given(st.integers(0, 2 ** 31))
def test_kernel_partials_match_fd(seed):
    pt = kernel_point(np.random.default_rng(seed))
    fa, fb = f_kernel_partials(pt)
    xa, xb = pt.shifted
    for which, ref in (("s_a", fa), ("s_b", fb)):
        h = 1e-5 * abs(xa if which == "s_a" else xb)
        shift = lambda d: LogKernelPoint(pt.s_a + (d if which == "s_a" else 0),
                                         pt.s_b + (d if which == "s_b" else 0),
                                         pt.sigma_a, pt.sigma_b, pt.a, pt.b)
        fd = (f_kernel(shift(h)) - f_kernel(shift(-h))) / (2 * h)
        assert abs(fd - ref) <= 1e-7 * max(abs(fa), abs(fb))
    h = 1e-5 * min(abs(xa), abs(xb))
    both = lambda d: LogKernelPoint(pt.s_a + d, pt.s_b + d, pt.sigma_a, pt.sigma_b, pt.a, pt.b)
    fd = (f_kernel(both(h)) - f_kernel(both(-h))) / (2 * h)
    assert abs(fd - (fa + fb)) <= 1e-7 * max(abs(fa), abs(fb))


def test_kernel_partials_at_coincident_point():
    pt = LogKernelPoint(3 + 1j, 3 + 1j, 1, 1, 0.5, 2.0)
    fa, fb = f_kernel_partials(pt)
    assert fa + fb == pytest.approx(-1.5 / (2 + 1j) ** 2, rel=1e-14)
    assert fa == pytest.approx(-1.5 / (2 * (2 + 1j) ** 2), rel=1e-14)


# modified functions ----------------------------------------------------------------

def test_G_of_single_constant_mode():
    R = np.array([[2.0, -1.0]])
    mode = PoleResidueMode(-3 + 1j, [0.0], residue_terms=((ONE1, R),))
    m = PoleResidueModel(1, 2, 1, (mode,))
    G, _, _ = eval_G(m, 1 + 2j, 1 + 2j, 0.5, 3.0)
    np.testing.assert_allclose(G, 2.5 * R / (1 + 2j - (-3 + 1j)), rtol=1e-14)


def test_G_identities_against_line_quadrature(bench_run):
    fom, rom, a, b = bench_run.fom, bench_run.rom, bench_run.a, bench_run.b
    rule = gauss_legendre(200, a, b)
    for mode in rom.modes:
        lam = lambda q: mode.pole(np.array([q]))
        sa, sb = -np.conj(lam(a)), -np.conj(lam(b))
        G, Ga, Gb = eval_G(fom, sa, sb, a, b)
        pts = [(q, w, -np.conj(lam(q))) for q, w in zip(rule.nodes, rule.weights)]
        IH = sum(w * eval_transfer(fom, s, [q]) for q, w, s in pts)
        IdH = sum(w * eval_transfer_ds(fom, s, [q]) for q, w, s in pts)
        IqdH = sum(w * q * eval_transfer_ds(fom, s, [q]) for q, w, s in pts)
        assert np.linalg.norm(G - IH) <= 1e-9 * np.linalg.norm(IH)
        assert np.linalg.norm(Ga + Gb - IdH) <= 1e-8 * np.linalg.norm(IdH)
        assert np.linalg.norm(a * Ga + b * Gb - IqdH) <= 1e-8 * np.linalg.norm(IqdH)


def test_dynamics_requires_one_parameter_and_constant_residues():
    fom, rom = io_pair(1)
    with pytest.raises(StructureError):
        check_dynamics(fom, rom, 0, 1)
    mode = PoleResidueMode(-1, [0.5], ((ONE1, [1.0]),), ((F.coordinate(0, 1), [1.0]),))
    m = PoleResidueModel(1, 1, 1, (mode,))
    with pytest.raises(StructureError):
        check_dynamics(m, m, 0, 1)


# checkers on exact copies -------------------------------------------------------------

@pytest.mark.parametrize("name", ["synth6", "penzl12"])
def test_exact_copy_passes_dynamics_and_general(name):
    spec = get_benchmark(name)
    fom = spec.fom
    a, b = float(spec.domain.lo[0]), float(spec.domain.hi[0])
    assert max_rel_err(check_dynamics(fom, fom, a, b)) <= 1e-12
    assert max_rel_err(check_general(fom, fom, spec.domain)) <= 1e-12


def test_exact_copy_passes_io_checks():
    fom, _ = io_pair(2)
    assert max_rel_err(check_io(fom, fom)) <= 1e-12
    lines = check_io_lines(fom, fom, np.linspace(0, 1, 11))
    assert lines and max_rel_err(lines) <= 1e-12
    assert max_rel_err(check_general(fom, fom, UNIT_SQUARE.with_order(16))) <= 1e-12


def test_default_basis():
    spec = get_benchmark("synth6")
    basis = default_basis(spec.initial_rom())
    one, q = F.one(1), F.coordinate(0, 1)
    assert basis == ConditionBasis((one, q), (one,), (one,))


# checkers on optimized and perturbed ROMs ------------------------------------------------

def test_converged_benchmarks_satisfy_all_conditions(bench_run):
    dyn = check_dynamics(bench_run.fom, bench_run.rom, bench_run.a, bench_run.b)
    gen = check_general(bench_run.fom, bench_run.rom, bench_run.spec.domain)
    assert len(dyn) == 4 * bench_run.rom.order
    assert max_rel_err(dyn) <= 1e-6 and max_rel_err(gen) <= 1e-6


def test_checkers_are_not_vacuous(synth6_run):
    bad = perturbed(synth6_run.rom, 1e-2)
    assert max_rel_err(check_dynamics(synth6_run.fom, bad, synth6_run.a, synth6_run.b)) > 1e-4
    assert max_rel_err(check_general(synth6_run.fom, bad, synth6_run.spec.domain)) > 1e-4


def test_io_checker_is_not_vacuous(io_run):
    fom, rom = io_run
    assert max_rel_err(check_io(fom, perturbed(rom, 1e-2))) >= 1e-3


def test_gauge_invariance_of_residuals(synth6_run):
    rom = synth6_run.rom
    t = 2.5 - 0.5j
    modes = [PoleResidueMode(m.lambda0, m.lambda_lin, tuple((fn, v * t) for fn, v in m.b_terms),
                             tuple((fn, v / np.conj(t)) for fn, v in m.c_terms)) for m in rom.modes]
    scaled = rom.with_modes(modes, real=False)
    r1 = check_dynamics(synth6_run.fom, rom, synth6_run.a, synth6_run.b)
    r2 = check_dynamics(synth6_run.fom, scaled, synth6_run.a, synth6_run.b)
    for x, y in zip(r1, r2):
        assert y.rel_err == pytest.approx(x.rel_err, rel=1e-6, abs=1e-14)


def test_conjugate_partners_have_equal_residuals(synth6_run):
    reps = check_dynamics(synth6_run.fom, synth6_run.rom, synth6_run.a, synth6_run.b)
    by = {(r.condition_id, r.mode): r.rel_err for r in reps}
    for cid in ("dyn_right", "dyn_left", "dyn_dsa", "dyn_dsb"):
        for l in (0, 2):
            assert by[(cid, l + 1)] == pytest.approx(by[(cid, l)], rel=1e-6, abs=1e-14)


def test_degenerate_mode_is_flagged(synth6_run):
    rom = synth6_run.rom
    zero_c = PoleResidueMode(-5.0, [0.0], ((ONE1, [1.0]),), ((ONE1, [0.0]),))
    with_zero = rom.with_modes(rom.modes + (zero_c,), real=False)
    reps = check_dynamics(synth6_run.fom, with_zero, synth6_run.a, synth6_run.b)
    extra = [r for r in reps if r.mode == rom.order]
    assert extra and all(r.degenerate and r.rel_err == 0.0 for r in extra)


def test_coarse_quadrature_is_not_certified(synth6_run):
    with pytest.warns(UserWarning, match="not certified"):
        reps = check_general(synth6_run.fom, synth6_run.rom, synth6_run.spec.domain.with_order(8))
    assert not any(r.certified for r in reps)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        reps = check_general(synth6_run.fom, synth6_run.rom, synth6_run.spec.domain.with_order(16))
    assert all(r.certified for r in reps)


def test_report_build_and_unknown_id():
    r = ConditionReport.build("dyn_right", 0, None, [1.0, 0.0], [1.0, 1e-8])
    assert r.abs_err == pytest.approx(1e-8) and r.rel_err == pytest.approx(1e-8)
    with pytest.raises(ValueError):
        ConditionReport.build("thm9", 0, None, [1.0], [1.0])
    assert max_rel_err(ReportList()) == 0.0


# cross-checks ------------------------------------------------------------------------------

def test_cross_check_dynamics_at_default_order(bench_run):
    res = cross_check_dynamics(bench_run.fom, bench_run.rom, bench_run.spec.domain)
    assert res.ok and res.max_rel_diff <= 1e-8
    res.raise_if_failed()


def test_cross_check_detects_coarse_quadrature(synth6_run):
    with pytest.warns(UserWarning):
        res = cross_check_dynamics(synth6_run.fom, synth6_run.rom, synth6_run.spec.domain.with_order(8))
    assert not res.ok
    with pytest.raises(InternalInconsistency):
        res.raise_if_failed()


# input/output form ---------------------------------------------------------------------------

def test_moment_weights():
    Wb, Wc = moment_weights(1, 2)
    np.testing.assert_array_equal(Wb, [[1, 0.5], [0.5, 1 / 3]])
    assert Wc.shape == (4, 4) and np.all(np.linalg.eigvalsh(Wc) > 0)
    rule = gauss_legendre(4, 0, 1)
    ref = sum(w * np.outer([1, q], [1, q]) for q, w in zip(rule.nodes, rule.weights))
    np.testing.assert_allclose(Wb, ref, rtol=0, atol=1e-14)


@given(st.integers(0, 2 ** 31))
def test_recombined_aux_matches_transfer(seed):
    rng = np.random.default_rng(seed)
    fom, rom = io_pair(seed % 1000, ni=2, no=2)
    aux = build_aux_tf(rom)
    s, q1, q2 = complex(rng.normal(), 5 * rng.normal()), rng.normal(), rng.normal()
    H = eval_transfer(rom, s, [q1, q2])
    np.testing.assert_allclose(aux.recombine(s, q1, q2), H, rtol=1e-12, atol=1e-12 * np.abs(H).max())
    h = 1e-6
    for d, dq in (("q1", (h, 0)), ("q2", (0, h))):
        fd = (eval_transfer(rom, s, [q1 + dq[0], q2 + dq[1]]) -
              eval_transfer(rom, s, [q1 - dq[0], q2 - dq[1]])) / (2 * h)
        np.testing.assert_allclose(aux.recombine(s, q1, q2, d), fd, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(aux.recombine(s, q1, q2, "s"), eval_transfer_ds(rom, s, [q1, q2]),
                               rtol=1e-12, atol=1e-12)


def test_aux_blocks_vanish_without_parameter_terms():
    one = F.one(2)
    mode = PoleResidueMode(-1 + 2j, [0, 0], ((one, [1.0]),), ((one, [2.0]),))
    aux = build_aux_tf(PoleResidueModel(2, 1, 1, (mode,)))
    M = aux(0.5j)
    assert M[0, 0] != 0 and M[0, 1] == 0 and M[1, 0] == 0 and M[1, 1] == 0


def test_aux_matches_dense_resolvent():
    rng = np.random.default_rng(8)
    sys = io_state_space(rng, 3)
    from parrom.model import state_space_to_pole_residue
    aux = build_aux_tf(state_space_to_pole_residue(sys))
    A = sys.A_terms[0][1]
    Bs = np.hstack([m for _, m in sys.B_terms])
    Cs = np.vstack([m for _, m in sys.C_terms])
    for s in (0.3j, 1 - 2j, 4.0):
        ref = Cs @ np.linalg.solve(s * np.eye(A.shape[0]) - A, Bs)
        np.testing.assert_allclose(aux(s), ref, rtol=1e-10, atol=1e-12)


def test_aux_rejects_parameter_dependent_poles():
    one, q1 = F.one(2), F.coordinate(0, 2)
    mode = PoleResidueMode(-1, [0.5, 0], ((one, [1.0]),), ((one, [1.0]),))
    with pytest.raises(StructureError):
        build_aux_tf(PoleResidueModel(2, 1, 1, (mode,)))
    cross = PoleResidueMode(-1, [0, 0], ((q1, [1.0]),), ((q1, [1.0]),))
    with pytest.raises(StructureError):
        check_io(PoleResidueModel(2, 1, 1, (cross,)), PoleResidueModel(2, 1, 1, (cross,)))


def test_weighted_aux_error_matches_quadrature():
    fom, rom = io_pair(9, ni=2, no=1)
    assert weighted_aux_error(fom, rom) == pytest.approx(h2l2_error(fom, rom, UNIT_SQUARE).total_sq,
                                                         rel=1e-8)


def test_optimized_io_pair(io_run):
    fom, rom = io_run
    assert max_rel_err(check_io(fom, rom)) <= 1e-6
    assert max_rel_err(check_general(fom, rom, UNIT_SQUARE.with_order(16))) <= 1e-6
    assert cross_check_io(fom, rom, UNIT_SQUARE.with_order(16)).max_rel_diff <= 1e-8
    samples = list(np.linspace(0, 1, 10)) + [5.0]
    lines = check_io_lines(fom, rom, samples)
    assert len(lines) == rom.order * (4 * len(samples) + 1)
    assert max_rel_err(lines) <= 1e-6


def test_line_hypothesis_failure_is_skipped():
    one, q1, q2 = F.one(2), F.coordinate(0, 2), F.coordinate(1, 2)
    bad = PoleResidueMode(-1, [0, 0], ((one, [-0.5]), (q1, [1.0])), ((one, [1.0]), (q2, [1.0])))
    good = PoleResidueMode(-2, [0, 0], ((one, [1.0]), (q1, [1.0])), ((one, [1.0]), (q2, [1.0])))
    rom = PoleResidueModel(2, 1, 1, (bad, good))
    reps = check_io_lines(rom, rom, [0.0, 1.0])
    assert len(reps.skipped) == 1 and isinstance(reps.skipped[0], HypothesisFailure)
    assert {r.mode for r in reps} == {1}


def test_lines_require_siso():
    fom, rom = io_pair(1, ni=2)
    with pytest.raises(StructureError):
        check_io_lines(fom, rom, [0.0])
