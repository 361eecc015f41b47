import numpy as np
import pytest
from hypothesis import given, strategies as st

from parrom.benchmarks import get_benchmark, synth6_published_rom
from parrom.errors import Instability
from parrom.model import ParameterDomain, PoleResidueMode, PoleResidueModel
from parrom.norms import (adaptive_gk, gauss_legendre, h2_error_sq_at_q, h2_inner_pr, h2l2_error,
                          h2_norm_freq_oracle)

from _builders import ONE1, io_pair, random_stable_model, UNIT_SQUARE

# frozen outputs of this implementation, each also checked against an independent oracle below
PENZL_FOM_NORM_Q3 = 28.72924379382873
SYNTH6_PUBLISHED_ERR_SQ_Q05 = 0.0030106879889848503
SYNTH6_PUBLISHED_TOTAL_SQ = 0.04905859800621012


def model_of(poles, residues):
    modes = tuple(PoleResidueMode(p, [0.0], ((ONE1, [1.0]),), ((ONE1, [r]),))
                  for p, r in zip(poles, residues))
    return PoleResidueModel(1, 1, 1, modes)


def test_gauss_legendre_midpoint():
    r = gauss_legendre(1, 0, 1)
    assert r.nodes[0] == 0.5 and r.weights[0] == 1.0


@given(st.integers(1, 40), st.floats(-5, 5), st.floats(0.1, 10))
def test_gauss_legendre_rule(m, a, width):
    b = a + width
    r = gauss_legendre(m, a, b)
    assert abs(r.weights.sum() - width) <= 1e-13 * width
    assert np.all(np.diff(r.nodes) > 0) and r.nodes[0] > a and r.nodes[-1] < b
    k = 2 * m - 1
    exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    assert r.weights @ r.nodes ** k == pytest.approx(exact, rel=1e-10, abs=1e-10 * max(1, abs(b) ** k))


def test_inner_product_examples():
    one = model_of([-1.0], [1.0])
    assert h2_inner_pr(one, one, [0.0]) == pytest.approx(0.5, rel=1e-15)
    assert h2_norm_freq_oracle(one, [0.0], tol=1e-10) == pytest.approx(np.sqrt(0.5), rel=1e-8)
    pair = model_of([-1 + 1j, -1 - 1j], [1.0, 1.0])
    val = np.sqrt(h2_inner_pr(pair, pair, [0.0]).real)
    assert val == pytest.approx(h2_norm_freq_oracle(pair, [0.0]), rel=1e-8)
    far = model_of([-1e6], [1.0])
    assert h2_inner_pr(one, far, [0.0]) == pytest.approx(1 / (1 + 1e6), rel=1e-10)


def test_empty_model_norm():
    e = PoleResidueModel.empty(1, 1, 1)
    assert h2_norm_freq_oracle(e, [0.0]) == 0.0
    assert h2_inner_pr(e, e, [0.0]) == 0


def test_unstable_inner_product_raises():
    m = model_of([0.5], [1.0])
    with pytest.raises(Instability):
        h2_inner_pr(m, m, [0.0])


@given(st.integers(0, 2 ** 31))
def test_conjugate_symmetry_and_cauchy_schwarz(seed):
    rng = np.random.default_rng(seed)
    m1 = random_stable_model(rng, int(rng.integers(1, 6)), ni=2, no=2)
    m2 = random_stable_model(rng, int(rng.integers(1, 6)), ni=2, no=2)
    a, b = h2_inner_pr(m1, m2, [0.0]), h2_inner_pr(m2, m1, [0.0])
    assert abs(a - np.conj(b)) <= 1e-13 * max(1, abs(a))
    n1, n2 = h2_inner_pr(m1, m1, [0.0]).real, h2_inner_pr(m2, m2, [0.0]).real
    assert abs(a) <= np.sqrt(n1 * n2) * (1 + 1e-12)


def test_frozen_penzl_norm_matches_oracle():
    f = get_benchmark("penzl12").fom
    val = float(np.sqrt(h2_inner_pr(f, f, [3.0]).real))
    assert val == pytest.approx(PENZL_FOM_NORM_Q3, rel=1e-12)
    assert h2_norm_freq_oracle(f, [3.0]) == pytest.approx(PENZL_FOM_NORM_Q3, rel=1e-7)


def test_published_synth6_error_at_midpoint():
    spec = get_benchmark("synth6")
    rom = synth6_published_rom()
    val = h2_error_sq_at_q(spec.fom, rom, [0.5])
    assert val == pytest.approx(SYNTH6_PUBLISHED_ERR_SQ_Q05, rel=1e-12)
    diff = spec.fom + rom.scaled(-1.0)
    assert np.sqrt(val) == pytest.approx(h2_norm_freq_oracle(diff, [0.5]), rel=1e-6)


def test_error_to_self_and_to_empty():
    spec = get_benchmark("penzl12")
    f = spec.fom
    norm_sq = h2l2_error(f, f.with_modes(()), spec.domain).total_sq
    assert h2l2_error(f, f, spec.domain).total_sq <= 1e-12 * norm_sq
    assert h2_error_sq_at_q(f, f.with_modes(()), [3.0]) == pytest.approx(PENZL_FOM_NORM_Q3 ** 2, rel=1e-12)


def test_breakdown_sums_and_doubling():
    spec = get_benchmark("synth6")
    bd = h2l2_error(spec.fom, synth6_published_rom(), spec.domain)
    assert bd.total_sq == pytest.approx(SYNTH6_PUBLISHED_TOTAL_SQ, rel=1e-12)
    assert sum(w * e for _, e, w in bd.per_node) == pytest.approx(bd.total_sq, rel=1e-13)
    assert all(e >= 0 for _, e, _ in bd.per_node)
    doubled = h2l2_error(spec.fom, synth6_published_rom(), spec.domain.with_order(128)).total_sq
    assert abs(doubled - bd.total_sq) <= 1e-10 * bd.total_sq


def test_io_form_error_against_brute_force_quadrature():
    fom, rom = io_pair(5)
    fine = h2l2_error(fom, rom, ParameterDomain(np.zeros(2), np.ones(2), 24)).total_sq
    nodes, weights = UNIT_SQUARE.tensor_rule()
    brute = sum(w * h2_error_sq_at_q(fom, rom, q) for q, w in zip(nodes, weights))
    assert fine == pytest.approx(brute, rel=1e-12)


def test_threaded_evaluation_is_bit_identical(monkeypatch):
    spec = get_benchmark("synth6")
    rom = synth6_published_rom()
    serial = h2l2_error(spec.fom, rom, spec.domain).total_sq
    monkeypatch.setenv("PARROM_THREADS", "4")
    assert h2l2_error(spec.fom, rom, spec.domain).total_sq == serial


def test_adaptive_gk_polynomial_and_peak():
    val, _ = adaptive_gk(lambda x: x ** 3, [0.0, 2.0], 1e-12)
    assert val == pytest.approx(4.0, rel=1e-14)
    val, _ = adaptive_gk(lambda x: 1e-3 / (x ** 2 + 1e-6), [-1.0, 1.0], 1e-10)
    assert val == pytest.approx(2 * np.arctan(1e3), rel=1e-10)
