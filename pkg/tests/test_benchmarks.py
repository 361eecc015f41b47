import numpy as np
import pytest

from parrom.benchmarks import (BENCHMARKS, get_benchmark, penzl12_published_rom, penzl12_state_space,
                               synth6_published_rom, synth6_state_space)
from parrom.model import ParameterDomain, check_stability
from parrom.optimize import real_coordinates

# converged block coordinates (sigma0, sigma1, omega0, omega1) and C as printed, 5 digits
SYNTH6_PRINTED = [-7.0213e-3, -11.014, 9.9975, 0.24074, -1.6795, -39.184, 29.261, 0.95464,
                  1.1211, -0.019113, 1.7966, 0.65666]


def test_synth6_structure():
    sys = synth6_state_space()
    assert sys.n == 6 and sys.ni == 1 and sys.no == 1
    np.testing.assert_array_equal(sys.B([0.5]).ravel(), [2, 0, 2, 0, 2, 0])
    np.testing.assert_array_equal(sys.C([0.5]).ravel(), [1, 0, 1, 0, 1, 0])
    fom = get_benchmark("synth6").fom
    poles = np.sort_complex(fom.poles([1.0]))
    np.testing.assert_allclose(sorted(abs(poles.imag)), [10, 10, 30, 30, 50, 50])


def test_penzl12_structure():
    sys = penzl12_state_space()
    assert sys.n == 12
    np.testing.assert_array_equal(sys.B([1.0]).ravel(), [5, 5] + [1] * 10)
    fom = get_benchmark("penzl12").fom
    np.testing.assert_allclose(sorted(fom.poles([3.0]).real)[:10], -np.arange(10.0, 0, -1))


@pytest.mark.parametrize("name", sorted(BENCHMARKS))
def test_builtin_foms_are_stable(name):
    spec = get_benchmark(name)
    assert check_stability(spec.fom, spec.domain).stable


def test_unknown_benchmark():
    with pytest.raises(KeyError, match="choose from"):
        get_benchmark("penzl16")


def test_synth6_reproduces_printed_rom(synth6_run):
    assert synth6_run.result.converged and synth6_run.result.grad_inf_norm <= 1e-8
    x = synth6_run.result.x
    np.testing.assert_allclose(x, SYNTH6_PRINTED, rtol=5e-4, atol=5e-6)


def test_penzl12_reproduces_printed_poles(penzl_run):
    coords = real_coordinates(penzl_run.rom, penzl_run.layout)
    np.testing.assert_allclose(coords[:6], [-1.0030, 7.2387e-6, 2.2567e-3, 1.0000, -3.5530, 2.4940e-4],
                               rtol=5e-4, atol=5e-8)


@pytest.mark.parametrize("factory,name", [(synth6_published_rom, "synth6"),
                                          (penzl12_published_rom, "penzl12")])
def test_published_roms_are_close_but_not_converged(factory, name):
    from parrom.conditions import check_dynamics, max_rel_err
    spec = get_benchmark(name)
    rom = factory()
    res = max_rel_err(check_dynamics(spec.fom, rom, float(spec.domain.lo[0]), float(spec.domain.hi[0])))
    assert 1e-6 < res < 1e-3


def test_with_order_keeps_everything_else():
    spec = get_benchmark("penzl12").with_order(8)
    assert spec.domain == ParameterDomain.interval(1.0, 100.0, 8) and spec.grad_tol == 1e-6
