import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from parrom.benchmarks import get_benchmark
from parrom.optimize import ObjectiveContext, OptimizerConfig, bfgs_minimize

from _builders import io_layout, io_pair, UNIT_SQUARE

settings.register_profile("default", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class BenchRun:
    def __init__(self, name):
        self.spec = get_benchmark(name)
        self.fom = self.spec.fom
        self.layout = self.spec.layout()
        self.ctx = ObjectiveContext(self.fom, self.layout, self.spec.initial_rom(), self.spec.domain)
        self.result = bfgs_minimize(self.ctx.x0(), self.ctx, OptimizerConfig(grad_tol=self.spec.grad_tol))
        self.rom = self.result.rom
        self.a, self.b = float(self.spec.domain.lo[0]), float(self.spec.domain.hi[0])


@pytest.fixture(scope="session")
def synth6_run():
    return BenchRun("synth6")


@pytest.fixture(scope="session")
def penzl_run():
    return BenchRun("penzl12")


@pytest.fixture(scope="session", params=["synth6", "penzl12"])
def bench_run(request, synth6_run, penzl_run):
    return {"synth6": synth6_run, "penzl12": penzl_run}[request.param]


@pytest.fixture(scope="session")
def io_run():
    """Optimized SISO input/output-form pair on the unit square."""
    fom, template = io_pair(3)
    ctx = ObjectiveContext(fom, io_layout(template), template, UNIT_SQUARE)
    res = bfgs_minimize(ctx.x0(), ctx, OptimizerConfig(grad_tol=1e-7))
    assert res.converged, res.message
    return fom, res.rom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(request):
    """Record one acceptance line; they are replayed in the terminal summary."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


_VERDICTS = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
