import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hyperdg.basis import build_basis
from hyperdg.mesh import build_topology
from hyperdg.partition import make_layout
from hyperdg.vector import BUFFERED, Partitioner, allocate

settings.register_profile("repo", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def single_rank_setup(d_x, d_v, k, sub_x, sub_v, deform=None, quadrature="gauss_legendre"):
    topo = build_topology(d_x, d_v, (sub_x,) * d_x, (sub_v,) * d_v, deformation_x=deform, deformation_v=deform)
    basis = build_basis(k, quadrature)
    p = Partitioner(topo, make_layout(topo), 0, k)
    return topo, basis, p


def random_vector(p, seed=0, mode=BUFFERED, dist="uniform"):
    v = allocate(p, mode)
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 1.0, v.owned.shape) if dist == "uniform" else rng.standard_normal(v.owned.shape)
    v.assign(vals)
    v.update_ghost_values()
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


@pytest.fixture
def record():
    """record(n, ok, detail): one summary line per acceptance criterion."""

    def _record(n, ok, detail):
        ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[n])
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
