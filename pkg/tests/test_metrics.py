import pytest

from hyperdg.metrics import (
    OpCounters,
    arithmetic_intensity,
    flops_per_dof_model,
    mapping_memory_per_dof,
    merge_counters,
    throughput,
    working_set,
)


def test_throughput_and_renormalization():
    c = OpCounters(dofs_processed=1000, wall_seconds=2.0)
    assert throughput(c) == 500.0
    assert throughput(c, renormalize=(3, 2)) == pytest.approx(500.0 * 9 / 16)
    assert throughput(OpCounters()) == 0.0
    with pytest.raises(ValueError):
        throughput(OpCounters(dofs_processed=5))


def test_intensity():
    assert arithmetic_intensity(OpCounters(flops=160, modeled_doubles_moved=10)) == 2.0
    with pytest.raises(ValueError):
        arithmetic_intensity(OpCounters(flops=1))
    with pytest.raises(ValueError):
        arithmetic_intensity(OpCounters(flops=1, modeled_doubles_moved=1), level="L2")


def test_counter_arithmetic():
    a = OpCounters(flops=3, flux_evals=2)
    b = OpCounters(flops=4, ghost_updates=1)
    s = a + b
    assert (s.flops, s.flux_evals, s.ghost_updates) == (7, 2, 1)
    assert a.flops == 3
    assert s.delta(a).as_dict() == b.as_dict()
    assert merge_counters([a, b, a]).flops == 10


def test_working_set_examples():
    assert working_set(3, 6, 8) == 8 * 4**6
    assert working_set(1, 2, 1) == 4


def test_model_values():
    assert flops_per_dof_model(3, 6, "basis_change_sweep") == 7.0
    assert flops_per_dof_model(3, 2, "cell_integrals") == 2 * (21.0 + 2.0)
    with pytest.raises(ValueError):
        flops_per_dof_model(3, 2, "faces")
    with pytest.raises(ValueError):
        mapping_memory_per_dof(3, 1, 1, "none")
    assert mapping_memory_per_dof(1, 1, 1, "tensor_per_space") == pytest.approx((2 + 2) / 4)
