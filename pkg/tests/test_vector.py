import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_vector, single_rank_setup
from hyperdg.basis import build_basis
from hyperdg.comm import run_spmd
from hyperdg.mesh import build_topology
from hyperdg.operators import AdvectionOperator, ConstantField
from hyperdg.partition import make_layout
from hyperdg.vector import (
    BUFFERED,
    NON_BUFFERED,
    GhostProtocolError,
    Partitioner,
    allocate,
    export_snapshot,
    face_trace,
    from_lexicographic,
    read_snapshot,
    to_lexicographic,
)


def global_random(topo, k, seed):
    return np.random.default_rng(seed).uniform(-1, 1, (topo.n_cells, (k + 1) ** topo.d))


def distributed_apply(topo, k, grid, mode, values, node_block=None, loop="ecl", v_len=None):
    layout = make_layout(topo, *grid, node_block)
    basis = build_basis(k)
    field = ConstantField((0.7, -0.3, 0.4, 0.9)[: topo.d])

    def prog(comm):
        p = Partitioner(topo, layout, comm.rank, k, comm)
        src = allocate(p, mode)
        src.from_global(values)
        dst = allocate(p, mode, ghosted=False)
        src.update_ghost_values()
        op = AdvectionOperator(p, basis, v_len=v_len)
        (op.apply_fcl if loop == "fcl" else op.apply_ecl)(src, dst, 0.0, field)
        src.release_ghost_values()
        return dst.to_global()

    return run_spmd(layout.n_ranks, prog)[0]


def test_allocation_sizes():
    topo, _, p = single_rank_setup(1, 1, 2, 4, 3)
    v = allocate(p, BUFFERED)
    assert v.owned.shape == (12, 9)
    assert v.allocated_ghost_doubles() == 0
    assert p.allocations == 1


def test_ghost_sizes_two_ranks():
    topo = build_topology(1, 1, (4,), (3,))
    k = 2
    for block, expect_nb in (((1, 1), 2 * 3 * 3), ((2, 1), 0)):
        layout = make_layout(topo, 2, 1, block)

        def prog(comm):
            p = Partitioner(topo, layout, comm.rank, k, comm)
            return allocate(p, BUFFERED).allocated_ghost_doubles(), allocate(p, NON_BUFFERED).allocated_ghost_doubles()

        for buffered, non_buffered in run_spmd(2, prog):
            # each rank owns 2 x-columns of 3 cells; both x-faces of the block are remote
            assert buffered == 2 * 3 * 3
            assert non_buffered == expect_nb


def test_two_rank_ping():
    topo = build_topology(1, 1, (2,), (1,))
    layout = make_layout(topo, 2, 1, (1, 1))
    k = 1

    def prog(comm):
        p = Partitioner(topo, layout, comm.rank, k, comm)
        v = allocate(p, NON_BUFFERED)
        v.fill(float(comm.rank + 1))
        v.update_ghost_values()
        traces = [v.read_face_dofs(p.owned_pairs()[0], f) for f in (0, 1)]
        v.release_ghost_values()
        return traces

    for rank, traces in enumerate(run_spmd(2, prog)):
        other = 2.0 - rank
        assert np.all(traces[0] == other) and np.all(traces[1] == other)


def test_read_before_update_raises():
    topo = build_topology(1, 1, (4,), (2,))
    layout = make_layout(topo, 2, 1, (1, 1))

    def prog(comm):
        p = Partitioner(topo, layout, comm.rank, 1, comm)
        v = allocate(p, NON_BUFFERED)
        errors = 0
        try:
            v.read_face_dofs(p.owned_pairs()[0], 0)
        except GhostProtocolError:
            errors += 1
        try:
            v.update_ghost_values_finish()
        except GhostProtocolError:
            errors += 1
        v.update_ghost_values_start()
        try:
            v.owned[0, 0] = 3.0
            v.mark_modified()
        except GhostProtocolError:
            errors += 1
        try:
            v.update_ghost_values_start()
        except GhostProtocolError:
            errors += 1
        v.update_ghost_values_finish()
        v.read_face_dofs(p.owned_pairs()[0], 0)
        v.mark_modified()
        try:
            v.read_face_dofs(p.owned_pairs()[0], 0)
        except GhostProtocolError:
            errors += 1
        return errors

    assert run_spmd(2, prog) == [5, 5]


def test_unghosted_vector_cannot_update():
    topo = build_topology(1, 1, (4,), (2,))
    layout = make_layout(topo, 2, 1, (1, 1))

    def prog(comm):
        p = Partitioner(topo, layout, comm.rank, 1, comm)
        with pytest.raises(GhostProtocolError):
            allocate(p, BUFFERED, ghosted=False).update_ghost_values()
        return True

    assert all(run_spmd(2, prog))


def test_cell_access():
    topo, _, p = single_rank_setup(1, 1, 1, 3, 2)
    v = allocate(p, BUFFERED)
    v.write_cell_dofs((1, 1), np.arange(4.0))
    assert np.array_equal(v.read_cell_dofs((1, 1)), np.arange(4.0).reshape(2, 2))
    with pytest.raises(ValueError):
        v.read_face_dofs((0, 0), 4)
    v.update_ghost_values()
    # across its high x face, cell (0, 1) sees the low face of (1, 1)
    assert np.array_equal(v.read_face_dofs((0, 1), 1), face_trace(np.arange(4.0)[None], 0, 2, 2)[0])


@pytest.mark.parametrize("grid", [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_partition_invariance(grid):
    topo = build_topology(1, 1, (4,), (4,), deformation_x=0.03, deformation_v=0.03)
    k = 2
    vals = global_random(topo, k, 4)
    ref = distributed_apply(topo, k, (1, 1), BUFFERED, vals)
    out = distributed_apply(topo, k, grid, BUFFERED, vals)
    assert np.max(np.abs(out - ref)) <= 1e-14


@pytest.mark.parametrize("block", [None, (1, 1)])
def test_buffered_and_non_buffered_bit_identical(block):
    topo = build_topology(2, 1, (4, 2), (4,))
    k = 1
    vals = global_random(topo, k, 8)
    a = distributed_apply(topo, k, (2, 2), BUFFERED, vals, block)
    b = distributed_apply(topo, k, (2, 2), NON_BUFFERED, vals, block)
    assert np.array_equal(a, b)


def test_fcl_partition_invariance():
    topo = build_topology(1, 1, (4,), (4,))
    vals = global_random(topo, 2, 6)
    ref = distributed_apply(topo, 2, (1, 1), BUFFERED, vals, loop="fcl")
    out = distributed_apply(topo, 2, (2, 2), BUFFERED, vals, (1, 1), loop="fcl")
    assert np.max(np.abs(out - ref)) <= 1e-14


@given(d=st.integers(2, 4), k=st.integers(1, 3), seed=st.integers(0, 999))
def test_lexicographic_roundtrip(d, k, seed):
    vals = np.random.default_rng(seed).uniform(size=(3, (k + 1) ** d))
    assert np.array_equal(from_lexicographic(to_lexicographic(vals, d, k + 1), d, k + 1), vals)


def test_lexicographic_axis0_fastest():
    vals = np.arange(4.0).reshape(1, 4)  # C order: index = 2 * i0 + i1
    assert list(to_lexicographic(vals, 2, 2)) == [0.0, 2.0, 1.0, 3.0]


def test_snapshot_roundtrip(tmp_path):
    topo = build_topology(2, 1, (2, 3), (2,))
    vals = global_random(topo, 2, 1)
    path = tmp_path / "state.bin"
    export_snapshot(path, topo, 2, vals)
    header, back = read_snapshot(path)
    assert header == {"d_x": 2, "d_v": 1, "k": 2, "subdivisions_x": (2, 3), "subdivisions_v": (2,)}
    assert np.array_equal(back, vals)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"nonsense")
    with pytest.raises(ValueError):
        read_snapshot(bad)


def test_ghost_update_counts_transfers():
    topo = build_topology(1, 1, (4,), (4,))
    layout = make_layout(topo, 2, 2, (1, 1))

    def prog(comm):
        p = Partitioner(topo, layout, comm.rank, 1, comm)
        v = random_vector(p, seed=comm.rank, mode=NON_BUFFERED)
        return v.ghost_updates, v.transferred_doubles, v.epoch

    for updates, moved, epoch in run_spmd(4, prog):
        assert updates == 1 and epoch == 1
        assert moved > 0
