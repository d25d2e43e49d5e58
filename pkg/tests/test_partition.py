import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperdg.comm import run_spmd
from hyperdg.mesh import build_topology
from hyperdg.partition import (
    estimate_comm_volume,
    ghost_fraction_lower_bound,
    ghost_plan,
    invert_permutation,
    make_layout,
    neighbor_cells,
    total_volume_lower_bound,
    virtual_topology_renumber,
    write_ghost_plan_csv,
)


def topo11(nx=4, nv=4):
    return build_topology(1, 1, (nx,), (nv,))


def test_rank_formula():
    layout = make_layout(build_topology(1, 1, (12,), (8,)), 6, 4)
    assert layout.rank_of(2, 1) == 8
    assert layout.coords(8) == (2, 1)


def test_single_rank_owns_all():
    topo = topo11()
    layout = make_layout(topo)
    assert layout.n_ranks == 1
    assert layout.n_owned(0) == topo.n_cells
    assert len(ghost_plan(topo, layout, 0, 2)) == 0


def test_one_shared_domain_of_48():
    layout = make_layout(build_topology(1, 1, (16,), (12,)), 8, 6, (8, 6))
    assert len(layout.domain_ranks(0)) == 48
    assert len({layout.domain_of(r) for r in range(48)}) == 1


def test_layout_errors():
    topo = topo11(2, 2)
    with pytest.raises(ValueError):
        make_layout(topo, 3, 1)
    with pytest.raises(ValueError):
        make_layout(topo11(8, 8), 4, 2, (3, 1))


def test_uneven_split_remainder_goes_first():
    layout = make_layout(topo11(7, 2), 3, 1)
    assert layout.x_owned == ((0, 3), (3, 5), (5, 7))


@given(nx=st.integers(1, 9), nv=st.integers(1, 9), px=st.integers(1, 4), pv=st.integers(1, 4))
def test_tiling(nx, nv, px, pv):
    topo = topo11(nx, nv)
    if px > nx or pv > nv:
        return
    layout = make_layout(topo, px, pv)
    owners = np.zeros(topo.n_cells, dtype=int)
    for r in range(layout.n_ranks):
        cx, cv = layout.owned_cells(r)
        assert len(cx) > 0
        owners[topo.global_index(cx, cv)] += 1
        assert np.all(layout.owner(cx, cv) == r)
    assert np.all(owners == 1)


def test_renumber_single_block_identity():
    layout = make_layout(topo11(4, 4), 2, 2, (2, 2))
    assert np.array_equal(virtual_topology_renumber(layout), np.arange(4))


def test_renumber_z_curve_order():
    layout = make_layout(topo11(8, 8), 4, 4, (2, 2))
    perm = virtual_topology_renumber(layout)
    # first worker of each block, in visit order
    firsts = []
    for w in range(0, 16, 4):
        r = int(np.nonzero(perm == w)[0][0])
        i, j = layout.coords(r)
        firsts.append((i // 2, j // 2))
    assert firsts == [(0, 0), (1, 0), (0, 1), (1, 1)]


def test_renumber_blocks_contiguous():
    layout = make_layout(topo11(12, 8), 6, 4, (2, 2))
    perm = virtual_topology_renumber(layout)
    inv = invert_permutation(perm)
    assert np.array_equal(perm[inv], np.arange(24))
    assert np.array_equal(inv[perm], np.arange(24))
    for w in range(0, 24, 4):
        doms = {layout.domain_of(int(r)) for r in inv[w : w + 4]}
        assert len(doms) == 1


def _brute_force_ghost_doubles(topo, layout, rank, k):
    cx, cv = layout.owned_cells(rank)
    count = 0
    for x, v in zip(cx.tolist(), cv.tolist()):
        for f in range(2 * topo.d):
            nb = topo.neighbor((x, v), f)
            if layout.owner(*nb) != rank:
                count += (k + 1) ** (topo.d - 1)
    return count


def test_ghost_plan_two_ranks_brute_force():
    topo = topo11(4, 4)
    layout = make_layout(topo, 2, 1)
    for r in range(2):
        plan = ghost_plan(topo, layout, r, 1)
        # two x faces per v-cell, 4 v-cells, 2 doubles per face
        assert plan.ghost_doubles() == 2 * 4 * 2
        assert plan.ghost_doubles() == _brute_force_ghost_doubles(topo, layout, r, 1)
        assert all(e.same_domain for e in plan.entries)  # default block covers the grid
    separate = make_layout(topo, 2, 1, (1, 1))
    assert not any(e.same_domain for e in ghost_plan(topo, separate, 0, 1).entries)


@given(px=st.integers(1, 3), pv=st.integers(1, 3), k=st.integers(1, 2))
def test_ghost_symmetry_and_disjointness(px, pv, k):
    topo = build_topology(2, 1, (3, 2), (4,))
    layout = make_layout(topo, px, pv)
    plans = [ghost_plan(topo, layout, r, k) for r in range(layout.n_ranks)]
    keys = [{(e.owner_rank, tuple(e.cell_pair), e.face_id) for e in pl.entries} for pl in plans]
    for r, pl in enumerate(plans):
        owned = set(zip(*layout.owned_cells(r)))
        for e in pl.entries:
            assert e.dof_count == (k + 1) ** (topo.d - 1)
            assert tuple(e.cell_pair) not in owned
            assert e.owner_rank != r
            mine = tuple(topo.neighbor(e.cell_pair, e.face_id))
            assert mine in owned
            # the owner ghosts our cell across the mirror face
            assert (r, mine, e.face_id ^ 1) in keys[e.owner_rank]


def test_column_group_reduction():
    topo = topo11(4, 6)
    layout = make_layout(topo, 2, 3)

    def prog(comm):
        i, j = layout.coords(comm.rank)
        col = comm.sub(layout.column_group(i))
        row = comm.sub(layout.row_group(j))
        return col.allreduce_sum(5.0), row.allreduce_sum(1.0)

    for col_sum, row_sum in run_spmd(6, prog):
        assert col_sum == 5.0 * layout.p_v
        assert row_sum == layout.p_x


def test_comm_estimate_single_rank():
    est = estimate_comm_volume(topo11(), make_layout(topo11()), 2)
    assert est.counted_volume == (0,)
    assert est.within_upper()


@pytest.mark.parametrize("dims,subs,grid", [
    ((1, 1), (8, 8), (2, 2)), ((1, 1), (8, 8), (4, 2)), ((1, 1), (6, 9), (3, 3)),
    ((2, 2), (4, 4), (4, 4)), ((2, 1), (4, 4), (4, 4)), ((1, 1), (8, 8), (2, 1)),
    ((2, 2), (4, 4), (2, 2)),
])
def test_counted_volume_within_upper_bound(dims, subs, grid):
    topo = build_topology(dims[0], dims[1], (subs[0],) * dims[0], (subs[1],) * dims[1])
    est = estimate_comm_volume(topo, make_layout(topo, *grid), 2)
    assert est.within_upper()
    for r in range(est.n_ranks):
        assert est.counted_volume[r] == ghost_plan(topo, make_layout(topo, *grid), r, 2).ghost_doubles()


def test_thought_experiment_fraction():
    frac = ghost_fraction_lower_bound(6, 1e12, 49152)
    assert frac >= 0.72
    assert frac == pytest.approx(2 * 6 * 49152 ** (1 / 6) / 1e12 ** (1 / 6))
    assert total_volume_lower_bound(6, 1e12, 49152) == pytest.approx(frac * 1e12)


def test_neighbor_cells_shape():
    topo = build_topology(2, 1, (2, 2), (3,))
    cx, cv = np.arange(4), np.zeros(4, dtype=int)
    ncx, ncv = neighbor_cells(topo, cx, cv)
    assert ncx.shape == (4, 6)
    assert np.all(ncv[:, 4] == 2) and np.all(ncv[:, 5] == 1)


def test_ghost_plan_csv(tmp_path):
    topo = topo11()
    layout = make_layout(topo, 2, 1)
    path = tmp_path / "plan.csv"
    write_ghost_plan_csv(path, topo, [ghost_plan(topo, layout, r, 1) for r in range(2)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "rank,owner,cell,face,bytes"
    assert len(lines) == 1 + 16
