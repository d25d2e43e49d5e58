import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperdg.basis import gauss_legendre_rule
from hyperdg.mesh import (
    boundary_faces,
    build_lowdim_mesh,
    build_topology,
    dof_count,
    neighbor,
    neighbor_table,
    tensor_faces,
)
from hyperdg.operators import tensor_points


def test_cartesian_jacobian_is_diagonal_half():
    mesh = build_lowdim_mesh(2, (2, 2))
    assert mesh.cell_count == 4
    jac = mesh.jacobians(np.arange(4), tensor_points([0.2, 0.7], 2))
    assert np.array_equal(jac, np.broadcast_to(np.diag([0.5, 0.5]), jac.shape))


def test_periodic_wrap_1d():
    mesh = build_lowdim_mesh(1, (8,))
    assert mesh.cell_count == 8
    assert neighbor(mesh, 7, 1) == 0
    assert neighbor(build_lowdim_mesh(1, (4,)), 0, 0) == 3


def test_lexicographic_plus_y():
    assert neighbor(build_lowdim_mesh(2, (2, 2)), 0, 3) == 2


def test_deformed_determinant_positive():
    mesh = build_lowdim_mesh(2, (4, 4), deformation=0.01)
    xi = tensor_points(gauss_legendre_rule(6).points, 2)
    det = np.linalg.det(mesh.jacobians(np.arange(16), xi))
    assert det.min() > 0


def test_deformation_amplitude_guard():
    with pytest.raises(ValueError):
        build_lowdim_mesh(2, (4, 4), deformation=0.05)


def test_undeformed_path_matches_cartesian_bitwise():
    a = build_lowdim_mesh(3, (2, 3, 2))
    b = build_lowdim_mesh(3, (2, 3, 2), deformation=0.0)
    xi = tensor_points(gauss_legendre_rule(3).points, 3)
    cells = np.arange(a.cell_count)
    assert np.array_equal(a.jacobians(cells, xi), b.jacobians(cells, xi))
    assert np.array_equal(a.points(cells, xi), a.cartesian_points(cells, xi))


@pytest.mark.parametrize("dim,subs", [(0, (1,)), (4, (1, 1, 1, 1)), (2, (2, 0))])
def test_invalid_meshes(dim, subs):
    with pytest.raises(ValueError):
        build_lowdim_mesh(dim, subs)


def test_neighbor_round_trip_3d_all_pairs():
    mesh = build_lowdim_mesh(3, (2, 2, 2))
    count = 0
    for c in range(8):
        for f in range(6):
            assert neighbor(mesh, neighbor(mesh, c, f), f ^ 1) == c
            count += 1
    assert count == 48


@given(dim=st.integers(1, 3), subs=st.lists(st.integers(1, 5), min_size=3, max_size=3))
def test_neighbor_involution(dim, subs):
    mesh = build_lowdim_mesh(dim, tuple(subs[:dim]))
    table = neighbor_table(mesh)
    for f in range(2 * dim):
        assert np.array_equal(table[table[:, f], f ^ 1], np.arange(mesh.cell_count))


def test_face_counts_by_hand():
    assert len(tensor_faces(build_topology(1, 1, (2,), (2,)))) == 8
    assert len(tensor_faces(build_topology(2, 1, (2, 2), (2,)))) == 24
    assert boundary_faces(build_topology(1, 1, (2,), (2,))) == []


@given(dx=st.integers(1, 3), dv=st.integers(1, 3), sx=st.integers(1, 3), sv=st.integers(1, 3))
def test_face_count_identity(dx, dv, sx, sv):
    topo = build_topology(dx, dv, (sx,) * dx, (sv,) * dv)
    cx, cv = topo.mesh_x.cell_count, topo.mesh_v.cell_count
    assert topo.n_cells == cx * cv
    assert len(tensor_faces(topo)) == dx * cx * cv + cx * dv * cv


@given(dx=st.integers(1, 2), dv=st.integers(1, 2), s=st.integers(1, 3))
def test_global_index_bijection(dx, dv, s):
    topo = build_topology(dx, dv, (s + 1,) * dx, (s,) * dv)
    seen = set()
    for cv in range(topo.mesh_v.cell_count):
        for cx in range(topo.mesh_x.cell_count):
            g = topo.global_index(cx, cv)
            assert topo.cell_pair(g) == (cx, cv)
            seen.add(g)
    assert seen == set(range(topo.n_cells))


def test_dof_count_examples():
    # 4096 cells in 6D: 4 x 4 x 4 per space
    topo6 = build_topology(3, 3, (4, 4, 4), (4, 4, 4))
    assert dof_count(topo6, 3) == 16_777_216
    assert dof_count(build_topology(1, 1, (1,), (1,)), 1) == 4
    assert dof_count(build_topology(2, 2, (2, 2), (2, 2)), 5) == 20_736


def test_dof_count_rejects_k0():
    with pytest.raises(ValueError):
        dof_count(build_topology(1, 1, (1,), (1,)), 0)


def test_dimension_range():
    with pytest.raises(ValueError):
        build_topology(3, 3, (1,), (1,))  # wrong subdivision length
