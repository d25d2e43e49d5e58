import numpy as np
import pytest
from scipy.special import erfc

from hyperdg.basis import build_basis
from hyperdg.config import RunConfig
from hyperdg.mesh import build_topology
from hyperdg.operators import AdvectionOperator, PhaseSpaceField
from hyperdg.oracle import assemble_dense_operator
from hyperdg.partition import make_layout
from hyperdg.timeint import interpolate_function
from hyperdg.vector import BUFFERED, Partitioner, allocate
from hyperdg.vlasov import (
    UnsupportedConfiguration,
    compute_E,
    dispersion_root,
    e_table,
    electric_field,
    field_energy,
    fit_damping,
    landau_dispersion,
    landau_initial,
    local_maxima,
    reduce_density,
    run_landau,
    sample_uniform,
    solve_poisson_periodic,
)

# least-damped root for kappa = 0.5, from a 30-digit mpmath solve with Z written via erfc
FROZEN_OMEGA = 1.41566188860453643
FROZEN_GAMMA = -0.15335946690960483

KAPPA = 0.5
L = 2 * np.pi / KAPPA


def vp_setup(d=1, sub_x=8, sub_v=8, k=3, v_max=6.0):
    topo = build_topology(d, d, (sub_x,) * d, (sub_v,) * d, extents_x=((0.0, L),) * d,
                          extents_v=((-v_max, v_max),) * d)
    basis = build_basis(k)
    p = Partitioner(topo, make_layout(topo), 0, k)
    return topo, basis, p, AdvectionOperator(p, basis)


def test_dispersion_root_frozen():
    omega, gamma = dispersion_root(KAPPA)
    assert omega == pytest.approx(FROZEN_OMEGA, abs=1e-12)
    assert gamma == pytest.approx(FROZEN_GAMMA, abs=1e-12)
    assert abs(landau_dispersion(complex(omega, gamma), KAPPA)) < 1e-12


def test_dispersion_with_erfc_form():
    w = complex(FROZEN_OMEGA, FROZEN_GAMMA)
    zeta = w / (np.sqrt(2) * KAPPA)
    z = 1j * np.sqrt(np.pi) * np.exp(-zeta**2) * erfc(-1j * zeta)
    assert abs(1 + (1 + zeta * z) / KAPPA**2) < 1e-12


def test_fit_damping_synthetic():
    t = np.linspace(0, 20, 4001)
    energy = np.exp(2 * -0.15 * t) * np.cos(1.4 * t) ** 2 + 1e-300
    gamma, omega = fit_damping(t, energy)
    assert gamma == pytest.approx(-0.15, rel=1e-3)
    assert omega == pytest.approx(1.4, rel=1e-3)
    with pytest.raises(ValueError):
        fit_damping(t[:10], np.exp(-t[:10]))


def test_local_maxima_parabola():
    t = np.array([0.0, 1.0, 2.0, 3.0])
    tm, ym = local_maxima(t, -(t - 1.25) ** 2)
    assert tm == pytest.approx([1.25]) and ym == pytest.approx([0.0], abs=1e-15)


def test_poisson_single_mode():
    x = (np.arange(16) + 0.5) * L / 16
    phi = solve_poisson_periodic(np.cos(KAPPA * x) + 3.0, (L,))
    assert np.allclose(phi, np.cos(KAPPA * x) / KAPPA**2, atol=1e-12)
    pts = np.linspace(0, L, 7)
    E = compute_E(phi, (L,), (0.0,), [pts])
    assert np.allclose(E[0], np.sin(KAPPA * pts) / KAPPA, atol=1e-12)


def test_poisson_two_dimensional():
    n = 12
    x = (np.arange(n) + 0.5) * L / n
    X, Y = np.meshgrid(x, x, indexing="ij")
    rho = np.cos(KAPPA * X) * np.cos(KAPPA * Y)
    phi = solve_poisson_periodic(rho, (L, L))
    assert np.allclose(phi, rho / (2 * KAPPA**2), atol=1e-12)
    pts = [np.array([0.3, 1.7]), np.array([2.0, 5.0, 9.0])]
    E = compute_E(phi, (L, L), (0.0, 0.0), pts)
    P, Q = np.meshgrid(*pts, indexing="ij")
    assert np.allclose(E[0], np.sin(KAPPA * P) * np.cos(KAPPA * Q) / (2 * KAPPA), atol=1e-12)
    assert np.allclose(E[1], np.cos(KAPPA * P) * np.sin(KAPPA * Q) / (2 * KAPPA), atol=1e-12)


def test_reduce_density_constants():
    topo, basis, p, op = vp_setup(sub_x=4, sub_v=4, k=2)
    f = allocate(p, BUFFERED)
    f.fill(1.0 / 12.0)
    assert np.allclose(reduce_density(f, op), 0.0, atol=1e-14)
    f.fill(1.0)
    assert np.allclose(reduce_density(f, op), 1.0 - 12.0, atol=1e-13)


def test_sample_uniform_reproduces_polynomial():
    topo, basis, _, _ = vp_setup(d=2, sub_x=3, sub_v=2, k=2)
    mesh = topo.mesh_x
    q = basis.quadrature.points
    cells = np.arange(mesh.cell_count)
    c0, c1 = cells % 3, cells // 3
    qi = np.array([(a, b) for a in range(3) for b in range(3)])
    X = mesh.lower[0] + (c0[:, None] + q[qi[:, 0]][None]) * mesh.cell_size[0]
    Y = mesh.lower[1] + (c1[:, None] + q[qi[:, 1]][None]) * mesh.cell_size[1]
    grid = sample_uniform(X * Y, mesh, basis)
    u = (np.arange(9) + 0.5) * L / 9
    assert np.allclose(grid, np.outer(u, u), atol=1e-11)


def test_initial_field_energy():
    alpha = 0.01
    topo, basis, p, op = vp_setup(sub_x=16, sub_v=16, k=3)
    f = allocate(p, BUFFERED)
    f.assign(interpolate_function(p, basis, op.tables, landau_initial(alpha, KAPPA, 1, 1)))
    f.update_ghost_values()
    table, rho = electric_field(f, op)
    assert table.shape == (16, 1, 4)
    # rho = -alpha cos(kappa x), E = -alpha sin(kappa x) / kappa, energy = alpha^2 L / (4 kappa^2)
    expect = alpha**2 * L / (4 * KAPPA**2)
    assert field_energy(table, topo.mesh_x, basis) == pytest.approx(expect, rel=1e-5)
    x = topo.mesh_x.lower[0] + (np.arange(16)[:, None] + basis.quadrature.points) * topo.mesh_x.cell_size[0]
    assert np.allclose(table[:, 0], -alpha * np.sin(KAPPA * x) / KAPPA, atol=1e-6)


def test_e_table_layout_two_dimensional():
    topo, basis, _, _ = vp_setup(d=2, sub_x=4, sub_v=2, k=1)
    mesh = topo.mesh_x
    n = 8
    x = (np.arange(n) + 0.5) * L / n
    phi = np.cos(KAPPA * x)[:, None] * np.ones(n)[None, :]
    tab = e_table(phi, mesh, basis)
    assert tab.shape == (16, 2, 4)
    q = basis.quadrature.points
    for cell in (0, 5, 14):
        c0 = cell % 4
        xs = mesh.lower[0] + (c0 + q) * mesh.cell_size[0]
        expect = (KAPPA * np.sin(KAPPA * xs))[:, None].repeat(2, axis=1).ravel()
        assert np.allclose(tab[cell, 0], expect, atol=1e-12)
        assert np.allclose(tab[cell, 1], 0.0, atol=1e-12)


def test_free_streaming_matches_dense_oracle():
    topo, basis, p, op = vp_setup(sub_x=3, sub_v=4, k=2)
    field = PhaseSpaceField(1, 1)
    field.set_e_table(np.zeros((3, 1, 3)))
    src = allocate(p, BUFFERED)
    src.assign(np.random.default_rng(2).uniform(-1, 1, src.owned.shape))
    src.update_ghost_values()
    dst = allocate(p, BUFFERED, ghosted=False)
    op.apply_ecl(src, dst, 0.0, field)
    ref = assemble_dense_operator(topo, basis, 0.0, field) @ src.owned.ravel()
    assert np.max(np.abs(dst.owned.ravel() - ref)) < 1e-12


def test_zero_perturbation_stays_quiet():
    cfg = RunConfig(k=2, subdivisions_x=4, subdivisions_v=8, alpha=0.0, n_steps=3)
    rows = np.array(run_landau(cfg)["rows"])
    assert rows.shape == (4, 4)
    assert np.max(rows[:, 2]) < 1e-25
    assert np.max(np.abs(rows[:, 3] - rows[0, 3])) < 1e-13


def test_short_landau_run_two_ranks():
    base = RunConfig(k=2, subdivisions_x=4, subdivisions_v=4, n_steps=2)
    a = run_landau(base)
    b = run_landau(base.replace(p_x=2, p_v=2))
    assert np.max(np.abs(a["final"] - b["final"])) <= 1e-14
    assert np.allclose(np.array(a["rows"]), np.array(b["rows"]), rtol=1e-12, atol=1e-20)


def test_unsupported_configurations():
    with pytest.raises(UnsupportedConfiguration):
        run_landau(RunConfig(d_x=2, d_v=1, subdivisions_x=2, subdivisions_v=2))
    with pytest.raises(UnsupportedConfiguration):
        run_landau(RunConfig(deformation_x=0.01, subdivisions_x=4))
