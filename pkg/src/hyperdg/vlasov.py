"""Vlasov-Poisson: density reduction, periodic Poisson solve and Landau damping.

The Poisson problem -lap(phi) = rho is solved with a discrete Fourier
transform of rho sampled on a uniform x-grid; E = -grad(phi) is evaluated
from the trigonometric interpolant at the x quadrature points.
"""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.special import wofz

from . import kernels as K
from .basis import build_basis, lagrange_values
from .comm import run_spmd
from .metrics import OpCounters, merge_counters
from .operators import AdvectionOperator, PhaseSpaceField
from .partition import make_layout
from .timeint import interpolate_function, lsrk_step, total_mass
from .vector import Partitioner, allocate

ENERGY_COLUMNS = ("step", "t", "field_energy", "total_mass")


class UnsupportedConfiguration(ValueError):
    pass


def reduce_density(f, op):
    """rho = 1 - int f dv at the x quadrature points of the owned x-cells.

    Returns (x cells, Qx) for the x-cells of this rank; identical on every
    rank of a column group.  Partial sums are formed in v-cell order and
    combined across the column in rank order.
    """
    p = f.partitioner
    nq, dx, dv = op.basis.n_q, op.d_x, op.d_v
    i, _ = p.layout.coords(p.rank)
    nx = p.layout.x_owned[i][1] - p.layout.x_owned[i][0]
    Qx = nq**dx
    partial = np.zeros((nx, Qx))
    for blk in op.blocks:
        Uq = K.interpolate_to_quadrature(K.to_batch(f.owned[blk.local], op.n, op.d), op.basis)
        jv = np.broadcast_to(op.tables.v.cell_jxw[op.tables.v.rows(blk.cv)].T, (nq**dv, len(blk.local)))
        vals = Uq.reshape(Qx, nq**dv, -1)
        integ = np.einsum("xvm,vm->mx", vals, jv)
        # local order runs cx fastest; add.at accumulates lanes in order
        np.add.at(partial, blk.local % nx, integ)
    total = p.col_comm.allreduce_sum(partial)
    return 1.0 - total


def gather_density(rho_local, partitioner):
    """All x-cells' density (n_cells_x, Qx) from the row group."""
    p = partitioner
    i, _ = p.layout.coords(p.rank)
    parts = p.row_comm.allgather((p.layout.x_owned[i], rho_local))
    out = np.empty((p.layout.n_cells_x, rho_local.shape[1]))
    for (a, b), data in parts:
        out[a:b] = data
    return out


def _cell_axes(mesh):
    return tuple(mesh.subdivisions)


def sample_uniform(table, mesh, basis):
    """Cell quadrature values (cells, Qx) -> uniform grid of (k+1) points per cell and axis.

    The grid point j of a cell sits at (j + 1/2)/(k+1) in reference
    coordinates; values come from the Lagrange interpolant through the
    quadrature points.
    """
    n, dim = basis.n_q, mesh.dim
    xi = (np.arange(n) + 0.5) / n
    L = lagrange_values(basis.quadrature.points, xi)
    subs = _cell_axes(mesh)
    vals = table.T.reshape((n,) * dim + (-1,))
    for a in range(dim):
        vals = K.contract_dim(vals, L, a, strategy="dense")
    # (q_0..q_{dim-1}, cells with axis 0 fastest) -> grid indexed (c_0 q_0, c_1 q_1, ...)
    vals = vals.reshape((n,) * dim + tuple(reversed(subs)))
    order = []
    for a in range(dim):
        order += [2 * dim - 1 - a, a]
    grid = vals.transpose(order)
    return grid.reshape(tuple(s * n for s in subs))


def _wavenumbers(shape, lengths):
    return [2.0 * np.pi * np.fft.fftfreq(s, d=1.0 / s) / L for s, L in zip(shape, lengths)]


def solve_poisson_periodic(rho, lengths):
    """phi on the uniform grid from rho samples, -lap(phi) = rho - mean(rho)."""
    rho = np.asarray(rho, dtype=float)
    rho = rho - rho.mean()
    ks = _wavenumbers(rho.shape, lengths)
    k2 = sum(np.meshgrid(*[kk**2 for kk in ks], indexing="ij"))
    rho_hat = np.fft.fftn(rho)
    phi_hat = np.zeros_like(rho_hat)
    nz = k2 > 0
    phi_hat[nz] = rho_hat[nz] / k2[nz]
    return np.real(np.fft.ifftn(phi_hat))


def compute_E(phi, lengths, lower, points_1d):
    """E = -grad(phi) of the trigonometric interpolant at a tensor grid of points.

    phi[j] is the value at lower + (j + 1/2) L / n along each axis, the grid
    of `sample_uniform`.  points_1d[a] are the coordinates along axis a;
    result (dim, *len(points_1d[a])).  Nyquist modes are dropped from the
    derivative.
    """
    phi = np.asarray(phi, dtype=float)
    dim = phi.ndim
    ks = _wavenumbers(phi.shape, lengths)
    phi_hat = np.fft.fftn(phi) / phi.size
    mats, dmats = [], []
    for a in range(dim):
        kk = ks[a].copy()
        s = phi.shape[a]
        deriv = 1j * kk
        if s % 2 == 0:
            deriv[s // 2] = 0.0
        x = np.asarray(points_1d[a]) - lower[a] - 0.5 * lengths[a] / s
        W = np.exp(1j * np.outer(x, kk))
        mats.append(W)
        dmats.append(W * deriv[None, :])
    out = []
    for comp in range(dim):
        vals = phi_hat
        for a in range(dim):
            M = dmats[a] if a == comp else mats[a]
            vals = np.moveaxis(np.tensordot(M, vals, axes=([1], [a])), 0, a)
        out.append(-np.real(vals))
    return np.array(out)


def e_table(phi, mesh, basis):
    """E at the quadrature points of every x-cell, shape (cells, dim, Qx)."""
    dim, nq = mesh.dim, basis.n_q
    subs = _cell_axes(mesh)
    pts = []
    for a in range(dim):
        c = np.arange(subs[a])
        pts.append((mesh.lower[a] + (c[:, None] + basis.quadrature.points[None, :]) * mesh.cell_size[a]).ravel())
    E = compute_E(phi, mesh.lengths, mesh.lower, pts)  # (dim, C0*nq, C1*nq, ...)
    E = E.reshape((dim,) + sum(((s, nq) for s in subs), ()))
    # -> (c_{dim-1}, ..., c_0, comp, q_0, ..., q_{dim-1})
    order = [1 + 2 * a for a in reversed(range(dim))] + [0] + [2 + 2 * a for a in range(dim)]
    return np.ascontiguousarray(E.transpose(order)).reshape(mesh.cell_count, dim, nq**dim)


def field_energy(table, mesh, basis):
    """1/2 int |E|^2 dx by quadrature."""
    w = np.prod(np.meshgrid(*([basis.quadrature.weights] * mesh.dim), indexing="ij"), axis=0).ravel()
    jxw = np.prod(mesh.cell_size) * w  # Cartesian x-mesh only
    return 0.5 * float(np.sum(jxw * np.sum(table**2, axis=1)))


def electric_field(f, op):
    """Steps 1-4: density, Poisson solve and E table (n_cells_x, d_x, Qx) on every rank."""
    mesh = op.topo.mesh_x
    rho_local = reduce_density(f, op)
    rho = gather_density(rho_local, f.partitioner)
    phi = solve_poisson_periodic(sample_uniform(rho, mesh, op.basis), mesh.lengths)
    return e_table(phi, mesh, op.basis), rho


def vp_rhs(f, r, t, op, field):
    """r = M^-1 A(f) for the Vlasov field with E from the current f."""
    table, _ = electric_field(f, op)
    field.set_e_table(table)
    op.apply_ecl(f, r, t, field)
    return r


def landau_initial(alpha, kappa, d_x, d_v):
    def fn(z):
        x, v = z[:d_x], z[d_x:]
        pert = 1.0 + alpha * np.sum(np.cos(kappa * x), axis=0)
        return pert * (2.0 * np.pi) ** (-d_v / 2.0) * np.exp(-0.5 * np.sum(v**2, axis=0))

    return fn


def landau_config(cfg):
    """Topology extents for the Landau problem."""
    return cfg.replace(
        extents_x=((0.0, 2.0 * np.pi / cfg.kappa),) * cfg.d_x,
        extents_v=((-cfg.v_max, cfg.v_max),) * cfg.d_v,
    )


def vlasov_dt(cfg, topo):
    if cfg.dt is not None:
        return cfg.dt
    rate = sum(cfg.v_max / h for h in topo.mesh_x.cell_size) + sum(1.0 / h for h in topo.mesh_v.cell_size)
    return cfg.cfl / ((cfg.k + 1) ** 2 * rate)


def _rank_landau(comm, cfg, topo, layout):
    basis = build_basis(cfg.k, cfg.quadrature)
    p = Partitioner(topo, layout, comm.rank, cfg.k, comm)
    counters = OpCounters()
    op = AdvectionOperator(p, basis, mapping=cfg.mapping, flux=cfg.flux, v_len=cfg.v_len or None,
                           strategy=cfg.strategy, counters=counters)
    field = PhaseSpaceField(topo.d_x, topo.d_v)
    mode = cfg.vector_mode()
    f = allocate(p, mode, ghosted=True)
    g = allocate(p, mode, ghosted=False)
    r = allocate(p, mode, ghosted=False)
    f.assign(interpolate_function(p, basis, op.tables, landau_initial(cfg.alpha, cfg.kappa, topo.d_x, topo.d_v)))
    dt = vlasov_dt(cfg, topo)
    if cfg.t_final is not None:
        n_steps = max(1, math.ceil(cfg.t_final / dt - 1e-12))
        dt = cfg.t_final / n_steps
    else:
        n_steps = cfg.n_steps
    rows = []
    clock = {"step": 0}

    def rhs(arr, t):
        f.mark_modified()
        f.update_ghost_values()
        counters.ghost_updates += 1
        table, _ = electric_field(f, op)
        if t == clock["step"] * dt:
            # stage 0 sees f(t_n): record the field energy of this state
            rows.append((clock["step"], t, field_energy(table, topo.mesh_x, basis), total_mass(f, op)))
        field.set_e_table(table)
        op.apply_ecl(f, r, t, field)
        f.release_ghost_values()
        return r.owned

    t0 = time.perf_counter()
    for step in range(n_steps):
        clock["step"] = step
        lsrk_step(f.owned, g.owned, step * dt, dt, rhs)
        f.mark_modified()
    f.update_ghost_values()
    table, _ = electric_field(f, op)
    rows.append((n_steps, n_steps * dt, field_energy(table, topo.mesh_x, basis), total_mass(f, op)))
    return {"rows": rows, "counters": counters, "seconds": time.perf_counter() - t0, "dt": dt,
            "final": f.to_global()}


def run_landau(cfg):
    """Landau damping run; returns the (step, t, field_energy, total_mass) series."""
    if cfg.deformation_x:
        raise UnsupportedConfiguration("the periodic Poisson solver needs an undeformed x-mesh")
    if cfg.d_x != cfg.d_v:
        raise UnsupportedConfiguration("Vlasov-Poisson needs d_x == d_v")
    cfg = landau_config(cfg)
    topo = cfg.topology()
    p_x, p_v = cfg.process_grid()
    layout = make_layout(topo, p_x, p_v, cfg.node_block)
    results = run_spmd(layout.n_ranks, _rank_landau, cfg, topo, layout)
    out = dict(results[0])
    out["counters"] = merge_counters(res["counters"] for res in results)
    return out


# ------------------------------------------------------------------ analysis


def local_maxima(t, y):
    """Interior local maxima of a sampled curve, refined by a parabola through 3 samples."""
    t, y = np.asarray(t, dtype=float), np.asarray(y, dtype=float)
    idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    out_t, out_y = [], []
    for i in idx:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        denom = y0 - 2 * y1 + y2
        s = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        h = t[i + 1] - t[i]
        out_t.append(t[i] + s * h)
        out_y.append(y1 - 0.25 * (y0 - y2) * s)
    return np.array(out_t), np.array(out_y)


def fit_damping(t, energy, t_min=0.0, t_max=None):
    """(gamma, omega) from the field-energy series.

    log(energy) at its local maxima is fitted with a line; the energy decays
    like exp(2 gamma t), so gamma is half the slope.  Maxima of |E|^2 come
    twice per field period, so omega = pi / (mean spacing of the maxima).
    """
    t = np.asarray(t, dtype=float)
    logs = np.log(np.asarray(energy, dtype=float))
    tm, ym = local_maxima(t, logs)
    sel = tm >= t_min
    if t_max is not None:
        sel &= tm <= t_max
    tm, ym = tm[sel], ym[sel]
    if len(tm) < 2:
        raise ValueError("need at least two maxima to fit a damping rate")
    slope = np.polyfit(tm, ym, 1)[0]
    spacing = np.mean(np.diff(tm))
    return 0.5 * slope, np.pi / spacing


def plasma_z(zeta):
    """Plasma dispersion function Z(zeta) = i sqrt(pi) w(zeta)."""
    return 1j * np.sqrt(np.pi) * wofz(zeta)


def landau_dispersion(omega, kappa):
    zeta = omega / (np.sqrt(2.0) * kappa)
    return 1.0 + (1.0 + zeta * plasma_z(zeta)) / kappa**2


def dispersion_root(kappa, guess=None, tol=1e-14, maxiter=100):
    """Least-damped root omega = omega_r + i gamma of the Landau dispersion relation."""
    if guess is None:
        guess = math.sqrt(1.0 + 3.0 * kappa**2) - 0.1j
    s2k = np.sqrt(2.0) * kappa
    zeta = complex(guess) / s2k
    for _ in range(maxiter):
        Z = plasma_z(zeta)
        D = 1.0 + (1.0 + zeta * Z) / kappa**2
        dZ = -2.0 * (1.0 + zeta * Z)
        dD = (Z + zeta * dZ) / kappa**2
        step = D / dD
        zeta -= step
        if abs(step) < tol * max(1.0, abs(zeta)):
            break
    else:
        raise RuntimeError("dispersion root did not converge")
    omega = zeta * s2k
    return float(omega.real), float(omega.imag)
