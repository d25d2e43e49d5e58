"""Dense assembly of the DG advection operator, for verification only.

Everything here is computed the slow way: explicit d-dimensional products of
1D Lagrange polynomials, the full phase-space Jacobian inverted with
np.linalg, and face normals from J^-T applied to the reference normal.  No
sum factorization and no per-space mapping shortcuts are used.
"""

from __future__ import annotations

import itertools

import numpy as np

from .basis import lagrange_derivatives, lagrange_values

MAX_DENSE_DOFS = 10_000


def _multi_indices(n, d):
    return np.array(list(itertools.product(range(n), repeat=d)), dtype=np.int64).reshape(-1, d)


def _shape_functions(support, xi):
    """Values (P, N) and reference gradients (d, P, N) of the tensor basis at xi (P, d)."""
    P, d = xi.shape
    n = len(support)
    idx = _multi_indices(n, d)
    vals = [lagrange_values(support, xi[:, a]) for a in range(d)]  # (P, n)
    ders = [lagrange_derivatives(support, xi[:, a]) for a in range(d)]
    phi = np.ones((P, len(idx)))
    for a in range(d):
        phi *= vals[a][:, idx[:, a]]
    grad = np.ones((d, P, len(idx)))
    for g in range(d):
        for a in range(d):
            grad[g] *= (ders[a] if a == g else vals[a])[:, idx[:, a]]
    return phi, grad


def _cell_geometry(topo, cx, cv, xi):
    """Physical points and full Jacobians at phase-space reference points xi (P, d)."""
    dx = topo.d_x
    mx, mv = topo.mesh_x, topo.mesh_v
    X = mx.points([cx], xi[:, :dx])[0]
    V = mv.points([cv], xi[:, dx:])[0]
    jac = np.zeros((len(xi), topo.d, topo.d))
    jac[:, :dx, :dx] = mx.jacobians([cx], xi[:, :dx])[0]
    jac[:, dx:, dx:] = mv.jacobians([cv], xi[:, dx:])[0]
    return X, V, jac


def _flux_split(an, kind):
    if kind == "central":
        return 0.5 * an, 0.5 * an
    if kind == "upwind":
        return 0.5 * (an + np.abs(an)), 0.5 * (an - np.abs(an))
    raise ValueError(f"unknown flux kind {kind!r}")


def assemble_dense_system(topo, basis, t=0.0, field=None, flux="upwind"):
    """Global mass blocks (cells, N, N) and the dense advection matrix A.

    A u collects (grad phi_i, a u)_K - <phi_i, (a.n u)*>_dK over all cells.
    """
    d, n = topo.d, basis.n
    N = n**d
    n_dofs = topo.n_cells * N
    if n_dofs > MAX_DENSE_DOFS:
        raise ValueError(f"{n_dofs} DoFs exceed the dense oracle limit of {MAX_DENSE_DOFS}")
    if field is None:
        raise ValueError("an advection field is required")
    rule = basis.quadrature
    support = basis.support_points
    qi = _multi_indices(rule.n_q, d)
    xi = rule.points[qi]
    w = np.prod(rule.weights[qi], axis=1)
    phi, grad = _shape_functions(support, xi)
    qf = _multi_indices(rule.n_q, d - 1)
    wf = np.prod(rule.weights[qf], axis=1) if d > 1 else np.ones(1)
    face_xi, face_phi, opp_phi = [], [], []
    for f in range(2 * d):
        axis, side = divmod(f, 2)
        pts = np.insert(rule.points[qf], axis, float(side), axis=1)
        face_xi.append(pts)
        face_phi.append(_shape_functions(support, pts)[0])
        refl = pts.copy()
        refl[:, axis] = 1.0 - side
        opp_phi.append(_shape_functions(support, refl)[0])

    mass = np.zeros((topo.n_cells, N, N))
    A = np.zeros((n_dofs, n_dofs))
    dx = topo.d_x
    for g in range(topo.n_cells):
        cx, cv = topo.cell_pair(g)
        rows = slice(g * N, (g + 1) * N)
        X, V, jac = _cell_geometry(topo, cx, cv, xi)
        det = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
        jw = det * w
        mass[g] = phi.T @ (jw[:, None] * phi)
        a = field.pointwise(t, X.T, V.T)  # (d, P)
        # physical gradient J^-T grad_ref
        pgrad = np.einsum("pba,bpi->api", inv, grad)
        adv = np.einsum("ap,api->pi", a, pgrad)
        A[rows, rows] += adv.T @ (jw[:, None] * phi)
        for f in range(2 * d):
            axis, side = divmod(f, 2)
            Xf, Vf, jf = _cell_geometry(topo, cx, cv, face_xi[f])
            e = np.zeros(d)
            e[axis] = 1.0 if side else -1.0
            nvec = np.einsum("pba,b->pa", np.linalg.inv(jf), e)
            norm = np.linalg.norm(nvec, axis=1)
            normal = nvec / norm[:, None]
            dS = np.linalg.det(jf) * norm * wf
            af = field.pointwise(t, Xf.T, Vf.T)
            an = np.einsum("ap,pa->p", af, normal)
            alpha, beta = _flux_split(an, flux)
            nb = topo.neighbor((cx, cv), f)
            nb_cols = slice(topo.global_index(*nb) * N, (topo.global_index(*nb) + 1) * N)
            test = face_phi[f] * dS[:, None]
            A[rows, rows] -= test.T @ (alpha[:, None] * face_phi[f])
            A[rows, nb_cols] -= test.T @ (beta[:, None] * opp_phi[f])
    return mass, A


def assemble_dense_operator(topo, basis, t=0.0, field=None, flux="upwind"):
    """Dense M^-1 A in the global (cell, C-order nodal index) numbering."""
    mass, A = assemble_dense_system(topo, basis, t, field, flux)
    N = mass.shape[1]
    out = np.empty_like(A)
    for g in range(len(mass)):
        rows = slice(g * N, (g + 1) * N)
        out[rows] = np.linalg.solve(mass[g], A[rows])
    return out


def dense_mass_matrix(topo, basis):
    """Global block-diagonal mass matrix as a dense array."""
    mass, _ = assemble_dense_system(topo, basis, 0.0, _ZeroField(topo.d), "central")
    N = mass.shape[1]
    out = np.zeros((len(mass) * N, len(mass) * N))
    for g in range(len(mass)):
        out[g * N:(g + 1) * N, g * N:(g + 1) * N] = mass[g]
    return out


class _ZeroField:
    def __init__(self, d):
        self.d = d

    def pointwise(self, t, x, v):
        return np.zeros((self.d,) + (x.shape[1:] if x.size else v.shape[1:]))
