"""Matrix-free advection operator on the phase-space mesh.

The element-centric loop (ECL) visits every owned cell once and computes the
cell integral plus all 2d face integrals, evaluating each numerical flux from
both sides.  The face-centric loop (FCL) splits this into a cell loop and a
loop visiting every face once, writing both neighbors.  Both return M^-1 A u.

Mapping data is stored per low-dimensional mesh and combined at quadrature
points: J^-1 a = (J_x^-1 a_x, J_v^-1 a_v) and |J| = |J_x| |J_v|.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .metrics import OpCounters
from .vector import BUFFERED, _face_index, face_trace

MAPPING_MODES = ("cartesian_single_set", "tensor_per_space", "full_highdim")
FLUX_KINDS = ("central", "upwind")


def tensor_points(xi_1d, dim):
    """Tensor grid of 1D points in C order (axis 0 slowest) -> (n^dim, dim)."""
    if dim == 0:
        return np.zeros((1, 0))
    grids = np.meshgrid(*([np.asarray(xi_1d)] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def tensor_weights(w_1d, dim):
    w = np.ones(1)
    for _ in range(dim):
        w = np.multiply.outer(w, w_1d).ravel()
    return w


def face_points(xi_1d, dim, face):
    """Reference points on `face` of the unit cube: tangential grid in C order."""
    axis, side = divmod(face, 2)
    tang = tensor_points(xi_1d, dim - 1)
    return np.insert(tang, axis, float(side), axis=1)


class LowDimMapping:
    """Geometry tables of one low-dimensional mesh at the quadrature points.

    cell_inv (C, Q, dim, dim), cell_det (C, Q) and cell_jxw (C, Q) hold the
    inverse Jacobian, its determinant and det * weight.  For every face id
    face_dS[f] (C, Qf) is the surface element times weight and face_normal[f]
    (C, Qf, dim) the unit outer normal.  With `single_set` only one cell is
    stored (affine Cartesian meshes).
    """

    def __init__(self, mesh, rule, single_set=False):
        self.mesh = mesh
        self.dim = dim = mesh.dim
        self.n_q = rule.n_q
        self.single_set = single_set
        self.cartesian = not mesh.deformation.active
        cells = np.arange(1 if single_set else mesh.cell_count)
        self.xi = tensor_points(rule.points, dim)
        self.weights = tensor_weights(rule.weights, dim)
        jac = mesh.jacobians(cells, self.xi)
        self.cell_jac = jac
        self.cell_inv = np.linalg.inv(jac)
        self.cell_det = np.linalg.det(jac)
        if np.any(self.cell_det <= 0):
            raise ValueError("mapping is not orientation preserving")
        self.cell_jxw = self.cell_det * self.weights
        wf = tensor_weights(rule.weights, dim - 1)
        self.face_xi, self.face_dS, self.face_normal = [], [], []
        for f in range(2 * dim):
            axis, side = divmod(f, 2)
            xi_f = face_points(rule.points, dim, f)
            jf = mesh.jacobians(cells, xi_f)
            inv_t = np.swapaxes(np.linalg.inv(jf), -1, -2)
            nvec = inv_t[..., axis] * (1.0 if side else -1.0)
            norm = np.linalg.norm(nvec, axis=-1)
            self.face_xi.append(xi_f)
            self.face_dS.append(np.linalg.det(jf) * norm * wf)
            self.face_normal.append(nvec / norm[..., None])

    def rows(self, cells):
        """Table row for each cell (row 0 for a single set)."""
        return np.zeros(1, dtype=np.int64) if self.single_set else np.asarray(cells)

    def cell_points(self, cells):
        return self.mesh.points(cells, self.xi)

    def face_points(self, cells, face):
        return self.mesh.points(cells, self.face_xi[face])


class MappingTables:
    """Mapping data of the x and v meshes in one of three storage modes."""

    def __init__(self, topo, basis, mode="tensor_per_space"):
        if mode not in MAPPING_MODES:
            raise ValueError(f"unknown mapping mode {mode!r}")
        deformed = topo.mesh_x.deformation.active or topo.mesh_v.deformation.active
        if mode == "cartesian_single_set" and deformed:
            raise ValueError("cartesian_single_set needs undeformed meshes")
        self.topo, self.basis, self.mode = topo, basis, mode
        self.d_x, self.d_v = topo.d_x, topo.d_v
        single = mode == "cartesian_single_set"
        self.x = LowDimMapping(topo.mesh_x, basis.quadrature, single)
        self.v = LowDimMapping(topo.mesh_v, basis.quadrature, single)
        self.deformed = deformed

    @property
    def d(self):
        return self.d_x + self.d_v

    def jacobian_doubles_per_dof(self):
        """Doubles of inverse-Jacobian data loaded per DoF by the cell integrals."""
        n = self.basis.n
        if self.mode == "cartesian_single_set":
            return 0.0
        if self.mode == "tensor_per_space":
            per_pair = self.x.cell_inv[0].size + self.v.cell_inv[0].size
            return per_pair / n**self.d
        return float(self.d**2)

    def full_block(self, cx, cv):
        """Block-diagonal Jacobian, its inverse and determinant at all (q_x, q_v).

        Formed explicitly for verification; shapes (Qx*Qv, d, d) and (Qx*Qv,).
        """
        jx = self.topo.mesh_x.jacobians([cx], self.x.xi)[0]
        jv = self.topo.mesh_v.jacobians([cv], self.v.xi)[0]
        qx, qv = len(jx), len(jv)
        d, dx = self.d, self.d_x
        full = np.zeros((qx, qv, d, d))
        full[:, :, :dx, :dx] = jx[:, None]
        full[:, :, dx:, dx:] = jv[None, :]
        full = full.reshape(qx * qv, d, d)
        return full, np.linalg.inv(full), np.linalg.det(full)


def combine_jacobian(tables, pair, q_x, q_v, vec):
    """J^-1 vec and |J| w at the quadrature point (q_x, q_v) of a cell pair."""
    cx, cv = pair
    rx, rv = tables.x.rows([cx])[0], tables.v.rows([cv])[0]
    vec = np.asarray(vec, dtype=float)
    dx = tables.d_x
    out = np.concatenate([tables.x.cell_inv[rx, q_x] @ vec[:dx], tables.v.cell_inv[rv, q_v] @ vec[dx:]])
    return out, tables.x.cell_jxw[rx, q_x] * tables.v.cell_jxw[rv, q_v]


def _lanes(arr, lead, q_dims, trail):
    """(m, Q, *comp) table rows -> (*comp, 1*lead, *q_dims, 1*trail, m)."""
    arr = np.asarray(arr)
    m, comp = arr.shape[0], arr.shape[2:]
    a = arr.reshape(m, arr.shape[1], -1).transpose(2, 1, 0)
    return np.ascontiguousarray(a.reshape(comp + (1,) * lead + tuple(q_dims) + (1,) * trail + (m,)))


# ----------------------------------------------------------------- fields


class ConstantField:
    """Uniform velocity a (d components)."""

    constant = True
    phase_space = False

    def __init__(self, a):
        self.a = tuple(float(c) for c in a)

    def velocity_x(self, t, x, v, cx, d_x):
        return list(self.a[:d_x])

    def velocity_v(self, t, x, v, cx, d_x):
        return list(self.a[d_x:])

    def pointwise(self, t, x, v):
        n = x.shape[1] if x.size else v.shape[1]
        return np.tile(np.array(self.a)[:, None], (1, n))


class FunctionField:
    """a = fn(t, x, v) with x (d_x, ...) and v (d_v, ...) broadcast arrays."""

    constant = False
    phase_space = False

    def __init__(self, fn):
        self.fn = fn

    def velocity_x(self, t, x, v, cx, d_x):
        return list(self.fn(t, x, v))[:d_x]

    def velocity_v(self, t, x, v, cx, d_x):
        return list(self.fn(t, x, v))[d_x:]

    def pointwise(self, t, x, v):
        a = self.fn(t, x, v)
        return np.stack([np.broadcast_to(c, x.shape[1:] if x.size else v.shape[1:]) for c in a])


class PhaseSpaceField:
    """Vlasov velocity a(t, x, v) = (v, -E(t, x)).

    The x part is the v-space point itself; the v part is read from a table
    of E at the x quadrature points, shape (x cells, d_x, Qx).  Without a
    table E is zero (free streaming).
    """

    constant = False
    phase_space = True

    def __init__(self, d_x, d_v, e_table=None):
        if d_x != d_v:
            raise ValueError("the Vlasov field needs d_x == d_v")
        self.d_x = d_x
        self.e_table = e_table

    def set_e_table(self, table):
        self.e_table = table

    def velocity_x(self, t, x, v, cx, d_x):
        return [v[b] for b in range(d_x)]

    def velocity_v(self, t, x, v, cx, d_x):
        if self.e_table is None:
            return [0.0] * self.d_x
        e = self.e_table[cx]  # (m, d_x, Qx)
        target = x.shape[1:]
        if int(np.prod(target)) != e.shape[0] * e.shape[2]:
            raise ValueError("E table lookups need points at x-cell quadrature points")
        e = np.moveaxis(e, 0, -1).reshape((self.d_x,) + target)
        return [-e[b] for b in range(self.d_x)]

    def pointwise(self, t, x, v):
        if self.e_table is not None and np.any(self.e_table):
            raise ValueError("pointwise evaluation is only available for E = 0")
        return np.concatenate([v, np.zeros_like(v)])


def numerical_flux(u_minus, u_plus, a_dot_n, kind="upwind"):
    """Numerical flux (a.n f)* from the interior and exterior traces."""
    if kind == "central":
        return 0.5 * a_dot_n * (u_minus + u_plus)
    if kind == "upwind":
        return 0.5 * a_dot_n * (u_minus + u_plus) + 0.5 * np.abs(a_dot_n) * (u_minus - u_plus)
    raise ValueError(f"unknown flux kind {kind!r}")


def flux_coefficients(a_dot_n, kind):
    """(alpha, beta) with flux = alpha u- + beta u+."""
    if kind == "central":
        return 0.5 * a_dot_n, 0.5 * a_dot_n
    if kind == "upwind":
        return np.maximum(a_dot_n, 0.0), np.minimum(a_dot_n, 0.0)
    raise ValueError(f"unknown flux kind {kind!r}")


# ----------------------------------------------------------------- operator


@dataclass
class _Block:
    local: np.ndarray
    cx: np.ndarray
    cv: np.ndarray


def make_blocks(partitioner, v_len=None):
    """Lane batches: v_len consecutive x-cells sharing one v-cell.

    v_len=None (or 0) gives a single batch holding every owned cell.
    """
    p = partitioner
    if not v_len:
        return [np.arange(p.n_owned)]
    if v_len < 1:
        raise ValueError("v_len must be positive")
    i, _ = p.layout.coords(p.rank)
    nx = p.layout.x_owned[i][1] - p.layout.x_owned[i][0]
    out = []
    for row in range(p.n_owned // nx):
        start = row * nx
        for s in range(0, nx, v_len):
            out.append(np.arange(start + s, start + min(s + v_len, nx)))
    return out


class AdvectionOperator:
    """M^-1 A for div(a f) with a numerical flux on the owned cells of one rank."""

    def __init__(self, partitioner, basis, mapping="tensor_per_space", flux="upwind", v_len=None,
                 strategy="even_odd", counters=None, tables=None):
        if flux not in FLUX_KINDS:
            raise ValueError(f"unknown flux kind {flux!r}")
        self.p = partitioner
        self.topo = partitioner.topo
        self.basis = basis
        self.flux = flux
        self.strategy = strategy
        self.v_len = v_len
        self.tables = tables if tables is not None else MappingTables(self.topo, basis, mapping)
        self.mapping = self.tables.mode
        self.counters = counters if counters is not None else OpCounters()
        self.n, self.d = basis.n, self.topo.d
        self.d_x, self.d_v = self.topo.d_x, self.topo.d_v
        self.blocks = []
        for lc in make_blocks(partitioner, v_len):
            self.blocks.append(_Block(lc, partitioner.cx[lc], partitioner.cv[lc]))
        self._geo = {}

    # ------------------------------------------------------------ geometry
    def _geometry(self, b):
        g = self._geo.get(b)
        if g is not None:
            return g
        blk = self.blocks[b]
        T, nq = self.tables, self.basis.n_q
        dx, dv = self.d_x, self.d_v
        rx, rv = T.x.rows(blk.cx), T.v.rows(blk.cv)
        qx, qv = (nq,) * dx, (nq,) * dv
        g = {
            "xq": _lanes(T.x.cell_points(blk.cx), 0, qx, dv),
            "vq": _lanes(T.v.cell_points(blk.cv), dx, qv, 0),
            "inv_x": _lanes(T.x.cell_inv[rx], 0, qx, dv),
            "inv_v": _lanes(T.v.cell_inv[rv], dx, qv, 0),
        }
        if self.mapping == "full_highdim":
            invs, jxws = [], []
            w = np.multiply.outer(T.x.weights, T.v.weights).ravel()
            for cx, cv in zip(blk.cx.tolist(), blk.cv.tolist()):
                _, inv, det = T.full_block(cx, cv)
                invs.append(inv)
                jxws.append(det * w)
            g["inv_full"] = _lanes(np.array(invs), 0, qx + qv, 0)
            jxw = _lanes(np.array(jxws), 0, qx + qv, 0)
        else:
            jxw = _lanes(T.x.cell_jxw[rx], 0, qx, dv) * _lanes(T.v.cell_jxw[rv], dx, qv, 0)
        g["jxw"] = jxw
        g["inv_jxw"] = 1.0 / jxw
        faces = []
        for f in range(2 * self.d):
            axis = f // 2
            if axis < dx:
                lf = f
                own, other, rows, orows = T.x, T.v, rx, rv
                cells, ocells = blk.cx, blk.cv
                ds = _lanes(own.face_dS[lf][rows], 0, (nq,) * (dx - 1), dv)
                nrm = _lanes(own.face_normal[lf][rows], 0, (nq,) * (dx - 1), dv)
                pts = _lanes(own.face_points(cells, lf), 0, (nq,) * (dx - 1), dv)
                opts = _lanes(other.cell_points(ocells), dx - 1, qv, 0)
                ojxw = _lanes(other.cell_jxw[orows], dx - 1, qv, 0)
            else:
                lf = f - 2 * dx
                own, other, rows, orows = T.v, T.x, rv, rx
                cells, ocells = blk.cv, blk.cx
                ds = _lanes(own.face_dS[lf][rows], dx, (nq,) * (dv - 1), 0)
                nrm = _lanes(own.face_normal[lf][rows], dx, (nq,) * (dv - 1), 0)
                pts = _lanes(own.face_points(cells, lf), dx, (nq,) * (dv - 1), 0)
                opts = _lanes(other.cell_points(ocells), 0, qx, dv - 1)
                ojxw = _lanes(other.cell_jxw[orows], 0, qx, dv - 1)
            faces.append({"dS": ds * ojxw, "normal": nrm, "points": pts, "other_points": opts,
                          "x_space": axis < dx})
        g["faces"] = faces
        m = len(blk.local)
        Qx, Qv = nq**dx, nq**dv
        Qfx, Qfv = nq ** (dx - 1), nq ** (dv - 1)
        face_tables = 2 * dx * Qfx * (dx + 1) + 2 * dv * Qfv * (dv + 1)
        if self.mapping == "cartesian_single_set":
            mapping_loads = 0
        elif self.mapping == "tensor_per_space":
            mapping_loads = m * (Qx * (dx * dx + 1) + Qv * (dv * dv + 1) + face_tables)
        else:
            mapping_loads = m * (Qx * Qv * (self.d**2 + 1) + face_tables)
        g["mapping_loads"] = mapping_loads
        self._geo[b] = g
        return g

    def _cell_fluxes(self, g, Uq, t, field, blk):
        """t_a = (J^-1 a)_a |J| w u at the cell quadrature points."""
        c = self.counters
        dx = self.d_x
        ax = field.velocity_x(t, g["xq"], g["vq"], blk.cx, dx)
        av = field.velocity_v(t, g["xq"], g["vq"], blk.cx, dx)
        if field.phase_space:
            c.field_lookups += Uq.size
        w = Uq * g["jxw"]
        c.flops += w.size
        c.pointwise_passes += 1
        out = []
        if self.mapping == "full_highdim":
            a_all = ax + av
            inv = g["inv_full"]
            coeffs = [sum(inv[a, b] * a_all[b] for b in range(self.d)) for a in range(self.d)]
        else:
            coeffs = self._space_coefficients(g["inv_x"], ax, self.tables.x.cartesian)
            coeffs += self._space_coefficients(g["inv_v"], av, self.tables.v.cartesian)
        for coef in coeffs:
            if np.ndim(coef) == 0 and coef == 0.0:
                out.append(None)
                continue
            if not np.any(coef):
                out.append(None)
                continue
            ta = coef * w
            c.flops += ta.size
            c.pointwise_passes += 1
            out.append(ta)
        return out

    @staticmethod
    def _space_coefficients(inv, vel, diagonal):
        dim = len(vel)
        if diagonal:
            return [inv[a, a] * vel[a] for a in range(dim)]
        return [sum(inv[a, b] * vel[b] for b in range(dim)) for a in range(dim)]

    def _normal_velocity(self, fg, t, field, blk):
        dx = self.d_x
        if fg["x_space"]:
            vel = field.velocity_x(t, fg["points"], fg["other_points"], blk.cx, dx)
        else:
            vel = field.velocity_v(t, fg["other_points"], fg["points"], blk.cx, dx)
        nrm = fg["normal"]
        return sum(vel[b] * nrm[b] for b in range(len(vel)))

    def _face_shape(self, m):
        return (self.basis.n_q,) * (self.d - 1) + (m,)

    # ----------------------------------------------------------------- ECL
    def apply_ecl(self, src, dst, t=0.0, field=None, inverse_mass=True, include_faces=True):
        """dst = M^-1 A src (or A src with inverse_mass=False) cell by cell."""
        if field is None:
            raise ValueError("an advection field is required")
        c, basis, strat, n, d = self.counters, self.basis, self.strategy, self.n, self.d
        t0 = time.perf_counter()
        for b, blk in enumerate(self.blocks):
            g = self._geometry(b)
            m = len(blk.local)
            U = K.to_batch(src.gather_cells(blk.local), n, d)
            Uq = K.interpolate_to_quadrature(U, basis, c, strat)
            fluxes = self._cell_fluxes(g, Uq, t, field, blk)
            acc = K.gradient_test_collocation(fluxes, basis, c, strat)
            if acc is None:
                acc = np.zeros_like(Uq)
            if include_faces:
                for f in range(2 * d):
                    fg = g["faces"][f]
                    um = K.interpolate_to_face(Uq, f, basis, c)
                    traces = src.gather_neighbor_traces(blk.local, f)
                    up = K.interpolate_face_nodal(K.to_batch(traces, n, d - 1), basis, c, strat)
                    an = self._normal_velocity(fg, t, field, blk)
                    fl = numerical_flux(um, up, an, self.flux)
                    contrib = fl * fg["dS"]
                    acc -= K.integrate_face(contrib, f, basis, c)
                    c.flux_evals += um.size
                    c.flops += 8 * um.size
                    c.pointwise_passes += 1
                c.modeled_doubles_moved += 2 * d * m * n ** (d - 1)
            if inverse_mass:
                acc *= g["inv_jxw"]
                c.flops += acc.size
                c.pointwise_passes += 1
                out = K.apply_inverse_vandermonde(acc, basis, c, strat)
            else:
                out = K.interpolate_transpose(acc, basis, c, strat)
            dst.owned[blk.local] = K.to_cells(out)
            c.modeled_doubles_moved += 2 * m * n**d + g["mapping_loads"]
            if field.phase_space:
                c.modeled_doubles_moved += m * basis.n_q**self.d_x * self.d_x
            c.dofs_processed += m * n**d
        dst.mark_modified()
        c.applications += 1
        c.wall_seconds += time.perf_counter() - t0
        return dst

    # ----------------------------------------------------------------- FCL
    def apply_fcl(self, src, dst, t=0.0, field=None):
        """Cell loop, then one visit per face writing both neighbors, then M^-1."""
        if field is None:
            raise ValueError("an advection field is required")
        if src.mode != BUFFERED:
            raise ValueError("the face-centric loop needs a buffered source vector")
        c, basis, strat, n, d = self.counters, self.basis, self.strategy, self.n, self.d
        p = self.p
        t0 = time.perf_counter()
        for b, blk in enumerate(self.blocks):
            g = self._geometry(b)
            U = K.to_batch(src.gather_cells(blk.local), n, d)
            Uq = K.interpolate_to_quadrature(U, basis, c, strat)
            fluxes = self._cell_fluxes(g, Uq, t, field, blk)
            acc = K.gradient_test_collocation(fluxes, basis, c, strat)
            if acc is None:
                acc = np.zeros_like(Uq)
            dst.owned[blk.local] = K.to_cells(K.interpolate_transpose(acc, basis, c, strat))
            c.modeled_doubles_moved += 2 * len(blk.local) * n**d + g["mapping_loads"]
        scratch = np.zeros((p.n_ghost_entries, n ** (d - 1)))
        view = dst.owned.reshape((-1,) + (n,) * d)
        for b, blk in enumerate(self.blocks):
            g = self._geometry(b)
            m = len(blk.local)
            own = src.owned[blk.local]
            for axis in range(d):
                f = 2 * axis + 1
                fg = g["faces"][f]
                um = K.interpolate_face_nodal(K.to_batch(face_trace(own, f, d, n), n, d - 1), basis, c, strat)
                traces = src.gather_neighbor_traces(blk.local, f)
                up = K.interpolate_face_nodal(K.to_batch(traces, n, d - 1), basis, c, strat)
                an = self._normal_velocity(fg, t, field, blk)
                q = numerical_flux(um, up, an, self.flux) * fg["dS"]
                c.flux_evals += um.size
                c.flops += 8 * um.size
                rows = K.to_cells(K.face_test_nodal(q, basis, c, strat))
                fshape = (n,) * (d - 1)
                idx = (blk.local,) + _face_index(d, n, f)
                view[idx] -= rows.reshape((m,) + fshape)
                nb = p.nb_local[blk.local, f]
                on = nb >= 0
                if on.any():
                    view[(nb[on],) + _face_index(d, n, f ^ 1)] += rows[on].reshape((-1,) + fshape)
                if not on.all():
                    scratch[p.face_entry[blk.local[~on], f]] = rows[~on]
            c.modeled_doubles_moved += d * m * n ** (d - 1) * 2
        dst.compress_add(scratch)
        self.inverse_mass(dst, dst, count_application=False)
        c.dofs_processed += p.n_owned * n**d
        c.applications += 1
        c.wall_seconds += time.perf_counter() - t0
        return dst

    # --------------------------------------------------------- mass matrices
    def inverse_mass(self, src, dst, count_application=True):
        """dst = M^-1 src, cell by cell: B^-1 diag(1/(|J| w)) B^-T."""
        c, basis, strat, n, d = self.counters, self.basis, self.strategy, self.n, self.d
        t0 = time.perf_counter()
        for b, blk in enumerate(self.blocks):
            g = self._geometry(b)
            U = K.to_batch(src.owned[blk.local], n, d)
            y = K.apply_inverse_vandermonde_transpose(U, basis, c, strat)
            y = y * g["inv_jxw"]
            c.flops += y.size
            c.pointwise_passes += 1
            dst.owned[blk.local] = K.to_cells(K.apply_inverse_vandermonde(y, basis, c, strat))
            m = len(blk.local)
            c.modeled_doubles_moved += (3 if self.tables.deformed else 2) * m * n**d
            if count_application:
                c.dofs_processed += m * n**d
        dst.mark_modified()
        if count_application:
            c.applications += 1
            c.wall_seconds += time.perf_counter() - t0
        return dst

    def mass(self, src, dst):
        """dst = M src = B^T diag(|J| w) B src."""
        c, basis, strat, n, d = self.counters, self.basis, self.strategy, self.n, self.d
        for b, blk in enumerate(self.blocks):
            g = self._geometry(b)
            U = K.interpolate_to_quadrature(K.to_batch(src.owned[blk.local], n, d), basis, c, strat)
            dst.owned[blk.local] = K.to_cells(K.interpolate_transpose(U * g["jxw"], basis, c, strat))
        dst.mark_modified()
        return dst


def advection_apply_ecl(op, src, t=0.0, field=None, dst=None):
    if dst is None:
        from .vector import allocate

        dst = allocate(op.p, src.mode, ghosted=False)
    return op.apply_ecl(src, dst, t, field)


def advection_apply_fcl(op, src, t=0.0, field=None, dst=None):
    if dst is None:
        from .vector import allocate

        dst = allocate(op.p, BUFFERED, ghosted=False)
    return op.apply_fcl(src, dst, t, field)


def inverse_mass_apply(op, src, dst=None):
    return op.inverse_mass(src, src if dst is None else dst)


def mass_apply(op, src, dst):
    return op.mass(src, dst)


from .oracle import assemble_dense_operator, assemble_dense_system  # noqa: E402,F401
