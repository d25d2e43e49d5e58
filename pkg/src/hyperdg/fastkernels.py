"""Compiled element-centric loop for Cartesian meshes and constant velocity.

This is the throughput path used by the benchmark: the same algorithm as
`AdvectionOperator.apply_ecl` (gather, d interpolation sweeps, d collocation
derivative sweeps, 2d faces, division by |J| w, d inverse basis-change sweeps,
scatter) with every 1D sweep applied in even-odd form.  All buffers of one
batch are allocated once, so the per-batch working set is v_len * (k+1)^d
values per buffer.  Only single-rank runs are supported; ghost exchange is
the job of the general operator.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .operators import ConstantField

# meta layout of a packed 1D operator
_NIN, _NOUT, _HI, _HO, _PARITY, _MIDCOL, _MIDROW, _KIND = range(8)
_DENSE, _EVEN_ODD, _IDENTITY = 0, 1, 2


def pack_op(op, scale=1.0):
    """TensorOp1D -> (int meta, float data) for the compiled sweeps."""
    n_out, n_in = op.shape
    meta = np.zeros(8, dtype=np.int64)
    meta[_NIN], meta[_NOUT] = n_in, n_out
    if op.identity and scale == 1.0:
        meta[_KIND] = _IDENTITY
        return meta, np.zeros(1)
    eo = op.even_odd
    if eo is None:
        meta[_KIND] = _DENSE
        return meta, np.ascontiguousarray(scale * op.matrix).ravel()
    meta[_KIND] = _EVEN_ODD
    meta[_HI], meta[_HO] = n_in // 2, n_out // 2
    meta[_PARITY] = eo.parity
    parts = [eo.even.ravel(), eo.odd.ravel()]
    if eo.mid_col is not None:
        meta[_MIDCOL] = 1
        parts.append(eo.mid_col)
    if eo.mid_row_even is not None:
        meta[_MIDROW] = 1
        parts += [eo.mid_row_even, np.array([eo.mid_entry])]
    elif eo.mid_row_odd is not None:
        meta[_MIDROW] = 2
        parts.append(eo.mid_row_odd)
    return meta, scale * np.concatenate(parts)


@njit(cache=True)
def _sweep(x, y, pre, post, meta, data, accumulate, ebuf, obuf, ta, tb):
    """y (+)= M applied along the middle axis of x viewed as (pre, n_in, post)."""
    nin, nout, kind = meta[0], meta[1], meta[7]
    if kind == 2:
        for i in range(pre * nin * post):
            if accumulate:
                y[i] += x[i]
            else:
                y[i] = x[i]
        return
    if kind == 0:
        for p in range(pre):
            xb = p * nin * post
            yb = p * nout * post
            for i in range(nout):
                for q in range(post):
                    ta[q] = 0.0
                for j in range(nin):
                    mij = data[i * nin + j]
                    for q in range(post):
                        ta[q] += mij * x[xb + j * post + q]
                for q in range(post):
                    if accumulate:
                        y[yb + i * post + q] += ta[q]
                    else:
                        y[yb + i * post + q] = ta[q]
        return
    hi, ho, parity = meta[2], meta[3], meta[4]
    o_off = ho * hi
    mc_off = 2 * ho * hi
    mr_off = mc_off + (ho if meta[5] else 0)
    for p in range(pre):
        xb = p * nin * post
        yb = p * nout * post
        for j in range(hi):
            for q in range(post):
                u = x[xb + j * post + q]
                v = x[xb + (nin - 1 - j) * post + q]
                ebuf[j * post + q] = 0.5 * (u + v)
                obuf[j * post + q] = 0.5 * (u - v)
        for i in range(ho):
            for q in range(post):
                ta[q] = 0.0
                tb[q] = 0.0
            for j in range(hi):
                eij = data[i * hi + j]
                oij = data[o_off + i * hi + j]
                for q in range(post):
                    ta[q] += eij * ebuf[j * post + q]
                    tb[q] += oij * obuf[j * post + q]
            if meta[5]:
                c = data[mc_off + i]
                for q in range(post):
                    ta[q] += c * x[xb + hi * post + q]
            for q in range(post):
                lo = ta[q] + tb[q]
                hv = parity * (ta[q] - tb[q])
                if accumulate:
                    y[yb + i * post + q] += lo
                    y[yb + (nout - 1 - i) * post + q] += hv
                else:
                    y[yb + i * post + q] = lo
                    y[yb + (nout - 1 - i) * post + q] = hv
        if meta[6]:
            for q in range(post):
                ta[q] = 0.0
            for j in range(hi):
                r = data[mr_off + j]
                for q in range(post):
                    if meta[6] == 1:
                        ta[q] += r * ebuf[j * post + q]
                    else:
                        ta[q] += r * obuf[j * post + q]
            if meta[6] == 1 and nin % 2 == 1:
                c = data[mr_off + hi]
                for q in range(post):
                    ta[q] += c * x[xb + hi * post + q]
            for q in range(post):
                if accumulate:
                    y[yb + ho * post + q] += ta[q]
                else:
                    y[yb + ho * post + q] = ta[q]


@njit(cache=True)
def _sweep_all(x, y, n, d, m, meta, data, ebuf, obuf, ta, tb):
    """d sweeps, ping-ponging between x and y; returns 1 if the result is in y."""
    if meta[7] == 2:
        return 0
    src_is_x = True
    for a in range(d):
        pre = n**a
        post = n ** (d - 1 - a) * m
        if src_is_x:
            _sweep(x, y, pre, post, meta, data, False, ebuf, obuf, ta, tb)
        else:
            _sweep(y, x, pre, post, meta, data, False, ebuf, obuf, ta, tb)
        src_is_x = not src_is_x
    return 0 if src_is_x else 1


@njit(cache=True)
def ecl_blocks(src, dst, lanes, starts, nb, n, d, interp_m, interp_d, dco_m, dco_d, inv_m, inv_d,
               weights, inv_weights, coef, face_w, face_an, face_ds, upwind):
    """All batches of the compiled ECL; batch b holds lanes[starts[b]:starts[b+1]]."""
    N = n**d
    Nf = n ** (d - 1)
    vmax = 0
    for b in range(len(starts) - 1):
        vmax = max(vmax, starts[b + 1] - starts[b])
    A = np.empty(N * vmax)
    B = np.empty(N * vmax)
    acc = np.empty(N * vmax)
    F1 = np.empty(Nf * vmax)
    F2 = np.empty(Nf * vmax)
    F3 = np.empty(Nf * vmax)
    ebuf = np.empty(N * vmax)
    obuf = np.empty(N * vmax)
    ta = np.empty(N * vmax)
    tb = np.empty(N * vmax)
    for b in range(len(starts) - 1):
        m = starts[b + 1] - starts[b]
        base = starts[b]
        # gather AoS -> SoA
        for lane in range(m):
            c = lanes[base + lane]
            for i in range(N):
                A[i * m + lane] = src[c, i]
        # values at quadrature points
        if _sweep_all(A, B, n, d, m, interp_m, interp_d, ebuf, obuf, ta, tb) == 1:
            U = B
            W = A
        else:
            U = A
            W = B
        for i in range(N):
            w = weights[i]
            for lane in range(m):
                W[i * m + lane] = w * U[i * m + lane]
        first = True
        for a in range(d):
            if coef[a] == 0.0:
                continue
            pre = n**a
            post = n ** (d - 1 - a) * m
            if first:
                _sweep(W, acc, pre, post, dco_m, dco_d[a], False, ebuf, obuf, ta, tb)
                first = False
            else:
                _sweep(W, acc, pre, post, dco_m, dco_d[a], True, ebuf, obuf, ta, tb)
        if first:
            for i in range(N * m):
                acc[i] = 0.0
        # faces
        for f in range(2 * d):
            a = f // 2
            side = f % 2
            pre = n**a
            post = n ** (d - 1 - a) * m
            # interior trace from quadrature values: one sweep with the boundary row
            for p in range(pre):
                for q in range(post):
                    s = 0.0
                    for j in range(n):
                        s += face_w[side, j] * U[(p * n + j) * post + q]
                    F1[p * post + q] = s
            # exterior trace: neighbor's nodal face values
            fixed = 0 if side == 1 else n - 1
            npost = n ** (d - 1 - a)
            for lane in range(m):
                c = nb[lanes[base + lane], f]
                for p in range(pre):
                    for q in range(npost):
                        F2[(p * npost + q) * m + lane] = src[c, (p * n + fixed) * npost + q]
            up = F2
            if _sweep_all(F2, F3, n, d - 1, m, interp_m, interp_d, ebuf, obuf, ta, tb) == 1:
                up = F3
            an = face_an[f]
            for i in range(Nf):
                ds = face_ds[a, i]
                for lane in range(m):
                    k = i * m + lane
                    um = F1[k]
                    upv = up[k]
                    flux = 0.5 * an * (um + upv)
                    if upwind:
                        flux += 0.5 * abs(an) * (um - upv)
                    F1[k] = -flux * ds
            for p in range(pre):
                for j in range(n):
                    wj = face_w[side, j]
                    for q in range(post):
                        acc[(p * n + j) * post + q] += wj * F1[p * post + q]
        for i in range(N):
            s = inv_weights[i]
            for lane in range(m):
                acc[i * m + lane] *= s
        if _sweep_all(acc, A, n, d, m, inv_m, inv_d, ebuf, obuf, ta, tb) == 1:
            R = A
        else:
            R = acc
        for lane in range(m):
            c = lanes[base + lane]
            for i in range(N):
                dst[c, i] = R[i * m + lane]


class CompiledECL:
    """Compiled M^-1 A for one rank on a Cartesian mesh with constant velocity."""

    def __init__(self, op, field):
        if not isinstance(field, ConstantField):
            raise ValueError("the compiled loop supports constant velocity only")
        if op.tables.deformed:
            raise ValueError("the compiled loop supports Cartesian meshes only")
        p = op.p
        if p.n_ghost_entries:
            raise ValueError("the compiled loop runs on a single rank")
        basis, d, n = op.basis, op.d, op.n
        self.op, self.field = op, field
        h = np.concatenate([op.topo.mesh_x.cell_size, op.topo.mesh_v.cell_size])
        vol = float(np.prod(h))
        from .operators import tensor_weights

        w1 = basis.quadrature.weights
        self.weights = vol * tensor_weights(w1, d)
        self.inv_weights = 1.0 / self.weights
        a = np.array(field.a)
        self.coef = a / h
        self.interp = pack_op(basis.ops["interp"])
        self.inv = pack_op(basis.ops["inv_vandermonde"])
        dco = [pack_op(basis.ops["colloc_derivative_T"], c) for c in self.coef]
        self.dco_meta = dco[0][0]
        self.dco_data = np.array([x[1] for x in dco])
        self.face_w = np.ascontiguousarray(basis.face_weights)
        self.face_an = np.array([a[f // 2] * (1.0 if f % 2 else -1.0) for f in range(2 * d)])
        wf = tensor_weights(w1, d - 1)
        self.face_ds = np.array([vol / h[ax] * wf for ax in range(d)])
        self.upwind = op.flux == "upwind"
        lanes = np.concatenate([blk.local for blk in op.blocks]).astype(np.int64)
        starts = np.cumsum([0] + [len(blk.local) for blk in op.blocks]).astype(np.int64)
        self.lanes, self.starts = lanes, starts
        self.nb = np.ascontiguousarray(p.nb_local)

    def apply(self, src, dst):
        op = self.op
        ecl_blocks(src.owned, dst.owned, self.lanes, self.starts, self.nb, op.n, op.d,
                   self.interp[0], self.interp[1], self.dco_meta, self.dco_data, self.inv[0], self.inv[1],
                   self.weights, self.inv_weights, self.coef, self.face_w, self.face_an, self.face_ds,
                   self.upwind)
        dst.mark_modified()
        return dst
