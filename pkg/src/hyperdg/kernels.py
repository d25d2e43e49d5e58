"""Sum-factorization kernels on batches of cells.

A batch is an array of shape (n_0, ..., n_{d-1}, v_len): one tensor axis per
dimension (x axes first, then v axes) and the lanes, one per cell, running
fastest (structure-of-arrays layout).  Every kernel is a sequence of 1D
contractions along one tensor axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import TensorOp1D

V_LENGTHS = (1, 2, 4, 8)


@dataclass
class CellBatch:
    """Coefficients of v_len cells in SoA layout."""

    values: np.ndarray
    k: int

    def __post_init__(self):
        n = self.k + 1
        if self.values.shape[:-1] != (n,) * (self.values.ndim - 1):
            raise ValueError(f"batch shape {self.values.shape} does not match degree {self.k}")

    @classmethod
    def zeros(cls, k, d, v_len):
        return cls(np.zeros((k + 1,) * d + (v_len,)), k)

    @classmethod
    def from_cells(cls, k, d, cell_rows):
        """Cell rows (v_len, (k+1)^d) in AoS order -> SoA batch."""
        rows = np.asarray(cell_rows, dtype=float)
        return cls(np.ascontiguousarray(rows.T).reshape((k + 1,) * d + (len(rows),)), k)

    def to_cells(self):
        return to_cells(self.values)

    @property
    def d(self):
        return self.values.ndim - 1

    @property
    def v_len(self):
        return self.values.shape[-1]

    def __len__(self):
        return self.values.size


def to_batch(rows, n, d):
    """AoS rows (m, n^d) -> SoA batch (n,)*d + (m,)."""
    return np.ascontiguousarray(np.asarray(rows).T).reshape((n,) * d + (len(rows),))


def to_cells(values):
    """SoA batch -> AoS rows (m, prod(tensor shape))."""
    m = values.shape[-1]
    return np.ascontiguousarray(values.reshape(-1, m).T)


def _as_op(matrix):
    return matrix if isinstance(matrix, TensorOp1D) else TensorOp1D.build(matrix)


def contract_dim(values, matrix, dim, counters=None, strategy="even_odd"):
    """Mode-`dim` product of a batch with an (n_out, n_in) matrix.

    With strategy="even_odd" a (skew-)centrosymmetric matrix is applied with
    the even-odd factorization; otherwise (or if the matrix lacks the
    symmetry) the dense product is used.
    """
    if strategy != "even_odd" and not isinstance(matrix, TensorOp1D):
        op = None
        dense = np.asarray(matrix)
        n_out, n_in = dense.shape
    else:
        op = _as_op(matrix)
        dense = op.matrix
        n_out, n_in = op.shape
    shape = values.shape
    if not 0 <= dim < len(shape) - 1:
        raise ValueError(f"invalid contraction axis {dim}")
    if shape[dim] != n_in:
        raise ValueError(f"extent {shape[dim]} along axis {dim} does not match matrix with {n_in} columns")
    pre = int(np.prod(shape[:dim], dtype=np.int64))
    post = int(np.prod(shape[dim + 1 :], dtype=np.int64))
    x3 = values.reshape(pre, n_in, post)
    use_eo = strategy == "even_odd" and op.even_odd is not None
    if use_eo:
        y3 = op.even_odd.apply(x3)
        flops = op.even_odd.line_flops() * pre * post
    else:
        y3 = np.matmul(dense, x3)
        flops = 2 * n_out * n_in * pre * post
    if counters is not None:
        counters.flops += flops
        counters.contraction_sweeps += 1
        if strategy == "even_odd" and not use_eo:
            counters.dense_fallbacks += 1
    return y3.reshape(shape[:dim] + (n_out,) + shape[dim + 1 :])


def _sweep_all(values, op, dims, counters, strategy):
    if op.identity:
        return values
    for a in dims:
        values = contract_dim(values, op, a, counters, strategy)
    return values


def interpolate_to_quadrature(values, basis, counters=None, strategy="even_odd"):
    """Nodal coefficients -> values at the tensor quadrature points."""
    d = values.ndim - 1
    return _sweep_all(values, basis.ops["interp"], range(d), counters, strategy)


def interpolate_transpose(values, basis, counters=None, strategy="even_odd"):
    """Apply B^T along every axis (test with the nodal basis)."""
    d = values.ndim - 1
    return _sweep_all(values, basis.ops["interp_T"], range(d), counters, strategy)


def apply_inverse_vandermonde(values, basis, counters=None, strategy="even_odd"):
    """Values at quadrature points -> nodal coefficients."""
    d = values.ndim - 1
    return _sweep_all(values, basis.ops["inv_vandermonde"], range(d), counters, strategy)


def apply_inverse_vandermonde_transpose(values, basis, counters=None, strategy="even_odd"):
    d = values.ndim - 1
    return _sweep_all(values, basis.ops["inv_vandermonde_T"], range(d), counters, strategy)


def gradient_test_collocation(fluxes, basis, counters=None, strategy="even_odd"):
    """sum_a D_a^T t_a with D the collocation derivative on the quadrature points.

    Returns the result tested with the Lagrange basis of the quadrature
    points; fluxes are visited in order, so x components come before v.
    """
    op = basis.ops["colloc_derivative_T"]
    acc = None
    for a, t in enumerate(fluxes):
        if t is None:
            continue
        r = contract_dim(t, op, a, counters, strategy)
        if acc is None:
            acc = r
        else:
            acc += r
            if counters is not None:
                counters.flops += r.size
                counters.pointwise_passes += 1
    return acc


def integrate_test_gradient(fluxes, basis, counters=None, strategy="even_odd"):
    """sum_q grad(phi_i)(xi_q) . t_q for every nodal basis function (2d sweeps)."""
    acc = gradient_test_collocation(fluxes, basis, counters, strategy)
    return interpolate_transpose(acc, basis, counters, strategy)


def interpolate_to_face(values, face, basis, counters=None):
    """Cell values at quadrature points -> values at the face quadrature points."""
    d = values.ndim - 1
    axis, side = divmod(face, 2)
    if not 0 <= face < 2 * d:
        raise ValueError(f"invalid face id {face} for d={d}")
    row = basis.face_weights[side][None, :]
    out = contract_dim(values, row, axis, counters, strategy="dense")
    return out.reshape(values.shape[:axis] + values.shape[axis + 1 :])


def integrate_face(face_values, face, basis, counters=None):
    """Transpose of interpolate_to_face: expand face values into cell quad space."""
    d = face_values.ndim
    axis, side = divmod(face, 2)
    col = basis.face_weights[side][:, None]
    expanded = face_values.reshape(face_values.shape[:axis] + (1,) + face_values.shape[axis:])
    if not 0 <= face < 2 * d:
        raise ValueError(f"invalid face id {face}")
    return contract_dim(expanded, col, axis, counters, strategy="dense")


def interpolate_face_nodal(face_values, basis, counters=None, strategy="even_odd"):
    """Nodal face trace (n,)*(d-1) + (m,) -> values at face quadrature points."""
    return _sweep_all(face_values, basis.ops["interp"], range(face_values.ndim - 1), counters, strategy)


def face_test_nodal(face_values, basis, counters=None, strategy="even_odd"):
    """Face quadrature values -> tested with the nodal face basis (B^T sweeps)."""
    return _sweep_all(face_values, basis.ops["interp_T"], range(face_values.ndim - 1), counters, strategy)
