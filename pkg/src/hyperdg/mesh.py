"""Structured periodic meshes in x- and v-space and their tensor product."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

INDEX_MAX = np.iinfo(np.int64).max

# dimension splits d -> (d_x, d_v)
DIMENSION_SPLITS = {2: (1, 1), 3: (2, 1), 4: (2, 2), 5: (3, 2), 6: (3, 3)}


@dataclass(frozen=True)
class Deformation:
    kind: str = "none"
    amplitude: float = 0.0

    @property
    def active(self):
        return self.kind == "sinusoidal"


@dataclass(frozen=True)
class LowDimMesh:
    """Hyperrectangle split into subdivisions[a] cells along axis a.

    Cells are numbered lexicographically with axis 0 running fastest.  The
    optional deformation x -> x + eps * prod_i sin(2 pi xhat_i) (applied to
    every component, xhat the coordinate normalized to the extent) is kept
    symbolic and evaluated pointwise.
    """

    dim: int
    subdivisions: tuple
    extents: tuple  # ((lo, hi), ...)
    deformation: Deformation = Deformation()

    @property
    def cell_count(self):
        return int(np.prod(self.subdivisions))

    @property
    def lower(self):
        return np.array([e[0] for e in self.extents], dtype=float)

    @property
    def lengths(self):
        return np.array([e[1] - e[0] for e in self.extents], dtype=float)

    @property
    def cell_size(self):
        return self.lengths / np.array(self.subdivisions, dtype=float)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    def cell_multi_index(self, cells):
        """Integer multi-index of each cell, shape (..., dim)."""
        cells = np.asarray(cells, dtype=np.int64)
        out = np.empty(cells.shape + (self.dim,), dtype=np.int64)
        rem = cells.copy()
        for a, s in enumerate(self.subdivisions):
            out[..., a] = rem % s
            rem //= s
        return out

    def cell_index(self, multi):
        multi = np.asarray(multi, dtype=np.int64)
        idx = np.zeros(multi.shape[:-1], dtype=np.int64)
        stride = 1
        for a, s in enumerate(self.subdivisions):
            idx += (multi[..., a] % s) * stride
            stride *= s
        return idx

    def cartesian_points(self, cells, xi):
        """Undeformed points for reference coordinates xi (P, dim) -> (m, P, dim)."""
        origin = self.lower + self.cell_multi_index(cells) * self.cell_size
        return origin[:, None, :] + np.asarray(xi)[None, :, :] * self.cell_size

    def _bump(self, X):
        # sin/cos of the normalized coordinate and the product P with its gradient
        theta = 2.0 * np.pi * (X - self.lower) / self.lengths
        s, c = np.sin(theta), np.cos(theta)
        prod = np.prod(s, axis=-1)
        grad = np.empty_like(X)
        for j in range(self.dim):
            others = np.prod(np.delete(s, j, axis=-1), axis=-1) if self.dim > 1 else 1.0
            grad[..., j] = 2.0 * np.pi / self.lengths[j] * c[..., j] * others
        return prod, grad

    def points(self, cells, xi):
        cells = np.atleast_1d(cells)
        X = self.cartesian_points(cells, xi)
        if not self.deformation.active:
            return X
        prod, _ = self._bump(X)
        return X + self.deformation.amplitude * prod[..., None]

    def jacobians(self, cells, xi):
        """dx/dxi at reference points, shape (m, P, dim, dim)."""
        cells = np.atleast_1d(cells)
        xi = np.asarray(xi)
        h = self.cell_size
        shape = (len(cells), xi.shape[0], self.dim, self.dim)
        jac = np.zeros(shape)
        if not self.deformation.active:
            jac[...] = np.diag(h)
            return jac
        X = self.cartesian_points(cells, xi)
        _, grad = self._bump(X)
        eps = self.deformation.amplitude
        # (I + eps * 1 grad^T) diag(h)
        jac[...] = np.eye(self.dim)
        jac += eps * grad[..., None, :]
        return jac * h


def _check_deformation(dim, subdivisions, extents, deformation):
    if not deformation.active:
        return
    if deformation.kind != "sinusoidal":
        raise ValueError(f"unknown deformation {deformation.kind!r}")
    eps = abs(deformation.amplitude)
    lengths = np.array([hi - lo for lo, hi in extents])
    bound = 0.5 / (max(subdivisions) * np.pi) * lengths.min()
    # sufficient condition for det J > 0: eps * sum_j 2 pi / L_j < 1
    if eps >= bound or eps * np.sum(2.0 * np.pi / lengths) >= 1.0:
        raise ValueError(f"deformation amplitude {eps} too large for a bijective mapping")


def build_lowdim_mesh(dim, subdivisions, extents=None, deformation=None):
    if dim not in (1, 2, 3):
        raise ValueError("low-dimensional meshes have dim 1, 2 or 3")
    if np.isscalar(subdivisions):
        subdivisions = (int(subdivisions),) * dim
    subdivisions = tuple(int(s) for s in subdivisions)
    if len(subdivisions) != dim or min(subdivisions) < 1:
        raise ValueError(f"invalid subdivisions {subdivisions} for dim {dim}")
    if extents is None:
        extents = ((0.0, 1.0),) * dim
    extents = tuple((float(lo), float(hi)) for lo, hi in extents)
    if len(extents) != dim or any(hi <= lo for lo, hi in extents):
        raise ValueError(f"invalid extents {extents}")
    if deformation is None:
        deformation = Deformation()
    elif isinstance(deformation, (int, float)):
        deformation = Deformation("sinusoidal", float(deformation)) if deformation else Deformation()
    _check_deformation(dim, subdivisions, extents, deformation)
    return LowDimMesh(dim, subdivisions, extents, deformation)


def neighbor(mesh, cell, face):
    """Periodic neighbor across `face` (2a: low side of axis a, 2a+1: high side)."""
    if not 0 <= face < 2 * mesh.dim:
        raise ValueError(f"face {face} out of range for dim {mesh.dim}")
    multi = mesh.cell_multi_index(cell)
    axis, side = divmod(face, 2)
    multi = multi.copy()
    multi[..., axis] += 1 if side else -1
    out = mesh.cell_index(multi)
    return int(out) if np.ndim(out) == 0 else out


def neighbor_table(mesh):
    """Array (cells, 2*dim) of periodic neighbors."""
    cells = np.arange(mesh.cell_count)
    return np.stack([neighbor(mesh, cells, f) for f in range(2 * mesh.dim)], axis=1)


class CellPair(NamedTuple):
    cx: int
    cv: int


@dataclass(frozen=True)
class TensorTopology:
    mesh_x: LowDimMesh
    mesh_v: LowDimMesh

    def __post_init__(self):
        if not 2 <= self.d <= 6:
            raise ValueError("phase-space dimension must be between 2 and 6")

    @property
    def d_x(self):
        return self.mesh_x.dim

    @property
    def d_v(self):
        return self.mesh_v.dim

    @property
    def d(self):
        return self.d_x + self.d_v

    @property
    def n_cells(self):
        return self.mesh_x.cell_count * self.mesh_v.cell_count

    def global_index(self, cx, cv):
        return cv * self.mesh_x.cell_count + cx

    def cell_pair(self, g):
        cv, cx = divmod(int(g), self.mesh_x.cell_count)
        return CellPair(cx, cv)

    def neighbor(self, pair, face):
        """Neighbor cell pair across a phase-space face (x faces first)."""
        cx, cv = pair
        if face < 2 * self.d_x:
            return CellPair(neighbor(self.mesh_x, cx, face), cv)
        return CellPair(cx, neighbor(self.mesh_v, cv, face - 2 * self.d_x))


def build_topology(d_x, d_v, subdivisions_x, subdivisions_v, extents_x=None, extents_v=None,
                   deformation_x=None, deformation_v=None):
    mx = build_lowdim_mesh(d_x, subdivisions_x, extents_x, deformation_x)
    mv = build_lowdim_mesh(d_v, subdivisions_v, extents_v, deformation_v)
    return TensorTopology(mx, mv)


class FaceDescriptor(NamedTuple):
    space: str  # "x" or "v"
    cell: int  # cell in that space on the low (minus) side
    face: int  # high-side face id of `cell` in that space
    other: int  # cell index in the other space


def lowdim_inner_faces(mesh):
    """Each inner face once, as (cell, high-side face) pairs."""
    return [(c, 2 * a + 1) for c in range(mesh.cell_count) for a in range(mesh.dim)]


def tensor_faces(topo):
    """Inner faces of the tensor mesh: (face_x, cell_v) and (cell_x, face_v) pairs."""
    out = []
    fx, fv = lowdim_inner_faces(topo.mesh_x), lowdim_inner_faces(topo.mesh_v)
    for cv in range(topo.mesh_v.cell_count):
        out.extend(FaceDescriptor("x", c, f, cv) for c, f in fx)
    for cx in range(topo.mesh_x.cell_count):
        out.extend(FaceDescriptor("v", c, f, cx) for c, f in fv)
    return out


def boundary_faces(topo):
    return []  # periodic in every direction


def dof_count(topo, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    n = topo.n_cells * (k + 1) ** topo.d
    if n > INDEX_MAX:
        raise OverflowError(f"DoF count {n} exceeds the 64-bit index range")
    return n
