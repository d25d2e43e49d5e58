"""Checkerboard partitioning of the tensor mesh over a p_x x p_v process grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .mesh import CellPair, neighbor_table


def split_range(n, p):
    """Contiguous near-equal ranges; the remainder goes one per part from part 0."""
    base, rem = divmod(n, p)
    out, start = [], 0
    for i in range(p):
        size = base + (1 if i < rem else 0)
        out.append((start, start + size))
        start += size
    return tuple(out)


@dataclass(frozen=True)
class PartitionLayout:
    p_x: int
    p_v: int
    node_block: tuple
    x_owned: tuple  # per i: (start, stop) in T_x
    v_owned: tuple  # per j: (start, stop) in T_v
    n_cells_x: int
    n_cells_v: int

    @property
    def n_ranks(self):
        return self.p_x * self.p_v

    def rank_of(self, i, j):
        return j * self.p_x + i

    def coords(self, rank):
        j, i = divmod(rank, self.p_x)
        return i, j

    @cached_property
    def x_owner(self):
        own = np.empty(self.n_cells_x, dtype=np.int64)
        for i, (a, b) in enumerate(self.x_owned):
            own[a:b] = i
        return own

    @cached_property
    def v_owner(self):
        own = np.empty(self.n_cells_v, dtype=np.int64)
        for j, (a, b) in enumerate(self.v_owned):
            own[a:b] = j
        return own

    def owner(self, cx, cv):
        return self.v_owner[cv] * self.p_x + self.x_owner[cx]

    def owned_cells(self, rank):
        """Owned (cx, cv) arrays in local order (cx fastest)."""
        i, j = self.coords(rank)
        x0, x1 = self.x_owned[i]
        v0, v1 = self.v_owned[j]
        cv, cx = np.meshgrid(np.arange(v0, v1), np.arange(x0, x1), indexing="ij")
        return cx.ravel(), cv.ravel()

    def n_owned(self, rank):
        i, j = self.coords(rank)
        return (self.x_owned[i][1] - self.x_owned[i][0]) * (self.v_owned[j][1] - self.v_owned[j][0])

    def local_index(self, rank, cx, cv):
        """Position of owned cells in the local order of `rank`."""
        i, j = self.coords(rank)
        x0, x1 = self.x_owned[i]
        v0 = self.v_owned[j][0]
        return (np.asarray(cv) - v0) * (x1 - x0) + (np.asarray(cx) - x0)

    def domain_of(self, rank):
        i, j = self.coords(rank)
        bx, bv = self.node_block
        return (j // bv) * (self.p_x // bx) + i // bx

    def same_domain(self, r1, r2):
        return self.domain_of(r1) == self.domain_of(r2)

    def domain_ranks(self, rank):
        dom = self.domain_of(rank)
        return tuple(r for r in range(self.n_ranks) if self.domain_of(r) == dom)

    def row_group(self, j):
        return tuple(self.rank_of(i, j) for i in range(self.p_x))

    def column_group(self, i):
        return tuple(self.rank_of(i, j) for j in range(self.p_v))


def make_layout(topo, p_x=1, p_v=1, node_block=None):
    nx, nv = topo.mesh_x.cell_count, topo.mesh_v.cell_count
    if p_x < 1 or p_v < 1:
        raise ValueError("process grid dimensions must be positive")
    if p_x * p_v > topo.n_cells or p_x > nx or p_v > nv:
        raise ValueError(f"process grid {p_x}x{p_v} too large for {nx}x{nv} cells")
    if node_block is None:
        node_block = (p_x, p_v)
    bx, bv = (int(b) for b in node_block)
    if bx < 1 or bv < 1 or p_x % bx or p_v % bv:
        raise ValueError(f"node block {node_block} does not tile the {p_x}x{p_v} grid")
    return PartitionLayout(p_x, p_v, (bx, bv), split_range(nx, p_x), split_range(nv, p_v), nx, nv)


def _morton_key(bi, bj):
    key = 0
    for bit in range(32):
        key |= ((bi >> bit) & 1) << (2 * bit)
        key |= ((bj >> bit) & 1) << (2 * bit + 1)
    return key


def virtual_topology_renumber(layout):
    """perm[rank] = worker index; each node block gets consecutive workers.

    Blocks are visited along a z-curve over the block grid; inside a block the
    ranks keep their lexicographic order.
    """
    bx, bv = layout.node_block
    nbx, nbv = layout.p_x // bx, layout.p_v // bv
    blocks = sorted(((bi, bj) for bj in range(nbv) for bi in range(nbx)), key=lambda b: _morton_key(*b))
    perm = np.empty(layout.n_ranks, dtype=np.int64)
    worker = 0
    for bi, bj in blocks:
        for lj in range(bv):
            for li in range(bx):
                perm[layout.rank_of(bi * bx + li, bj * bv + lj)] = worker
                worker += 1
    return perm


def invert_permutation(perm):
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


class GhostEntry(NamedTuple):
    owner_rank: int
    cell_pair: CellPair  # the neighbor cell, owned by owner_rank
    face_id: int  # face of the neighbor cell whose trace is needed
    dof_count: int
    same_domain: bool
    local_cell: int  # requesting owned cell (local index)
    local_face: int  # its face pointing to the neighbor


@dataclass(frozen=True)
class GhostPlan:
    rank: int
    entries: tuple

    def __len__(self):
        return len(self.entries)

    @property
    def same_domain_entries(self):
        return tuple(e for e in self.entries if e.same_domain)

    @property
    def remote_entries(self):
        return tuple(e for e in self.entries if not e.same_domain)

    def ghost_doubles(self, mode="buffered"):
        items = self.entries if mode == "buffered" else self.remote_entries
        return sum(e.dof_count for e in items)

    def csv_rows(self, topo):
        for e in self.entries:
            yield (self.rank, e.owner_rank, topo.global_index(*e.cell_pair), e.face_id, 8 * e.dof_count)


def neighbor_cells(topo, cx, cv):
    """Global neighbor (cx, cv) arrays for every face, shape (m, 2d)."""
    tx, tv = neighbor_table(topo.mesh_x), neighbor_table(topo.mesh_v)
    m, dx = len(cx), topo.d_x
    ncx = np.empty((m, 2 * topo.d), dtype=np.int64)
    ncv = np.empty_like(ncx)
    ncx[:, : 2 * dx] = tx[cx]
    ncv[:, : 2 * dx] = cv[:, None]
    ncx[:, 2 * dx :] = cx[:, None]
    ncv[:, 2 * dx :] = tv[cv]
    return ncx, ncv


def ghost_plan(topo, layout, rank, k):
    """Faces of owned cells whose neighbor lives on another rank."""
    cx, cv = layout.owned_cells(rank)
    ncx, ncv = neighbor_cells(topo, cx, cv)
    owners = layout.owner(ncx, ncv)
    dofs = (k + 1) ** (topo.d - 1)
    items = []
    for lc, f in zip(*np.nonzero(owners != rank)):
        o = int(owners[lc, f])
        pair = CellPair(int(ncx[lc, f]), int(ncv[lc, f]))
        items.append((o, topo.global_index(*pair), int(f) ^ 1, pair, int(lc), int(f)))
    items.sort(key=lambda t: t[:3])
    entries = tuple(
        GhostEntry(o, pair, nf, dofs, layout.same_domain(rank, o), lc, f) for o, _, nf, pair, lc, f in items
    )
    return GhostPlan(rank, entries)


def write_ghost_plan_csv(path, topo, plans):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "owner", "cell", "face", "bytes"])
        for plan in plans:
            w.writerows(plan.csv_rows(topo))


@dataclass(frozen=True)
class CommEstimate:
    d: int
    k: int
    n_dofs: int
    n_ranks: int
    owned_cells: tuple  # |L_i|
    counted_volume: tuple  # ghost doubles per rank
    lower_bound: tuple  # |L'_i|^{(d-1)/d} with |L'_i| the ideal cells per rank
    normalized_volume: tuple  # volume_i / (2 d (k+1)^{d-1})
    total_lower: float

    def within_upper(self):
        return all(v <= u for v, u in zip(self.normalized_volume, self.owned_cells))

    def within_lower(self):
        return all(v >= lo - 1e-12 for v, lo in zip(self.normalized_volume, self.lower_bound))

    def rows(self):
        for r in range(self.n_ranks):
            yield {
                "rank": r,
                "owned_cells": self.owned_cells[r],
                "ghost_doubles": self.counted_volume[r],
                "normalized": self.normalized_volume[r],
                "lower": self.lower_bound[r],
                "upper": self.owned_cells[r],
            }


def total_volume_lower_bound(d, n_dofs, p):
    """Lower bound on the summed ghost volume (doubles) of p hypercube subdomains."""
    return 2.0 * d * n_dofs ** ((d - 1) / d) * p ** (1.0 / d)


def ghost_fraction_lower_bound(d, n_dofs, p):
    return total_volume_lower_bound(d, n_dofs, p) / n_dofs


def estimate_comm_volume(topo, layout, k):
    d = topo.d
    n = k + 1
    p = layout.n_ranks
    n_dofs = topo.n_cells * n**d
    ideal = topo.n_cells / p
    owned, counted, lower, normalized = [], [], [], []
    for r in range(p):
        plan = ghost_plan(topo, layout, r, k)
        vol = plan.ghost_doubles()
        owned.append(layout.n_owned(r))
        counted.append(vol)
        lower.append(ideal ** ((d - 1) / d))
        normalized.append(vol / (2 * d * n ** (d - 1)))
    return CommEstimate(d, k, n_dofs, p, tuple(owned), tuple(counted), tuple(lower), tuple(normalized),
                        total_volume_lower_bound(d, n_dofs, p))
