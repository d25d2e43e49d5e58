"""Partitioned phase-space vector with ghost faces and shared-memory modes.

Owned data is stored per cell (array of shape (owned_cells, (k+1)^d), the
per-cell tensor flattened in C order over the d axes).  Ghost storage holds
one face trace ((k+1)^(d-1) values) per ghost face.  In ``buffered`` mode all
ghost faces get storage; in ``non_buffered`` mode only faces owned by ranks of
another shared-memory domain do, while same-domain neighbors are read
directly from the peer's owned array.
"""

from __future__ import annotations

import os
import struct
from functools import lru_cache

import numpy as np

from .comm import Comm, Fabric
from .partition import ghost_plan

BUFFERED = "buffered"
NON_BUFFERED = "non_buffered"
MODES = (BUFFERED, NON_BUFFERED)

DEBUG = os.environ.get("HYPERDG_DEBUG", "1") != "0"

SNAPSHOT_MAGIC = b"HDGSNAP1"


class GhostProtocolError(RuntimeError):
    pass


@lru_cache(maxsize=32)
def all_ghost_plans(topo, layout, k):
    return tuple(ghost_plan(topo, layout, r, k) for r in range(layout.n_ranks))


def face_trace(cells_data, face, d, n):
    """Nodal trace on `face` of cell tensors given as (m, n^d) -> (m, n^(d-1))."""
    axis, side = divmod(face, 2)
    t = cells_data.reshape((-1,) + (n,) * d)
    return np.take(t, n - 1 if side else 0, axis=1 + axis).reshape(len(t), -1)


def _face_index(d, n, face):
    axis, side = divmod(face, 2)
    idx = [slice(None)] * d
    idx[axis] = n - 1 if side else 0
    return tuple(idx)


class Partitioner:
    """Per-rank view of the partition: owned cells, neighbor sources, transfer lists."""

    def __init__(self, topo, layout, rank, k, comm=None):
        self.topo, self.layout, self.rank, self.k = topo, layout, rank, k
        self.n = k + 1
        self.d = topo.d
        if comm is None:
            if layout.n_ranks != 1:
                raise ValueError("a communicator is required for more than one rank")
            comm = Comm(Fabric(1), 0)
        self.comm = comm
        i, j = layout.coords(rank)
        self.sm_ranks = layout.domain_ranks(rank)
        self.sm_comm = comm.sub(self.sm_ranks)
        self.row_comm = comm.sub(layout.row_group(j))
        self.col_comm = comm.sub(layout.column_group(i))
        self.cx, self.cv = layout.owned_cells(rank)
        self.n_owned = len(self.cx)
        self.global_cells = topo.global_index(self.cx, self.cv)
        self.allocations = 0

        plans = all_ghost_plans(topo, layout, k)
        self.plan = plans[rank]
        d2 = 2 * self.d
        entries = self.plan.entries
        self.face_entry = np.full((self.n_owned, d2), -1, dtype=np.int64)
        for e, g in enumerate(entries):
            self.face_entry[g.local_cell, g.local_face] = e
        self.entry_owner = np.array([g.owner_rank for g in entries], dtype=np.int64)
        self.entry_same = np.array([g.same_domain for g in entries], dtype=bool)
        nb_cx = np.array([g.cell_pair.cx for g in entries], dtype=np.int64)
        nb_cv = np.array([g.cell_pair.cv for g in entries], dtype=np.int64)
        self.entry_peer_local = np.array(
            [layout.local_index(o, x, v) for o, x, v in zip(self.entry_owner, nb_cx, nb_cv)], dtype=np.int64
        )
        self.entry_face = np.array([g.face_id for g in entries], dtype=np.int64)
        # local neighbor indices for faces that stay on this rank
        from .partition import neighbor_cells

        ncx, ncv = neighbor_cells(topo, self.cx, self.cv)
        self.nb_local = np.where(self.face_entry < 0, layout.local_index(rank, ncx, ncv), -1)
        # slots: buffered -> entry index; non-buffered -> index among remote entries
        self.remote_slot = np.full(len(entries), -1, dtype=np.int64)
        self.remote_slot[~self.entry_same] = np.arange(int((~self.entry_same).sum()))
        # imports from remote owners, in plan order
        self.imports = {}
        for e in np.nonzero(~self.entry_same)[0]:
            self.imports.setdefault(int(self.entry_owner[e]), []).append(int(e))
        # exports: for every rank s that ghosts our cells
        self.exports = {}
        for s, plan in enumerate(plans):
            if s == rank:
                continue
            mine = [(e, g) for e, g in enumerate(plan.entries) if g.owner_rank == rank]
            if not mine:
                continue
            remote_count = np.cumsum([not g.same_domain for g in plan.entries]) - 1
            self.exports[s] = {
                "local": np.array([layout.local_index(rank, *g.cell_pair) for _, g in mine], dtype=np.int64),
                "face": np.array([g.face_id for _, g in mine], dtype=np.int64),
                "slot_buffered": np.array([e for e, _ in mine], dtype=np.int64),
                "slot_non_buffered": np.array([remote_count[e] for e, _ in mine], dtype=np.int64),
                "same_domain": mine[0][1].same_domain,
            }

    @property
    def n_ghost_entries(self):
        return len(self.plan.entries)

    def owned_pairs(self):
        return list(zip(self.cx.tolist(), self.cv.tolist()))

    def local_of(self, pair):
        cx, cv = pair
        if self.layout.owner(cx, cv) != self.rank:
            return None
        return int(self.layout.local_index(self.rank, cx, cv))


class PhaseVector:
    """Distributed vector: one instance per rank."""

    def __init__(self, partitioner, mode=NON_BUFFERED, ghosted=True):
        if mode not in MODES:
            raise ValueError(f"unknown vector mode {mode!r}")
        self.partitioner = p = partitioner
        self.mode = mode
        self.ghosted = ghosted
        self.n, self.d = p.n, p.d
        self.dofs_per_cell = self.n**self.d
        self.dofs_per_face = self.n ** (self.d - 1)
        self.owned = np.zeros((p.n_owned, self.dofs_per_cell))
        if not ghosted:
            n_slots = 0
        elif mode == BUFFERED:
            n_slots = p.n_ghost_entries
        else:
            n_slots = int((~p.entry_same).sum())
        self.ghost = np.zeros((n_slots, self.dofs_per_face))
        self.epoch = 0
        self._state = "stale"
        self.read_log = None
        self.ghost_updates = 0
        self.transferred_doubles = 0
        self._seq = seq = p.allocations
        p.allocations += 1
        self._window = p.comm.fabric.window(("vec", p.layout.domain_of(p.rank), seq))
        self._window[p.rank] = self

    # ------------------------------------------------------------------ state
    def _slot_array(self):
        p = self.partitioner
        if self.mode == BUFFERED:
            return np.arange(p.n_ghost_entries)
        return p.remote_slot

    def _peer(self, rank):
        return self._window[rank]

    def mark_modified(self):
        if self._state == "pending":
            raise GhostProtocolError("owned data modified during a ghost update")
        self._state = "stale"

    def ghosts_fresh(self):
        if self._state == "fresh":
            return True
        return self.partitioner.n_ghost_entries == 0 and self._state != "pending"

    def _check_readable(self):
        if DEBUG and self.partitioner.n_ghost_entries and self._state != "fresh":
            raise GhostProtocolError(f"ghost values read in state {self._state!r} (epoch {self.epoch})")

    # ----------------------------------------------------------- ghost update
    def update_ghost_values_start(self):
        p = self.partitioner
        if self._state == "pending":
            raise GhostProtocolError("ghost update already pending")
        if not self.ghosted and p.n_ghost_entries:
            raise GhostProtocolError("vector was allocated without ghost storage")
        p.sm_comm.barrier()
        if self.mode == BUFFERED:
            # same-domain faces: direct copy out of the peer's owned storage
            same = np.nonzero(p.entry_same)[0]
            for e in same:
                peer = self._peer(int(p.entry_owner[e]))
                row = peer.owned[p.entry_peer_local[e]]
                self.ghost[e] = face_trace(row[None], int(p.entry_face[e]), self.d, self.n)[0]
            self.transferred_doubles += len(same) * self.dofs_per_face
        for s, ex in p.exports.items():
            if ex["same_domain"]:
                continue
            packed = self._pack(ex["local"], ex["face"])
            p.comm.send(packed, s, ("ghost", self._window_key()))
            self.transferred_doubles += packed.size
        self._state = "pending"

    def update_ghost_values_finish(self):
        p = self.partitioner
        if self._state != "pending":
            raise GhostProtocolError("update_ghost_values_finish called without start")
        slots = self._slot_array()
        for owner, ents in sorted(p.imports.items()):
            data = p.comm.recv(owner, ("ghost", self._window_key()))
            self.ghost[slots[ents]] = data
        p.sm_comm.barrier()
        self.epoch += 1
        self.ghost_updates += 1
        self._state = "fresh"

    def update_ghost_values(self):
        self.update_ghost_values_start()
        self.update_ghost_values_finish()

    def release_ghost_values(self):
        """Close the read window opened by finish.

        In non_buffered mode peers read our owned storage directly, so the
        shared-memory domain synchronizes before anyone writes again.
        """
        p = self.partitioner
        if self.mode == NON_BUFFERED and len(p.sm_ranks) > 1:
            p.sm_comm.barrier()
        if self._state == "fresh":
            self._state = "released"

    def _window_key(self):
        return self._seq

    def _pack(self, local, faces):
        out = np.empty((len(local), self.dofs_per_face))
        for f in np.unique(faces):
            sel = faces == f
            out[sel] = face_trace(self.owned[local[sel]], int(f), self.d, self.n)
        return out

    # ----------------------------------------------------------------- access
    def _log(self, global_cells, dof_index):
        if self.read_log is not None:
            ids = global_cells[:, None] * self.dofs_per_cell + dof_index[None, :]
            self.read_log.append(ids.ravel())

    def gather_cells(self, local):
        if self.read_log is not None:
            self._log(self.partitioner.global_cells[local], np.arange(self.dofs_per_cell))
        return self.owned[local]

    def gather_neighbor_traces(self, local, face):
        """Neighbor traces across `face` for owned cells `local` -> (m, n^(d-1))."""
        p = self.partitioner
        local = np.asarray(local)
        opp = face ^ 1
        out = np.empty((len(local), self.dofs_per_face))
        nb = p.nb_local[local, face]
        on_rank = nb >= 0
        if on_rank.any():
            out[on_rank] = face_trace(self.owned[nb[on_rank]], opp, self.d, self.n)
        if not on_rank.all():
            self._check_readable()
            ents = p.face_entry[local[~on_rank], face]
            rows = np.nonzero(~on_rank)[0]
            if self.mode == BUFFERED:
                out[rows] = self.ghost[ents]
            else:
                remote = ~p.entry_same[ents]
                out[rows[remote]] = self.ghost[p.remote_slot[ents[remote]]]
                for owner in np.unique(p.entry_owner[ents[~remote]]):
                    sel = ~remote & (p.entry_owner[ents] == owner)
                    peer = self._peer(int(owner))
                    out[rows[sel]] = face_trace(peer.owned[p.entry_peer_local[ents[sel]]], opp, self.d, self.n)
        if self.read_log is not None:
            self._log_traces(local, face)
        return out

    def _log_traces(self, local, face):
        p = self.partitioner
        topo = p.topo
        opp = face ^ 1
        idx = np.arange(self.dofs_per_cell).reshape((self.n,) * self.d)[_face_index(self.d, self.n, opp)].ravel()
        cx, cv = p.cx[local], p.cv[local]
        nbs = [topo.neighbor((x, v), face) for x, v in zip(cx.tolist(), cv.tolist())]
        g = np.array([topo.global_index(*c) for c in nbs], dtype=np.int64)
        self._log(g, idx)

    def read_cell_dofs(self, pair):
        """Coefficients of an owned or same-domain cell as an (n,)*d tensor view."""
        p = self.partitioner
        cx, cv = pair
        owner = int(p.layout.owner(cx, cv))
        loc = int(p.layout.local_index(owner, cx, cv))
        if owner == p.rank:
            row = self.owned[loc]
        elif owner in p.sm_ranks:
            row = self._peer(owner).owned[loc]
        else:
            raise KeyError(f"cell {pair} is owned by rank {owner} in another shared-memory domain")
        return row.reshape((self.n,) * self.d)

    def write_cell_dofs(self, pair, values):
        loc = self.partitioner.local_of(pair)
        if loc is None:
            raise KeyError(f"cell {pair} is not owned by rank {self.partitioner.rank}")
        self.owned[loc] = np.asarray(values, dtype=float).reshape(-1)
        self.mark_modified()

    def read_face_dofs(self, pair, face):
        """Trace of the neighbor of owned cell `pair` across `face`."""
        if not 0 <= face < 2 * self.d:
            raise ValueError(f"face {face} out of range")
        loc = self.partitioner.local_of(pair)
        if loc is None:
            raise KeyError(f"cell {pair} is not owned by rank {self.partitioner.rank}")
        return self.gather_neighbor_traces(np.array([loc]), face)[0]

    # ------------------------------------------------------------- compress
    def compress_add(self, contributions, tag="compress"):
        """Add ghost-face contributions (indexed like buffered slots) to their owners.

        Each rank sends the slots owned elsewhere; owners add incoming data in
        ascending source-rank order.
        """
        p = self.partitioner
        p.sm_comm.barrier()
        key = (tag, self._window_key())
        by_owner = {}
        for e, o in enumerate(p.entry_owner):
            by_owner.setdefault(int(o), []).append(e)
        for owner, ents in by_owner.items():
            p.comm.send(contributions[ents], owner, key)
            self.transferred_doubles += len(ents) * self.dofs_per_face
        view = self.owned.reshape((-1,) + (self.n,) * self.d)
        for s in sorted(p.exports):
            ex = p.exports[s]
            data = p.comm.recv(s, key)
            for f in np.unique(ex["face"]):
                sel = ex["face"] == f
                idx = (ex["local"][sel],) + _face_index(self.d, self.n, int(f))
                cur = view[idx].reshape(int(sel.sum()), -1)
                view[idx] = (cur + data[sel]).reshape(view[idx].shape)
        p.sm_comm.barrier()
        self.mark_modified()

    # --------------------------------------------------------------- helpers
    def fill(self, value):
        self.owned.fill(value)
        self.mark_modified()

    def assign(self, values):
        self.owned[...] = values
        self.mark_modified()

    def allocated_ghost_doubles(self):
        return self.ghost.size

    def to_global(self):
        """Collective: full (n_cells, n^d) array on every rank."""
        p = self.partitioner
        parts = p.comm.allgather((p.global_cells, self.owned))
        out = np.empty((p.topo.n_cells, self.dofs_per_cell))
        for cells, data in parts:
            out[cells] = data
        return out

    def from_global(self, values):
        self.assign(np.asarray(values).reshape(-1, self.dofs_per_cell)[self.partitioner.global_cells])


def allocate(partitioner, mode=NON_BUFFERED, ghosted=True):
    return PhaseVector(partitioner, mode, ghosted)


def to_lexicographic(values, d, n):
    """Per-cell C-order tensors -> axis-0-fastest ordering, flattened."""
    t = np.asarray(values).reshape((-1,) + (n,) * d)
    return t.transpose((0,) + tuple(range(d, 0, -1))).reshape(-1)


def from_lexicographic(flat, d, n):
    t = np.asarray(flat).reshape((-1,) + (n,) * d)
    return t.transpose((0,) + tuple(range(d, 0, -1))).reshape(len(t), -1)


def export_snapshot(path, topo, k, global_values):
    n = k + 1
    data = to_lexicographic(global_values, topo.d, n).astype("<f8")
    subs = tuple(topo.mesh_x.subdivisions) + tuple(topo.mesh_v.subdivisions)
    header = SNAPSHOT_MAGIC + struct.pack("<3I", topo.d_x, topo.d_v, k) + struct.pack(f"<{len(subs)}I", *subs)
    header += struct.pack("<Q", data.size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def read_snapshot(path):
    """Returns (header dict, values as (n_cells, n^d) in internal per-cell order)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise ValueError("not a snapshot file")
    d_x, d_v, k = struct.unpack_from("<3I", raw, 8)
    off = 20
    subs = struct.unpack_from(f"<{d_x + d_v}I", raw, off)
    off += 4 * (d_x + d_v)
    (count,) = struct.unpack_from("<Q", raw, off)
    off += 8
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=off)
    header = {"d_x": d_x, "d_v": d_v, "k": k, "subdivisions_x": subs[:d_x], "subdivisions_v": subs[d_x:]}
    return header, from_lexicographic(flat, d_x + d_v, k + 1)
