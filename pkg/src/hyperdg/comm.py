"""In-process message passing between logical ranks.

Ranks run as threads of one process.  A `Fabric` holds the shared state
(mailboxes, barriers, collective slots, shared-memory windows); every rank
talks to it through its own `Comm` handle.  Collectives combine contributions
in ascending rank order, so results are bitwise reproducible.
"""

from __future__ import annotations

import queue
import threading
from collections import defaultdict

TIMEOUT = 600.0


class AbortedError(RuntimeError):
    pass


class Fabric:
    def __init__(self, n_ranks):
        self.n_ranks = n_ranks
        self._lock = threading.Lock()
        self._mailboxes = defaultdict(queue.Queue)
        self._barriers = {}
        self._slots = {}
        self._windows = defaultdict(dict)
        self.aborted = threading.Event()

    def mailbox(self, src, dst, tag):
        with self._lock:
            return self._mailboxes[(src, dst, tag)]

    def barrier(self, group):
        with self._lock:
            if group not in self._barriers:
                self._barriers[group] = threading.Barrier(len(group), timeout=TIMEOUT)
            return self._barriers[group]

    def slots(self, group):
        with self._lock:
            if group not in self._slots:
                self._slots[group] = {}
            return self._slots[group]

    def window(self, key):
        with self._lock:
            return self._windows[key]

    def abort(self):
        self.aborted.set()
        with self._lock:
            for b in self._barriers.values():
                b.abort()


class Comm:
    """Communicator over an ordered tuple of ranks."""

    def __init__(self, fabric, rank, group=None):
        self.fabric = fabric
        self.rank = rank
        self.group = tuple(group) if group is not None else tuple(range(fabric.n_ranks))
        if rank not in self.group:
            raise ValueError("rank must belong to its communicator group")

    @property
    def size(self):
        return len(self.group)

    @property
    def index(self):
        return self.group.index(self.rank)

    def sub(self, group):
        return Comm(self.fabric, self.rank, group)

    def barrier(self):
        if self.size == 1:
            return
        try:
            self.fabric.barrier(self.group).wait()
        except threading.BrokenBarrierError as exc:
            raise AbortedError("barrier broken by another rank") from exc

    def send(self, obj, dest, tag):
        self.fabric.mailbox(self.rank, dest, tag).put(obj)

    def recv(self, source, tag):
        box = self.fabric.mailbox(source, self.rank, tag)
        waited = 0.0
        while True:
            try:
                return box.get(timeout=0.5)
            except queue.Empty:
                waited += 0.5
                if self.fabric.aborted.is_set():
                    raise AbortedError("receive aborted") from None
                if waited > TIMEOUT:
                    raise TimeoutError(f"rank {self.rank} waited too long for {source}") from None

    def allgather(self, obj):
        if self.size == 1:
            return [obj]
        slots = self.fabric.slots(self.group)
        slots[self.rank] = obj
        self.barrier()
        out = [slots[r] for r in self.group]
        self.barrier()
        return out

    def allreduce_sum(self, value):
        parts = self.allgather(value)
        total = parts[0].copy() if hasattr(parts[0], "copy") else parts[0]
        for p in parts[1:]:
            total = total + p
        return total


def run_spmd(n_ranks, program, *args, **kwargs):
    """Run program(comm, *args) on n_ranks ranks; returns per-rank results."""
    fabric = Fabric(n_ranks)
    if n_ranks == 1:
        return [program(Comm(fabric, 0), *args, **kwargs)]
    results = [None] * n_ranks
    errors = []

    def target(r):
        try:
            results[r] = program(Comm(fabric, r), *args, **kwargs)
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller
            errors.append((r, exc))
            fabric.abort()

    threads = [threading.Thread(target=target, args=(r,), daemon=True) for r in range(n_ranks)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        real = [e for e in errors if not isinstance(e[1], AbortedError)] or errors
        raise real[0][1]
    return results
