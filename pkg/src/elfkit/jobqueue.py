"""File-journaled work queue with manual acknowledgement.

Dispatch follows the usual broker settings for long-running work: tasks
and queue state survive restarts, a worker holds at most one
unacknowledged task (prefetch 1), and a task whose worker disappears
before acknowledging it is delivered again (at-least-once).

Journal format, one record per line, appended and fsync'd before the
corresponding call returns::

    E <id> <payload>     task enqueued
    L <id> <worker>      task leased to worker
    A <id>               task acknowledged
    S <generation>       generation sealed (no more tasks belong to it)
    F <generation>       final-task hook of the generation completed

Opening a journal replays it. Leases found during replay belong to a
previous process and are returned to the queue. A torn last line (no
trailing newline) is discarded.
"""

from __future__ import annotations

import heapq
import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable

log = logging.getLogger(__name__)

QUEUED, LEASED, ACKED = "queued", "leased", "acked"


class QueueError(RuntimeError):
    pass


class PrefetchViolation(QueueError):
    pass


class JournalCorrupt(QueueError):
    pass


@dataclass
class Task:
    id: int
    payload: str
    generation: int
    state: str = QUEUED
    worker: str | None = None


def parse_model_task(payload: str) -> tuple[str, str, str]:
    """Split ``"searchWindow:dataComposition:modelName"``."""
    parts = payload.split(":")
    if len(parts) != 3 or not all(parts):
        raise ValueError(f"model task must have 3 non-empty ':' fields, got {payload!r}")
    return parts[0], parts[1], parts[2]


def model_task(search_window, data_composition: str, model_name: str) -> str:
    payload = f"{search_window}:{data_composition}:{model_name}"
    parse_model_task(payload)
    return payload


class JobQueue:
    """Durable queue backed by an append-only journal file.

    Safe for concurrent callers within one process; every state change is
    serialised through the journal writer.
    """

    def __init__(self, path, fsync: bool = True):
        self.path = str(path)
        self.fsync = fsync
        self._lock = threading.RLock()
        self._tasks: dict[int, Task] = {}
        self._ready: list[int] = []  # heap of queued ids, oldest first
        self._holding: dict[str, int] = {}
        self._lease_time: dict[int, float] = {}
        self._next_id = 1
        self._generation = 1
        self._sealed: set[int] = set()
        self._finished: set[int] = set()
        self._hook: Callable[[int], None] | None = None
        self._in_hook = False
        self.recovered_leases = 0
        self._replay()
        self._fh = open(self.path, "a", encoding="utf-8")

    # journal ----------------------------------------------------------

    def _replay(self) -> None:
        if not os.path.exists(self.path):
            return
        with open(self.path, "rb") as fh:
            raw = fh.read()
        good = raw.rfind(b"\n") + 1
        if good < len(raw):
            log.warning("%s: discarding torn record of %d bytes", self.path, len(raw) - good)
            with open(self.path, "r+b") as fh:
                fh.truncate(good)
        for lineno, line in enumerate(raw[:good].decode("utf-8").splitlines(), 1):
            self._apply(line, lineno)
        for task in self._tasks.values():
            if task.state == LEASED:
                task.state, task.worker = QUEUED, None
                self.recovered_leases += 1
        self._ready = [t.id for t in self._tasks.values() if t.state == QUEUED]
        heapq.heapify(self._ready)
        if self.recovered_leases:
            log.info("%s: returned %d orphaned leases to the queue", self.path,
                     self.recovered_leases)

    def _apply(self, line: str, lineno: int) -> None:
        kind, _, rest = line.partition(" ")
        try:
            if kind == "E":
                sid, _, payload = rest.partition(" ")
                tid = int(sid)
                self._tasks[tid] = Task(tid, payload, self._generation)
                self._next_id = max(self._next_id, tid + 1)
            elif kind == "L":
                sid, _, worker = rest.partition(" ")
                task = self._tasks[int(sid)]
                task.state, task.worker = LEASED, worker
            elif kind == "A":
                task = self._tasks[int(rest)]
                task.state, task.worker = ACKED, None
            elif kind == "S":
                self._sealed.add(int(rest))
                self._generation = int(rest) + 1
            elif kind == "F":
                self._finished.add(int(rest))
            else:
                raise ValueError(kind)
        except (KeyError, ValueError) as exc:
            raise JournalCorrupt(f"{self.path}:{lineno}: bad record {line!r}") from exc

    def _append(self, record: str) -> None:
        self._fh.write(record + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # operations -------------------------------------------------------

    def enqueue(self, payload: str) -> int:
        if not payload or "\n" in payload or "\r" in payload:
            raise ValueError("payload must be a non-empty single line")
        with self._lock:
            tid = self._next_id
            self._append(f"E {tid} {payload}")
            self._next_id += 1
            self._tasks[tid] = Task(tid, payload, self._generation)
            heapq.heappush(self._ready, tid)
            return tid

    def lease(self, worker: str) -> Task | None:
        """Hand the oldest queued task to ``worker``; None when nothing is queued."""
        if not worker or any(c.isspace() for c in worker):
            raise ValueError("worker id must be a non-empty token without whitespace")
        with self._lock:
            if worker in self._holding:
                raise PrefetchViolation(
                    f"worker {worker} still holds task {self._holding[worker]}")
            if not self._ready:
                return None
            task = self._tasks[self._ready[0]]
            self._append(f"L {task.id} {worker}")
            heapq.heappop(self._ready)
            task.state, task.worker = LEASED, worker
            self._holding[worker] = task.id
            self._lease_time[task.id] = time.monotonic()
            return Task(task.id, task.payload, task.generation, LEASED, worker)

    def ack(self, worker: str, task_id: int) -> None:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None or task.state != LEASED or task.worker != worker:
                state = "unknown" if task is None else task.state
                raise QueueError(f"task {task_id} is not leased by {worker} ({state})")
            self._append(f"A {task_id}")
            task.state, task.worker = ACKED, None
            del self._holding[worker]
            self._lease_time.pop(task_id, None)
            self._check_generations()

    def requeue_expired(self, timeout: float, now: float | None = None) -> list[int]:
        """Return leases older than ``timeout`` seconds to the queue."""
        with self._lock:
            now = time.monotonic() if now is None else now
            expired = [tid for tid, t0 in self._lease_time.items() if now - t0 >= timeout]
            for tid in expired:
                task = self._tasks[tid]
                log.info("lease of task %d by %s expired", tid, task.worker)
                self._holding.pop(task.worker, None)
                task.state, task.worker = QUEUED, None
                del self._lease_time[tid]
                heapq.heappush(self._ready, tid)
            return expired

    # generations ------------------------------------------------------

    def final_task_hook(self, callback: Callable[[int], None]) -> None:
        """Run ``callback(generation)`` once every task of a sealed generation is acked.

        The callback may enqueue the next generation. It runs again after a
        crash that interrupted it, so it must be idempotent.
        """
        with self._lock:
            self._hook = callback
            self._check_generations()

    def seal(self) -> int:
        """Close the current generation; later tasks belong to the next one."""
        with self._lock:
            gen = self._generation
            self._append(f"S {gen}")
            self._sealed.add(gen)
            self._generation = gen + 1
            self._check_generations()
            return gen

    def _check_generations(self) -> None:
        # a hook that seals or acks re-enters here; the outer loop picks that up
        if self._hook is None or self._in_hook:
            return
        while True:
            pending = sorted(self._sealed - self._finished)
            if not pending:
                return
            gen = pending[0]
            if any(t.generation == gen and t.state != ACKED for t in self._tasks.values()):
                return
            self._in_hook = True
            try:
                self._hook(gen)
            except Exception:
                log.exception("final-task hook of generation %d failed", gen)
                return
            finally:
                self._in_hook = False
            self._append(f"F {gen}")
            self._finished.add(gen)

    # inspection -------------------------------------------------------

    @property
    def generation(self) -> int:
        return self._generation

    def task(self, task_id: int) -> Task:
        with self._lock:
            t = self._tasks[task_id]
            return Task(t.id, t.payload, t.generation, t.state, t.worker)

    def tasks(self) -> list[Task]:
        with self._lock:
            return [self.task(t) for t in sorted(self._tasks)]

    def counts(self) -> dict[str, int]:
        with self._lock:
            out = {QUEUED: 0, LEASED: 0, ACKED: 0}
            for t in self._tasks.values():
                out[t.state] += 1
            return out

    def holding(self, worker: str) -> int | None:
        with self._lock:
            return self._holding.get(worker)

    def drained(self) -> bool:
        c = self.counts()
        return c[QUEUED] == 0 and c[LEASED] == 0
