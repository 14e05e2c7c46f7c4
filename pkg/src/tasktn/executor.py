"""Dependency-driven execution of task graphs on a pool of worker threads."""

from __future__ import annotations

import heapq
import os
import random
import threading
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .taskgraph import Task, TaskGraph, insert_deletions
from .tensor import Tensor, dtype_for, matmul_aligned, transpose

__all__ = [
    "ExecConfig",
    "ExecReport",
    "MemoryLimitExceeded",
    "run",
    "simulate_peak_memory",
    "serial_schedule",
    "default_workers",
]


class MemoryLimitExceeded(RuntimeError):
    def __init__(self, task: str, needed: int, limit: int):
        super().__init__(f"task {task!r} would raise live memory to {needed} bytes, limit is {limit}")
        self.task = task
        self.needed = needed
        self.limit = limit


def default_workers() -> int:
    text = os.environ.get("TASKTN_WORKERS", "1")
    try:
        n = int(text)
    except ValueError:
        n = 0
    if n < 1:
        raise ValueError(f"TASKTN_WORKERS must be a positive integer, got {text!r}")
    return n


@dataclass(frozen=True)
class ExecConfig:
    workers: int = 1
    enable_deletion: bool = True
    memory_limit: int | None = None
    precision: str = "single"
    #: when set, ready tasks are picked at random (for schedule-perturbation tests)
    seed: int | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        dtype_for(self.precision)


@dataclass
class ExecReport:
    result: Tensor
    executed: int
    flop: int
    peak_bytes: int
    wall_time: float
    timings: dict[str, float] = field(default_factory=dict)
    order: list[str] = field(default_factory=list)

    @property
    def amplitude(self) -> complex:
        return self.result.value()

    def as_dict(self) -> dict:
        return {
            "tasks": self.executed,
            "flop": self.flop,
            "peak_bytes": self.peak_bytes,
            "seconds": self.wall_time,
            **{f"seconds_{k}": v for k, v in sorted(self.timings.items())},
        }


def _prepare(g: TaskGraph, enable_deletion: bool) -> TaskGraph:
    has_delete = any(t.kind == "delete" for t in g.tasks.values())
    if enable_deletion and not has_delete:
        return insert_deletions(g)
    if not enable_deletion and has_delete:
        stripped = TaskGraph(
            tasks={n: t for n, t in g.tasks.items() if t.kind != "delete"},
            leaves=g.leaves,
            inputs=g.inputs,
            output=g.output,
            requested=g.requested,
            n_slices=g.n_slices,
            slice_labels=g.slice_labels,
        )
        return stripped
    return g


def _input_bytes(g: TaskGraph, itemsize: int) -> int:
    total = 0
    for indices in g.inputs.values():
        n = 1
        for i in indices:
            n *= i.dim
        total += n * itemsize
    return total


def run(g: TaskGraph, inputs: Mapping[str, Tensor], cfg: ExecConfig = ExecConfig()) -> ExecReport:
    """Execute ``g``; blocks until the output is available.

    Slice results are summed in the reduce task's dependency order, so the
    result does not depend on worker count or completion order.
    """
    g = _prepare(g, cfg.enable_deletion)
    dtype = dtype_for(cfg.precision)
    itemsize = dtype.itemsize
    missing = sorted(set(g.inputs) - set(inputs))
    if missing:
        raise KeyError(f"no tensors bound for leaves {missing}")
    bound = {nid: inputs[nid].astype(dtype) for nid in g.inputs}
    for nid, indices in g.inputs.items():
        if bound[nid].indices != tuple(indices):
            raise ValueError(f"input {nid!r} has indices {bound[nid].indices}, graph expects {indices}")
    leaf_cache: dict[str, Tensor] = {}
    leaf_lock = threading.Lock()

    def operand(ref: str, results: dict) -> Tensor:
        if ref in results:
            return results[ref]
        with leaf_lock:
            t = leaf_cache.get(ref)
            if t is None:
                b = g.leaves[ref]
                t = bound[b.node_id].fix(dict(b.fixed))
                leaf_cache[ref] = t
        return t

    def execute(task: Task, results: dict) -> Tensor | None:
        if task.kind == "transpose":
            return transpose(operand(task.deps[0], results), task.order)
        if task.kind == "matmul":
            a = operand(task.deps[0], results)
            b = operand(task.deps[1], results)
            return matmul_aligned(a, b, task.contracted)
        if task.kind == "reduce":
            parts = [operand(d, results) for d in task.deps]
            acc = parts[0].data.copy()
            for p in parts[1:]:
                acc += p.data
            return Tensor(parts[0].indices, acc)
        return None

    names = list(g.tasks)
    pos = {n: i for i, n in enumerate(names)}
    dependents = g.dependents()
    waiting = {n: len(set(g.task_deps(n))) for n in names}
    rng = random.Random(cfg.seed) if cfg.seed is not None else None

    def key(n: str):
        # deletes first so memory is released as early as possible
        return (0 if g.tasks[n].kind == "delete" else 1, pos[n])

    ready: list = []
    for n in names:
        if waiting[n] == 0:
            ready.append(key(n) + (n,))
    heapq.heapify(ready)

    cond = threading.Condition()
    results: dict[str, Tensor] = {}
    state = {
        "live": _input_bytes(g, itemsize),
        "remaining": len(names),
        "error": None,
        "flop": 0,
    }
    state["peak"] = state["live"]
    order: list[str] = []
    timings: dict[str, float] = defaultdict(float)

    def pop_ready() -> str:
        if rng is not None:
            i = rng.randrange(len(ready))
            item = ready[i]
            ready[i] = ready[-1]
            ready.pop()
            heapq.heapify(ready)
            return item[-1]
        return heapq.heappop(ready)[-1]

    def worker():
        while True:
            with cond:
                while not ready and state["remaining"] > 0 and state["error"] is None:
                    cond.wait()
                if state["remaining"] == 0 or state["error"] is not None:
                    cond.notify_all()
                    return
                name = pop_ready()
                task = g.tasks[name]
                if task.kind == "delete":
                    tensor = results.pop(task.target, None)
                    if tensor is not None:
                        state["live"] -= tensor.nbytes
                    _finish(name)
                    continue
                need = task.nbytes(itemsize)
                if cfg.memory_limit is not None and state["live"] + need > cfg.memory_limit:
                    state["error"] = MemoryLimitExceeded(name, state["live"] + need, cfg.memory_limit)
                    cond.notify_all()
                    return
                # reserve the output at allocation time
                state["live"] += need
                state["peak"] = max(state["peak"], state["live"])
            t0 = time.perf_counter()
            try:
                out = execute(task, results)
            except Exception as exc:  # surfaced to the caller of run()
                with cond:
                    state["error"] = exc
                    cond.notify_all()
                return
            dt = time.perf_counter() - t0
            with cond:
                results[name] = out
                timings[task.kind] += dt
                if task.kind == "matmul":
                    state["flop"] += task.flop
                _finish(name)

    def _finish(name: str):
        order.append(name)
        state["remaining"] -= 1
        for m in dependents[name]:
            waiting[m] -= 1
            if waiting[m] == 0:
                heapq.heappush(ready, key(m) + (m,))
        cond.notify_all()

    start = time.perf_counter()
    if cfg.workers == 1:
        worker()
    else:
        threads = [threading.Thread(target=worker, daemon=True) for _ in range(cfg.workers)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    wall = time.perf_counter() - start
    if state["error"] is not None:
        raise state["error"]
    return ExecReport(
        result=results[g.output],
        executed=len(order),
        flop=state["flop"],
        peak_bytes=state["peak"],
        wall_time=wall,
        timings=dict(timings),
        order=order,
    )


def serial_schedule(g: TaskGraph) -> list[str]:
    """The order a single worker runs ``g`` in: ready deletes first, then insertion order."""
    names = list(g.tasks)
    pos = {n: i for i, n in enumerate(names)}
    dependents = g.dependents()
    waiting = {n: len(set(g.task_deps(n))) for n in names}

    def key(n):
        return (0 if g.tasks[n].kind == "delete" else 1, pos[n], n)

    ready = [key(n) for n in names if waiting[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)[-1]
        order.append(n)
        for m in dependents[n]:
            waiting[m] -= 1
            if waiting[m] == 0:
                heapq.heappush(ready, key(m))
    if len(order) != len(names):
        raise ValueError("task graph has a cycle")
    return order


def simulate_peak_memory(
    g: TaskGraph,
    schedule: Sequence[str] | None = None,
    precision: str = "single",
    include_inputs: bool = True,
) -> int:
    """Replay allocations and deletions of ``schedule`` and return the peak live bytes.

    The default schedule is the single-worker order of :func:`run`.
    """
    itemsize = dtype_for(precision).itemsize
    if schedule is None:
        schedule = serial_schedule(g)
    if sorted(schedule) != sorted(g.tasks):
        raise ValueError("schedule must list every task exactly once")
    done: set[str] = set()
    live_sizes: dict[str, int] = {}
    live = _input_bytes(g, itemsize) if include_inputs else 0
    peak = live
    for name in schedule:
        task = g.tasks[name]
        for d in g.task_deps(name):
            if d not in done:
                raise ValueError(f"task {name!r} scheduled before its dependency {d!r}")
        if task.kind == "delete":
            live -= live_sizes.pop(task.target, 0)
        else:
            live_sizes[name] = task.nbytes(itemsize)
            live += live_sizes[name]
            peak = max(peak, live)
        done.add(name)
    return peak


def scalar_bits(t: Tensor) -> bytes:
    """Raw bytes of a tensor's data, for bitwise comparisons."""
    return np.ascontiguousarray(t.data).tobytes()
