"""Compile contraction trees into a deduplicated DAG of tasks.

Every pairwise contraction becomes up to two transpose tasks and one matmul
task. Tasks are named by path step, sorted result labels and, for tasks that
depend on a sliced label, the slice values, so untainted work from different
slices gets the same name and is added only once.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Mapping, Sequence

from .pathtree import ContractionTree, Ref, SliceSet, sliced_trees
from .tensor import Index, plan_pair

__all__ = [
    "Task",
    "LeafBinding",
    "TaskGraph",
    "compile_single",
    "compile_multi",
    "compile_sliced",
    "insert_deletions",
    "KINDS",
]

KINDS = ("transpose", "matmul", "reduce", "delete")


@dataclass(frozen=True)
class Task:
    name: str
    kind: str
    deps: tuple[str, ...]
    flop: int = 0
    indices: tuple[Index, ...] = ()
    order: tuple[str, ...] = ()
    contracted: tuple[str, ...] = ()
    shared: bool = False
    step: int | None = None
    target: str | None = None

    @property
    def size(self) -> int:
        return 0 if self.kind == "delete" else prod(i.dim for i in self.indices)

    def nbytes(self, itemsize: int) -> int:
        return self.size * itemsize


@dataclass(frozen=True)
class LeafBinding:
    """A (possibly sliced) view of an input tensor, referenced by tasks but not a task."""

    node_id: str
    fixed: tuple[tuple[str, int], ...] = ()


@dataclass
class TaskGraph:
    tasks: dict[str, Task] = field(default_factory=dict)
    leaves: dict[str, LeafBinding] = field(default_factory=dict)
    inputs: dict[str, tuple[Index, ...]] = field(default_factory=dict)
    output: str | None = None
    requested: int = 0
    n_slices: int = 1
    slice_labels: tuple[str, ...] = ()

    @property
    def created(self) -> int:
        return len(self.tasks)

    def add(self, task: Task) -> bool:
        """Add ``task`` unless a task of the same name exists. Returns True if added."""
        self.requested += 1
        if task.name in self.tasks:
            return False
        for d in task.deps:
            if d not in self.tasks and d not in self.leaves:
                raise ValueError(f"task {task.name!r} depends on unknown {d!r}")
        self.tasks[task.name] = task
        return True

    def task_deps(self, name: str) -> list[str]:
        return [d for d in self.tasks[name].deps if d in self.tasks]

    def dependents(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.tasks}
        for n, t in self.tasks.items():
            for d in t.deps:
                if d in self.tasks and n not in out[d]:
                    out[d].append(n)
        return out

    def topological_order(self) -> list[str]:
        """Kahn order, ties resolved by insertion order."""
        indeg = {n: len(set(self.task_deps(n))) for n in self.tasks}
        deps_of = self.dependents()
        pos = {n: i for i, n in enumerate(self.tasks)}
        ready = deque(sorted((n for n, k in indeg.items() if k == 0), key=pos.__getitem__))
        order = []
        while ready:
            n = ready.popleft()
            order.append(n)
            for m in deps_of[n]:
                indeg[m] -= 1
                if indeg[m] == 0:
                    ready.append(m)
        if len(order) != len(self.tasks):
            raise ValueError("task graph has a cycle")
        return order

    def count(self, kind: str) -> int:
        return sum(t.kind == kind for t in self.tasks.values())

    def matmul_flop(self) -> int:
        return sum(t.flop for t in self.tasks.values() if t.kind == "matmul")

    def dump(self) -> str:
        """One line per task: ``name kind flop deps...``."""
        return "\n".join(" ".join([t.name, t.kind, str(t.flop), *t.deps]) for t in self.tasks.values())

    def to_dot(self, name: str = "tasks") -> str:
        lines = [f"digraph {_dot_id(name)} {{", "  rankdir=BT;"]
        shapes = {"transpose": "box", "matmul": "ellipse", "reduce": "doublecircle", "delete": "point"}
        for leaf in self.leaves:
            lines.append(f"  {_dot_id(leaf)} [kind=leaf, shape=plaintext];")
        for t in self.tasks.values():
            attrs = [f"kind={t.kind}", f"shape={shapes[t.kind]}", f"flop={t.flop}"]
            if t.shared:
                attrs += ["shared=true", "style=filled", 'fillcolor="lightblue"']
            lines.append(f"  {_dot_id(t.name)} [{', '.join(attrs)}];")
        for t in self.tasks.values():
            for d in t.deps:
                lines.append(f"  {_dot_id(d)} -> {_dot_id(t.name)};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _slice_str(assignment: Mapping[str, int]) -> str:
    return ",".join(f"{lab}={assignment[lab]}" for lab in sorted(assignment))


def _emit_tree(g: TaskGraph, tree: ContractionTree, dedup: bool, multi: bool) -> str:
    """Add the tasks of one (sliced) tree to ``g``; return the root task name."""
    qual = _slice_str(tree.assignment)
    names: dict[Ref, str] = {}
    for nid, leaf in tree.leaves.items():
        node_qual = qual if (leaf.tainted or not dedup) else ""
        ref = f"{nid}[{node_qual}]" if node_qual else nid
        labels = set(tree.tensors[nid].labels)
        fixed = tuple(sorted((k, v) for k, v in tree.assignment.items() if k in labels))
        g.leaves.setdefault(ref, LeafBinding(nid, fixed))
        g.inputs.setdefault(nid, tree.tensors[nid].indices)
        names[nid] = ref
    for v in tree.vertices:
        left, right = tree.node(v.left), tree.node(v.right)
        a_order, b_order, shared = plan_pair(left.labels, right.labels)
        shared_task = multi and dedup and not v.tainted
        operands = []
        for node, order in ((left, a_order), (right, b_order)):
            op = names[node.ref]
            if node.labels != order:
                dims = {i.label: i for i in node.indices}
                tname = f"{op}^T({','.join(order)})"
                g.add(
                    Task(
                        tname,
                        "transpose",
                        (op,),
                        indices=tuple(dims[lab] for lab in order),
                        order=order,
                        shared=multi and dedup and not node.tainted,
                        step=v.ref,
                    )
                )
                op = tname
            operands.append(op)
        node_qual = qual if (v.tainted or not dedup) else ""
        name = f"{v.ref}:{','.join(sorted(v.labels))}"
        if node_qual:
            name += f":{node_qual}"
        g.add(
            Task(
                name,
                "matmul",
                tuple(operands),
                flop=v.flop,
                indices=v.indices,
                contracted=shared,
                shared=shared_task,
                step=v.ref,
            )
        )
        names[v.ref] = name
    return names[tree.root.ref]


def compile_single(tree: ContractionTree) -> TaskGraph:
    """Task graph of one contraction tree; the output is the root matmul."""
    if not tree.vertices:
        raise ValueError("tree has no contractions")
    g = TaskGraph(n_slices=1)
    g.output = _emit_tree(g, tree, dedup=True, multi=False)
    return g


def compile_multi(trees: Sequence[ContractionTree], dedup: bool = True) -> TaskGraph:
    """Union of the task graphs of the slices of one tree, plus a final reduce.

    With ``dedup`` off every task is qualified by its slice, which compiles
    the same work with nothing shared.
    """
    if not trees:
        raise ValueError("no trees to compile")
    first = trees[0]
    if not first.vertices:
        raise ValueError("tree has no contractions")
    seen = set()
    for t in trees:
        if t.slices != first.slices:
            raise ValueError("trees come from different slice sets")
        if t.shape_key() != first.shape_key():
            raise ValueError("trees have mismatched shapes")
        key = tuple(sorted(t.assignment.items()))
        if key in seen:
            raise ValueError(f"duplicate slice assignment {dict(key)}")
        seen.add(key)
    if not first.slices:
        if len(trees) != 1:
            raise ValueError("several unsliced trees")
        return compile_single(first)
    g = TaskGraph(n_slices=len(trees), slice_labels=first.slices.labels)
    # canonical order: reduce sums slice results in assignment order
    ordered = sorted(trees, key=lambda t: tuple(t.assignment[lab] for lab in first.slices.labels))
    roots = [_emit_tree(g, t, dedup=dedup, multi=True) for t in ordered]
    root = first.root
    g.add(Task("reduce", "reduce", tuple(roots), indices=root.indices))
    g.output = "reduce"
    return g


def compile_sliced(tree: ContractionTree, slices: SliceSet = SliceSet(), dedup: bool = True) -> TaskGraph:
    return compile_multi(sliced_trees(tree, slices), dedup=dedup)


def insert_deletions(g: TaskGraph) -> TaskGraph:
    """Copy of ``g`` with a delete task after the last consumer of every intermediary.

    Inputs and the output are never deleted. Each delete task comes right
    after the task whose output it frees in insertion order.
    """
    g.topological_order()  # raises on cycles
    consumers = g.dependents()
    out = TaskGraph(
        leaves=dict(g.leaves),
        inputs=dict(g.inputs),
        output=g.output,
        requested=g.requested,
        n_slices=g.n_slices,
        slice_labels=g.slice_labels,
    )
    pending: list[Task] = []
    for t in g.tasks.values():
        out.tasks[t.name] = t
        if t.kind == "delete":
            continue
        if t.name != g.output and consumers[t.name]:
            pending.append(Task(f"del:{t.name}", "delete", tuple(consumers[t.name]), target=t.name))
        # flush deletes whose consumers have all been inserted
        still = []
        for d in pending:
            if all(c in out.tasks for c in d.deps) and d.name not in g.tasks:
                out.tasks[d.name] = d
            else:
                still.append(d)
        pending = still
    for d in pending:
        out.tasks.setdefault(d.name, d)
    return out


def graph_stats(g: TaskGraph) -> dict[str, int]:
    stats = {k: g.count(k) for k in KINDS}
    stats.update(requested=g.requested, created=g.created, matmul_flop=g.matmul_flop())
    return stats


def iter_kind(g: TaskGraph, kind: str) -> Iterable[Task]:
    return (t for t in g.tasks.values() if t.kind == kind)
