"""Contraction paths, binary contraction trees, slicing and the FLOP model.

A path is a sequence of ``(left, right)`` pairs. A reference is either a
network node id (``str``) or the 1-based number of an earlier step
(``int``), so ``(3, "bra2")`` contracts the result of step 3 with node
``bra2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from math import prod
from typing import Iterator, Mapping, Sequence, Union

from .network import TensorNetwork
from .tensor import Index, Tensor, contract_pair, flop_cost

__all__ = [
    "Ref",
    "ContractionPath",
    "TreeNode",
    "ContractionTree",
    "SliceSet",
    "CostReport",
    "build_tree",
    "slice_tree",
    "sliced_trees",
    "evaluate_tree",
    "cost_report",
    "greedy_path",
    "greedy_shared_slices",
    "ref_str",
    "parse_ref",
]

Ref = Union[str, int]
ContractionPath = Sequence[tuple[Ref, Ref]]


def ref_str(ref: Ref) -> str:
    return f"#{ref}" if isinstance(ref, int) else ref


def parse_ref(text: str) -> Ref:
    return int(text[1:]) if text.startswith("#") else text


@dataclass(frozen=True)
class TreeNode:
    """A leaf (``step is None``) or an internal contraction vertex."""

    ref: Ref
    indices: tuple[Index, ...]
    left: Ref | None = None
    right: Ref | None = None
    contracted: tuple[str, ...] = ()
    flop: int = 0
    tainted: bool = False

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def step(self) -> int | None:
        return None if self.is_leaf else self.ref

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(i.label for i in self.indices)

    @property
    def rank(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return prod(i.dim for i in self.indices)


@dataclass(frozen=True)
class SliceSet:
    labels: tuple[str, ...] = ()
    dims: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.labels) != len(self.dims):
            raise ValueError("one dimension per sliced label required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"duplicate sliced labels {self.labels}")

    @classmethod
    def of(cls, source: "TensorNetwork | ContractionTree", labels: Sequence[str]) -> "SliceSet":
        """Validate ``labels`` as contracted labels of ``source``."""
        contracted = source.contracted_labels
        dims = source.dims
        for lab in labels:
            if lab not in dims:
                raise ValueError(f"sliced label {lab!r} does not exist")
            if lab not in contracted:
                raise ValueError(f"sliced label {lab!r} is open, only contracted labels can be sliced")
        return cls(tuple(labels), tuple(dims[lab] for lab in labels))

    @property
    def n_slices(self) -> int:
        return prod(self.dims)

    def __bool__(self):
        return bool(self.labels)

    def assignments(self) -> Iterator[dict[str, int]]:
        """Every assignment, last label varying fastest."""
        for values in itertools.product(*(range(d) for d in self.dims)):
            yield dict(zip(self.labels, values))


@dataclass
class ContractionTree:
    """Binary contraction tree over a network's nodes.

    ``vertices[k - 1]`` is the result of path step ``k``. A sliced tree
    carries its ``slices`` and ``assignment``; its nodes have the sliced
    labels removed and ``tainted`` set where a sliced label occurs in the
    node or below it.
    """

    leaves: dict[str, TreeNode]
    vertices: list[TreeNode]
    tensors: Mapping[str, Tensor]
    open_labels: tuple[str, ...] = ()
    slices: SliceSet = field(default_factory=SliceSet)
    assignment: dict[str, int] = field(default_factory=dict)
    _dims: dict[str, int] = field(default_factory=dict, repr=False)

    def node(self, ref: Ref) -> TreeNode:
        return self.vertices[ref - 1] if isinstance(ref, int) else self.leaves[ref]

    @property
    def root(self) -> TreeNode:
        if self.vertices:
            return self.vertices[-1]
        (leaf,) = self.leaves.values()
        return leaf

    @property
    def path(self) -> list[tuple[Ref, Ref]]:
        return [(v.left, v.right) for v in self.vertices]

    @property
    def dims(self) -> dict[str, int]:
        return dict(self._dims)

    @property
    def contracted_labels(self) -> tuple[str, ...]:
        out = []
        for v in self.vertices:
            out.extend(v.contracted)
        return tuple(out)

    @property
    def total_flop(self) -> int:
        return sum(v.flop for v in self.vertices)

    @property
    def max_rank(self) -> int:
        return max((v.rank for v in self.vertices), default=0)

    @property
    def max_size(self) -> int:
        return max((v.size for v in self.vertices), default=0)

    def shape_key(self) -> tuple:
        return tuple((v.left, v.right) for v in self.vertices)


def _combine(step: int, a: TreeNode, b: TreeNode) -> TreeNode:
    bl = set(b.labels)
    contracted = tuple(lab for lab in a.labels if lab in bl)
    cset = set(contracted)
    indices = tuple(i for i in a.indices if i.label not in cset) + tuple(
        i for i in b.indices if i.label not in cset
    )
    return TreeNode(
        ref=step,
        indices=indices,
        left=a.ref,
        right=b.ref,
        contracted=contracted,
        flop=flop_cost(a.indices, b.indices, contracted),
        tainted=a.tainted or b.tainted,
    )


def build_tree(net: TensorNetwork, path: ContractionPath) -> ContractionTree:
    """Annotate ``path`` over ``net`` with index sets, FLOP and sizes."""
    leaves = {nid: TreeNode(nid, t.indices) for nid, t in net.nodes.items()}
    available: dict[Ref, TreeNode] = dict(leaves)
    vertices: list[TreeNode] = []
    for step, pair in enumerate(path, start=1):
        if len(pair) != 2:
            raise ValueError(f"path step {step} is not a pair: {pair!r}")
        left, right = pair
        for ref in (left, right):
            if ref not in available:
                known = ref in leaves or (isinstance(ref, int) and 1 <= ref < step)
                why = "already consumed" if known else "unknown"
                raise ValueError(f"path step {step} references {why} node {ref_str(ref)!r}")
        if left == right:
            raise ValueError(f"path step {step} contracts {ref_str(left)!r} with itself")
        v = _combine(step, available.pop(left), available.pop(right))
        vertices.append(v)
        available[step] = v
    if len(available) != 1:
        rest = sorted(ref_str(r) for r in available)
        raise ValueError(f"path leaves {len(available)} disconnected results: {rest}")
    return ContractionTree(
        leaves=leaves,
        vertices=vertices,
        tensors=net.nodes,
        open_labels=net.open_labels,
        _dims=net.dims,
    )


def slice_tree(tree: ContractionTree, slices: SliceSet, assignment: Mapping[str, int]) -> ContractionTree:
    """The tree of one slice: sliced labels fixed and removed, tainted nodes marked."""
    if tree.slices:
        raise ValueError("tree is already sliced")
    if not slices:
        return tree
    missing = set(slices.labels) - set(assignment)
    if missing:
        raise ValueError(f"assignment misses sliced labels {sorted(missing)}")
    for lab, d in zip(slices.labels, slices.dims):
        if not 0 <= assignment[lab] < d:
            raise ValueError(f"slice value {assignment[lab]} out of range for {lab!r} of dimension {d}")
        if lab not in tree.contracted_labels:
            raise ValueError(f"sliced label {lab!r} is not contracted in this tree")
    sl = set(slices.labels)
    leaves = {}
    for nid, leaf in tree.leaves.items():
        kept = tuple(i for i in leaf.indices if i.label not in sl)
        leaves[nid] = replace(leaf, indices=kept, tainted=len(kept) != len(leaf.indices))
    out = ContractionTree(
        leaves=leaves,
        vertices=[],
        tensors=tree.tensors,
        open_labels=tree.open_labels,
        slices=slices,
        assignment={lab: int(assignment[lab]) for lab in slices.labels},
        _dims=tree._dims,
    )
    for v in tree.vertices:
        out.vertices.append(_combine(v.ref, out.node(v.left), out.node(v.right)))
    return out


def sliced_trees(tree: ContractionTree, slices: SliceSet) -> list[ContractionTree]:
    if not slices:
        return [tree]
    return [slice_tree(tree, slices, a) for a in slices.assignments()]


def evaluate_tree(tree: ContractionTree, dtype=None) -> Tensor:
    """Sequential pairwise evaluation of ``tree``; the slice assignment is applied to the leaves."""
    values: dict[Ref, Tensor] = {}
    for nid in tree.leaves:
        t = tree.tensors[nid]
        if dtype is not None:
            t = t.astype(dtype)
        values[nid] = t.fix({k: v for k, v in tree.assignment.items() if k in t.dims})
    if not tree.vertices:
        return next(iter(values.values()))
    for v in tree.vertices:
        values[v.ref] = contract_pair(values.pop(v.left), values.pop(v.right))
    return values[tree.root.ref]


@dataclass(frozen=True)
class CostReport:
    """Per-slice FLOP, slice count and shared-work accounting for one amplitude.

    ``shared_flop`` is the FLOP of one slice's untainted vertices; with
    sharing they run once, the tainted remainder once per slice.
    """

    flop_sl: int
    n_sl: int
    shared_flop: int
    sharing: bool = True
    max_rank: int = 0
    max_size: int = 0

    @property
    def f_sl(self) -> Fraction:
        if self.flop_sl == 0:
            return Fraction(0)
        return Fraction(self.shared_flop, self.flop_sl)

    @property
    def flop_amp_unshared(self) -> int:
        return self.n_sl * self.flop_sl

    @property
    def flop_amp_shared(self) -> int:
        # f*F + N*(1-f)*F, kept in integers
        return self.shared_flop + self.n_sl * (self.flop_sl - self.shared_flop)

    @property
    def flop_amp(self) -> int:
        return self.flop_amp_shared if self.sharing else self.flop_amp_unshared

    @property
    def saving(self) -> Fraction:
        """Fraction of the unshared FLOP avoided by sharing."""
        if self.flop_amp_unshared == 0:
            return Fraction(0)
        return 1 - Fraction(self.flop_amp_shared, self.flop_amp_unshared)

    def est_seconds(self, rate) -> Fraction:
        return Fraction(self.flop_amp) / Fraction(rate)

    def as_dict(self) -> dict:
        return {
            "flop_sl": self.flop_sl,
            "n_sl": self.n_sl,
            "f_sl": self.f_sl,
            "flop_amp_unshared": self.flop_amp_unshared,
            "flop_amp_shared": self.flop_amp_shared,
            "flop_amp": self.flop_amp,
            "max_rank": self.max_rank,
            "max_size": self.max_size,
        }


def cost_report(tree: ContractionTree, slices: SliceSet = SliceSet(), sharing: bool = True) -> CostReport:
    if tree.slices:
        sliced = tree
        slices = tree.slices
    else:
        sliced = slice_tree(tree, slices, {lab: 0 for lab in slices.labels}) if slices else tree
    flop_sl = sliced.total_flop
    shared = sum(v.flop for v in sliced.vertices if not v.tainted)
    return CostReport(
        flop_sl=flop_sl,
        n_sl=slices.n_slices,
        shared_flop=shared,
        sharing=sharing,
        max_rank=sliced.max_rank,
        max_size=sliced.max_size,
    )


def _components(net: TensorNetwork) -> list[list[str]]:
    seen: set[str] = set()
    comps = []
    for start in net.nodes:
        if start in seen:
            continue
        comp, stack = [], [start]
        seen.add(start)
        while stack:
            n = stack.pop()
            comp.append(n)
            for nb in net.neighbours(n):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp, key=list(net.nodes).index))
    return comps


def greedy_path(net: TensorNetwork, join_components: bool = False) -> list[tuple[Ref, Ref]]:
    """Contract the connected pair with the smallest result until one tensor remains.

    Ties go to the lexicographically smallest pair of reference strings.
    A disconnected network is an error unless ``join_components`` is set,
    in which case each component is contracted on its own and the component
    results are then multiplied together in node order.
    """
    if not net.nodes:
        raise ValueError("empty network")
    if not net.is_connected():
        if not join_components:
            raise ValueError("network is disconnected; greedy_path needs a connected network")
        path: list[tuple[Ref, Ref]] = []
        results: list[Ref] = []
        for comp in _components(net):
            sub = TensorNetwork(((n, net.nodes[n]) for n in comp), name=net.name)
            offset = len(path)
            for x, y in _greedy_connected(sub):
                path.append(tuple(r + offset if isinstance(r, int) else r for r in (x, y)))
            results.append(len(path) if len(comp) > 1 else comp[0])
        acc = results[0]
        for r in results[1:]:
            path.append((acc, r))
            acc = len(path)
        return path
    return _greedy_connected(net)


def _greedy_connected(net: TensorNetwork) -> list[tuple[Ref, Ref]]:
    dims = net.dims
    labels: dict[Ref, frozenset[str]] = {nid: frozenset(t.labels) for nid, t in net.nodes.items()}
    carriers: dict[str, set[Ref]] = {lab: set(c) for lab, c in net.bonds.items()}
    path: list[tuple[Ref, Ref]] = []

    def result_size(x: Ref, y: Ref) -> int:
        return prod(dims[lab] for lab in labels[x] ^ labels[y])

    step = 0
    while len(labels) > 1:
        best = None
        for lab, cs in carriers.items():
            if len(cs) != 2:
                continue
            x, y = sorted(cs, key=ref_str)
            key = (result_size(x, y), ref_str(x), ref_str(y))
            if best is None or key < best[0]:
                best = (key, x, y)
        assert best is not None, "connected network always has a bond"
        _, x, y = best
        step += 1
        path.append((x, y))
        lx, ly = labels.pop(x), labels.pop(y)
        new = lx ^ ly
        for lab in lx | ly:
            cs = carriers[lab]
            cs.discard(x)
            cs.discard(y)
            if lab in new:
                cs.add(step)
            else:
                del carriers[lab]
        labels[step] = new
    return path


def greedy_shared_slices(tree: ContractionTree, max_rank: int, k: int | None = None) -> SliceSet:
    """Pick up to ``k`` labels to slice, one at a time.

    Each pick minimises the resulting max intermediate rank (clipped at
    ``max_rank``), then maximises the shared fraction f_sl, then takes the
    smallest label. Stops as soon as the max rank is at most ``max_rank``.
    """
    if k is not None and k < 0:
        raise ValueError("k must be non-negative")
    chosen: list[str] = []
    candidates = sorted(set(tree.contracted_labels))
    if k == 0:
        return SliceSet()
    current = cost_report(tree)
    while current.max_rank > max_rank and (k is None or len(chosen) < k):
        options = [lab for lab in candidates if lab not in chosen]
        if not options:
            if not chosen:
                raise ValueError("no contracted labels available to slice")
            break
        best = None
        for lab in options:
            rep = cost_report(tree, SliceSet.of(tree, chosen + [lab]))
            key = (max(rep.max_rank, max_rank), -rep.f_sl, lab)
            if best is None or key < best[0]:
                best = (key, lab, rep)
        chosen.append(best[1])
        current = best[2]
    return SliceSet.of(tree, chosen) if chosen else SliceSet()
