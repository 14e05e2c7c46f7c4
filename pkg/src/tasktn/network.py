"""Tensor networks: tensors joined by shared index labels."""

from __future__ import annotations

import itertools
from math import prod
from typing import Iterable, Mapping, Sequence

import numpy as np

from .circuits import AmplitudeClosure, Circuit
from .tensor import Index, Tensor

__all__ = [
    "TensorNetwork",
    "from_circuit",
    "close_amplitude",
    "full_sum",
    "example_network",
    "MAX_FULL_SUM_STATES",
]

MAX_FULL_SUM_STATES = 2**24


class TensorNetwork:
    """Ordered collection of named tensors.

    A label carried by two nodes is a bond and is summed over on
    contraction; a label carried by one node is open.
    """

    def __init__(self, nodes: Iterable[tuple[str, Tensor]] = (), name: str = "network"):
        self.name = name
        self.nodes: dict[str, Tensor] = {}
        self.bonds: dict[str, list[str]] = {}
        self._dims: dict[str, int] = {}
        for node_id, t in nodes:
            self.add(node_id, t)

    def add(self, node_id: str, t: Tensor) -> None:
        if not node_id or any(ch.isspace() for ch in node_id) or node_id.startswith("#"):
            raise ValueError(f"invalid node id {node_id!r}")
        if node_id in self.nodes:
            raise ValueError(f"duplicate node id {node_id!r}")
        for ix in t.indices:
            carriers = self.bonds.get(ix.label, [])
            if len(carriers) >= 2:
                raise ValueError(f"label {ix.label!r} already joins {carriers}")
            if ix.label in self._dims and self._dims[ix.label] != ix.dim:
                raise ValueError(
                    f"label {ix.label!r} has dimension {self._dims[ix.label]} on {carriers}, {ix.dim} on {node_id}"
                )
        self.nodes[node_id] = t
        for ix in t.indices:
            self.bonds.setdefault(ix.label, []).append(node_id)
            self._dims[ix.label] = ix.dim

    def rebuild_bonds(self) -> dict[str, list[str]]:
        bonds: dict[str, list[str]] = {}
        for node_id, t in self.nodes.items():
            for lab in t.labels:
                bonds.setdefault(lab, []).append(node_id)
        return bonds

    @property
    def dims(self) -> dict[str, int]:
        return dict(self._dims)

    @property
    def open_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, c in self.bonds.items() if len(c) == 1)

    @property
    def contracted_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, c in self.bonds.items() if len(c) == 2)

    @property
    def is_closed(self) -> bool:
        return not self.open_labels

    def neighbours(self, node_id: str) -> set[str]:
        out = set()
        for lab in self.nodes[node_id].labels:
            out.update(self.bonds[lab])
        out.discard(node_id)
        return out

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        start = next(iter(self.nodes))
        seen = {start}
        stack = [start]
        while stack:
            for nb in self.neighbours(stack.pop()):
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def astype(self, dtype) -> "TensorNetwork":
        return TensorNetwork(((k, t.astype(dtype)) for k, t in self.nodes.items()), name=self.name)

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return f"TensorNetwork({self.name!r}, {len(self.nodes)} nodes, open={list(self.open_labels)})"


def _ket0(label: str, dim: int) -> Tensor:
    v = np.zeros(dim, dtype=np.complex128)
    v[0] = 1.0
    return Tensor([Index(label, dim)], v)


def _onehot(label: str, dim: int, value: int) -> Tensor:
    if not 0 <= value < dim:
        raise ValueError(f"basis value {value} out of range for {label!r} of dimension {dim}")
    v = np.zeros(dim, dtype=np.complex128)
    v[value] = 1.0
    return Tensor([Index(label, dim)], v)


def from_circuit(circuit: Circuit) -> TensorNetwork:
    """Network of a circuit acting on |0...0>.

    Wire ``w`` carries label ``"w.k"`` after its k-th gate; input nodes are
    ``in<w>`` and gate nodes ``g<position>``. Open labels come out in wire order.
    """
    D = circuit.dim
    net = TensorNetwork(name=circuit.name)
    layer = [0] * circuit.n_wires
    for w in range(circuit.n_wires):
        net.add(f"in{w}", _ket0(f"{w}.0", D))
    for pos, g in enumerate(circuit.gates):
        circuit.check_gate(g)
        outs, ins = [], []
        for w in g.wires:
            ins.append(Index(f"{w}.{layer[w]}", D))
            layer[w] += 1
            outs.append(Index(f"{w}.{layer[w]}", D))
        net.add(f"g{pos}", Tensor(outs + ins, g.tensor))
    # keep open labels ordered by wire
    order = {f"{w}.{layer[w]}": w for w in range(circuit.n_wires)}
    net.bonds = dict(sorted(net.bonds.items(), key=lambda kv: (kv[0] in order, order.get(kv[0], 0))))
    return net


def close_amplitude(
    net: TensorNetwork,
    basis: AmplitudeClosure | Mapping[str, int] | Sequence[int],
) -> TensorNetwork:
    """Attach one-hot bra vectors to every open label.

    ``basis`` is a label->value mapping, or values in ``net.open_labels`` order.
    Bra nodes are named ``out:<label>``.
    """
    open_labels = net.open_labels
    if isinstance(basis, Mapping):
        mapping = dict(basis)
    else:
        values = basis.values if isinstance(basis, AmplitudeClosure) else tuple(basis)
        if len(values) != len(open_labels):
            raise ValueError(f"{len(values)} basis values for {len(open_labels)} open labels")
        mapping = dict(zip(open_labels, values))
    missing = set(open_labels) - set(mapping)
    extra = set(mapping) - set(open_labels)
    if missing or extra:
        raise ValueError(f"basis labels mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
    out = TensorNetwork(net.nodes.items(), name=net.name)
    dims = net.dims
    for lab in open_labels:
        out.add(f"out:{lab}", _onehot(lab, dims[lab], int(mapping[lab])))
    return out


def full_sum(net: TensorNetwork, max_states: int = MAX_FULL_SUM_STATES) -> complex:
    """Brute-force sum over every joint index assignment of the product of entries.

    Deliberately naive: a correctness oracle for small closed networks.
    The trailing labels are vectorised, the leading ones looped.
    """
    if not net.is_closed:
        raise ValueError(f"network has open labels {list(net.open_labels)}")
    labels = list(net.bonds)
    dims = net.dims
    states = prod(dims[lab] for lab in labels)
    if states > max_states:
        raise ValueError(f"exhaustive sum over {states} assignments exceeds limit {max_states}")
    # split labels: outer loop over `head`, vectorised grid over `tail`
    tail: list[str] = []
    block = 1
    for lab in reversed(labels):
        if block * dims[lab] > 2**14:
            break
        tail.insert(0, lab)
        block *= dims[lab]
    head = labels[: len(labels) - len(tail)]
    grid_shape = tuple(dims[lab] for lab in tail)
    total = 0j
    tensors = list(net.nodes.values())
    for head_vals in itertools.product(*(range(dims[lab]) for lab in head)):
        fixed = dict(zip(head, head_vals))
        acc = np.ones(grid_shape, dtype=np.complex128)
        for t in tensors:
            arr = t.data.astype(np.complex128)
            key = tuple(fixed[lab] if lab in fixed else slice(None) for lab in t.labels)
            arr = arr[key]
            kept = [lab for lab in t.labels if lab not in fixed]
            # broadcast onto the tail grid
            order = sorted(range(len(kept)), key=lambda i: tail.index(kept[i]))
            arr = np.transpose(arr, order) if kept else arr
            shape = [dims[lab] if lab in kept else 1 for lab in tail]
            acc = acc * np.reshape(arr, shape)
        total += complex(acc.sum())
    return total


def example_network(D: int = 2, S=None, B=None, basis: tuple[int, int] = (0, 0)) -> TensorNetwork:
    """The closed two-qudit example: bra_c bra_f B_cfbe S_ba S_ed ket_a ket_d.

    ``S`` is a D x D matrix (out, in); ``B`` a D^2 x D^2 matrix or a
    ``(D, D, D, D)`` tensor with legs (c, f, b, e). Defaults are identities.
    """
    S = np.eye(D) if S is None else np.asarray(S)
    B = np.eye(D * D) if B is None else np.asarray(B)
    B = B.reshape(D, D, D, D)
    return TensorNetwork(
        [
            ("bra1", _onehot("c", D, basis[0])),
            ("bra2", _onehot("f", D, basis[1])),
            ("B", Tensor([Index(x, D) for x in "cfbe"], B)),
            ("S1", Tensor([Index("b", D), Index("a", D)], S)),
            ("S2", Tensor([Index("e", D), Index("d", D)], S)),
            ("ket1", _ket0("a", D)),
            ("ket2", _ket0("d", D)),
        ],
        name=f"example-D{D}",
    )
