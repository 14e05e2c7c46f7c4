"""Text file formats for networks and circuits.

Network file::

    # tasktn network
    name example-D2
    precision single
    tensor B c:2 f:2 b:2 e:2
    data <re> <im> <re> <im> ...
    path bra1 B
    path #1 bra2
    slices e

Circuit file::

    # tasktn circuit
    name gbs-d1-w4-m1
    wires 4
    dim 4
    seed 7
    gate BS 0 1 theta=1.25 phi=0.5 unitary=0
    data <re> <im> ...

Tensor data is row-major over the listed index order, complex entries as
interleaved real/imaginary decimals with enough digits to round-trip at the
declared precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .circuits import Circuit, Gate
from .network import TensorNetwork
from .pathtree import Ref, parse_ref, ref_str
from .tensor import Index, Tensor, dtype_for

__all__ = [
    "ParseError",
    "NetworkFile",
    "dumps_network",
    "loads_network",
    "read_network",
    "write_network",
    "dumps_circuit",
    "loads_circuit",
    "read_circuit",
    "write_circuit",
]

_DIGITS = {"single": 9, "double": 17}


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass
class NetworkFile:
    network: TensorNetwork
    path: list[tuple[Ref, Ref]] | None = None
    slices: tuple[str, ...] = ()
    precision: str = "single"
    name: str = "network"
    meta: dict[str, str] = field(default_factory=dict)


def _fmt_data(arr: np.ndarray, precision: str) -> str:
    digits = _DIGITS[precision]
    flat = np.asarray(arr).astype(dtype_for(precision)).ravel()
    parts = []
    for z in flat:
        parts.append(f"{float(z.real):.{digits}g}")
        parts.append(f"{float(z.imag):.{digits}g}")
    return " ".join(parts)


def _parse_data(tokens: list[str], count: int, precision: str, lineno: int) -> np.ndarray:
    if len(tokens) != 2 * count:
        raise ParseError(f"expected {2 * count} numbers, got {len(tokens)}", lineno)
    try:
        vals = np.array([float(x) for x in tokens], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad number: {exc}", lineno) from None
    out = np.empty(count, dtype=dtype_for(precision))
    # assign parts separately: re + 1j*im would turn -0.0 into +0.0
    out.real = vals[0::2]
    out.imag = vals[1::2]
    return out


def _lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield n, line.split()


def dumps_network(nf: NetworkFile) -> str:
    out = ["# tasktn network", f"name {nf.name}", f"precision {nf.precision}"]
    for key, val in sorted(nf.meta.items()):
        out.append(f"meta {key} {val}")
    for nid, t in nf.network.nodes.items():
        out.append(" ".join(["tensor", nid, *(f"{i.label}:{i.dim}" for i in t.indices)]))
        out.append(f"data {_fmt_data(t.data, nf.precision)}")
    for left, right in nf.path or []:
        out.append(f"path {ref_str(left)} {ref_str(right)}")
    if nf.slices:
        out.append("slices " + " ".join(nf.slices))
    return "\n".join(out) + "\n"


def loads_network(text: str) -> NetworkFile:
    name = "network"
    precision = "single"
    meta: dict[str, str] = {}
    tensors: list[tuple[str, list[Index], int]] = []
    datas: list[np.ndarray] = []
    path: list[tuple[Ref, Ref]] = []
    slices: tuple[str, ...] = ()
    pending: tuple[str, list[Index], int] | None = None
    for lineno, tok in _lines(text):
        kw, args = tok[0], tok[1:]
        if pending is not None and kw != "data":
            raise ParseError(f"tensor {pending[0]!r} has no data line", lineno)
        if kw == "name":
            name = " ".join(args)
        elif kw == "precision":
            if len(args) != 1 or args[0] not in _DIGITS:
                raise ParseError(f"precision must be single or double, got {args}", lineno)
            precision = args[0]
        elif kw == "meta":
            if not args:
                raise ParseError("meta needs a key", lineno)
            meta[args[0]] = " ".join(args[1:])
        elif kw == "tensor":
            if not args:
                raise ParseError("tensor needs an id", lineno)
            indices = []
            for spec in args[1:]:
                label, sep, dim = spec.rpartition(":")
                if not sep or not label:
                    raise ParseError(f"index {spec!r} is not label:dim", lineno)
                try:
                    indices.append(Index(label, int(dim)))
                except ValueError as exc:
                    raise ParseError(str(exc), lineno) from None
            size = int(np.prod([i.dim for i in indices])) if indices else 1
            pending = (args[0], indices, size)
        elif kw == "data":
            if pending is None:
                raise ParseError("data line without tensor", lineno)
            tensors.append(pending)
            datas.append(_parse_data(args, pending[2], precision, lineno))
            pending = None
        elif kw == "path":
            if len(args) != 2:
                raise ParseError("path line needs two references", lineno)
            try:
                path.append((parse_ref(args[0]), parse_ref(args[1])))
            except ValueError:
                raise ParseError(f"bad step reference in {args}", lineno) from None
        elif kw == "slices":
            slices = tuple(args)
        else:
            raise ParseError(f"unknown keyword {kw!r}", lineno)
    if pending is not None:
        raise ParseError(f"tensor {pending[0]!r} has no data line")
    net = TensorNetwork(name=name)
    for (nid, indices, _), data in zip(tensors, datas):
        try:
            net.add(nid, Tensor(indices, data, dtype=dtype_for(precision)))
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    return NetworkFile(net, path or None, slices, precision, name, meta)


def read_network(path) -> NetworkFile:
    return loads_network(Path(path).read_text())


def write_network(nf: NetworkFile, path) -> None:
    Path(path).write_text(dumps_network(nf))


def _fmt_param(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    return repr(float(v)) if isinstance(v, float) else str(v)


def dumps_circuit(c: Circuit) -> str:
    out = ["# tasktn circuit", f"name {c.name}", f"wires {c.n_wires}", f"dim {c.dim}"]
    if c.seed is not None:
        out.append(f"seed {c.seed}")
    for g in c.gates:
        params = [f"{k}={_fmt_param(v)}" for k, v in g.params.items()]
        if not g.unitary:
            params.append("unitary=0")
        out.append(" ".join(["gate", g.name, *map(str, g.wires), *params]))
        out.append(f"data {_fmt_data(g.tensor, 'double')}")
    return "\n".join(out) + "\n"


def loads_circuit(text: str) -> Circuit:
    header: dict[str, str] = {}
    gates: list[Gate] = []
    pending = None
    for lineno, tok in _lines(text):
        kw, args = tok[0], tok[1:]
        if pending is not None and kw != "data":
            raise ParseError(f"gate {pending[0]!r} has no data line", lineno)
        if kw in ("name", "wires", "dim", "seed"):
            if len(args) != 1:
                raise ParseError(f"{kw} takes one value", lineno)
            header[kw] = args[0]
        elif kw == "gate":
            if not args:
                raise ParseError("gate needs a name", lineno)
            wires, params, unitary = [], {}, True
            for a in args[1:]:
                if "=" in a:
                    k, v = a.split("=", 1)
                    if k == "unitary":
                        unitary = v not in ("0", "false")
                    else:
                        try:
                            params[k] = float(v)
                        except ValueError:
                            params[k] = v
                else:
                    try:
                        wires.append(int(a))
                    except ValueError:
                        raise ParseError(f"bad wire {a!r}", lineno) from None
            pending = (args[0], tuple(wires), params, unitary)
        elif kw == "data":
            if pending is None:
                raise ParseError("data line without gate", lineno)
            if "dim" not in header:
                raise ParseError("dim must precede gates", lineno)
            dim = int(header["dim"])
            k = len(pending[1])
            flat = _parse_data(args, dim ** (2 * k), "double", lineno)
            try:
                gates.append(Gate(pending[0], pending[1], flat.reshape((dim,) * (2 * k)), pending[2], pending[3]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            pending = None
        else:
            raise ParseError(f"unknown keyword {kw!r}", lineno)
    if pending is not None:
        raise ParseError(f"gate {pending[0]!r} has no data line")
    for req in ("wires", "dim"):
        if req not in header:
            raise ParseError(f"missing {req!r} header")
    try:
        return Circuit(
            int(header["wires"]),
            int(header["dim"]),
            gates,
            seed=int(header["seed"]) if "seed" in header else None,
            name=header.get("name", "circuit"),
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def read_circuit(path) -> Circuit:
    return loads_circuit(Path(path).read_text())


def write_circuit(c: Circuit, path) -> None:
    Path(path).write_text(dumps_circuit(c))
