"""Dense tensors with string-labelled indices.

Pairwise contraction is realised as transpose, transpose, matrix multiply:
the left operand is laid out as ``(free, shared)``, the right operand as
``(shared, free)`` and a single GEMM produces the result.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Index",
    "Tensor",
    "PRECISIONS",
    "dtype_for",
    "transpose",
    "plan_pair",
    "matmul_aligned",
    "contract_pair",
    "flop_cost",
    "FLOP_PER_MADD",
]

#: one complex multiply-add counted as 8 real FLOP
FLOP_PER_MADD = 8

PRECISIONS = {"single": np.complex64, "double": np.complex128}


def dtype_for(precision: str) -> np.dtype:
    try:
        return np.dtype(PRECISIONS[precision])
    except KeyError:
        raise ValueError(f"unknown precision {precision!r}; use 'single' or 'double'") from None


@dataclass(frozen=True)
class Index:
    label: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"index {self.label!r} must have a positive dimension, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    def __str__(self):
        return f"{self.label}:{self.dim}"


class Tensor:
    """Immutable dense complex tensor.

    ``data`` is stored as a C-ordered array whose axes follow ``indices``,
    so ``data.ravel()`` is the row-major flat layout.
    """

    __slots__ = ("indices", "data")

    def __init__(self, indices: Sequence[Index | tuple[str, int]], data, dtype=None):
        idx = tuple(i if isinstance(i, Index) else Index(*i) for i in indices)
        labels = [i.label for i in idx]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate index labels in {labels}")
        shape = tuple(i.dim for i in idx)
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.complex128 if dtype is None else dtype)
        if arr.size != prod(shape):
            raise ValueError(f"data has {arr.size} entries, indices {labels} need {prod(shape)}")
        arr = arr.reshape(shape)
        if not arr.flags.c_contiguous or (isinstance(data, np.ndarray) and np.may_share_memory(arr, data)):
            # own a C-ordered copy so freezing it cannot be undone by the caller
            arr = arr.copy(order="C")
        arr.flags.writeable = False
        self.indices = idx
        self.data = arr

    @classmethod
    def scalar(cls, value, dtype=np.complex128) -> "Tensor":
        return cls((), np.asarray(value, dtype=dtype))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(i.label for i in self.indices)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dims(self) -> dict[str, int]:
        return {i.label: i.dim for i in self.indices}

    @property
    def rank(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def nbytes(self) -> int:
        return self.data.nbytes

    @property
    def dtype(self):
        return self.data.dtype

    def astype(self, dtype) -> "Tensor":
        if self.data.dtype == dtype:
            return self
        return Tensor(self.indices, self.data.astype(dtype))

    def value(self) -> complex:
        if self.indices:
            raise ValueError(f"tensor with indices {self.labels} is not a scalar")
        return self.data[()].item()

    def fix(self, assignment: Mapping[str, int]) -> "Tensor":
        """Return the slice with the given labels fixed to the given values."""
        if not assignment:
            return self
        key = []
        kept = []
        for ix in self.indices:
            if ix.label in assignment:
                v = assignment[ix.label]
                if not 0 <= v < ix.dim:
                    raise ValueError(f"value {v} out of range for index {ix}")
                key.append(v)
            else:
                key.append(slice(None))
                kept.append(ix)
        if len(kept) == len(self.indices):
            return self
        return Tensor(kept, self.data[tuple(key)])

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return self.indices == other.indices and np.array_equal(self.data, other.data)

    def __repr__(self):
        ix = ",".join(str(i) for i in self.indices)
        return f"Tensor([{ix}], dtype={self.data.dtype})"


def transpose(t: Tensor, new_order: Sequence[str]) -> Tensor:
    new_order = tuple(new_order)
    if len(set(new_order)) != len(new_order):
        raise ValueError(f"duplicate label in order {new_order}")
    labels = t.labels
    unknown = set(new_order) - set(labels)
    if unknown:
        raise ValueError(f"unknown labels {sorted(unknown)} for tensor with {labels}")
    if len(new_order) != len(labels):
        raise ValueError(f"order {new_order} is not a permutation of {labels}")
    if new_order == labels:
        return t
    perm = [labels.index(lab) for lab in new_order]
    return Tensor([t.indices[p] for p in perm], t.data.transpose(perm))


def plan_pair(
    a_labels: Sequence[str],
    b_labels: Sequence[str],
    shared_order: Sequence[str] | None = None,
) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    """Choose operand layouts for the GEMM of a pairwise contraction.

    Returns ``(a_order, b_order, shared)``. The shared labels are ordered as
    they already trail in ``a``, else as they already lead in ``b``, else in
    ``a`` order; this keeps transposes to the minimum the layout allows.
    """
    a_labels, b_labels = tuple(a_labels), tuple(b_labels)
    bset = set(b_labels)
    shared_in_a = tuple(x for x in a_labels if x in bset)
    sset = set(shared_in_a)
    a_free = tuple(x for x in a_labels if x not in sset)
    b_free = tuple(x for x in b_labels if x not in sset)
    if shared_order is not None:
        shared = tuple(shared_order)
        if set(shared) != sset or len(shared) != len(sset):
            raise ValueError(f"shared_order {shared} does not match shared labels {shared_in_a}")
    else:
        k = len(shared_in_a)
        shared_in_b = tuple(x for x in b_labels if x in sset)
        if k == 0 or a_labels[len(a_labels) - k:] == shared_in_a:
            shared = shared_in_a
        elif b_labels[:k] == shared_in_b:
            shared = shared_in_b
        else:
            shared = shared_in_a
    return a_free + shared, shared + b_free, shared


def matmul_aligned(a: Tensor, b: Tensor, shared: Sequence[str]) -> Tensor:
    """GEMM of operands already laid out as ``(free, shared)`` and ``(shared, free)``."""
    k = len(shared)
    na = a.rank - k
    if a.labels[na:] != tuple(shared) or b.labels[:k] != tuple(shared):
        raise ValueError(f"operands {a.labels} / {b.labels} not aligned on {tuple(shared)}")
    for x, y in zip(a.indices[na:], b.indices[:k]):
        if x.dim != y.dim:
            raise ValueError(f"shared index {x.label!r} has dimensions {x.dim} and {y.dim}")
    out_idx = a.indices[:na] + b.indices[k:]
    m = prod(a.shape[:na])
    kk = prod(a.shape[na:])
    n = prod(b.shape[k:])
    res = a.data.reshape(m, kk) @ b.data.reshape(kk, n)
    return Tensor(out_idx, res)


def contract_pair(a: Tensor, b: Tensor, shared_order: Sequence[str] | None = None) -> Tensor:
    """Sum over every label shared by ``a`` and ``b``.

    Result indices are ``a``'s free labels in ``a`` order followed by ``b``'s
    free labels in ``b`` order.
    """
    bd = b.dims
    for ix in a.indices:
        if ix.label in bd and bd[ix.label] != ix.dim:
            raise ValueError(f"shared index {ix.label!r} has dimensions {ix.dim} and {bd[ix.label]}")
    a_order, b_order, shared = plan_pair(a.labels, b.labels, shared_order)
    if a.dtype != b.dtype:
        dt = np.promote_types(a.dtype, b.dtype)
        a, b = a.astype(dt), b.astype(dt)
    return matmul_aligned(transpose(a, a_order), transpose(b, b_order), shared)


def flop_cost(
    a_shape: Mapping[str, int] | Iterable[Index],
    b_shape: Mapping[str, int] | Iterable[Index],
    shared_labels: Iterable[str] = (),
) -> int:
    """Real FLOP of contracting two tensors: 8 x product of all distinct dimensions.

    ``shared_labels`` is accepted for symmetry with the call sites; labels
    common to both shapes are counted once whether listed or not.
    """
    dims: dict[str, int] = {}
    for shape in (a_shape, b_shape):
        items = shape.items() if isinstance(shape, Mapping) else ((i.label, i.dim) for i in shape)
        for lab, d in items:
            if lab in dims and dims[lab] != d:
                raise ValueError(f"index {lab!r} has dimensions {dims[lab]} and {d}")
            dims[lab] = d
    missing = set(shared_labels) - set(dims)
    if missing:
        raise ValueError(f"shared labels {sorted(missing)} not present in either shape")
    return FLOP_PER_MADD * prod(dims.values())
