"""Qudit circuits, random generators, truncated-Fock bosonic gates and a dense oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import prod

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

__all__ = [
    "Gate",
    "Circuit",
    "GbsConfig",
    "AmplitudeClosure",
    "generate_gbs",
    "random_qudit_circuit",
    "squeezer_tensor",
    "squeezer_truncation_error",
    "beamsplitter_tensor",
    "gate_from_matrix",
    "statevector_oracle",
    "random_fock_basis",
    "MAX_ORACLE_ENTRIES",
]

MAX_ORACLE_ENTRIES = 2**24


@dataclass
class Gate:
    """A gate tensor with legs ``(out_0, .., out_{k-1}, in_0, .., in_{k-1})``."""

    name: str
    wires: tuple[int, ...]
    tensor: np.ndarray
    params: dict = field(default_factory=dict)
    unitary: bool = True

    def __post_init__(self):
        self.wires = tuple(int(w) for w in self.wires)
        if len(set(self.wires)) != len(self.wires):
            raise ValueError(f"gate {self.name} repeats a wire: {self.wires}")
        self.tensor = np.asarray(self.tensor, dtype=np.complex128)
        if self.tensor.ndim != 2 * len(self.wires):
            raise ValueError(
                f"gate {self.name} on {len(self.wires)} wires needs a rank-{2 * len(self.wires)} tensor, "
                f"got rank {self.tensor.ndim}"
            )
        if len(set(self.tensor.shape)) > 1:
            raise ValueError(f"gate {self.name} legs have unequal dimensions {self.tensor.shape}")

    @property
    def arity(self) -> int:
        return len(self.wires)

    @property
    def dim(self) -> int:
        return self.tensor.shape[0]

    def matrix(self) -> np.ndarray:
        n = self.dim**self.arity
        return self.tensor.reshape(n, n)

    def unitarity_error(self) -> float:
        m = self.matrix()
        return float(np.linalg.norm(m.conj().T @ m - np.eye(len(m)), ord=2))


def gate_from_matrix(name, wires, matrix, dim, params=None, unitary=True) -> Gate:
    k = len(wires)
    t = np.asarray(matrix, dtype=np.complex128).reshape((dim,) * (2 * k))
    return Gate(name, tuple(wires), t, dict(params or {}), unitary)


@dataclass
class Circuit:
    n_wires: int
    dim: int
    gates: list[Gate] = field(default_factory=list)
    seed: int | None = None
    name: str = "circuit"

    def __post_init__(self):
        if self.n_wires < 1:
            raise ValueError("a circuit needs at least one wire")
        if self.dim < 1:
            raise ValueError("wire dimension must be positive")
        for g in self.gates:
            self.check_gate(g)

    def check_gate(self, g: Gate):
        for w in g.wires:
            if not 0 <= w < self.n_wires:
                raise ValueError(f"gate {g.name} acts on wire {w}, circuit has {self.n_wires} wires")
        if g.dim != self.dim:
            raise ValueError(f"gate {g.name} has leg dimension {g.dim}, wires have dimension {self.dim}")

    def append(self, g: Gate) -> None:
        self.check_gate(g)
        self.gates.append(g)

    def count(self, name: str) -> int:
        return sum(g.name == name for g in self.gates)


@dataclass(frozen=True)
class AmplitudeClosure:
    """Output basis values, one per open wire (in wire order)."""

    values: tuple[int, ...]

    @property
    def photon_number(self) -> int:
        return sum(self.values)


@dataclass(frozen=True)
class GbsConfig:
    dim: int
    width: int
    cycles: int = 1
    r: float = 0.5
    cutoff: int = 4
    seed: int = 0
    modes: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.width < 2:
            raise ValueError("width must be >= 2")
        if self.cycles < 0:
            raise ValueError("cycles must be >= 0")
        if self.cutoff < 2:
            raise ValueError("Fock cutoff must be >= 2")
        expected = self.width**self.dim
        if self.modes is None:
            object.__setattr__(self, "modes", expected)
        elif self.modes != expected:
            raise ValueError(f"modes={self.modes} but width**dim = {expected}")

    @property
    def llens(self) -> list[int]:
        return [self.width**i for i in range(self.dim)]


def _ladder(n: int) -> np.ndarray:
    """Truncated annihilation operator on ``n`` Fock levels."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)


def squeezer_tensor(r: float, cutoff: int, working_factor: int = 4) -> np.ndarray:
    """Matrix of exp(r/2 (a^2dag - a^2)) on ``cutoff`` Fock levels.

    The generator is exponentiated at ``working_factor * cutoff`` levels and
    the result cropped, which keeps the low-photon block accurate.
    """
    if cutoff < 2:
        raise ValueError("Fock cutoff must be >= 2")
    n = working_factor * cutoff
    a = _ladder(n)
    gen = 0.5 * r * (a.T @ a.T - a @ a)
    return expm(gen)[:cutoff, :cutoff].astype(np.complex128)


def squeezer_truncation_error(r: float, cutoff: int) -> float:
    """Spectral-norm deviation of the cropped squeezer from an isometry."""
    s = squeezer_tensor(r, cutoff)
    return float(np.linalg.norm(s.conj().T @ s - np.eye(cutoff), ord=2))


def _bs_block(theta: float, phi: float, total: int) -> np.ndarray:
    # basis |k, total-k>, k = photons in mode 1
    k = np.arange(total + 1)
    gen = np.zeros((total + 1, total + 1), dtype=np.complex128)
    # a^dag b |k, N-k> = sqrt((k+1)(N-k)) |k+1, N-k-1>
    amp = np.sqrt((k[:-1] + 1) * (total - k[:-1]))
    gen[k[1:], k[:-1]] += np.exp(1j * phi) * amp
    gen[k[:-1], k[1:]] -= np.exp(-1j * phi) * amp
    return expm(theta * gen)


def beamsplitter_tensor(theta: float, phi: float, cutoff: int) -> np.ndarray:
    """Rank-4 tensor ``[m1_out, m2_out, m1_in, m2_in]`` of exp(theta(e^{i phi} a^dag b - h.c.)).

    Each fixed-photon-number block is exponentiated untruncated and then
    cropped, so entries between different photon numbers are exactly zero.
    """
    if cutoff < 2:
        raise ValueError("Fock cutoff must be >= 2")
    out = np.zeros((cutoff,) * 4, dtype=np.complex128)
    for total in range(2 * cutoff - 1):
        blk = _bs_block(theta, phi, total)
        ks = [k for k in range(total + 1) if k < cutoff and total - k < cutoff]
        for i in ks:
            for j in ks:
                out[i, total - i, j, total - j] = blk[i, j]
    return out


def generate_gbs(cfg: GbsConfig) -> Circuit:
    """Random n-dimensional GBS circuit: one squeezer per mode, then beamsplitter layers.

    Mode ``q(i)`` of the 1-based loop is wire ``i - 1``. theta and phi are
    drawn in that order from a PCG64 generator seeded with ``cfg.seed``.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    circ = Circuit(cfg.modes, cfg.cutoff, seed=cfg.seed, name=f"gbs-d{cfg.dim}-w{cfg.width}-m{cfg.cycles}")
    sq = squeezer_tensor(cfg.r, cfg.cutoff)
    for k in range(cfg.modes):
        circ.append(Gate("S", (k,), sq, {"r": cfg.r}, unitary=False))
    llens = cfg.llens
    for _ in range(cfg.cycles):
        for step in llens:
            for i in range(cfg.modes - step):
                theta = rng.uniform(0.0, 2 * math.pi)
                phi = rng.uniform(0.0, 2 * math.pi)
                t = beamsplitter_tensor(theta, phi, cfg.cutoff)
                circ.append(Gate("BS", (i, i + step), t, {"theta": theta, "phi": phi}, unitary=False))
    return circ


def random_qudit_circuit(n_wires: int, dim: int, depth: int, seed: int = 0, two_qudit_prob: float = 0.5) -> Circuit:
    """Layers of Haar-random one- and two-qudit gates on a line of wires."""
    rng = np.random.Generator(np.random.PCG64(seed))
    circ = Circuit(n_wires, dim, seed=seed, name=f"random-n{n_wires}-d{dim}-l{depth}")
    for layer in range(depth):
        w = 0
        while w < n_wires:
            if w + 1 < n_wires and rng.random() < two_qudit_prob:
                u = unitary_group.rvs(dim * dim, random_state=rng)
                circ.append(gate_from_matrix("U2", (w, w + 1), u, dim))
                w += 2
            else:
                u = unitary_group.rvs(dim, random_state=rng)
                circ.append(gate_from_matrix("U1", (w,), u, dim))
                w += 1
    return circ


def statevector_oracle(c: Circuit) -> np.ndarray:
    """Dense output state with one axis per wire, starting from |0...0>."""
    n = c.dim**c.n_wires
    if n > MAX_ORACLE_ENTRIES:
        raise ValueError(f"state has {n} entries, limit is {MAX_ORACLE_ENTRIES}")
    state = np.zeros((c.dim,) * c.n_wires, dtype=np.complex128)
    state[(0,) * c.n_wires] = 1.0
    for g in c.gates:
        k = g.arity
        # contract gate input legs with the state axes of its wires
        moved = np.moveaxis(state, g.wires, range(k))
        rest = moved.shape[k:]
        flat = moved.reshape(c.dim**k, prod(rest))
        new = (g.matrix() @ flat).reshape((c.dim,) * k + rest)
        state = np.moveaxis(new, range(k), g.wires)
    return np.ascontiguousarray(state)


def random_fock_basis(wires: int, dim: int, seed: int | None = None) -> AmplitudeClosure:
    """Uniform random basis values in ``[0, dim)`` per wire."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return AmplitudeClosure(tuple(int(v) for v in rng.integers(0, dim, size=wires)))
