"""Builders for the networks shipped in ``tasktn/data``."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .circuits import GbsConfig, generate_gbs, random_fock_basis
from .formats import NetworkFile, loads_network
from .network import TensorNetwork, close_amplitude, example_network, from_circuit
from .pathtree import greedy_path
from .tensor import Index, Tensor

__all__ = [
    "EXAMPLE_PATH",
    "fourier",
    "controlled_phase",
    "example_file",
    "gbs_file",
    "sharing_file",
    "bundled",
    "BUNDLED",
]

#: the worked pairwise sequence over ``example_network`` node ids
EXAMPLE_PATH = [("bra1", "B"), ("S2", "ket2"), ("ket1", "S1"), ("bra2", 1), (4, 2), (3, 5)]


def fourier(D: int) -> np.ndarray:
    """Unitary discrete Fourier matrix (the Hadamard gate for D=2)."""
    j, k = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    return _clean(np.exp(2j * np.pi * j * k / D) / np.sqrt(D))


def controlled_phase(D: int) -> np.ndarray:
    """diag(w^(j k)) on two qudits (CZ for D=2), as a D^2 x D^2 matrix."""
    j, k = np.meshgrid(np.arange(D), np.arange(D), indexing="ij")
    return np.diag(_clean(np.exp(2j * np.pi * j * k / D)).ravel())


def _clean(z: np.ndarray) -> np.ndarray:
    # drop rounding residue of exact zeros
    re, im = z.real.copy(), z.imag.copy()
    re[np.abs(re) < 1e-15] = 0.0
    im[np.abs(im) < 1e-15] = 0.0
    return re + 1j * im


def example_file(D: int = 2, basis=(0, 0), slices: tuple[str, ...] = ()) -> NetworkFile:
    net = example_network(D, fourier(D), controlled_phase(D), basis)
    return NetworkFile(net, list(EXAMPLE_PATH), slices, "single", net.name)


def gbs_file(dim=1, width=4, cycles=1, r=0.5, cutoff=3, seed=0, basis_seed=0, precision="single") -> NetworkFile:
    cfg = GbsConfig(dim=dim, width=width, cycles=cycles, r=r, cutoff=cutoff, seed=seed)
    circ = generate_gbs(cfg)
    basis = random_fock_basis(circ.n_wires, cutoff, basis_seed)
    net = close_amplitude(from_circuit(circ), basis)
    net.name = circ.name
    meta = {"basis": ",".join(map(str, basis.values))}
    return NetworkFile(net, greedy_path(net, join_components=True), (), precision, net.name, meta)


def sharing_file(seed: int = 0, n: int = 32, slice_dim: int = 4) -> NetworkFile:
    """Closed network whose heavy part does not touch the sliced label ``s``.

    A chain of three n x n matrices closes onto two vectors joined through
    ``s``; slicing ``s`` leaves the matrix-chain products shared by all slices.
    """
    rng = np.random.default_rng(seed)

    def rand(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(shape[0])

    net = TensorNetwork(
        [
            ("A", Tensor([Index("x", n), Index("p", n)], rand(n, n))),
            ("M", Tensor([Index("p", n), Index("q", n)], rand(n, n))),
            ("C", Tensor([Index("q", n), Index("y", n)], rand(n, n))),
            ("v", Tensor([Index("x", n), Index("s", slice_dim)], rand(n, slice_dim))),
            ("w", Tensor([Index("y", n), Index("s", slice_dim)], rand(n, slice_dim))),
        ],
        name="shared-chain",
    )
    path = [("A", "M"), (1, "C"), (2, "v"), (3, "w")]
    return NetworkFile(net, path, ("s",), "single", net.name)


def retention_file(seed: int = 0, n: int = 32, slice_dim: int = 4) -> NetworkFile:
    """Closed network whose large shared intermediary outlives each slice's large tainted one.

    Per slice, ``P Q`` gives an n x n tainted result that is reduced to a vector
    before the n x n shared product ``R W`` is formed. With sharing, ``R W``
    stays live from the first slice to the last and overlaps every later
    slice's ``P Q``; without sharing the two never coexist.
    """
    rng = np.random.default_rng(seed)

    def rand(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(shape[0])

    net = TensorNetwork(
        [
            ("P", Tensor([Index("a", n), Index("b", n), Index("s", slice_dim)], rand(n, n, slice_dim))),
            ("Q", Tensor([Index("b", n), Index("c", n)], rand(n, n))),
            ("u", Tensor([Index("a", n)], rand(n))),
            ("R", Tensor([Index("c", n), Index("d", n)], rand(n, n))),
            ("W", Tensor([Index("d", n), Index("e", n)], rand(n, n))),
            ("v", Tensor([Index("e", n)], rand(n))),
            ("z", Tensor([Index("s", slice_dim)], rand(slice_dim))),
        ],
        name="shared-retention",
    )
    path = [("P", "Q"), ("u", 1), ("R", "W"), (2, 3), (4, "v"), (5, "z")]
    return NetworkFile(net, path, ("s",), "single", net.name)


BUNDLED = {
    "example_d2.net": lambda: example_file(2),
    "example_d3.net": lambda: example_file(3),
    "example_d2_sliced_e.net": lambda: example_file(2, slices=("e",)),
    "gbs_d1_w4_c3.net": lambda: gbs_file(1, 4, 1, 0.5, 3, seed=0, basis_seed=0),
    "gbs_d2_w2_c4.net": lambda: gbs_file(2, 2, 1, 0.5, 4, seed=1, basis_seed=1),
    "shared_chain.net": sharing_file,
    "shared_retention.net": retention_file,
}


def bundled(name: str) -> NetworkFile:
    """Load a network file shipped with the package; the ``.net`` suffix is optional."""
    if not name.endswith(".net"):
        name += ".net"
    text = resources.files("tasktn").joinpath("data", name).read_text()
    return loads_network(text)
