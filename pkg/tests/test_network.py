import itertools

import numpy as np
import pytest

from conftest import random_network, random_path
from tasktn.circuits import Circuit, gate_from_matrix, random_qudit_circuit, statevector_oracle
from tasktn.fixtures import EXAMPLE_PATH
from tasktn.network import TensorNetwork, close_amplitude, example_network, from_circuit, full_sum
from tasktn.pathtree import build_tree, evaluate_tree
from tasktn.tensor import Index, Tensor

H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1])


def example_circuit(S, B, D=2):
    c = Circuit(2, D, name="example")
    c.append(gate_from_matrix("S", (0,), S, D))
    c.append(gate_from_matrix("S", (1,), S, D))
    c.append(gate_from_matrix("B", (0, 1), B, D))
    return c


def contract(net, path=None):
    from tasktn.pathtree import greedy_path

    tree = build_tree(net, path if path is not None else greedy_path(net, join_components=True))
    return evaluate_tree(tree).value()


def test_from_circuit_example_structure():
    net = from_circuit(example_circuit(H, CZ))
    assert len(net) == 5
    assert list(net.nodes) == ["in0", "in1", "g0", "g1", "g2"]
    # B_cfbe S_ba S_ed |0>_a |0>_d with a=0.0, b=0.1, c=0.2, d=1.0, e=1.1, f=1.2
    assert net.nodes["g0"].labels == ("0.1", "0.0")
    assert net.nodes["g1"].labels == ("1.1", "1.0")
    assert net.nodes["g2"].labels == ("0.2", "1.2", "0.1", "1.1")
    assert net.bonds["0.0"] == ["in0", "g0"]
    assert net.bonds["1.1"] == ["g1", "g2"]
    assert net.open_labels == ("0.2", "1.2")
    assert set(net.dims) == {"0.0", "0.1", "0.2", "1.0", "1.1", "1.2"}


def test_empty_circuit_single_node():
    net = from_circuit(Circuit(1, 3))
    assert list(net.nodes) == ["in0"]
    np.testing.assert_array_equal(net.nodes["in0"].data, [1, 0, 0])
    assert net.open_labels == ("0.0",)


def test_from_circuit_rejects_bad_gates():
    c = Circuit(2, 2)
    c.gates.append(gate_from_matrix("X", (3,), np.eye(2), 2))
    with pytest.raises(ValueError):
        from_circuit(c)
    c = Circuit(2, 2)
    c.gates.append(gate_from_matrix("X", (0,), np.eye(3), 3))
    with pytest.raises(ValueError):
        from_circuit(c)


def test_random_circuit_matches_oracle():
    c = random_qudit_circuit(4, 2, 3, seed=21)
    state = statevector_oracle(c)
    net = from_circuit(c)
    for basis in itertools.product(range(2), repeat=4):
        amp = contract(close_amplitude(net, basis))
        assert abs(amp - state[basis]) < 1e-12


def test_identity_example_amplitude_one():
    net = close_amplitude(from_circuit(example_circuit(np.eye(2), np.eye(4))), (0, 0))
    assert contract(net) == pytest.approx(1.0, abs=1e-15)


def test_hadamard_cz_example():
    net = close_amplitude(from_circuit(example_circuit(H, CZ)), (0, 0))
    # oracle: (H x H)|00> = uniform superposition, CZ leaves <00| weight 1/2
    expected = (CZ @ np.kron(H, H) @ np.array([1, 0, 0, 0]))[0]
    assert expected == pytest.approx(0.5)
    assert contract(net) == pytest.approx(0.5, abs=1e-12)
    assert full_sum(net) == pytest.approx(0.5, abs=1e-12)


def test_closure_normalisation(rng):
    from scipy.stats import unitary_group

    D = 3
    S = unitary_group.rvs(D, random_state=rng)
    B = unitary_group.rvs(D * D, random_state=rng)
    net = from_circuit(example_circuit(S, B, D))
    total = sum(abs(contract(close_amplitude(net, b))) ** 2 for b in itertools.product(range(D), repeat=2))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_close_amplitude_errors():
    net = from_circuit(example_circuit(H, CZ))
    with pytest.raises(ValueError):
        close_amplitude(net, (0, 2))
    with pytest.raises(ValueError):
        close_amplitude(net, (0,))
    with pytest.raises(ValueError):
        close_amplitude(net, {"0.2": 0, "zz": 1})
    closed = close_amplitude(net, {"0.2": 1, "1.2": 0})
    assert closed.is_closed and "out:0.2" in closed.nodes


def test_full_sum_trivial_cases():
    assert full_sum(TensorNetwork([("s", Tensor.scalar(2.5 - 1j))])) == 2.5 - 1j
    one = Tensor([Index("a", 2)], [1, 1])
    assert full_sum(TensorNetwork([("v", one), ("w", one)])) == 2


def test_full_sum_refuses_large():
    t = Tensor([Index(f"x{i}", 2) for i in range(13)], np.ones(2**13))
    net = TensorNetwork([("a", t), ("b", t)])
    with pytest.raises(ValueError):
        full_sum(net, max_states=2**12)
    with pytest.raises(ValueError):
        full_sum(from_circuit(Circuit(1, 2)))


def test_full_sum_matches_example_path():
    net = example_network(2, H, CZ)
    assert full_sum(net) == pytest.approx(contract(net, EXAMPLE_PATH), abs=1e-12)


def test_network_validation():
    a = Tensor([Index("x", 2)], [1, 2])
    net = TensorNetwork([("a", a), ("b", a)])
    with pytest.raises(ValueError):
        net.add("c", a)
    with pytest.raises(ValueError):
        net.add("a", Tensor([Index("y", 2)], [1, 2]))
    with pytest.raises(ValueError):
        TensorNetwork([("a", a), ("b", Tensor([Index("x", 3)], [1, 2, 3]))])
    with pytest.raises(ValueError):
        net.add("#1", Tensor([Index("y", 2)], [1, 2]))


def test_rebuild_bonds_idempotent(rng):
    net = random_network(rng, 7)
    assert net.rebuild_bonds() == net.bonds
    rebuilt = TensorNetwork(net.nodes.items())
    assert rebuilt.rebuild_bonds() == rebuilt.bonds == net.bonds


def test_full_sum_equals_pairwise_random(rng):
    for _ in range(25):
        n = int(rng.integers(2, 11))
        net = random_network(rng, n, n_extra_edges=int(rng.integers(0, 4)), max_states=2**20)
        ref = full_sum(net)
        single = net.astype(np.complex64)
        for _ in range(3):
            got = evaluate_tree(build_tree(single, random_path(rng, net))).value()
            assert abs(got - ref) <= 1e-5 * abs(ref)
