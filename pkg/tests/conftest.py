import itertools
from math import prod

import numpy as np
import pytest

from tasktn.network import TensorNetwork
from tasktn.tensor import Index, Tensor


def rand_tensor(rng, indices, dtype=np.complex128):
    shape = [i.dim for i in indices]
    data = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return Tensor(indices, data.astype(dtype))


def brute_contract(a: Tensor, b: Tensor):
    """Nested-loop contraction; returns (result dict keyed by free assignment, madd count)."""
    da, db = a.dims, b.dims
    shared = [lab for lab in a.labels if lab in db]
    free = [lab for lab in a.labels if lab not in db] + [lab for lab in b.labels if lab not in da]
    dims = {**da, **db}
    out = {}
    madds = 0
    for fv in itertools.product(*(range(dims[x]) for x in free)):
        fixed = dict(zip(free, fv))
        acc = 0j
        for sv in itertools.product(*(range(dims[x]) for x in shared)):
            full = {**fixed, **dict(zip(shared, sv))}
            acc += complex(a.data[tuple(full[x] for x in a.labels)]) * complex(b.data[tuple(full[x] for x in b.labels)])
            madds += 1
        out[fv] = acc
    return free, out, madds


def random_network(rng, n_nodes, n_extra_edges=2, dims=(2, 3), max_rank=4, max_states=2**16, tries=200):
    """Connected closed network of random tensors; every label joins exactly two nodes."""
    for _ in range(tries):
        edges = []
        for k in range(1, n_nodes):
            edges.append((int(rng.integers(0, k)), k))
        for _ in range(n_extra_edges):
            i, j = rng.choice(n_nodes, size=2, replace=False)
            edges.append((int(i), int(j)))
        ranks = np.zeros(n_nodes, int)
        for i, j in edges:
            ranks[i] += 1
            ranks[j] += 1
        if ranks.max() > max_rank:
            continue
        edge_dims = [int(rng.choice(dims)) for _ in edges]
        if prod(edge_dims) > max_states:
            continue
        idx = [[] for _ in range(n_nodes)]
        for e, ((i, j), d) in enumerate(zip(edges, edge_dims)):
            lab = f"l{e}"
            idx[i].append(Index(lab, d))
            idx[j].append(Index(lab, d))
        nodes = []
        for k in range(n_nodes):
            order = rng.permutation(len(idx[k]))
            nodes.append((f"n{k}", rand_tensor(rng, [idx[k][o] for o in order])))
        return TensorNetwork(nodes, name="random")
    raise RuntimeError("could not draw a network within limits")


def random_path(rng, net):
    """Uniformly random pairwise path over connected pairs (keeps the tree valid)."""
    refs = {nid: set(t.labels) for nid, t in net.nodes.items()}
    path = []
    step = 0
    while len(refs) > 1:
        keys = sorted(refs, key=str)
        pairs = [(x, y) for i, x in enumerate(keys) for y in keys[i + 1:] if refs[x] & refs[y]]
        x, y = pairs[int(rng.integers(len(pairs)))]
        if rng.random() < 0.5:
            x, y = y, x
        step += 1
        path.append((x, y))
        refs[step] = refs.pop(x) ^ refs.pop(y)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


#: criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
