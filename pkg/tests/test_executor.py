import numpy as np
import pytest

from conftest import random_network, random_path
from tasktn.executor import (
    ExecConfig,
    MemoryLimitExceeded,
    default_workers,
    run,
    scalar_bits,
    serial_schedule,
    simulate_peak_memory,
)
from tasktn.fixtures import EXAMPLE_PATH, bundled
from tasktn.network import example_network
from tasktn.pathtree import SliceSet, build_tree, cost_report, evaluate_tree
from tasktn.taskgraph import LeafBinding, Task, TaskGraph, compile_single, compile_sliced, insert_deletions
from tasktn.tensor import Index


def random_case(rng, n=8, k=2):
    net = random_network(rng, n, n_extra_edges=3)
    tree = build_tree(net, random_path(rng, net))
    labels = list(rng.choice(tree.contracted_labels, size=k, replace=False))
    return net, tree, SliceSet.of(tree, labels)


def example_case(rng, D=2):
    S = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    B = rng.standard_normal(D**4) + 1j * rng.standard_normal(D**4)
    net = example_network(D, S, B)
    return net, build_tree(net, EXAMPLE_PATH)


def test_config_validation(monkeypatch):
    with pytest.raises(ValueError):
        ExecConfig(workers=0)
    with pytest.raises(ValueError):
        ExecConfig(precision="half")
    monkeypatch.setenv("TASKTN_WORKERS", "3")
    assert default_workers() == 3


def test_example_workers_identical(rng):
    net, tree = example_case(rng)
    g = compile_single(tree)
    a = run(g, net.nodes, ExecConfig(workers=1))
    b = run(g, net.nodes, ExecConfig(workers=8))
    assert scalar_bits(a.result) == scalar_bits(b.result)
    assert a.executed == b.executed == len(insert_deletions(g).tasks)


def test_example_sliced_equals_unsliced(rng):
    net, tree = example_case(rng)
    sliced = run(compile_sliced(tree, SliceSet.of(tree, ["e"])), net.nodes, ExecConfig(precision="double"))
    assert sliced.amplitude == pytest.approx(evaluate_tree(tree).value(), rel=1e-12)


def test_schedule_independence(rng):
    for _ in range(3):
        net, tree, sl = random_case(rng)
        g = compile_sliced(tree, sl)
        ref = scalar_bits(run(g, net.nodes).result)
        for workers in (1, 2, 4, 8):
            for seed in range(4):
                rep = run(g, net.nodes, ExecConfig(workers=workers, seed=seed))
                assert scalar_bits(rep.result) == ref


def test_deletion_same_result_smaller_peak(rng):
    for _ in range(5):
        net, tree, sl = random_case(rng)
        g = compile_sliced(tree, sl)
        on = run(g, net.nodes, ExecConfig(enable_deletion=True))
        off = run(g, net.nodes, ExecConfig(enable_deletion=False))
        assert scalar_bits(on.result) == scalar_bits(off.result)
        assert on.peak_bytes < off.peak_bytes


def test_sharing_keeps_shared_output_live():
    nf = bundled("shared_retention")
    tree = build_tree(nf.network, nf.path)
    sl = SliceSet.of(tree, nf.slices)
    shared = run(compile_sliced(tree, sl), nf.network.nodes)
    unshared = run(compile_sliced(tree, sl, dedup=False), nf.network.nodes)
    assert scalar_bits(shared.result) == scalar_bits(unshared.result)
    n = 32
    # the shared n x n product overlaps a later slice's n x n tainted product;
    # the unshared peak instead holds its own product next to an n-vector
    assert shared.peak_bytes - unshared.peak_bytes == n * n * 8 - n * 8


def test_sharing_peak_counterexample():
    # when the shared subtree itself sets the peak, the unshared run recomputes it
    # in the second slice while still holding the first slice's scalar
    nf = bundled("example_d2_sliced_e")
    tree = build_tree(nf.network, nf.path)
    sl = SliceSet.of(tree, nf.slices)
    shared = run(compile_sliced(tree, sl), nf.network.nodes).peak_bytes
    unshared = run(compile_sliced(tree, sl, dedup=False), nf.network.nodes).peak_bytes
    assert (shared, unshared) == (344, 352)


def test_work_conservation(rng):
    for _ in range(5):
        net, tree, sl = random_case(rng)
        rep = cost_report(tree, sl)
        assert run(compile_sliced(tree, sl), net.nodes).flop == rep.flop_amp_shared
        assert run(compile_sliced(tree, sl, dedup=False), net.nodes).flop == rep.flop_amp_unshared


def chain_graph():
    idx = (Index("x", 128),)
    g = TaskGraph(leaves={"in": LeafBinding("in")}, inputs={"in": idx})
    g.add(Task("A", "transpose", ("in",), indices=idx, order=("x",)))
    g.add(Task("B", "transpose", ("A",), indices=idx, order=("x",)))
    g.add(Task("C", "transpose", ("B",), indices=idx, order=("x",)))
    g.output = "C"
    return g


def test_chain_peak_two_kb():
    g = insert_deletions(chain_graph())
    assert simulate_peak_memory(g, include_inputs=False) == 2048
    assert simulate_peak_memory(chain_graph(), include_inputs=False) == 3072


def test_example_hand_replay():
    tree = build_tree(example_network(2), EXAMPLE_PATH)
    g = insert_deletions(compile_single(tree))
    # inputs 2+2+16+4+4+2+2 = 32 complex; live counts after each allocation:
    # 1:b,e,f 40, 2:e 42, S1^T 46, 3:b 48, (free 4) 4:b,e 48, (free 8) 5:b 42, (free 6) 6: 37
    assert serial_schedule(g)[:4] == ["1:b,e,f", "2:e", "S1^T(a,b)", "3:b"]
    assert simulate_peak_memory(g, precision="single") == 48 * 8
    # without deletion every intermediary stays: 32 + 8+2+4+2+4+2+1
    assert simulate_peak_memory(compile_single(tree)) == 55 * 8


def test_simulation_matches_single_worker(rng):
    for _ in range(5):
        net, tree, sl = random_case(rng)
        for dedup in (True, False):
            g = insert_deletions(compile_sliced(tree, sl, dedup=dedup))
            rep = run(g, net.nodes, ExecConfig(workers=1))
            assert rep.order == serial_schedule(g)
            assert simulate_peak_memory(g, rep.order) == rep.peak_bytes


def test_simulation_rejects_bad_schedule():
    g = chain_graph()
    with pytest.raises(ValueError):
        simulate_peak_memory(g, ["B", "A", "C"])
    with pytest.raises(ValueError):
        simulate_peak_memory(g, ["A", "B"])


def test_memory_limit_abort(rng):
    net, tree = example_case(rng)
    g = compile_single(tree)
    with pytest.raises(MemoryLimitExceeded) as err:
        run(g, net.nodes, ExecConfig(memory_limit=44 * 8))
    assert err.value.task == "S1^T(a,b)"
    assert "S1^T(a,b)" in str(err.value)
    run(g, net.nodes, ExecConfig(memory_limit=48 * 8))
    with pytest.raises(MemoryLimitExceeded):
        run(g, net.nodes, ExecConfig(memory_limit=44 * 8, workers=4))


def test_missing_leaf(rng):
    net, tree = example_case(rng)
    nodes = dict(net.nodes)
    del nodes["B"]
    with pytest.raises(KeyError):
        run(compile_single(tree), nodes)


def test_report_fields(rng):
    net, tree = example_case(rng)
    rep = run(compile_single(tree), net.nodes, ExecConfig(precision="double"))
    d = rep.as_dict()
    assert d["tasks"] == rep.executed == 7 + 6
    assert d["flop"] == tree.total_flop
    assert rep.result.dtype == np.complex128
    assert set(rep.timings) <= {"transpose", "matmul", "reduce"}


def test_bundled_example_runs():
    nf = bundled("example_d2_sliced_e")
    tree = build_tree(nf.network, nf.path)
    g = compile_sliced(tree, SliceSet.of(tree, nf.slices))
    assert g.n_slices == 2
    rep = run(g, nf.network.nodes)
    assert rep.amplitude == pytest.approx(evaluate_tree(tree).value(), rel=1e-6)
