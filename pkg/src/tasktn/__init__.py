"""Task-based tensor-network contraction with slicing and shared-work reuse."""

__version__ = "0.1.0"

from .circuits import (
    AmplitudeClosure,
    Circuit,
    Gate,
    GbsConfig,
    beamsplitter_tensor,
    generate_gbs,
    random_fock_basis,
    random_qudit_circuit,
    squeezer_tensor,
    statevector_oracle,
)
from .executor import ExecConfig, ExecReport, MemoryLimitExceeded, run, simulate_peak_memory
from .network import TensorNetwork, close_amplitude, example_network, from_circuit, full_sum
from .pathtree import (
    ContractionTree,
    CostReport,
    SliceSet,
    build_tree,
    cost_report,
    evaluate_tree,
    greedy_path,
    greedy_shared_slices,
    slice_tree,
    sliced_trees,
)
from .taskgraph import Task, TaskGraph, compile_multi, compile_single, compile_sliced, insert_deletions
from .tensor import Index, Tensor, contract_pair, flop_cost, transpose
