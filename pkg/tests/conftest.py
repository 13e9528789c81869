import numpy as np
import pytest

from cgmm import kernels
from cgmm.graph import Graph, GraphDataset
from cgmm.layer import StateAssignmentTable, init_params, neighbor_frequency


def random_dataset(rng, n_graphs, max_v=5, M=3, A=2, p=0.4, self_loops=True, dup=True):
    graphs = []
    for k in range(n_graphs):
        n = int(rng.integers(1, max_v + 1))
        arcs = []
        for s in range(n):
            for d in range(n):
                if s == d and not self_loops:
                    continue
                if rng.random() < p:
                    arcs.append((s, d, int(rng.integers(1, A + 1))))
        if dup and arcs and rng.random() < 0.3:
            arcs.append(arcs[0])
        graphs.append(Graph.from_arcs(f"g{k}", rng.integers(1, M + 1, size=n), arcs,
                                      int(rng.integers(2))))
    return GraphDataset(graphs, M, A, "rand")


def random_deep_instance(rng, dataset, C, n_pred=1):
    """Random predecessor states plus matching deep-layer parameters and frequencies."""
    n = dataset.packed.n_vertices
    pred_states = [int(rng.integers(1, 4)) for _ in range(n_pred)]
    table = StateAssignmentTable()
    for cp in pred_states:
        table = table.extended(rng.integers(cp, size=n), cp)
    preds = tuple(range(n_pred))
    freq = neighbor_frequency(dataset, table, preds)
    params = init_params(C, dataset.M, dataset.A, preds, pred_states, seed=int(rng.integers(1 << 30)))
    return params, table, freq


def prev_states_of(dataset, table, g, preds):
    return [table.for_graph(dataset, g, p) for p in preds]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


BACKENDS = ["numpy"] + (["numba"] if kernels.NUMBA_KERNELS is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test against each kernel implementation."""
    table = kernels.NUMPY_KERNELS if request.param == "numpy" else kernels.NUMBA_KERNELS
    for name, fn in table.items():
        monkeypatch.setattr(kernels, name, fn)
    return request.param
