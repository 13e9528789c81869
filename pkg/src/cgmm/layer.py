"""A single CGMM layer: parameters, EM training and most-likely-state inference.

The base layer is a mixture over hidden states with a prior and an emission
distribution. A deep layer replaces the prior by a switching-parent mixture
over predecessor layers (``layer_weight``), arc labels (``arc_weight``) and
per-(layer, arc) transition tables indexed by the frozen state of a neighbor.
The neighbor states of a vertex enter through their empirical frequencies.
A vertex with no neighbor for some (layer, arc) pair sees a dedicated
"empty" neighbor state, stored as the last column of the transition table.

States are 0-based throughout the code (state ``i`` here is state ``i+1``
in 1-based notation); vertex labels stay 1-based in the data and are
shifted when indexing the emission matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DataError, NumericalError
from .graph import GraphDataset

__all__ = [
    "LayerParams",
    "NeighborFrequency",
    "PosteriorTensor",
    "StateAssignmentTable",
    "TrainConfig",
    "e_step",
    "infer_states",
    "init_params",
    "log_likelihood",
    "m_step",
    "neighbor_frequency",
    "train_layer",
]

log = logging.getLogger(__name__)

DEFAULT_SMOOTHING = 1e-8


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LayerParams:
    """All multinomials of one layer.

    ``emission[i, k]`` is P(label k+1 | state i). ``transition[p][a]`` is a
    ``C x (pred_states[p] + 1)`` matrix whose column ``j`` is the
    distribution over the current state given a neighbor in state ``j`` at
    predecessor ``p`` through an arc labeled ``a+1``; the last column is the
    empty-neighborhood symbol.
    """

    C: int
    M: int
    A: int
    emission: np.ndarray
    predecessors: tuple = ()
    pred_states: tuple = ()
    prior: np.ndarray | None = None
    layer_weight: np.ndarray | None = None
    arc_weight: np.ndarray | None = None
    transition: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "predecessors", tuple(int(p) for p in self.predecessors))
        object.__setattr__(self, "pred_states", tuple(int(c) for c in self.pred_states))
        object.__setattr__(self, "emission", _readonly(self.emission))
        if len(self.predecessors) != len(self.pred_states):
            raise ValueError("predecessors and pred_states must have equal length")
        if self.emission.shape != (self.C, self.M):
            raise ValueError(f"emission must be {self.C}x{self.M}")
        if self.is_base:
            if self.prior is None:
                raise ValueError("base layer needs a prior")
            object.__setattr__(self, "prior", _readonly(self.prior))
        else:
            if self.layer_weight is None or self.arc_weight is None or self.transition is None:
                raise ValueError("deep layer needs layer_weight, arc_weight and transition")
            object.__setattr__(self, "layer_weight", _readonly(self.layer_weight))
            object.__setattr__(self, "arc_weight", _readonly(self.arc_weight))
            object.__setattr__(self, "transition", tuple(_readonly(t) for t in self.transition))
            for t, cp in zip(self.transition, self.pred_states):
                if t.shape != (self.A, self.C, cp + 1):
                    raise ValueError(f"transition block must be {self.A}x{self.C}x{cp + 1}")

    @property
    def is_base(self) -> bool:
        return not self.predecessors

    def padded_transition(self) -> np.ndarray:
        """Transitions stacked to ``(L, A, C, max_cp + 1)``; unused columns are 0."""
        width = max(self.pred_states) + 1
        out = np.zeros((len(self.predecessors), self.A, self.C, width))
        for p, t in enumerate(self.transition):
            out[p, :, :, : t.shape[2]] = t
        return out

    def distributions(self):
        """Yield ``(name, array, axis)`` for every normalized distribution."""
        yield "emission", self.emission, 1
        if self.is_base:
            yield "prior", self.prior, 0
            return
        yield "layer_weight", self.layer_weight, 0
        yield "arc_weight", self.arc_weight, 1
        for p, t in enumerate(self.transition):
            yield f"transition[{p}]", t, 1

    def normalization_error(self) -> float:
        """Largest deviation of any distribution sum from 1 (inf on a negative entry)."""
        worst = 0.0
        for _, arr, axis in self.distributions():
            if np.any(arr < 0):
                return np.inf
            worst = max(worst, float(np.max(np.abs(arr.sum(axis=axis) - 1.0))))
        return worst

    def equals(self, other: "LayerParams") -> bool:
        if (self.C, self.M, self.A, self.predecessors, self.pred_states) != (
            other.C, other.M, other.A, other.predecessors, other.pred_states
        ):
            return False
        return all(
            np.array_equal(a, b)
            for (_, a, _), (_, b, _) in zip(self.distributions(), other.distributions())
        )


class StateAssignmentTable:
    """Frozen most-likely states of every vertex (global index) at every trained layer."""

    def __init__(self, states: Sequence[np.ndarray] = (), n_states: Sequence[int] = ()):
        self._states = tuple(_frozen_int(s) for s in states)
        self.n_states = tuple(int(c) for c in n_states)

    def __len__(self):
        return len(self._states)

    def __getitem__(self, layer) -> np.ndarray:
        return self._states[layer]

    def extended(self, states: np.ndarray, C: int) -> "StateAssignmentTable":
        return StateAssignmentTable(self._states + (states,), self.n_states + (C,))

    def for_graph(self, dataset: GraphDataset, g: int, layer: int) -> np.ndarray:
        ptr = dataset.packed.vertex_ptr
        return self._states[layer][ptr[g]:ptr[g + 1]]


def _frozen_int(a):
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class NeighborFrequency:
    """Sparse empirical neighbor-state frequencies of every vertex.

    Entries ``ptr[u]:ptr[u+1]`` belong to vertex ``u`` and are sorted by
    ``(pred, arc, state)``; ``weight`` holds the frequency. For every
    (pred, arc) pair the weights of a vertex sum to 1.
    """

    ptr: np.ndarray
    pred: np.ndarray
    arc: np.ndarray
    state: np.ndarray
    weight: np.ndarray
    predecessors: tuple
    pred_states: tuple
    A: int

    @property
    def n_vertices(self) -> int:
        return len(self.ptr) - 1

    @property
    def width(self) -> int:
        return max(self.pred_states) + 1

    def dense(self, u: int) -> np.ndarray:
        """Frequencies of vertex ``u`` as an ``(L, A, width)`` array."""
        out = np.zeros((len(self.predecessors), self.A, self.width))
        s = slice(self.ptr[u], self.ptr[u + 1])
        out[self.pred[s], self.arc[s], self.state[s]] = self.weight[s]
        return out


def neighbor_frequency(dataset: GraphDataset, assignments: StateAssignmentTable,
                       predecessors: Sequence[int]) -> NeighborFrequency:
    """Empirical frequency of frozen neighbor states per (vertex, predecessor, arc label)."""
    predecessors = tuple(int(p) for p in predecessors)
    if not predecessors:
        raise ValueError("a deep layer needs at least one predecessor")
    for p in predecessors:
        if not 0 <= p < len(assignments):
            raise DataError(f"no frozen state assignment for predecessor layer {p}")
    pk = dataset.packed
    n, A, L = pk.n_vertices, dataset.A, len(predecessors)
    pred_states = tuple(assignments.n_states[p] for p in predecessors)
    width = max(pred_states) + 1

    arc0 = pk.arc_labels - 1
    keys = []
    for slot, p in enumerate(predecessors):
        s = assignments[p]
        if len(s) != n:
            raise DataError(f"assignments for layer {p} cover {len(s)} vertices, dataset has {n}")
        keys.append(((pk.dst * L + slot) * A + arc0) * width + s[pk.src])
    keys = np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)

    # Neighbor counts per (vertex, pred, arc, state) and per (vertex, pred, arc) group.
    uniq, counts = np.unique(keys, return_counts=True)
    group_size = np.bincount(keys // width, minlength=n * L * A)
    weight = counts / group_size[uniq // width]

    empty = np.flatnonzero(group_size == 0)
    empty_state = np.asarray(pred_states, dtype=np.int64)[(empty // A) % L]
    all_keys = np.concatenate([uniq, empty * width + empty_state])
    all_w = np.concatenate([weight, np.ones(len(empty))])
    order = np.argsort(all_keys, kind="stable")
    all_keys, all_w = all_keys[order], all_w[order]

    group = all_keys // width
    vertex = group // (L * A)
    ptr = np.concatenate([[0], np.cumsum(np.bincount(vertex, minlength=n))])
    return NeighborFrequency(
        ptr=ptr.astype(np.int64),
        pred=((group // A) % L).astype(np.int64),
        arc=(group % A).astype(np.int64),
        state=(all_keys % width).astype(np.int64),
        weight=all_w.astype(np.float64),
        predecessors=predecessors,
        pred_states=pred_states,
        A=A,
    )


@dataclass(frozen=True, eq=False)
class PosteriorTensor:
    """E-step responsibilities.

    Base layer: ``gamma[u, i]``. Deep layer: ``resp[e, i]`` for each sparse
    frequency entry ``e`` (see :class:`NeighborFrequency`); entries whose
    frequency is zero are not stored and are exactly zero.
    ``log_norm[u]`` is the log of the per-vertex normalizer, i.e. the
    vertex log-likelihood under the parameters that produced the posterior.
    """

    C: int
    M: int
    A: int
    labels: np.ndarray
    log_norm: np.ndarray
    gamma: np.ndarray | None = None
    resp: np.ndarray | None = None
    freq: NeighborFrequency | None = None

    @property
    def is_base(self) -> bool:
        return self.freq is None

    @property
    def log_likelihood(self) -> float:
        return float(np.sum(self.log_norm))

    def vertex(self, u: int) -> np.ndarray:
        """Dense responsibilities of vertex ``u``: ``(C,)`` or ``(C, L, A, width)``."""
        if self.is_base:
            return self.gamma[u].copy()
        f = self.freq
        out = np.zeros((self.C, len(f.predecessors), self.A, f.width))
        s = slice(f.ptr[u], f.ptr[u + 1])
        out[:, f.pred[s], f.arc[s], f.state[s]] = self.resp[s].T
        return out

    def state_marginals(self) -> np.ndarray:
        """``(N, C)`` posterior of the hidden state of every vertex."""
        if self.is_base:
            return self.gamma
        n = self.freq.n_vertices
        vert = np.repeat(np.arange(n), np.diff(self.freq.ptr))
        return np.stack([np.bincount(vert, weights=self.resp[:, i], minlength=n)
                         for i in range(self.C)], axis=1)


def init_params(C: int, M: int, A: int, predecessors: Sequence[int] = (),
                pred_states: Sequence[int] = (), seed=None) -> LayerParams:
    """Random parameters; every distribution is a draw from a flat Dirichlet."""
    if min(C, M, A) < 1:
        raise ValueError("C, M and A must be >= 1")
    rng = np.random.default_rng(seed)
    emission = rng.dirichlet(np.ones(M), size=C)
    if not predecessors:
        return LayerParams(C, M, A, emission, prior=rng.dirichlet(np.ones(C)))
    L = len(predecessors)
    layer_weight = rng.dirichlet(np.ones(L))
    arc_weight = rng.dirichlet(np.ones(A), size=L)
    # Dirichlet draws per column: shape (A, cp+1, C), transposed to (A, C, cp+1).
    transition = [rng.dirichlet(np.ones(C), size=(A, cp + 1)).transpose(0, 2, 1)
                  for cp in pred_states]
    return LayerParams(C, M, A, emission, predecessors, pred_states,
                       layer_weight=layer_weight, arc_weight=arc_weight, transition=transition)


def _symbols(params: LayerParams, dataset: GraphDataset) -> np.ndarray:
    y = dataset.packed.labels
    if y.size and (y.min() < 1 or y.max() > params.M):
        raise DataError(f"vertex labels outside 1..{params.M}")
    return np.ascontiguousarray(y - 1, dtype=np.int64)


def _check_freq(params: LayerParams, dataset: GraphDataset, freq):
    if params.is_base:
        return
    if freq is None:
        raise ValueError("deep layer needs neighbor frequencies")
    if freq.predecessors != params.predecessors or freq.pred_states != params.pred_states:
        raise ValueError("neighbor frequencies were built for different predecessors")
    if freq.n_vertices != dataset.packed.n_vertices:
        raise ValueError("neighbor frequencies do not match the dataset")


def _deep_args(params: LayerParams, y, freq: NeighborFrequency):
    return (freq.ptr, y, freq.pred, freq.arc, freq.state, freq.weight, params.emission,
            params.layer_weight, params.arc_weight, params.padded_transition())


def _raise_zero(log_norm, dataset: GraphDataset, what):
    u = int(np.flatnonzero(~np.isfinite(log_norm))[0])
    pk = dataset.packed
    g = int(pk.vertex_graph[u])
    local = u - int(pk.vertex_ptr[g])
    raise NumericalError(f"{what}: zero likelihood at vertex {local} of graph {dataset[g].id}")


def e_step(params: LayerParams, dataset: GraphDataset,
           freq: NeighborFrequency | None = None) -> PosteriorTensor:
    _check_freq(params, dataset, freq)
    y = _symbols(params, dataset)
    if params.is_base:
        unn = params.emission[:, y].T * params.prior
        z = unn.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_norm = np.log(z)
            gamma = unn / z[:, None]
        if not np.all(z > 0):
            _raise_zero(log_norm, dataset, "e_step")
        return PosteriorTensor(params.C, params.M, params.A, y, log_norm, gamma=gamma)
    resp, log_norm = kernels.estep(*_deep_args(params, y, freq))
    if not np.all(np.isfinite(log_norm)):
        _raise_zero(log_norm, dataset, "e_step")
    return PosteriorTensor(params.C, params.M, params.A, y, log_norm, resp=resp, freq=freq)


def _normalize(acc, axis):
    total = acc.sum(axis=axis, keepdims=True)
    n = acc.shape[axis]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, acc / total, 1.0 / n)
    return out


def m_step(posterior: PosteriorTensor, smoothing: float = DEFAULT_SMOOTHING) -> LayerParams:
    """Closed-form maximizer of the expected complete log-likelihood.

    ``smoothing`` is added to every accumulator before normalizing. With
    ``smoothing=0`` a distribution whose accumulator is entirely zero (e.g. a
    state that received no responsibility) is set to uniform; it has no
    effect on the likelihood.
    """
    C, M, A, y = posterior.C, posterior.M, posterior.A, posterior.labels
    if posterior.is_base:
        gamma = posterior.gamma
        emis = np.stack([np.bincount(y, weights=gamma[:, i], minlength=M) for i in range(C)])
        prior = gamma.sum(axis=0)
        return LayerParams(C, M, A, _normalize(emis + smoothing, 1),
                           prior=_normalize(prior + smoothing, 0))
    f = posterior.freq
    L, width = len(f.predecessors), f.width
    emis, lw, aw, tr = kernels.accumulate(f.ptr, y, f.pred, f.arc, f.state, posterior.resp,
                                          M, L, A, width)
    transition = []
    for p, cp in enumerate(f.pred_states):
        transition.append(_normalize(tr[p, :, :, : cp + 1] + smoothing, 1))
    return LayerParams(
        C, M, A, _normalize(emis + smoothing, 1), f.predecessors, f.pred_states,
        layer_weight=_normalize(lw + smoothing, 0),
        arc_weight=_normalize(aw + smoothing, 1),
        transition=transition,
    )


def vertex_log_likelihood(params: LayerParams, dataset: GraphDataset,
                          freq: NeighborFrequency | None = None) -> np.ndarray:
    _check_freq(params, dataset, freq)
    y = _symbols(params, dataset)
    if params.is_base:
        with np.errstate(divide="ignore"):
            return np.log(params.emission[:, y].T @ params.prior)
    return kernels.loglik(*_deep_args(params, y, freq))


def log_likelihood(params: LayerParams, dataset: GraphDataset,
                   freq: NeighborFrequency | None = None) -> float:
    ll = vertex_log_likelihood(params, dataset, freq)
    if not np.all(np.isfinite(ll)):
        _raise_zero(ll, dataset, "log_likelihood")
    return float(np.sum(ll))


def infer_states(params: LayerParams, dataset: GraphDataset,
                 freq: NeighborFrequency | None = None) -> np.ndarray:
    """Most likely state of every vertex (global order); ties go to the smaller state."""
    _check_freq(params, dataset, freq)
    y = _symbols(params, dataset)
    if params.is_base:
        return np.argmax(params.emission[:, y].T * params.prior, axis=1).astype(np.int64)
    return kernels.infer(*_deep_args(params, y, freq))


@dataclass
class TrainConfig:
    C: int = 20
    max_iters: int = 50
    tol: float = 1e-4
    smoothing: float = DEFAULT_SMOOTHING
    # Optional hook called with every parameter set produced (init and each M-step).
    observer: object = field(default=None, repr=False)


def train_layer(dataset: GraphDataset, freq: NeighborFrequency | None,
                config: TrainConfig, seed=None) -> tuple[LayerParams, list[float]]:
    """Fit one layer by EM.

    Returns the final parameters and the log-likelihood trace; ``trace[k]``
    is the likelihood after ``k`` M-steps, so ``max_iters=0`` yields the
    initialization and a single-element trace. Stops once the relative
    improvement drops below ``config.tol``.
    """
    if freq is None:
        params = init_params(config.C, dataset.M, dataset.A, seed=seed)
    else:
        params = init_params(config.C, dataset.M, dataset.A, freq.predecessors,
                             freq.pred_states, seed=seed)
    if config.observer is not None:
        config.observer(params)
    trace = []
    for it in range(config.max_iters + 1):
        post = e_step(params, dataset, freq)
        ll = post.log_likelihood
        trace.append(ll)
        if it == config.max_iters:
            break
        if it > 0 and abs(ll - trace[-2]) <= config.tol * abs(ll):
            break
        params = m_step(post, config.smoothing)
        if config.observer is not None:
            config.observer(params)
    log.debug("layer C=%d trained in %d iterations, logL=%.6f", config.C, len(trace) - 1, trace[-1])
    return params, trace
