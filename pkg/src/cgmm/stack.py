"""Deep CGMM: incremental layering with pooling, fingerprints and model files."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .classify import accuracy, stratified_split, train_linear
from .errors import DataError
from .graph import Graph, GraphDataset
from .layer import (
    LayerParams,
    StateAssignmentTable,
    TrainConfig,
    infer_states,
    neighbor_frequency,
    train_layer,
)
from .seeding import derive_seed

__all__ = [
    "EncodedSplit",
    "Fingerprint",
    "StackConfig",
    "StackModel",
    "compute_fingerprint",
    "encode",
    "fingerprint_matrix",
    "inspect_fingerprints",
    "load_stack",
    "pool_train_select",
    "save_stack",
    "train_stack",
    "write_fingerprint_csv",
]

log = logging.getLogger(__name__)

MODEL_HEADER = "cgmm-model v1"
FINGERPRINT_MODES = ("unigram", "unibigram")
LAYER_MODES = ("all", "last")


@dataclass
class StackConfig:
    C: int = 20
    max_layers: int = 8
    pool_size: int = 10
    predecessors: int | str = 1
    em_max_iters: int = 50
    em_tol: float = 1e-4
    smoothing: float = 1e-8
    fingerprint: str = "unigram"
    layers: str = "all"
    normalize: bool = False
    validation_fraction: float = 0.2
    patience: int = 1
    l2: float = 1e-2
    clf_max_iter: int = 200

    def __post_init__(self):
        if self.fingerprint not in FINGERPRINT_MODES:
            raise ValueError(f"fingerprint must be one of {FINGERPRINT_MODES}")
        if self.layers not in LAYER_MODES:
            raise ValueError(f"layers must be one of {LAYER_MODES}")
        if self.predecessors != "all" and int(self.predecessors) < 1:
            raise ValueError("predecessors must be a positive integer or 'all'")
        if self.max_layers < 1 or self.patience < 1:
            raise ValueError("max_layers and patience must be >= 1")

    def layer_config(self) -> TrainConfig:
        return TrainConfig(C=self.C, max_iters=self.em_max_iters, tol=self.em_tol,
                           smoothing=self.smoothing)

    def predecessors_of(self, depth: int) -> tuple:
        if self.predecessors == "all":
            return tuple(range(depth))
        return tuple(range(max(0, depth - int(self.predecessors)), depth))


@dataclass(eq=False)
class StackModel:
    """Frozen layers plus the alphabets and a construction log.

    ``log`` holds one dict per event (pool results per depth, stopping
    reason); values are kept as the strings written to the model file.
    """

    layers: list
    M: int
    A: int
    log: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def n_states(self) -> list:
        return [p.C for p in self.layers]


@dataclass(frozen=True, eq=False)
class Fingerprint:
    graph_id: str
    blocks: tuple  # one integer vector per layer

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(self.blocks)


# --------------------------------------------------------------------------
# encoding
# --------------------------------------------------------------------------

def encode(layers: Sequence[LayerParams], dataset: GraphDataset,
           table: StateAssignmentTable | None = None) -> StateAssignmentTable:
    """Infer frozen states layer by layer; ``table`` may hold already-inferred lower layers."""
    table = table or StateAssignmentTable()
    for depth in range(len(table), len(layers)):
        params = layers[depth]
        if (params.M, params.A) != (dataset.M, dataset.A):
            raise DataError("dataset alphabets do not match the model")
        freq = None if params.is_base else neighbor_frequency(dataset, table, params.predecessors)
        table = table.extended(infer_states(params, dataset, freq), params.C)
    return table


def layer_block(dataset: GraphDataset, states: np.ndarray, C: int, mode: str = "unigram") -> np.ndarray:
    """Per-graph state counts ``(G, C)``; ``unibigram`` appends ordered arc-pair counts ``(G, C*C)``."""
    pk = dataset.packed
    G = len(dataset)
    uni = np.bincount(pk.vertex_graph * C + states, minlength=G * C).reshape(G, C)
    if mode == "unigram":
        return uni
    arc_graph = np.repeat(np.arange(G), np.diff(pk.arc_ptr))
    pair = states[pk.src] * C + states[pk.dst]
    bi = np.bincount(arc_graph * C * C + pair, minlength=G * C * C).reshape(G, C * C)
    return np.concatenate([uni, bi], axis=1)


def _blocks(dataset, table, n_states, mode):
    return [layer_block(dataset, table[d], n_states[d], mode) for d in range(len(table))]


def _features(blocks, layers_mode, normalize, dataset):
    X = blocks[-1] if layers_mode == "last" else np.concatenate(blocks, axis=1)
    X = X.astype(np.float64)
    if normalize:
        sizes = np.array([max(g.n_vertices, 1) for g in dataset], dtype=np.float64)
        X = X / sizes[:, None]
    return X


def fingerprint_matrix(stack: StackModel, dataset: GraphDataset, mode: str = "unigram",
                       layers: str = "all") -> np.ndarray:
    """Integer fingerprints of every graph, ``(G, K)``."""
    if not stack.layers:
        raise DataError("empty stack")
    table = encode(stack.layers, dataset)
    blocks = _blocks(dataset, table, stack.n_states, mode)
    return blocks[-1] if layers == "last" else np.concatenate(blocks, axis=1)


def compute_fingerprint(stack: StackModel, graph: Graph, mode: str = "unigram") -> Fingerprint:
    if not stack.layers:
        raise DataError("empty stack")
    ds = GraphDataset([graph], stack.M, stack.A)
    table = encode(stack.layers, ds)
    return Fingerprint(graph.id, tuple(b[0] for b in _blocks(ds, table, stack.n_states, mode)))


def stack_features(stack: StackModel, dataset: GraphDataset, config: StackConfig) -> np.ndarray:
    """Classifier input for ``dataset`` under the fingerprint options of ``config``."""
    table = encode(stack.layers, dataset)
    return _features(_blocks(dataset, table, stack.n_states, config.fingerprint),
                     config.layers, config.normalize, dataset)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

@dataclass
class EncodedSplit:
    """A labeled dataset with its frozen states and fingerprint blocks so far."""

    data: GraphDataset
    targets: np.ndarray
    table: StateAssignmentTable
    blocks: list

    @classmethod
    def start(cls, dataset: GraphDataset) -> "EncodedSplit":
        return cls(dataset, dataset.targets, StateAssignmentTable(), [])


def _score(split_fit: EncodedSplit, split_val: EncodedSplit, config: StackConfig) -> float:
    X_fit = _features(split_fit.blocks, config.layers, config.normalize, split_fit.data)
    X_val = _features(split_val.blocks, config.layers, config.normalize, split_val.data)
    model = train_linear(X_fit, split_fit.targets, l2=config.l2, max_iter=config.clf_max_iter)
    return accuracy(model, X_val, split_val.targets)


def _extend(split: EncodedSplit, params: LayerParams, config: StackConfig) -> EncodedSplit:
    freq = None if params.is_base else neighbor_frequency(split.data, split.table, params.predecessors)
    states = infer_states(params, split.data, freq)
    table = split.table.extended(states, params.C)
    blocks = split.blocks + [layer_block(split.data, states, params.C, config.fingerprint)]
    return EncodedSplit(split.data, split.targets, table, blocks)


def pool_train_select(fit: EncodedSplit, val: EncodedSplit, depth: int, pool_size: int,
                      config: StackConfig, seed: int):
    """Train ``pool_size`` candidate layers at ``depth`` and keep the best on validation.

    Returns ``(params, scores, seeds, winner)``. Equal accuracies are
    resolved in favor of the candidate using more distinct states on the fit
    split (a coarser encoding loses information later layers cannot
    recover), then the lower seed.
    """
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    preds = config.predecessors_of(depth)
    freq = neighbor_frequency(fit.data, fit.table, preds) if preds else None
    candidates, scores, seeds, used = [], [], [], []
    for m in range(pool_size):
        s = derive_seed(seed, "layer", depth, m)
        params, _ = train_layer(fit.data, freq, config.layer_config(), seed=s)
        fit_m = _extend(fit, params, config)
        candidates.append(params)
        seeds.append(s)
        used.append(len(np.unique(fit_m.table[depth])))
        scores.append(_score(fit_m, _extend(val, params, config), config))
    winner = min(range(pool_size), key=lambda m: (-scores[m], -used[m], seeds[m]))
    return candidates[winner], scores, seeds, winner


def train_stack(dataset: GraphDataset, config: StackConfig, seed: int = 0) -> StackModel:
    """Grow layers one at a time while the validation accuracy keeps improving.

    A stratified ``validation_fraction`` of ``dataset`` is held out to score
    pool members and depths; layers are fit on the rest. Growth stops after
    ``patience`` consecutive depths without improving on the best score so
    far (the non-improving layers are dropped) or at ``max_layers``.
    """
    targets = dataset.targets
    if len(np.unique(targets)) < 2:
        raise DataError("training targets contain fewer than 2 classes")
    fit_idx, val_idx = stratified_split(targets, config.validation_fraction,
                                        derive_seed(seed, "validation"))
    if len(val_idx) == 0:
        raise DataError("training set too small for a validation split")
    fit = EncodedSplit.start(dataset.subset(fit_idx))
    val = EncodedSplit.start(dataset.subset(val_idx))

    layers, events = [], []
    best_score, best_depth, stale = -np.inf, 0, 0
    reason = "max_layers"
    for depth in range(config.max_layers):
        params, scores, seeds, winner = pool_train_select(fit, val, depth, config.pool_size,
                                                          config, seed)
        layers.append(params)
        fit, val = _extend(fit, params, config), _extend(val, params, config)
        score = scores[winner]
        events.append(dict(
            event="depth", depth=depth, C=params.C, pool=config.pool_size, winner=winner,
            seed=seeds[winner], score=score, pool_scores=scores,
        ))
        log.info("depth %d: validation accuracy %.4f (pool best of %d)", depth, score, config.pool_size)
        if score > best_score:
            best_score, best_depth, stale = score, depth + 1, 0
        else:
            stale += 1
            if stale >= config.patience:
                reason = "no_improvement"
                break
    layers = layers[:best_depth]
    events.append(dict(event="stop", reason=reason, depth=best_depth, score=best_score))
    return StackModel(layers, dataset.M, dataset.A, [_stringify(e) for e in events])


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _stringify(event: dict) -> dict:
    return {k: _fmt(v) for k, v in event.items()}


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------

def _row(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.ravel(values))


def _ints_or_dash(values) -> str:
    return " ".join(str(v) for v in values) if values else "-"


def save_stack(stack: StackModel, sink: TextIO) -> None:
    w = sink.write
    w(MODEL_HEADER + "\n")
    w(f"alphabets {stack.M} {stack.A}\n")
    w(f"layers {stack.depth}\n")
    for idx, p in enumerate(stack.layers):
        w(f"layer {idx}\n")
        w(f"C {p.C}\n")
        w(f"predecessors {_ints_or_dash(p.predecessors)}\n")
        w(f"pred_states {_ints_or_dash(p.pred_states)}\n")
        if p.is_base:
            w("prior\n" + _row(p.prior) + "\n")
        w("emission\n")
        for r in p.emission:
            w(_row(r) + "\n")
        if not p.is_base:
            w("layer_weight\n" + _row(p.layer_weight) + "\n")
            w("arc_weight\n")
            for r in p.arc_weight:
                w(_row(r) + "\n")
            for slot, t in enumerate(p.transition):
                w(f"transition {slot}\n")
                for a in range(p.A):
                    for r in t[a]:
                        w(_row(r) + "\n")
        w("end\n")
    w(f"log {len(stack.log)}\n")
    for e in stack.log:
        w(" ".join(f"{k}={v}" for k, v in e.items()) + "\n")


class _Lines:
    def __init__(self, text: str):
        self._lines = [ln for ln in text.splitlines() if ln.strip()]
        self.pos = 0

    def next(self, expect: str | None = None) -> list:
        if self.pos >= len(self._lines):
            raise DataError("model file is truncated")
        tok = self._lines[self.pos].split()
        self.pos += 1
        if expect is not None and tok[0] != expect:
            raise DataError(f"model file line {self.pos}: expected {expect!r}, got {tok[0]!r}")
        return tok

    def floats(self, n_rows: int, n_cols: int) -> np.ndarray:
        rows = []
        for _ in range(n_rows):
            tok = self.next()
            if len(tok) != n_cols:
                raise DataError(f"model file line {self.pos}: expected {n_cols} values")
            try:
                rows.append([float(t) for t in tok])
            except ValueError:
                raise DataError(f"model file line {self.pos}: non-numeric value") from None
        return np.array(rows, dtype=np.float64)

    def done(self) -> bool:
        return self.pos >= len(self._lines)


def _parse_ints(tok):
    return () if tok == ["-"] else tuple(int(t) for t in tok)


def load_stack(source: TextIO | str) -> StackModel:
    text = source if isinstance(source, str) else source.read()
    lines = _Lines(text)
    if lines.done():
        raise DataError("model file is empty")
    header = " ".join(lines.next())
    if header != MODEL_HEADER:
        raise DataError(f"unsupported model version {header!r} (expected {MODEL_HEADER!r})")
    try:
        _, M, A = lines.next("alphabets")
        M, A = int(M), int(A)
        n_layers = int(lines.next("layers")[1])
        layers = []
        for idx in range(n_layers):
            lines.next("layer")
            C = int(lines.next("C")[1])
            preds = _parse_ints(lines.next("predecessors")[1:])
            pred_states = _parse_ints(lines.next("pred_states")[1:])
            if not preds:
                lines.next("prior")
                prior = lines.floats(1, C)[0]
                lines.next("emission")
                layers.append(LayerParams(C, M, A, lines.floats(C, M), prior=prior))
            else:
                lines.next("emission")
                emission = lines.floats(C, M)
                lines.next("layer_weight")
                lw = lines.floats(1, len(preds))[0]
                lines.next("arc_weight")
                aw = lines.floats(len(preds), A)
                transition = []
                for cp in pred_states:
                    lines.next("transition")
                    transition.append(lines.floats(A * C, cp + 1).reshape(A, C, cp + 1))
                layers.append(LayerParams(C, M, A, emission, preds, pred_states,
                                          layer_weight=lw, arc_weight=aw, transition=transition))
            lines.next("end")
        n_events = int(lines.next("log")[1])
        events = []
        for _ in range(n_events):
            events.append(dict(item.split("=", 1) for item in lines.next()))
    except (ValueError, IndexError) as exc:
        raise DataError(f"malformed model file near line {lines.pos}: {exc}") from None
    return StackModel(layers, M, A, events)


def save_stack_file(stack: StackModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        save_stack(stack, fh)


def load_stack_file(path) -> StackModel:
    with open(path, encoding="utf-8") as fh:
        return load_stack(fh)


def dumps_stack(stack: StackModel) -> str:
    buf = io.StringIO()
    save_stack(stack, buf)
    return buf.getvalue()


# --------------------------------------------------------------------------
# reporting
# --------------------------------------------------------------------------

def write_fingerprint_csv(dataset: GraphDataset, X: np.ndarray, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["graph_id", "target", *(f"c_{k + 1}" for k in range(X.shape[1]))])
    for g, row in zip(dataset, X):
        writer.writerow([g.id, "" if g.target is None else g.target, *row.tolist()])


def inspect_fingerprints(stack: StackModel, dataset: GraphDataset) -> list:
    """Mean unigram fingerprint per (class, layer): rows ``(class, layer, means)``."""
    if not dataset.is_labeled:
        raise DataError("inspect needs a labeled dataset")
    if not stack.layers:
        raise DataError("empty stack")
    targets = dataset.targets
    table = encode(stack.layers, dataset)
    blocks = _blocks(dataset, table, stack.n_states, "unigram")
    rows = []
    for c in np.unique(targets):
        members = targets == c
        for d, block in enumerate(blocks):
            rows.append((int(c), d, block[members].mean(axis=0)))
    return rows


def write_inspect_csv(rows: list, sink: TextIO) -> None:
    width = max(len(r[2]) for r in rows)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["class", "layer", *(f"s_{k + 1}" for k in range(width))])
    for c, d, means in rows:
        writer.writerow([c, d, *(f"{v:.17g}" for v in means)])
