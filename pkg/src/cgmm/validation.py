"""Cross-validated assessment: single 10-fold and nested 5-in-10 schemes.

Every training fold builds its own stack (pooling and depth selection
included), so test graphs never influence the encoder or the classifier.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .classify import accuracy, stratified_folds, train_linear
from .graph import GraphDataset
from .seeding import derive_seed
from .stack import StackConfig, stack_features, train_stack

__all__ = ["CVResult", "cross_validate", "fit_and_score"]

log = logging.getLogger(__name__)

OUTER_FOLDS = 10
INNER_FOLDS = 5


@dataclass
class CVResult:
    scheme: str
    fold_accuracies: list
    selected: list = field(default_factory=list)  # grid index used on each outer fold
    depths: list = field(default_factory=list)    # stack depth of each outer fold
    folds: list = field(default_factory=list)     # test indices of each outer fold

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))

    def format(self) -> str:
        """Percent accuracy as ``mean (std)``."""
        return f"{100 * self.mean:.2f} ({100 * self.std:.2f})"


def fit_and_score(dataset: GraphDataset, train_idx, test_idx, config: StackConfig, seed: int):
    """Train a stack and classifier on ``train_idx``; return ``(test accuracy, depth)``."""
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    stack = train_stack(train, config, seed)
    clf = train_linear(stack_features(stack, train, config), train.targets,
                       l2=config.l2, max_iter=config.clf_max_iter)
    return accuracy(clf, stack_features(stack, test, config), test.targets), stack.depth


def _complement(n, idx):
    return np.setdiff1d(np.arange(n), idx)


def cross_validate(dataset: GraphDataset, grid, scheme: str = "tenfold", seed: int = 0) -> CVResult:
    """Assess a configuration grid.

    ``tenfold``: every configuration runs the same stratified 10-fold CV and
    the one with the best mean accuracy is reported. ``nested``: on each
    outer training fold an inner stratified 5-fold CV picks the
    configuration, which is then retrained on that fold and tested.
    """
    if isinstance(grid, StackConfig):
        grid = [grid]
    targets = dataset.targets
    n = len(dataset)
    folds = stratified_folds(targets, OUTER_FOLDS, derive_seed(seed, "folds"))

    if scheme == "tenfold":
        per_config = []
        for c, config in enumerate(grid):
            results = [fit_and_score(dataset, _complement(n, test), test, config,
                                     derive_seed(seed, "fold", k))
                       for k, test in enumerate(folds)]
            per_config.append(results)
            log.info("config %d: mean accuracy %.4f", c, np.mean([r[0] for r in results]))
        best = max(range(len(grid)), key=lambda c: (np.mean([r[0] for r in per_config[c]]), -c))
        return CVResult("tenfold", [r[0] for r in per_config[best]], [best] * OUTER_FOLDS,
                        [r[1] for r in per_config[best]], folds)

    if scheme != "nested":
        raise ValueError(f"unknown CV scheme {scheme!r}")
    accs, selected, depths = [], [], []
    for k, test in enumerate(folds):
        train = _complement(n, test)
        if len(grid) == 1:
            best = 0
        else:
            inner = stratified_folds(targets[train], INNER_FOLDS, derive_seed(seed, "inner", k))
            scores = []
            for config in grid:
                inner_acc = [fit_and_score(dataset, np.delete(train, itest), train[itest], config,
                                           derive_seed(seed, "inner", k, j))[0]
                             for j, itest in enumerate(inner)]
                scores.append(np.mean(inner_acc))
            best = max(range(len(grid)), key=lambda c: (scores[c], -c))
        acc, depth = fit_and_score(dataset, train, test, grid[best], derive_seed(seed, "fold", k))
        accs.append(acc)
        selected.append(best)
        depths.append(depth)
        log.info("outer fold %d: config %d, accuracy %.4f", k, best, acc)
    return CVResult("nested", accs, selected, depths, folds)
