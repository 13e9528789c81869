"""Jaccard and RBF kernels on fingerprints and the precomputed-kernel text format.

File format (17 significant digits)::

    kernel <type> <params> <n>
    ids <id_1> ... <id_n>
    <K[0,0]> <K[0,1]> ... <K[0,n-1]>
    <K[1,1]> ... <K[1,n-1]>
    ...

Only the upper triangle (diagonal included) is written, one matrix row per
line. ``<params>`` is ``-`` for Jaccard and ``gamma=<value>`` for RBF.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import DataError

__all__ = [
    "KernelMatrix",
    "export_kernel_matrix",
    "import_kernel_matrix",
    "jaccard_kernel",
    "jaccard_matrix",
    "kernel_matrix",
    "rbf_kernel",
    "rbf_matrix",
]


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return x, y


def jaccard_kernel(x, y) -> float:
    """sum(min) / sum(max) of two non-negative count vectors; 1 when both are all-zero."""
    x, y = _pair(x, y)
    if (x < 0).any() or (y < 0).any():
        raise ValueError("Jaccard kernel needs non-negative entries")
    hi = np.maximum(x, y).sum()
    if hi == 0:
        return 1.0
    return float(np.minimum(x, y).sum() / hi)


def rbf_kernel(x, y, gamma: float) -> float:
    x, y = _pair(x, y)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def jaccard_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if (X < 0).any():
        raise ValueError("Jaccard kernel needs non-negative entries")
    n = len(X)
    K = np.ones((n, n))
    for i in range(n):
        lo = np.minimum(X[i], X[i + 1:]).sum(axis=1)
        hi = np.maximum(X[i], X[i + 1:]).sum(axis=1)
        row = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 1.0)
        K[i, i + 1:] = row
        K[i + 1:, i] = row
    return K


def rbf_matrix(X, gamma: float) -> np.ndarray:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    X = np.asarray(X, dtype=np.float64)
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=2)
    return np.exp(-gamma * sq)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray
    ids: tuple
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def descriptor(self) -> str:
        if not self.params:
            return "-"
        return ",".join(f"{k}={v!r}" for k, v in sorted(self.params.items()))


def kernel_matrix(X, ids, kind: str = "jaccard", gamma: float = 1.0) -> KernelMatrix:
    if kind == "jaccard":
        return KernelMatrix(jaccard_matrix(X), tuple(ids), "jaccard")
    if kind == "rbf":
        return KernelMatrix(rbf_matrix(X, gamma), tuple(ids), "rbf", {"gamma": float(gamma)})
    raise ValueError(f"unknown kernel {kind!r}")


def export_kernel_matrix(km: KernelMatrix, sink: TextIO) -> None:
    n = len(km.ids)
    sink.write(f"kernel {km.kind} {km.descriptor} {n}\n")
    sink.write(" ".join(["ids", *km.ids]) + "\n")
    for i in range(n):
        sink.write(" ".join(f"{v:.17g}" for v in km.values[i, i:]) + "\n")


def import_kernel_matrix(source: TextIO) -> KernelMatrix:
    lines = [ln.split() for ln in source.read().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "kernel" or len(lines[0]) != 4:
        raise DataError("missing 'kernel <type> <params> <n>' header")
    _, kind, desc, n = lines[0]
    n = int(n)
    params = {}
    if desc != "-":
        for item in desc.split(","):
            k, v = item.split("=")
            params[k] = float(v)
    if len(lines) != n + 2 or lines[1][0] != "ids" or len(lines[1]) != n + 1:
        raise DataError("kernel file is truncated or malformed")
    K = np.zeros((n, n))
    for i in range(n):
        row = [float(v) for v in lines[i + 2]]
        if len(row) != n - i:
            raise DataError(f"kernel row {i} has {len(row)} entries, expected {n - i}")
        K[i, i:] = row
        K[i:, i] = row
    return KernelMatrix(K, tuple(lines[1][1:]), kind, params)
