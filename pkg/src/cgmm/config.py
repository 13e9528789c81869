"""``key = value`` run configuration shared by the CLI commands.

``states`` and ``fingerprint_layers`` accept comma-separated lists; their
cartesian product is the model-selection grid used by ``eval`` and ``train``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields
from typing import TextIO

from .errors import ConfigError
from .stack import FINGERPRINT_MODES, LAYER_MODES, StackConfig


def _int_list(v):
    return tuple(int(x) for x in v.split(","))


def _str_list(choices):
    def parse(v):
        items = tuple(x.strip() for x in v.split(","))
        for x in items:
            if x not in choices:
                raise ValueError(f"{x!r} not in {choices}")
        return items
    return parse


def _choice(choices):
    def parse(v):
        if v not in choices:
            raise ValueError(f"{v!r} not in {choices}")
        return v
    return parse


def _predecessors(v):
    return "all" if v == "all" else int(v)


def _bool(v):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_PARSERS = {
    "states": _int_list,
    "max_layers": int,
    "pool_size": int,
    "predecessors": _predecessors,
    "em_max_iters": int,
    "em_tol": float,
    "smoothing": float,
    "fingerprint": _choice(FINGERPRINT_MODES),
    "fingerprint_layers": _str_list(LAYER_MODES),
    "normalize": _bool,
    "kernel": _choice(("jaccard", "rbf")),
    "gamma": float,
    "cv": _choice(("tenfold", "nested")),
    "seed": int,
    "threads": int,
    "validation_fraction": float,
    "patience": int,
    "l2": float,
    "clf_max_iter": int,
}


@dataclass
class RunConfig:
    states: tuple = (20, 40)
    max_layers: int = 8
    pool_size: int = 10
    predecessors: int | str = 1
    em_max_iters: int = 50
    em_tol: float = 1e-4
    smoothing: float = 1e-8
    fingerprint: str = "unigram"
    fingerprint_layers: tuple = ("all", "last")
    normalize: bool = False
    kernel: str = "jaccard"
    gamma: float = 1.0
    cv: str = "tenfold"
    seed: int = 0
    threads: int = 0  # 0: all available cores
    validation_fraction: float = 0.2
    patience: int = 1
    l2: float = 1e-2
    clf_max_iter: int = 200

    @classmethod
    def parse(cls, source: TextIO | str) -> "RunConfig":
        text = source if isinstance(source, str) else source.read()
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _PARSERS:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
            try:
                values[key] = _PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
        cfg = cls(**values)
        cfg.grid()  # validates combinations
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh)

    def format(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def grid(self) -> list:
        """One :class:`StackConfig` per (states, fingerprint_layers) combination."""
        out = []
        for C, layers in itertools.product(self.states, self.fingerprint_layers):
            try:
                out.append(StackConfig(
                    C=C, max_layers=self.max_layers, pool_size=self.pool_size,
                    predecessors=self.predecessors, em_max_iters=self.em_max_iters,
                    em_tol=self.em_tol, smoothing=self.smoothing, fingerprint=self.fingerprint,
                    layers=layers, normalize=self.normalize,
                    validation_fraction=self.validation_fraction, patience=self.patience,
                    l2=self.l2, clf_max_iter=self.clf_max_iter,
                ))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not out:
            raise ConfigError("empty configuration grid")
        return out
