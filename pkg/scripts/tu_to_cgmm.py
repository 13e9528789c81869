"""Convert a TU-Dortmund benchmark directory (e.g. MUTAG) to the cgmm dataset format.

    python3 scripts/tu_to_cgmm.py path/to/MUTAG mutag.txt

Reads ``<NAME>_A.txt``, ``_graph_indicator.txt``, ``_graph_labels.txt``,
``_node_labels.txt`` and, when present, ``_edge_labels.txt``. Vertex, arc and
graph labels are remapped to consecutive values in sorted order. The
adjacency file already lists both directions of every bond, so each row
becomes one directed arc.
"""

import argparse
from pathlib import Path

import numpy as np

from cgmm.graph import Graph, GraphDataset, write_dataset


def _read(path):
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=1)


def _dense_codes(values, start):
    uniq = np.unique(values)
    return np.searchsorted(uniq, values) + start, len(uniq)


def convert(directory: Path) -> GraphDataset:
    name = directory.name
    pre = directory / name
    arcs = _read(f"{pre}_A.txt").reshape(-1, 2) - 1
    graph_of = _read(f"{pre}_graph_indicator.txt") - 1
    targets, _ = _dense_codes(_read(f"{pre}_graph_labels.txt"), 0)
    labels, M = _dense_codes(_read(f"{pre}_node_labels.txt"), 1)
    edge_file = Path(f"{pre}_edge_labels.txt")
    if edge_file.exists():
        arc_labels, A = _dense_codes(_read(edge_file), 1)
    else:
        arc_labels, A = np.ones(len(arcs), dtype=np.int64), 1

    first = np.searchsorted(graph_of, np.arange(len(targets)))
    first = np.append(first, len(graph_of))
    arc_graph = graph_of[arcs[:, 0]]
    graphs = []
    for g in range(len(targets)):
        mine = arc_graph == g
        base = first[g]
        graphs.append(Graph(f"{name}_{g}", labels[base:first[g + 1]],
                            arcs[mine, 0] - base, arcs[mine, 1] - base, arc_labels[mine],
                            int(targets[g])))
    return GraphDataset(graphs, M=M, A=A, name=name)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory", type=Path)
    ap.add_argument("out")
    args = ap.parse_args(argv)
    ds = convert(args.directory)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} graphs (M={ds.M}, A={ds.A}) to {args.out}")


if __name__ == "__main__":
    main()
