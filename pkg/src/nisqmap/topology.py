"""Coupling-graph generators.

Lattices are numbered row-major (x fastest). Named topologies carry the
coupling maps of real chips.
"""

import re
from itertools import product
from typing import Dict, List, Tuple

Edge = Tuple[int, int]

TORONTO_EDGES: List[Edge] = [
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10),
    (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16),
    (15, 18), (16, 19), (17, 18), (18, 21), (19, 20), (19, 22), (21, 23),
    (22, 25), (23, 24), (24, 25), (25, 26),
]  # fmt: skip

LONDON_EDGES: List[Edge] = [(0, 1), (1, 2), (1, 3), (3, 4)]

NAMED_TOPOLOGIES: Dict[str, Tuple[int, List[Edge]]] = {
    "toronto": (27, TORONTO_EDGES),
    "london": (5, LONDON_EDGES),
}


def grid2d(w: int, h: int) -> Tuple[int, List[Edge]]:
    return grid3d(w, h, 1)


def grid3d(x: int, y: int, z: int) -> Tuple[int, List[Edge]]:
    """Nearest-neighbour lattice; returns ``(n_qubits, sorted edges)``."""
    if min(x, y, z) < 1:
        raise ValueError(f"lattice dimensions must be >= 1, got {(x, y, z)}")

    def index(i: int, j: int, k: int) -> int:
        return i + x * (j + y * k)

    edges = []
    for i, j, k in product(range(x), range(y), range(z)):
        here = index(i, j, k)
        if i + 1 < x:
            edges.append((here, index(i + 1, j, k)))
        if j + 1 < y:
            edges.append((here, index(i, j + 1, k)))
        if k + 1 < z:
            edges.append((here, index(i, j, k + 1)))
    return x * y * z, sorted(edges)


def gen_lattice(spec: str) -> Tuple[int, List[Edge]]:
    """Resolve ``grid2d:WxH``, ``grid3d:XxYxZ`` or a named topology."""
    spec = spec.strip().lower()
    if spec in NAMED_TOPOLOGIES:
        n, edges = NAMED_TOPOLOGIES[spec]
        return n, list(edges)
    match = re.fullmatch(r"(grid2d|grid3d):(\d+(?:x\d+)*)", spec)
    if not match:
        raise ValueError(f"unknown topology spec '{spec}'")
    dims = [int(d) for d in match.group(2).split("x")]
    if match.group(1) == "grid2d" and len(dims) == 2:
        return grid2d(*dims)
    if match.group(1) == "grid3d" and len(dims) == 3:
        return grid3d(*dims)
    raise ValueError(f"wrong number of dimensions in '{spec}'")
