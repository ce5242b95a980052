"""Device model: coupling graph, calibration, crosstalk and distance matrices.

The JSON file format is validated with pydantic; the runtime ``DeviceModel``
is immutable and exposes a networkx view of the coupling graph.
"""

import json
import logging
from functools import lru_cache
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from nisqmap.config import CalibrationRanges, substream
from nisqmap.errors import DeviceValidationError
from nisqmap.topology import gen_lattice

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

DISTANCE_CACHE_SIZE = 512


def edge_key(a: int, b: int) -> Edge:
    return (a, b) if a < b else (b, a)


# ============================================================================
# File schema
# ============================================================================


class EdgeRecord(BaseModel):
    a: int = Field(ge=0)
    b: int = Field(ge=0)
    cx_error: float = Field(ge=0.0, lt=1.0)


class QubitRecord(BaseModel):
    id: int = Field(ge=0)
    readout_error: float = Field(ge=0.0, lt=1.0)
    sq_error: float = Field(ge=0.0, lt=1.0)


class CrosstalkRecord(BaseModel):
    edge: Tuple[int, int]
    other: Tuple[int, int]
    ratio: float = Field(ge=0.0)


class DeviceSpec(BaseModel):
    """On-disk device description."""

    n_qubits: int = Field(ge=1)
    edges: List[EdgeRecord]
    qubits: List[QubitRecord]
    crosstalk: List[CrosstalkRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def _structure(self) -> "DeviceSpec":
        seen = set()
        for e in self.edges:
            if e.a == e.b:
                raise ValueError(f"self-loop on qubit {e.a}")
            if max(e.a, e.b) >= self.n_qubits:
                raise ValueError(f"edge ({e.a},{e.b}) references a qubit >= n_qubits")
            key = edge_key(e.a, e.b)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        ids = sorted(q.id for q in self.qubits)
        if ids != list(range(self.n_qubits)):
            raise ValueError("qubit records must list every qubit id exactly once")
        pairs = set()
        for x in self.crosstalk:
            e, f = edge_key(*x.edge), edge_key(*x.other)
            if e not in seen or f not in seen:
                raise ValueError(f"crosstalk entry {x.edge}|{x.other} references an unknown edge")
            if e == f:
                raise ValueError(f"crosstalk entry pairs edge {e} with itself")
            if (e, f) in pairs:
                raise ValueError(f"duplicate crosstalk entry {e}|{f}")
            pairs.add((e, f))
        return self


# ============================================================================
# Runtime model
# ============================================================================


class DeviceModel:
    """Immutable chip description with cached distance matrices."""

    def __init__(self, spec: DeviceSpec):
        self.spec = spec
        self.n_qubits = spec.n_qubits
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_qubits))
        self.cx_error: Dict[Edge, float] = {}
        for e in spec.edges:
            key = edge_key(e.a, e.b)
            self.cx_error[key] = e.cx_error
            graph.add_edge(*key, cx_error=e.cx_error)
        if not nx.is_connected(graph):
            raise DeviceValidationError("coupling graph is disconnected")
        self.graph = nx.freeze(graph)
        self.edges: List[Edge] = sorted(self.cx_error)
        by_id = {q.id: q for q in spec.qubits}
        self.readout_error: Tuple[float, ...] = tuple(by_id[q].readout_error for q in range(self.n_qubits))
        self.sq_error: Tuple[float, ...] = tuple(by_id[q].sq_error for q in range(self.n_qubits))
        self.crosstalk: Dict[Tuple[Edge, Edge], float] = {(edge_key(*x.edge), edge_key(*x.other)): x.ratio for x in spec.crosstalk}
        self._partners: Dict[Edge, Dict[Edge, float]] = {}
        for (e, f), r in self.crosstalk.items():
            self._partners.setdefault(e, {})[f] = r
        self._distances = lru_cache(maxsize=DISTANCE_CACHE_SIZE)(self._compute_distances)

    @classmethod
    def uniform(
        cls,
        n_qubits: int,
        edges: Iterable[Edge],
        cx_error: float = 0.01,
        readout_error: float = 0.02,
        sq_error: float = 0.001,
        crosstalk: Optional[Mapping[Tuple[Edge, Edge], float]] = None,
    ) -> "DeviceModel":
        """Device with the same error on every edge and every qubit."""
        spec = DeviceSpec(
            n_qubits=n_qubits,
            edges=[EdgeRecord(a=a, b=b, cx_error=cx_error) for a, b in edges],
            qubits=[QubitRecord(id=q, readout_error=readout_error, sq_error=sq_error) for q in range(n_qubits)],
            crosstalk=[CrosstalkRecord(edge=e, other=f, ratio=r) for (e, f), r in (crosstalk or {}).items()],
        )
        return cls(spec)

    def has_edge(self, a: int, b: int) -> bool:
        return edge_key(a, b) in self.cx_error

    def neighbors(self, qubit: int) -> List[int]:
        return sorted(self.graph.neighbors(qubit))

    def degree(self, qubit: int) -> int:
        return self.graph.degree(qubit)

    def ratio(self, e: Edge, f: Edge) -> float:
        return self.crosstalk.get((edge_key(*e), edge_key(*f)), 1.0)

    def crosstalk_partners(self, e: Edge) -> Mapping[Edge, float]:
        return self._partners.get(edge_key(*e), {})

    def internal_edges(self, qubits: Iterable[int]) -> List[Edge]:
        region = set(qubits)
        return [e for e in self.edges if e[0] in region and e[1] in region]

    def subgraph(self, qubits: Iterable[int]) -> nx.Graph:
        return self.graph.subgraph(qubits)

    def distance_matrix(self, allowed: Optional[Iterable[int]] = None) -> np.ndarray:
        """Shortest-path edge counts inside ``allowed`` (all qubits when None).

        Rows and columns are indexed by physical qubit; pairs that are not
        connected inside the subset hold ``n_qubits + 1``.
        """
        key = None if allowed is None else frozenset(allowed)
        if key is not None and len(key) == self.n_qubits:
            key = None
        return self._distances(key)

    def _compute_distances(self, key: Optional[FrozenSet[int]]) -> np.ndarray:
        n = self.n_qubits
        matrix = np.full((n, n), n + 1, dtype=np.int64)
        np.fill_diagonal(matrix, 0)
        graph = self.graph if key is None else self.graph.subgraph(key)
        for source, lengths in nx.all_pairs_shortest_path_length(graph):
            for target, length in lengths.items():
                matrix[source, target] = length
        matrix.setflags(write=False)
        return matrix

    def to_json(self) -> str:
        return self.spec.model_dump_json(indent=2)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")


def load_device(path: Union[str, Path]) -> DeviceModel:
    """Read and validate a device JSON file."""
    try:
        spec = DeviceSpec.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise DeviceValidationError(f"{path}: invalid JSON: {exc}") from exc
    except ValidationError as exc:
        raise DeviceValidationError(f"{path}: {exc}") from exc
    model = DeviceModel(spec)
    logger.info("loaded device %s: %d qubits, %d edges, %d crosstalk entries", path, model.n_qubits, len(model.edges), len(model.crosstalk))
    return model


def distance_matrix(model: DeviceModel, allowed: Optional[Iterable[int]] = None) -> np.ndarray:
    return model.distance_matrix(allowed)


def conditional_cx_error(model: DeviceModel, edge: Edge, concurrent: Sequence[Edge] = (), aggregation: Literal["max", "product"] = "max") -> float:
    """CNOT error on ``edge`` while the ``concurrent`` edges run simultaneously."""
    key = edge_key(*edge)
    if key not in model.cx_error:
        raise DeviceValidationError(f"unknown edge {key}")
    ratios = [model.ratio(key, other) for other in concurrent if edge_key(*other) != key]
    if not ratios:
        factor = 1.0
    elif aggregation == "product":
        factor = float(np.prod(ratios))
    else:
        factor = max(ratios)
    return min(1.0, max(0.0, model.cx_error[key] * factor))


def crosstalk_candidate_pairs(edges: Sequence[Edge], graph: nx.Graph) -> List[Tuple[Edge, Edge]]:
    """Disjoint edge pairs joined by a coupling edge (one hop apart)."""
    pairs = []
    for e, f in combinations(sorted(edge_key(*x) for x in edges), 2):
        if set(e) & set(f):
            continue
        if any(graph.has_edge(u, v) for u in e for v in f):
            pairs.append((e, f))
    return pairs


def gen_calibration(model: DeviceModel, seed: int, ranges: Optional[CalibrationRanges] = None) -> DeviceModel:
    """Resample every error field uniformly; topology is kept as is."""
    ranges = ranges or CalibrationRanges()
    rng = substream(seed, "calibration")
    n = model.n_qubits
    readout = rng.uniform(*ranges.readout, size=n)
    sq = rng.uniform(*ranges.sq, size=n)
    cx = rng.uniform(*ranges.cx, size=len(model.edges))
    candidates = crosstalk_candidate_pairs(model.edges, model.graph)
    chosen = rng.random(len(candidates)) < ranges.crosstalk_fraction
    ratios = rng.uniform(*ranges.crosstalk_ratio, size=(len(candidates), 2))
    crosstalk = []
    for (e, f), pick, (r_ef, r_fe) in zip(candidates, chosen, ratios):
        if pick:
            crosstalk.append(CrosstalkRecord(edge=e, other=f, ratio=float(r_ef)))
            crosstalk.append(CrosstalkRecord(edge=f, other=e, ratio=float(r_fe)))
    spec = DeviceSpec(
        n_qubits=n,
        edges=[EdgeRecord(a=a, b=b, cx_error=float(err)) for (a, b), err in zip(model.edges, cx)],
        qubits=[QubitRecord(id=q, readout_error=float(readout[q]), sq_error=float(sq[q])) for q in range(n)],
        crosstalk=crosstalk,
    )
    return DeviceModel(spec)


def device_from_topology(spec: str, seed: Optional[int] = None, ranges: Optional[CalibrationRanges] = None) -> DeviceModel:
    """Build a device for a lattice/named topology, calibrated when ``seed`` is given."""
    n, edges = gen_lattice(spec)
    model = DeviceModel.uniform(n, edges)
    return model if seed is None else gen_calibration(model, seed, ranges)
