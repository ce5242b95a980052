"""Community-detection-based partitioning and degree-aware allocation.

The hierarchy tree is built once per calibration by greedy agglomeration of
physical-qubit communities. Partitioning walks the tree to pick one region
per program; allocation places program qubits inside a region.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from nisqmap.config import DEFAULT_OMEGA, CalibrationRanges
from nisqmap.device import DeviceModel, Edge, conditional_cx_error, edge_key, gen_calibration
from nisqmap.errors import DeviceValidationError, PartitionError
from nisqmap.profiler import Profile

logger = logging.getLogger(__name__)

EXACT_PLACEMENT_LIMIT = 8
CROSSTALK_PRONE_RATIO = 2.0


# ============================================================================
# Modularity and merge reward
# ============================================================================


def modularity(graph: nx.Graph, partition: Sequence[Iterable[int]]) -> float:
    """Q = sum over groups of (within-edge fraction - endpoint fraction squared)."""
    if graph.number_of_edges() == 0:
        raise ValueError("modularity is undefined for a graph without edges")
    return nx.community.modularity(graph, [set(group) for group in partition], weight=None)


class MergeTerms(NamedTuple):
    delta_q: float
    e: float
    v: float
    x: float
    f: float


def _crosstalk_reliability(model: DeviceModel, inside: FrozenSet[int], other: FrozenSet[int]) -> List[float]:
    values = []
    for e in model.internal_edges(inside):
        partners = [f for f in model.crosstalk_partners(e) if f[0] in other and f[1] in other]
        if partners:
            values.append(1.0 - conditional_cx_error(model, e, partners))
    return values


def merge_terms(model: DeviceModel, a: FrozenSet[int], b: FrozenSet[int], omega: float) -> MergeTerms:
    between = [e for e in model.edges if (e[0] in a and e[1] in b) or (e[0] in b and e[1] in a)]
    if not between:
        raise ValueError("communities share no coupling edge and cannot be merged")
    m = len(model.edges)
    a_frac = sum(model.degree(q) for q in a) / (2 * m)
    b_frac = sum(model.degree(q) for q in b) / (2 * m)
    delta_q = len(between) / m - 2 * a_frac * b_frac
    e = float(np.mean([1.0 - model.cx_error[edge] for edge in between]))
    v = float(np.mean([1.0 - model.readout_error[q] for q in sorted(a | b)]))
    crosstalk = _crosstalk_reliability(model, a, b) + _crosstalk_reliability(model, b, a)
    x = float(np.mean(crosstalk)) if crosstalk else 1.0
    return MergeTerms(delta_q, e, v, x, delta_q + omega * e * v * x)


def reward_F(model: DeviceModel, a: Iterable[int], b: Iterable[int], omega: float = DEFAULT_OMEGA) -> float:
    """Benefit of merging communities ``a`` and ``b``."""
    return merge_terms(model, frozenset(a), frozenset(b), omega).f


# ============================================================================
# Hierarchy tree
# ============================================================================


@dataclass(frozen=True)
class TreeNode:
    id: int
    qubits: FrozenSet[int]
    left: Optional[int] = None
    right: Optional[int] = None
    parent: Optional[int] = None
    merge_step: int = 0
    reward: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)


@dataclass
class HierarchyTree:
    nodes: Dict[int, TreeNode]
    root: int
    omega: float

    @property
    def leaves(self) -> List[int]:
        return sorted(n for n, node in self.nodes.items() if node.is_leaf)

    @property
    def internal_nodes(self) -> List[TreeNode]:
        return [self.nodes[n] for n in sorted(self.nodes) if not self.nodes[n].is_leaf]

    def sibling(self, node_id: int) -> Optional[int]:
        parent = self.nodes[node_id].parent
        if parent is None:
            return None
        p = self.nodes[parent]
        return p.right if p.left == node_id else p.left

    def ancestors(self, node_id: int) -> List[int]:
        chain = []
        parent = self.nodes[node_id].parent
        while parent is not None:
            chain.append(parent)
            parent = self.nodes[parent].parent
        return chain

    def max_redundant_qubits(self, node_id: int) -> int:
        node = self.nodes[node_id]
        if node.is_leaf:
            return 0
        return node.n_qubits - (1 + max(self.nodes[node.left].n_qubits, self.nodes[node.right].n_qubits))

    def mean_redundant_qubits(self) -> float:
        internal = self.internal_nodes
        return float(np.mean([self.max_redundant_qubits(n.id) for n in internal])) if internal else 0.0

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "root": self.root,
            "nodes": [
                {
                    "id": node.id,
                    "qubits": sorted(node.qubits),
                    "children": [] if node.is_leaf else [node.left, node.right],
                    "merge_step": node.merge_step,
                    "F": node.reward,
                }
                for node in (self.nodes[n] for n in sorted(self.nodes))
            ],
        }


def build_hierarchy_tree(model: DeviceModel, omega: float = DEFAULT_OMEGA) -> HierarchyTree:
    """Greedily merge the connected community pair with the largest F."""
    if not nx.is_connected(model.graph):
        raise DeviceValidationError("hierarchy tree needs a connected device")
    n = model.n_qubits
    nodes: Dict[int, dict] = {q: {"id": q, "qubits": frozenset([q])} for q in range(n)}
    owner = list(range(n))
    next_id = n
    for step in range(1, n):
        pairs = sorted({tuple(sorted((owner[u], owner[v]))) for u, v in model.edges if owner[u] != owner[v]})
        scored = []
        for ca, cb in pairs:
            qa, qb = nodes[ca]["qubits"], nodes[cb]["qubits"]
            f = reward_F(model, qa, qb, omega)
            lows = sorted((min(qa), min(qb)))
            scored.append((-round(f, 12), lows[0], lows[1], ca, cb, f))
        _, _, _, ca, cb, f = min(scored)
        left, right = sorted((ca, cb), key=lambda c: min(nodes[c]["qubits"]))
        merged = nodes[left]["qubits"] | nodes[right]["qubits"]
        nodes[next_id] = {"id": next_id, "qubits": merged, "left": left, "right": right, "merge_step": step, "reward": f}
        nodes[left]["parent"] = next_id
        nodes[right]["parent"] = next_id
        for q in merged:
            owner[q] = next_id
        logger.debug("merge %d: %s + %s (F=%.6f)", step, sorted(nodes[left]["qubits"]), sorted(nodes[right]["qubits"]), f)
        next_id += 1
    root = next_id - 1 if n > 1 else 0
    return HierarchyTree({k: TreeNode(**v) for k, v in nodes.items()}, root, omega)


# ============================================================================
# Candidate scoring
# ============================================================================


class CandidateTuple(NamedTuple):
    avg_shortest_path: float
    n_qubits: int
    avg_error: float
    n_crosstalk_prone: int


def _coupled_pairs(profile: Profile) -> np.ndarray:
    return np.argwhere(np.triu(profile.coupling > 0, 1))


def candidate_tuple(region: Iterable[int], profile: Profile, model: DeviceModel) -> CandidateTuple:
    region = sorted(region)
    dist = model.distance_matrix(region)[np.ix_(region, region)]
    pairs = _coupled_pairs(profile)
    if len(pairs) == 0:
        spread = 0.0
    elif len(region) <= EXACT_PLACEMENT_LIMIT:
        involved = sorted(set(pairs.ravel().tolist()))
        local = {q: i for i, q in enumerate(involved)}
        rows = [local[a] for a, _ in pairs]
        cols = [local[b] for _, b in pairs]
        placements = np.array(list(permutations(range(len(region)), len(involved))), dtype=np.int64)
        spread = float(dist[placements[:, rows], placements[:, cols]].mean(axis=1).min())
    else:
        upper = np.triu_indices(len(region), 1)
        spread = float(dist[upper].mean())
    internal = model.internal_edges(region)
    errors = [model.readout_error[q] for q in region] + [model.cx_error[e] for e in internal]
    inside = set(internal)
    prone = {frozenset((e, f)) for (e, f), r in model.crosstalk.items() if r > CROSSTALK_PRONE_RATIO and e in inside and f in inside}
    return CandidateTuple(spread, len(region), float(np.mean(errors)), len(prone))


# ============================================================================
# Allocation
# ============================================================================


@dataclass(frozen=True)
class Layout:
    """Program qubit -> physical qubit for one program."""

    mapping: Dict[int, int]
    fallback: bool = False

    def __getitem__(self, qubit: int) -> int:
        return self.mapping[qubit]

    def __len__(self) -> int:
        return len(self.mapping)

    @property
    def physical(self) -> FrozenSet[int]:
        return frozenset(self.mapping.values())


def _pending_key(profile: Profile):
    def key(q: int):
        run = profile.first_run(q)
        if run is None:
            return (math.inf, 0, q)
        return (run[0], -run[1], q)

    return key


def _reliability_weight(u: int, v: int, data: dict) -> float:
    return -math.log1p(-data["cx_error"])


def allocate(profile: Profile, region: Iterable[int], model: DeviceModel) -> Layout:
    """Seed the most constrained program qubit, then grow along reliable links."""
    region = sorted(region)
    n = profile.n_qubits
    if n > len(region):
        raise PartitionError(f"region of {len(region)} qubits cannot host {n} program qubits")
    if n == 0:
        return Layout({})
    sub = model.subgraph(region)
    degree = {p: sub.degree(p) for p in region}

    def mean_error(p: int) -> float:
        errs = [model.cx_error[edge_key(p, x)] for x in sub.neighbors(p)]
        return float(np.mean(errs)) if errs else 0.0

    order = sorted(range(n), key=_pending_key(profile))
    first = order[0]
    eligible = [p for p in region if degree[p] >= profile.qubit_degrees[first]]
    if eligible:
        seed = min(eligible, key=lambda p: (mean_error(p), p))
    else:
        seed = min(region, key=lambda p: (1.0 / (degree[p] * (1.0 - mean_error(p))) if degree[p] else math.inf, p))
    mapping = {first: seed}
    used = {seed}
    fallback = False
    cost = dict(nx.all_pairs_dijkstra_path_length(sub, weight=_reliability_weight))
    full = model.distance_matrix()
    for q in order[1:]:
        frontier = sorted({x for p in used for x in sub.neighbors(p)} - used)
        if not frontier:
            free = [p for p in region if p not in used]
            frontier = [min(free, key=lambda p: (min(full[p, u] for u in used), p))]
            fallback = True
            logger.warning("allocation fell back to non-adjacent qubit %d for program qubit %d", frontier[0], q)
        partners = [(mapping[j], int(profile.coupling[q, j])) for j in mapping if profile.coupling[q, j] > 0]

        def key(p: int):
            path_cost = sum(w * cost[p].get(pj, math.inf) for pj, w in partners)
            return (path_cost, -degree[p] if partners else degree[p], mean_error(p), p)

        best = min(frontier, key=key)
        mapping[q] = best
        used.add(best)
    return Layout(dict(sorted(mapping.items())), fallback)


# ============================================================================
# Partition
# ============================================================================


class PartitionRequest(NamedTuple):
    n_qubits: int
    n_cnots: int
    profile: Profile

    @property
    def density(self) -> float:
        return self.n_cnots / self.n_qubits if self.n_qubits else 0.0


@dataclass
class PartitionResult:
    regions: List[FrozenSet[int]] = field(default_factory=list)
    order: List[int] = field(default_factory=list)
    layouts: List[Layout] = field(default_factory=list)
    redundant: List[FrozenSet[int]] = field(default_factory=list)
    nodes: List[Optional[int]] = field(default_factory=list)
    reverted: bool = False
    failed_program: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "reverted": self.reverted,
            "failed_program": self.failed_program,
            "order": self.order,
            "regions": [sorted(r) for r in self.regions],
            "redundant": [sorted(r) for r in self.redundant],
            "layouts": [{str(k): v for k, v in lay.mapping.items()} for lay in self.layouts],
            "fallback": [lay.fallback for lay in self.layouts],
        }


class _TreeCursor:
    """Claim bookkeeping over an immutable hierarchy tree."""

    def __init__(self, tree: HierarchyTree, model: DeviceModel):
        self.tree = tree
        self.model = model
        self.claimed: Set[int] = set()
        self.hidden: Dict[int, Set[int]] = {}
        self.cut: Set[int] = set()

    def parent(self, node_id: int) -> Optional[int]:
        return None if node_id in self.cut else self.tree.nodes[node_id].parent

    def available(self, node_id: int) -> FrozenSet[int]:
        return self.tree.nodes[node_id].qubits - self.claimed - self.hidden.get(node_id, set())

    def candidates(self, need: int) -> Dict[FrozenSet[int], int]:
        found: Dict[FrozenSet[int], int] = {}
        for leaf in self.tree.leaves:
            if leaf in self.claimed:
                continue
            node: Optional[int] = leaf
            while node is not None:
                avail = self.available(node)
                if leaf in avail:
                    component = frozenset(nx.node_connected_component(self.model.subgraph(avail), leaf))
                    if len(component) >= need:
                        found.setdefault(component, node)
                        break
                node = self.parent(node)
        return found

    def claim(self, qubits: FrozenSet[int], node_id: int) -> None:
        self.claimed |= qubits
        sibling = self.tree.sibling(node_id) if node_id not in self.cut else None
        if sibling is None:
            return
        rest = self.available(sibling)
        if not rest:
            return
        outside = {x for q in rest for x in self.model.graph.neighbors(q)} - rest - self.claimed
        if outside:
            return
        logger.debug("sibling node %d became isolated; detaching %s from its ancestors", sibling, sorted(rest))
        for ancestor in self.tree.ancestors(sibling):
            self.hidden.setdefault(ancestor, set()).update(rest)
        self.cut.add(sibling)


def partition(tree: HierarchyTree, programs: Sequence[PartitionRequest], model: DeviceModel, search_single: bool = False) -> PartitionResult:
    """Assign one region and layout per program.

    A failed candidate search returns a result with ``reverted`` set instead
    of raising, signalling the caller to run the programs separately.
    """
    total = sum(p.n_qubits for p in programs)
    if total > model.n_qubits:
        raise PartitionError(f"programs need {total} qubits, device has {model.n_qubits}")
    count = len(programs)
    result = PartitionResult(
        regions=[frozenset()] * count,
        layouts=[Layout({})] * count,
        redundant=[frozenset()] * count,
        nodes=[None] * count,
    )
    if count == 1 and not search_single:
        root = tree.nodes[tree.root].qubits
        layout = allocate(programs[0].profile, root, model)
        result.order = [0]
        result.regions[0] = root
        result.layouts[0] = layout
        result.redundant[0] = root - layout.physical
        result.nodes[0] = tree.root
        return result
    result.order = sorted(range(count), key=lambda i: -programs[i].density)
    cursor = _TreeCursor(tree, model)
    for i in result.order:
        request = programs[i]
        found = cursor.candidates(request.n_qubits)
        if not found:
            logger.info("no candidate region for program %d; reverting to separate execution", i)
            result.reverted = True
            result.failed_program = i
            return result
        region = min(found, key=lambda r: (candidate_tuple(r, request.profile, model), sorted(r)))
        layout = allocate(request.profile, region, model)
        image = layout.physical
        assigned = region
        if image != region and image and nx.is_connected(model.subgraph(image)):
            assigned = image
        cursor.claim(assigned, found[region])
        result.regions[i] = assigned
        result.layouts[i] = layout
        result.redundant[i] = region - image
        result.nodes[i] = found[region]
    return result


# ============================================================================
# Baseline layouts and redundancy study
# ============================================================================


def _random_region(model: DeviceModel, taken: Set[int], size: int, rng: np.random.Generator, attempts: int) -> List[int]:
    free = sorted(set(range(model.n_qubits)) - taken)
    for _ in range(attempts if size and free else 0):
        region = [int(rng.choice(free))]
        while len(region) < size:
            frontier = sorted({x for p in region for x in model.graph.neighbors(p)} - taken - set(region))
            if not frontier:
                break
            region.append(int(rng.choice(frontier)))
        if len(region) == size:
            return region
    if size == 0:
        return []
    raise PartitionError(f"could not place a random connected region of {size} qubits")


def random_layouts(sizes: Sequence[int], model: DeviceModel, rng: np.random.Generator, attempts: int = 100) -> List[Layout]:
    """Random disjoint connected placements, one per program size."""
    taken: Set[int] = set()
    layouts = []
    for size in sizes:
        region = _random_region(model, taken, size, rng, attempts)
        physical = [region[k] for k in rng.permutation(size)]
        taken.update(region)
        layouts.append(Layout({q: p for q, p in enumerate(physical)}))
    return layouts


def redundancy_sweep(
    n_qubits: int,
    edges: Sequence[Edge],
    omegas: Sequence[float],
    n_calibrations: int,
    seed: int = 0,
    ranges: Optional[CalibrationRanges] = None,
) -> pd.DataFrame:
    """Mean maximum-redundant-qubit statistic per calibration draw and omega."""
    base = DeviceModel.uniform(n_qubits, edges)
    rows = []
    for c in range(n_calibrations):
        model = gen_calibration(base, seed + c, ranges)
        for omega in omegas:
            tree = build_hierarchy_tree(model, omega)
            rows.append({"calibration": c, "omega": omega, "mean_redundant": tree.mean_redundant_qubits()})
    return pd.DataFrame(rows, columns=["calibration", "omega", "mean_redundant"])
