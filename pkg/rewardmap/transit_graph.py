"""
Transit Network Graph
Metro Data model plus the oracles every question and every reward is derived from
"""

import heapq
import json
from dataclasses import dataclass, field, fields
from types import MappingProxyType
from typing import Any, Dict, FrozenSet, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx

from rewardmap.errors import (
    DomainError,
    GenerationError,
    ParseError,
    UsageError,
    ValidationError,
)
from rewardmap.utils.run_log import get_logger
from rewardmap.utils.seeding import make_rng

logger = get_logger("transit_graph")

DIFFICULTIES = ("easy", "medium", "hard")


class Segment(NamedTuple):
    line: str
    from_stop: str
    to_stop: str


@dataclass(frozen=True)
class Route:
    """An ordered chain of rides; transfer_count = segments - 1"""

    segments: Tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValidationError("A route needs at least one segment")
        object.__setattr__(
            self, "segments", tuple(Segment(*segment) for segment in self.segments)
        )

    @property
    def transfer_count(self) -> int:
        return len(self.segments) - 1

    @property
    def origin(self) -> str:
        return self.segments[0].from_stop

    @property
    def destination(self) -> str:
        return self.segments[-1].to_stop

    @property
    def line_sequence(self) -> Tuple[str, ...]:
        return tuple(segment.line for segment in self.segments)

    def to_records(self) -> List[Dict[str, str]]:
        return [
            {"line": s.line, "from": s.from_stop, "to": s.to_stop}
            for s in self.segments
        ]

    @classmethod
    def from_records(cls, records: Sequence[Mapping[str, str]]) -> "Route":
        return cls(tuple(Segment(r["line"], r["from"], r["to"]) for r in records))


@dataclass(frozen=True)
class TransitNetwork:
    """
    Named lines as ordered stop sequences over a shared stop universe.

    Immutable after construction; the oracle indexes (stop -> lines, stop
    positions, the union graph and the line-expanded graph) are built once here.
    """

    network_id: str
    difficulty: str
    lines: Mapping[str, Tuple[str, ...]]
    _stop_lines: Dict[str, FrozenSet[str]] = field(
        init=False, repr=False, compare=False
    )
    _positions: Dict[str, Dict[str, int]] = field(init=False, repr=False, compare=False)
    _components: Dict[str, int] = field(init=False, repr=False, compare=False)
    _line_graph: Any = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lines = {name: tuple(stops) for name, stops in dict(self.lines).items()}
        object.__setattr__(self, "lines", MappingProxyType(lines))
        self._validate()

        stop_lines: Dict[str, set] = {}
        positions: Dict[str, Dict[str, int]] = {}
        for name, stops in lines.items():
            positions[name] = {stop: i for i, stop in enumerate(stops)}
            for stop in stops:
                stop_lines.setdefault(stop, set()).add(name)

        union_graph = nx.Graph()
        union_graph.add_nodes_from(stop_lines)
        line_graph = nx.Graph()
        for name, stops in lines.items():
            for a, b in zip(stops, stops[1:]):
                union_graph.add_edge(a, b)
                line_graph.add_edge((a, name), (b, name), kind="ride")
        for stop, names in stop_lines.items():
            ordered = sorted(names)
            for i, first in enumerate(ordered):
                for second in ordered[i + 1 :]:
                    line_graph.add_edge((stop, first), (stop, second), kind="transfer")

        components = {}
        for component_id, members in enumerate(nx.connected_components(union_graph)):
            for stop in members:
                components[stop] = component_id

        object.__setattr__(
            self, "_stop_lines", {s: frozenset(n) for s, n in stop_lines.items()}
        )
        object.__setattr__(self, "_positions", positions)
        object.__setattr__(self, "_components", components)
        object.__setattr__(self, "_line_graph", line_graph)

    def __hash__(self):
        # Consistent with equality, which ignores line order
        return hash((self.network_id, self.difficulty, frozenset(self.lines.items())))

    def _validate(self):
        if not isinstance(self.network_id, str) or not self.network_id:
            raise ValidationError("network_id must be a non-empty string")
        if self.difficulty not in DIFFICULTIES:
            raise ValidationError(
                f"Network {self.network_id}: difficulty must be one of "
                f"{', '.join(DIFFICULTIES)}, got '{self.difficulty}'"
            )
        if not self.lines:
            raise ValidationError(f"Network {self.network_id} has no lines")
        for name, stops in self.lines.items():
            if not isinstance(name, str) or not name:
                raise ValidationError(
                    f"Network {self.network_id}: line names must be non-empty strings"
                )
            if len(stops) < 2:
                raise ValidationError(
                    f"Line '{name}' has {len(stops)} stop(s); at least 2 are required"
                )
            seen = set()
            for stop in stops:
                if not isinstance(stop, str) or not stop:
                    raise ValidationError(
                        f"Line '{name}' contains an empty or non-string stop name"
                    )
                if stop in seen:
                    raise ValidationError(f"Stop '{stop}' repeats on line '{name}'")
                seen.add(stop)

    @property
    def line_names(self) -> Tuple[str, ...]:
        return tuple(self.lines)

    @property
    def stops(self) -> Tuple[str, ...]:
        """All stops in order of first appearance"""
        return tuple(self._stop_lines)

    @property
    def line_graph(self) -> nx.Graph:
        return self._line_graph

    def has_stop(self, stop: str) -> bool:
        return stop in self._stop_lines

    def has_line(self, line: str) -> bool:
        return line in self.lines

    def position(self, line: str, stop: str) -> Optional[int]:
        return self._positions.get(line, {}).get(stop)

    def is_hub(self, stop: str) -> bool:
        return len(self._stop_lines.get(stop, ())) > 1

    def hub_fraction(self) -> float:
        """Share of stops served by two or more lines"""
        return sum(1 for s in self._stop_lines if self.is_hub(s)) / len(self._stop_lines)


def _require_stop(net: TransitNetwork, stop: str):
    if not net.has_stop(stop):
        raise DomainError(f"Unknown stop '{stop}' in network {net.network_id}")


def _require_line(net: TransitNetwork, line: str):
    if not net.has_line(line):
        raise DomainError(f"Unknown line '{line}' in network {net.network_id}")


# --- Oracles ---


def intermediate_stop_count(net: TransitNetwork, line: str, a: str, b: str) -> int:
    """Number of stops strictly between a and b along `line`"""
    _require_line(net, line)
    pos_a = net.position(line, a)
    pos_b = net.position(line, b)
    if pos_a is None or pos_b is None:
        missing = a if pos_a is None else b
        raise DomainError(f"Stop '{missing}' is not on line '{line}'")
    if a == b:
        raise DomainError(f"Intermediate stops need two distinct stops, got '{a}' twice")
    return abs(pos_a - pos_b) - 1


def lines_through(net: TransitNetwork, s: str) -> FrozenSet[str]:
    _require_stop(net, s)
    return net._stop_lines[s]


def share_line(net: TransitNetwork, a: str, b: str) -> bool:
    return bool(lines_through(net, a) & lines_through(net, b))


def connected(net: TransitNetwork, a: str, b: str) -> bool:
    _require_stop(net, a)
    _require_stop(net, b)
    return net._components[a] == net._components[b]


def connected_pairs(net: TransitNetwork) -> List[Tuple[str, str]]:
    """Ordered pairs of distinct stops that some route joins"""
    stops = net.stops
    return [
        (a, b)
        for a in stops
        for b in stops
        if a != b and net._components[a] == net._components[b]
    ]


def min_transfer_route(net: TransitNetwork, a: str, b: str) -> Optional[Route]:
    """
    Route from a to b with the fewest transfers.

    Searches the line-expanded graph (node = (stop, line)) with the cost
    (transfers, stops ridden, line-name sequence), compared lexicographically,
    so ties are broken by fewer stops and then by line names.

    Returns:
        The route, or None when a and b lie in different components
    """
    _require_stop(net, a)
    _require_stop(net, b)
    if a == b:
        raise DomainError(f"Origin and destination are the same stop '{a}'")
    if not connected(net, a, b):
        return None

    graph = net.line_graph
    best: Dict[Tuple[str, str], Tuple] = {}
    parent: Dict[Tuple[str, str], Optional[Tuple[str, str]]] = {}
    heap = []
    for line in sorted(lines_through(net, a)):
        node = (a, line)
        cost = (0, 0, (line,))
        best[node] = cost
        parent[node] = None
        heapq.heappush(heap, (*cost, node))

    goal = None
    while heap:
        transfers, ridden, sequence, node = heapq.heappop(heap)
        if (transfers, ridden, sequence) != best[node]:
            continue  # stale entry
        if node[0] == b:
            goal = node
            break
        for neighbor in sorted(graph.neighbors(node)):
            if neighbor[1] == node[1]:
                cost = (transfers, ridden + 1, sequence)
            else:
                cost = (transfers + 1, ridden, sequence + (neighbor[1],))
            if neighbor not in best or cost < best[neighbor]:
                best[neighbor] = cost
                parent[neighbor] = node
                heapq.heappush(heap, (*cost, neighbor))

    path = []
    while goal is not None:
        path.append(goal)
        goal = parent[goal]
    path.reverse()

    segments = []
    start = path[0]
    for previous, current in zip(path, path[1:]):
        if current[1] != previous[1]:
            if previous[0] != start[0]:
                segments.append(Segment(start[1], start[0], previous[0]))
            start = current
    segments.append(Segment(start[1], start[0], path[-1][0]))
    return Route(tuple(segments))


def validate_route(net: TransitNetwork, segments: Sequence[Sequence[str]]) -> List[str]:
    """
    Check a candidate route against the network.

    Independent of the route search: only membership, ride direction and
    chaining are checked.

    Returns:
        List of problems; empty when the route is valid
    """
    problems = []
    if not segments:
        return ["route has no segments"]

    for i, (line, from_stop, to_stop) in enumerate(segments):
        if not net.has_line(line):
            problems.append(f"segment {i}: unknown line '{line}'")
            continue
        if net.position(line, from_stop) is None:
            problems.append(f"segment {i}: '{from_stop}' is not on line '{line}'")
        if net.position(line, to_stop) is None:
            problems.append(f"segment {i}: '{to_stop}' is not on line '{line}'")
        if from_stop == to_stop:
            problems.append(f"segment {i}: departs and arrives at '{from_stop}'")

    for i in range(len(segments) - 1):
        if segments[i][2] != segments[i + 1][1]:
            problems.append(
                f"segment {i} ends at '{segments[i][2]}' but segment {i + 1} "
                f"departs from '{segments[i + 1][1]}'"
            )
    return problems


# --- Metro Data files ---


def _reject_duplicate_keys(pairs):
    result = {}
    for key, value in pairs:
        if key in result:
            raise ValidationError(f"Duplicate name '{key}' in Metro Data document")
        result[key] = value
    return result


def load_network(source: str) -> TransitNetwork:
    """
    Parse and validate a Metro Data JSON document.

    Raises:
        ParseError: malformed JSON or wrongly typed fields (with location)
        ValidationError: network invariants violated (names the line/stop)
    """
    try:
        document = json.loads(source, object_pairs_hook=_reject_duplicate_keys)
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed Metro Data: {e.msg}", line=e.lineno, column=e.colno)

    if not isinstance(document, dict):
        raise ParseError("Metro Data document must be a JSON object")
    for key in ("network_id", "difficulty", "lines"):
        if key not in document:
            raise ParseError("Missing required field", field=key)
    for key in ("network_id", "difficulty"):
        if not isinstance(document[key], str):
            raise ParseError("Expected a string", field=key)
    if not isinstance(document["lines"], dict):
        raise ParseError("Expected an object of line name -> stops", field="lines")

    for name, stops in document["lines"].items():
        if not isinstance(stops, list):
            raise ParseError("Expected a list of stop names", field=f"lines.{name}")
        for i, stop in enumerate(stops):
            if not isinstance(stop, str):
                raise ParseError("Expected a stop name string", field=f"lines.{name}[{i}]")

    return TransitNetwork(
        network_id=document["network_id"],
        difficulty=document["difficulty"],
        lines=document["lines"],
    )


def save_network(net: TransitNetwork) -> str:
    document = {
        "network_id": net.network_id,
        "difficulty": net.difficulty,
        "lines": {name: list(stops) for name, stops in net.lines.items()},
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"


def read_network(path: str) -> TransitNetwork:
    with open(path, "r", encoding="utf-8") as f:
        return load_network(f.read())


def write_network(net: TransitNetwork, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(save_network(net))


# --- Synthetic networks ---


@dataclass(frozen=True)
class NetworkSpec:
    line_count: int = 6
    min_stops: int = 6
    max_stops: int = 12
    transfer_density: float = 0.3
    density_tolerance: float = 0.1
    easy_max_lines: int = 3
    medium_max_lines: int = 7

    def __post_init__(self):
        if self.line_count < 1:
            raise UsageError(f"line_count must be >= 1, got {self.line_count}")
        if self.min_stops < 2:
            raise UsageError(f"min_stops must be >= 2, got {self.min_stops}")
        if self.max_stops < self.min_stops:
            raise UsageError(
                f"max_stops ({self.max_stops}) is below min_stops ({self.min_stops})"
            )
        if not 0.0 <= self.transfer_density <= 1.0:
            raise UsageError(
                f"transfer_density must lie in [0, 1], got {self.transfer_density}"
            )
        if self.density_tolerance < 0:
            raise UsageError("density_tolerance must be >= 0")
        if not 1 <= self.easy_max_lines < self.medium_max_lines:
            raise UsageError("Difficulty thresholds must satisfy 1 <= easy < medium")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "NetworkSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise UsageError(f"Unknown network settings: {', '.join(unknown)}")
        return cls(**dict(mapping))

    def difficulty_for(self, line_count: int) -> str:
        if line_count <= self.easy_max_lines:
            return "easy"
        if line_count <= self.medium_max_lines:
            return "medium"
        return "hard"


def generate_synthetic_network(
    seed: int, spec: NetworkSpec, network_id: Optional[str] = None
) -> TransitNetwork:
    """
    Deterministic synthetic network for a seed.

    Every line after the first reuses some single-line stops of earlier lines
    as transfer hubs (at least one per line while hubs remain, which keeps
    the network connected); the number of hubs is chosen so the share of
    multi-line stops matches spec.transfer_density.

    Raises:
        GenerationError: the requested density is not reachable within tolerance
    """
    rng = make_rng("network", seed)
    network_id = network_id or f"synth-{seed}"
    n = spec.line_count
    lengths = [
        int(x) for x in rng.integers(spec.min_stops, spec.max_stops + 1, size=n)
    ]
    total_slots = sum(lengths)
    density = spec.transfer_density
    hub_total = int(round(density * total_slots / (1 + density))) if n > 1 else 0

    allotment = [0] * n
    remaining = hub_total
    for i in range(1, n):
        if remaining == 0:
            break
        allotment[i] = 1
        remaining -= 1
    while remaining > 0:
        open_lines = [i for i in range(1, n) if allotment[i] < lengths[i]]
        if not open_lines:
            break
        allotment[open_lines[int(rng.integers(len(open_lines)))]] += 1
        remaining -= 1

    lines: Dict[str, List[str]] = {}
    single_line_stops: List[str] = []
    fresh = 0
    hubs = 0
    for i, length in enumerate(lengths):
        reuse = min(allotment[i], len(single_line_stops), length)
        slots = [None] * length
        if reuse:
            positions = rng.choice(length, size=reuse, replace=False)
            chosen = rng.choice(len(single_line_stops), size=reuse, replace=False)
            reused = [single_line_stops[int(c)] for c in chosen]
            for position, stop in zip(positions, reused):
                slots[int(position)] = stop
            single_line_stops = [s for s in single_line_stops if s not in reused]
            hubs += reuse
        for j in range(length):
            if slots[j] is None:
                fresh += 1
                slots[j] = f"S{fresh:03d}"
                single_line_stops.append(slots[j])
        lines[f"L{i + 1}"] = slots

    achieved = hubs / (total_slots - hubs)
    if abs(achieved - density) > spec.density_tolerance:
        raise GenerationError(
            f"Transfer density {density} is unattainable for {n} line(s) with "
            f"{spec.min_stops}-{spec.max_stops} stops (achieved {achieved:.3f})"
        )

    logger.info(
        f"Generated {network_id}: {n} lines, {total_slots - hubs} stops, "
        f"hub fraction {achieved:.3f}"
    )
    return TransitNetwork(
        network_id=network_id, difficulty=spec.difficulty_for(n), lines=lines
    )
