"""Network and instance data model, text I/O and random instance generation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable

import numpy as np

DEFAULT_PENALTY = 130.0
COST_MEAN = 40.0
COST_VARIANCE = 36.0

_ID_RE = re.compile(r"^[A-Za-z0-9_.:+\-]+$")


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    base_capacity: float
    expansion_cost: float


@dataclass(frozen=True)
class Commodity:
    id: str
    source: str
    sink: str


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    arcs: tuple[Arc, ...]
    incoming: dict[str, tuple[int, ...]] = field(init=False, compare=False, repr=False)
    outgoing: dict[str, tuple[int, ...]] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        if len(set(self.nodes)) != len(self.nodes):
            raise InstanceError("duplicate node id")
        known = set(self.nodes)
        seen = set()
        for arc in self.arcs:
            if arc.id in seen:
                raise InstanceError(f"duplicate arc id {arc.id!r}")
            seen.add(arc.id)
            for end in (arc.tail, arc.head):
                if end not in known:
                    raise InstanceError(f"unknown node {end!r} on arc {arc.id!r}")
            if arc.tail == arc.head:
                raise InstanceError(f"self-loop on arc {arc.id!r}")
            if not arc.base_capacity >= 0:
                raise InstanceError(f"negative capacity on arc {arc.id!r}")
            if not arc.expansion_cost >= 0:
                raise InstanceError(f"negative cost on arc {arc.id!r}")
        incoming, outgoing = build_adjacency(self.nodes, self.arcs)
        object.__setattr__(self, "incoming", incoming)
        object.__setattr__(self, "outgoing", outgoing)

    @property
    def arc_ids(self) -> list[str]:
        return [a.id for a in self.arcs]

    @property
    def costs(self) -> np.ndarray:
        return np.array([a.expansion_cost for a in self.arcs], dtype=float)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([a.base_capacity for a in self.arcs], dtype=float)

    def reachable(self, source: str) -> set[str]:
        seen = {source}
        stack = [source]
        while stack:
            v = stack.pop()
            for j in self.outgoing[v]:
                w = self.arcs[j].head
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen


def build_adjacency(nodes: Iterable[str], arcs: Iterable[Arc]):
    """Return (incoming, outgoing) arc index tuples per node."""
    incoming: dict[str, list[int]] = {v: [] for v in nodes}
    outgoing: dict[str, list[int]] = {v: [] for v in nodes}
    for j, arc in enumerate(arcs):
        outgoing[arc.tail].append(j)
        incoming[arc.head].append(j)
    return ({v: tuple(ix) for v, ix in incoming.items()},
            {v: tuple(ix) for v, ix in outgoing.items()})


@dataclass(frozen=True)
class Instance:
    network: Network
    commodities: tuple[Commodity, ...]
    penalty: float = DEFAULT_PENALTY

    def __post_init__(self):
        object.__setattr__(self, "commodities", tuple(self.commodities))
        if not self.commodities:
            raise InstanceError("at least one commodity is required")
        if not self.penalty > 0:
            raise InstanceError("penalty must be positive")
        known = set(self.network.nodes)
        ids = set()
        for com in self.commodities:
            if com.id in ids:
                raise InstanceError(f"duplicate commodity id {com.id!r}")
            ids.add(com.id)
            for end in (com.source, com.sink):
                if end not in known:
                    raise InstanceError(f"unknown node {end!r} in commodity {com.id!r}")
            if com.source == com.sink:
                raise InstanceError(f"commodity {com.id!r} has source == sink")

    @property
    def n_commodities(self) -> int:
        return len(self.commodities)

    def with_penalty(self, penalty: float) -> "Instance":
        return Instance(self.network, self.commodities, penalty)


# ---------------------------------------------------------------- text format

def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _number(tok: str, lineno: int, what: str) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise InstanceError(f"expected a number for {what}, got {tok!r}", lineno) from None
    if not np.isfinite(value):
        raise InstanceError(f"non-finite {what}", lineno)
    return value


def _ident(tok: str, lineno: int) -> str:
    if not _ID_RE.match(tok):
        raise InstanceError(f"invalid identifier {tok!r}", lineno)
    return tok


def parse_instance(text: str) -> Instance:
    """Parse the line-oriented instance format.

    Sections ``NODES n``, ``ARCS m``, ``COMMODITIES k`` are each followed by
    their item lines; ``PENALTY phi`` is a single line. Errors carry the
    offending line number.
    """
    nodes, arcs, commodities, penalty = _parse_sections(text, need_commodities=True)
    return Instance(Network(tuple(nodes), tuple(arcs)), tuple(commodities), penalty)


def parse_network(text: str) -> Network:
    """Parse a topology file: the instance format without commodities."""
    nodes, arcs, _, _ = _parse_sections(text, need_commodities=False)
    return Network(tuple(nodes), tuple(arcs))


def _parse_sections(text, need_commodities):
    lines = list(_tokens(text))
    pos = 0
    nodes: list[str] = []
    arcs: list[Arc] = []
    commodities: list[Commodity] = []
    penalty = None
    seen_sections = set()

    def take(count, lineno, section):
        nonlocal pos
        if pos + count > len(lines):
            raise InstanceError(f"{section}: expected {count} entries, file ended", lineno)
        block = lines[pos:pos + count]
        pos += count
        return block

    while pos < len(lines):
        lineno, toks = lines[pos]
        pos += 1
        key = toks[0].upper()
        if key in seen_sections:
            raise InstanceError(f"repeated section {key}", lineno)
        seen_sections.add(key)
        if key == "PENALTY":
            if len(toks) != 2:
                raise InstanceError("PENALTY takes one value", lineno)
            penalty = _number(toks[1], lineno, "penalty")
            continue
        if key not in ("NODES", "ARCS", "COMMODITIES"):
            raise InstanceError(f"unknown section {toks[0]!r}", lineno)
        if len(toks) != 2 or not toks[1].isdigit():
            raise InstanceError(f"{key} needs an item count", lineno)
        count = int(toks[1])
        block = take(count, lineno, key)
        if key == "NODES":
            if "ARCS" in seen_sections or "COMMODITIES" in seen_sections:
                raise InstanceError("NODES must precede ARCS and COMMODITIES", lineno)
            for ln, t in block:
                if len(t) != 1:
                    raise InstanceError("node line takes one identifier", ln)
                node = _ident(t[0], ln)
                if node in nodes:
                    raise InstanceError(f"duplicate node {node!r}", ln)
                nodes.append(node)
        elif key == "ARCS":
            known = set(nodes)
            for ln, t in block:
                if len(t) != 5:
                    raise InstanceError("arc line needs: id tail head capacity cost", ln)
                aid, tail, head = (_ident(x, ln) for x in t[:3])
                for end in (tail, head):
                    if end not in known:
                        raise InstanceError(f"unknown node {end!r}", ln)
                if any(a.id == aid for a in arcs):
                    raise InstanceError(f"duplicate arc id {aid!r}", ln)
                if tail == head:
                    raise InstanceError(f"self-loop on arc {aid!r}", ln)
                cap = _number(t[3], ln, "capacity")
                cost = _number(t[4], ln, "cost")
                if cap < 0:
                    raise InstanceError(f"negative capacity on arc {aid!r}", ln)
                if cost < 0:
                    raise InstanceError(f"negative cost on arc {aid!r}", ln)
                arcs.append(Arc(aid, tail, head, cap, cost))
        else:
            known = set(nodes)
            for ln, t in block:
                if len(t) != 3:
                    raise InstanceError("commodity line needs: id source sink", ln)
                cid, src, dst = (_ident(x, ln) for x in t)
                for end in (src, dst):
                    if end not in known:
                        raise InstanceError(f"unknown node {end!r}", ln)
                if src == dst:
                    raise InstanceError(f"commodity {cid!r} has source == sink", ln)
                if any(c.id == cid for c in commodities):
                    raise InstanceError(f"duplicate commodity id {cid!r}", ln)
                commodities.append(Commodity(cid, src, dst))

    required = ("NODES", "ARCS", "COMMODITIES") if need_commodities else ("NODES", "ARCS")
    for section in required:
        if section not in seen_sections:
            raise InstanceError(f"missing {section} section")
    if penalty is None:
        penalty = DEFAULT_PENALTY
    if penalty <= 0:
        raise InstanceError("penalty must be positive")
    return nodes, arcs, commodities, penalty


def write_instance(inst: Instance) -> str:
    net = inst.network
    out = [f"NODES {len(net.nodes)}"]
    out += list(net.nodes)
    out.append(f"ARCS {len(net.arcs)}")
    out += [f"{a.id} {a.tail} {a.head} {a.base_capacity!r} {a.expansion_cost!r}" for a in net.arcs]
    out.append(f"COMMODITIES {len(inst.commodities)}")
    out += [f"{c.id} {c.source} {c.sink}" for c in inst.commodities]
    out.append(f"PENALTY {inst.penalty!r}")
    return "\n".join(out) + "\n"


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return parse_instance(fh.read())


# ------------------------------------------------------------ SNDlib importer

_SND_SECTION = re.compile(r"^\s*(NODES|LINKS|DEMANDS|ADMISSIBLE_PATHS|META)\s*\(\s*$")


def parse_sndlib_native(text: str) -> Network:
    """Import the topology part of an SNDlib native file.

    Reads NODES and LINKS; every undirected link becomes two arcs ``<id>+``
    (as written) and ``<id>-`` (reversed). Pre-installed capacity becomes the
    base capacity, and the first module's cost per capacity unit becomes the
    expansion cost (0 when no module is listed). Demands are ignored.
    """
    nodes: list[str] = []
    arcs: list[Arc] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SND_SECTION.match(line)
        if m:
            section = m.group(1)
            continue
        if line == ")":
            section = None
            continue
        if section == "NODES":
            nodes.append(_ident(line.split()[0], lineno))
        elif section == "LINKS":
            lm = re.match(r"^(\S+)\s*\(\s*(\S+)\s+(\S+)\s*\)\s*(.*)$", line)
            if not lm:
                raise InstanceError("malformed link line", lineno)
            lid, a, b, rest = lm.groups()
            head_part, _, modules = rest.partition("(")
            nums = head_part.split()
            cap = _number(nums[0], lineno, "pre-installed capacity") if nums else 0.0
            mods = modules.replace(")", " ").split()
            cost = 0.0
            if len(mods) >= 2:
                mcap = _number(mods[0], lineno, "module capacity")
                mcost = _number(mods[1], lineno, "module cost")
                cost = mcost / mcap if mcap > 0 else 0.0
            arcs.append(Arc(f"{lid}+", a, b, cap, cost))
            arcs.append(Arc(f"{lid}-", b, a, cap, cost))
    try:
        return Network(tuple(nodes), tuple(arcs))
    except InstanceError as exc:
        raise InstanceError(f"SNDlib import: {exc}") from None


def nobel_us_topology() -> Network:
    """Bundled 14-node, 42-arc topology used for the desk-scale experiments."""
    text = resources.files("netplan.data").joinpath("nobel_us.txt").read_text(encoding="utf-8")
    return parse_network(text)


# ---------------------------------------------------------------- generation

def sample_costs(rng: np.random.Generator, n: int,
                 mean: float = COST_MEAN, variance: float = COST_VARIANCE) -> np.ndarray:
    """Draw n i.i.d. normal costs, redrawing any value <= 0."""
    sd = float(np.sqrt(variance))
    out = rng.normal(mean, sd, size=n)
    bad = out <= 0
    while bad.any():
        out[bad] = rng.normal(mean, sd, size=int(bad.sum()))
        bad = out <= 0
    return out


def generate_random_instance(topology: Network, k: int, rng_seed: int,
                             penalty: float = DEFAULT_PENALTY) -> Instance:
    """Random costs and commodity pairs on a fixed topology.

    Arc costs are Normal(40, 36); k distinct ordered (source, sink) pairs are
    drawn uniformly without replacement among pairs where the sink is
    reachable from the source. Base capacities are kept from ``topology``.
    """
    if len(topology.nodes) < 2:
        raise InstanceError("topology needs at least two nodes")
    if k < 1:
        raise InstanceError("k must be >= 1")
    pairs = [(s, t) for s in topology.nodes for t in sorted(topology.reachable(s), key=topology.nodes.index)
             if s != t]
    if k > len(pairs):
        raise InstanceError(f"k={k} exceeds the {len(pairs)} available ordered node pairs")
    rng = np.random.default_rng(rng_seed)
    costs = sample_costs(rng, len(topology.arcs))
    chosen = rng.choice(len(pairs), size=k, replace=False)
    arcs = tuple(Arc(a.id, a.tail, a.head, a.base_capacity, float(c))
                 for a, c in zip(topology.arcs, costs))
    commodities = tuple(Commodity(str(i + 1), *pairs[j]) for i, j in enumerate(chosen))
    return Instance(Network(topology.nodes, arcs), commodities, penalty)
