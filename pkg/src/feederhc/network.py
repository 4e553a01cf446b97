"""Radial multi-feeder network model: domain types, topology checks, and
synthetic feeder generation.

Networks are immutable after construction. Switching is expressed through
Configuration objects (explicit open/close sets); applying a configuration
yields an EnergizedView, a read-only derivation that also carries the
per-phase arrays consumed by the power-flow sweeps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

PHASE_ORDER = "ABC"


class NetworkError(Exception):
    pass


class UnknownSwitchError(NetworkError):
    pass


class NonRadialError(NetworkError):
    def __init__(self, diagnostics):
        super().__init__("configuration is not radial: " + "; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


class InvalidFeederSpecError(NetworkError):
    pass


def _canon_phases(phases: str) -> str:
    chars = set(phases.upper())
    if not chars or not chars <= set(PHASE_ORDER):
        raise NetworkError(f"invalid phase set {phases!r}")
    return "".join(p for p in PHASE_ORDER if p in chars)


@dataclass(frozen=True)
class Node:
    id: str
    phases: str                   # subset of "ABC"
    distance_from_source: float   # miles
    nominal_voltage: float        # volts, line-to-ground

    def __post_init__(self):
        object.__setattr__(self, "phases", _canon_phases(self.phases))
        if self.distance_from_source < 0:
            raise NetworkError(f"node {self.id}: negative distance")
        if self.nominal_voltage <= 0:
            raise NetworkError(f"node {self.id}: nominal voltage must be positive")


@dataclass(frozen=True)
class Section:
    id: str
    from_node: str
    to_node: str
    phases: str
    impedance: complex            # series R+jX, ohms per phase
    length: float                 # miles
    thermal_rating: float         # amperes per phase

    def __post_init__(self):
        object.__setattr__(self, "phases", _canon_phases(self.phases))
        if self.thermal_rating <= 0:
            raise NetworkError(f"section {self.id}: thermal rating must be positive")
        if self.length < 0:
            raise NetworkError(f"section {self.id}: negative length")

    @property
    def n_phases(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class Switch:
    id: str
    section_id: str
    scada_controlled: bool = False
    normally_open: bool = False
    switching_block_boundary: bool = False


@dataclass(frozen=True)
class SourceBus:
    node_id: str
    voltage_setpoint: float       # per unit
    feeder_id: str
    head_section_id: str

    def __post_init__(self):
        if not 0.9 <= self.voltage_setpoint <= 1.1:
            raise NetworkError(
                f"source at {self.node_id}: setpoint {self.voltage_setpoint} outside [0.9, 1.1] pu"
            )


@dataclass(frozen=True)
class LoadPoint:
    node_id: str
    peak_kw: float
    power_factor: float
    profile_id: str
    customer_count: int

    def __post_init__(self):
        if self.peak_kw < 0:
            raise NetworkError(f"load at {self.node_id}: negative peak kW")
        if not 0 < self.power_factor <= 1:
            raise NetworkError(f"load at {self.node_id}: power factor outside (0, 1]")
        if self.customer_count < 0:
            raise NetworkError(f"load at {self.node_id}: negative customer count")


@dataclass(frozen=True)
class Configuration:
    id: str
    open_switches: frozenset = frozenset()
    closed_switches: frozenset = frozenset()
    probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "open_switches", frozenset(self.open_switches))
        object.__setattr__(self, "closed_switches", frozenset(self.closed_switches))
        both = self.open_switches & self.closed_switches
        if both:
            raise NetworkError(f"configuration {self.id}: switches both open and closed: {sorted(both)}")
        if not 0 <= self.probability <= 1:
            raise NetworkError(f"configuration {self.id}: probability outside [0, 1]")


@dataclass
class Network:
    nodes: list
    sections: list
    switches: list
    sources: list
    loads: list
    feeder_ids: list
    configurations: list = field(default_factory=list)

    def __post_init__(self):
        self.node_by_id = {n.id: n for n in self.nodes}
        self.section_by_id = {s.id: s for s in self.sections}
        self.switch_by_id = {s.id: s for s in self.switches}
        self.switches_on_section = {}
        for sw in self.switches:
            self.switches_on_section.setdefault(sw.section_id, []).append(sw)
        if len(self.node_by_id) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        if len(self.section_by_id) != len(self.sections):
            raise NetworkError("duplicate section ids")
        for s in self.sections:
            for end in (s.from_node, s.to_node):
                if end not in self.node_by_id:
                    raise NetworkError(f"section {s.id} references unknown node {end}")
            for end in (s.from_node, s.to_node):
                if not set(s.phases) <= set(self.node_by_id[end].phases):
                    raise NetworkError(f"section {s.id}: phases {s.phases} not carried by node {end}")
        for sw in self.switches:
            if sw.section_id not in self.section_by_id:
                raise NetworkError(f"switch {sw.id} references unknown section {sw.section_id}")
        for src in self.sources:
            if src.node_id not in self.node_by_id:
                raise NetworkError(f"source references unknown node {src.node_id}")
            if src.head_section_id not in self.section_by_id:
                raise NetworkError(f"source {src.feeder_id}: unknown head section {src.head_section_id}")
        for ld in self.loads:
            if ld.node_id not in self.node_by_id:
                raise NetworkError(f"load references unknown node {ld.node_id}")

    def base_configuration(self, probability: float = 1.0) -> Configuration:
        """Normal state: normally-open switches open, the rest closed."""
        open_ids = frozenset(sw.id for sw in self.switches if sw.normally_open)
        closed_ids = frozenset(sw.id for sw in self.switches if not sw.normally_open)
        return Configuration("base", open_ids, closed_ids, probability)

    def feeder_peak_kva(self, feeder_id: str | None = None) -> float:
        """Total connected peak kVA, optionally restricted to one feeder's loads
        (membership by base-configuration serving source)."""
        if feeder_id is None:
            return sum(ld.peak_kw / ld.power_factor for ld in self.loads)
        view = apply_configuration(self, self.base_configuration())
        total = 0.0
        for ld in self.loads:
            src = view.source_of.get(ld.node_id)
            if src is not None and src.feeder_id == feeder_id:
                total += ld.peak_kw / ld.power_factor
        return total

    def total_customers(self) -> int:
        return sum(ld.customer_count for ld in self.loads)


def _switch_states(network: Network, config: Configuration) -> dict:
    states = {}
    for sid in sorted(config.open_switches | config.closed_switches):
        if sid not in network.switch_by_id:
            raise UnknownSwitchError(f"configuration {config.id}: unknown switch id {sid}")
    for sw in network.switches:
        if sw.id in config.open_switches:
            states[sw.id] = False
        elif sw.id in config.closed_switches:
            states[sw.id] = True
        else:
            states[sw.id] = not sw.normally_open
    return states


def _in_service_sections(network: Network, config: Configuration) -> list:
    states = _switch_states(network, config)
    out = []
    for s in network.sections:
        switches = network.switches_on_section.get(s.id, ())
        if all(states[sw.id] for sw in switches):
            out.append(s)
    return out


def validate_radiality(network: Network, config: Configuration):
    """Check that the energized graph under `config` is a forest in which every
    energized node reaches exactly one source.

    Returns (ok, diagnostics). Loops and multiply-sourced paths fail; islands
    (de-energized nodes) are reported but do not fail validation.
    """
    sections = _in_service_sections(network, config)
    adj = {}
    for s in sections:
        adj.setdefault(s.from_node, []).append((s.to_node, s.id))
        adj.setdefault(s.to_node, []).append((s.from_node, s.id))
    for lst in adj.values():
        lst.sort(key=lambda t: t[1])

    diagnostics = []
    visited = {}           # node -> source feeder_id
    for src in sorted(network.sources, key=lambda s: s.feeder_id):
        if src.node_id in visited:
            diagnostics.append(
                f"loop: source {src.feeder_id} is reachable from source {visited[src.node_id]}"
            )
            continue
        visited[src.node_id] = src.feeder_id
        stack = [(src.node_id, None)]
        while stack:
            node, via = stack.pop()
            for nbr, sec_id in adj.get(node, ()):
                if sec_id == via:
                    continue
                if nbr in visited:
                    owner = visited[nbr]
                    kind = "loop" if owner == src.feeder_id else "loop (multi-source)"
                    diagnostics.append(f"{kind}: section {sec_id} closes a path to node {nbr}")
                    continue
                visited[nbr] = src.feeder_id
                stack.append((nbr, sec_id))

    dead = [n.id for n in network.nodes if n.id not in visited]
    if dead:
        diagnostics.append(f"island: {len(dead)} de-energized node(s), e.g. {dead[0]}")
    ok = not any(d.startswith("loop") for d in diagnostics)
    return ok, diagnostics


def _build_levels(e_parent, parent_depth):
    """Group edges into contiguous per-depth blocks with reduceat segments.

    Edges must already be sorted by (parent depth, parent). Returns
    [(start, end, seg_starts, seg_parents), ...] ordered root-first.
    """
    levels = []
    if not len(e_parent):
        return levels
    start = 0
    for lvl in range(int(parent_depth.max()) + 1):
        end = int(np.searchsorted(parent_depth, lvl + 1))
        if end > start:
            block_parents = e_parent[start:end]
            seg_starts = np.flatnonzero(
                np.r_[True, block_parents[1:] != block_parents[:-1]])
            levels.append((start, end, seg_starts, block_parents[seg_starts]))
        start = end
    return levels


class TreeComponent:
    """One source's slice of a view's conductor arrays, locally indexed.

    An injection anywhere in a tree never disturbs the other trees of the
    forest, so the capacity search runs per component on these smaller
    arrays. Exposes the same surface the sweep solver and batch criteria
    use on a full view.
    """

    def __init__(self, view: "EnergizedView", feeder_id: str, cn_global):
        self.view = view
        self.network = view.network
        self.config = view.config
        self.feeder_id = feeder_id
        self.cn_global = cn_global                      # local -> view cn index
        local = {g: i for i, g in enumerate(cn_global)}
        self.n_cn = len(cn_global)
        self.cn_vbase = view.cn_vbase[cn_global]
        self.v_flat = view.v_flat[cn_global]
        self.cn_nodes = [view.cn_nodes[g] for g in cn_global]

        edge_global = np.flatnonzero(np.isin(view.e_child, cn_global))
        child_depth = view.cn_depth_arr[view.e_child[edge_global]]
        order = np.argsort(child_depth, kind="stable")
        edge_global = edge_global[order]
        self.edge_global = edge_global
        self.n_edges = len(edge_global)
        self.e_parent = np.array([local[p] for p in view.e_parent[edge_global]], dtype=np.intp)
        self.e_child = np.array([local[c] for c in view.e_child[edge_global]], dtype=np.intp)
        self.e_z = view.e_z[edge_global]
        self.e_rating = view.e_rating[edge_global]
        pdepth = child_depth[order] - 1
        sub = np.lexsort((self.e_child, self.e_parent, pdepth))
        for name in ("e_parent", "e_child", "e_z", "e_rating", "edge_global"):
            setattr(self, name, getattr(self, name)[sub])
        pdepth = pdepth[sub]
        self.levels = _build_levels(self.e_parent, pdepth)

        back = {g: i for i, g in enumerate(self.edge_global)}
        self.section_edges = {}
        for sid, rows in view.section_edges.items():
            if rows and rows[0] in back:
                self.section_edges[sid] = [back[r] for r in rows]
        self.head_edges = {}
        for fid, rows in view.head_edges.items():
            if fid == feeder_id and rows[0] in back:
                self.head_edges[fid] = [back[r] for r in rows]
        self.node_cn = {}
        for i, node_id in enumerate(self.cn_nodes):
            self.node_cn.setdefault(node_id, []).append(i)
        self.energized_loads = [ld for ld in view.energized_loads
                                if ld.node_id in self.node_cn]

    def closed_switches(self):
        return self.view.closed_switches()


class EnergizedView:
    """Read-only energized topology for one configuration.

    Carries the parent/child tree per node and the flattened per-phase
    conductor arrays (one entry per energized node-phase, one edge per
    section-phase) used by the sweep solver. Instances never mutate the
    underlying Network.
    """

    def __init__(self, network: Network, config: Configuration):
        ok, diagnostics = validate_radiality(network, config)
        if not ok:
            raise NonRadialError(diagnostics)
        self.network = network
        self.config = config

        sections = _in_service_sections(network, config)
        adj = {}
        for s in sections:
            adj.setdefault(s.from_node, []).append((s.to_node, s))
            adj.setdefault(s.to_node, []).append((s.from_node, s))
        for lst in adj.values():
            lst.sort(key=lambda t: t[1].id)

        self.source_of = {}
        self.parent_of = {}        # node -> (parent node, Section)
        self.depth = {}
        self.energized_nodes = []
        self.tree_sections = []    # oriented parent -> child, BFS order
        for src in sorted(network.sources, key=lambda s: s.feeder_id):
            root = src.node_id
            self.source_of[root] = src
            self.depth[root] = 0
            self.energized_nodes.append(root)
            queue = [root]
            while queue:
                node = queue.pop(0)
                for nbr, sec in adj.get(node, ()):
                    if nbr in self.source_of:
                        continue
                    self.source_of[nbr] = src
                    self.parent_of[nbr] = (node, sec)
                    self.depth[nbr] = self.depth[node] + 1
                    self.energized_nodes.append(nbr)
                    self.tree_sections.append(sec)
                    queue.append(nbr)

        self.de_energized_nodes = [n.id for n in network.nodes if n.id not in self.source_of]
        self._components = None
        self._build_solver_arrays()

    def is_energized(self, node_id: str) -> bool:
        return node_id in self.source_of

    def serving_source(self, node_id: str) -> SourceBus | None:
        return self.source_of.get(node_id)

    def upstream_path(self, node_id: str) -> list:
        """Section ids from node back to its serving source."""
        path = []
        node = node_id
        while node in self.parent_of:
            parent, sec = self.parent_of[node]
            path.append(sec.id)
            node = parent
        return path

    def closed_switches(self) -> list:
        states = _switch_states(self.network, self.config)
        return [sw for sw in self.network.switches if states[sw.id]]

    def components(self) -> list:
        """Per-source tree slices (see TreeComponent), sorted by feeder."""
        if self._components is None:
            by_feeder = {}
            for i, node_id in enumerate(self.cn_nodes):
                by_feeder.setdefault(self.source_of[node_id].feeder_id, []).append(i)
            self._components = [
                TreeComponent(self, fid, np.array(idx, dtype=np.intp))
                for fid, idx in sorted(by_feeder.items())
            ]
        return self._components

    # ---- solver arrays ----------------------------------------------------

    def _build_solver_arrays(self):
        net = self.network
        cn_index = {}
        cn_nodes, cn_phases, cn_vbase, cn_depth = [], [], [], []
        for node_id in self.energized_nodes:
            node = net.node_by_id[node_id]
            for ph in node.phases:
                cn_index[(node_id, ph)] = len(cn_nodes)
                cn_nodes.append(node_id)
                cn_phases.append(ph)
                cn_vbase.append(node.nominal_voltage)
                cn_depth.append(self.depth[node_id])
        self.cn_index = cn_index
        self.cn_nodes = cn_nodes
        self.cn_phases = cn_phases
        self.cn_vbase = np.array(cn_vbase, dtype=float)
        self.cn_depth_arr = np.array(cn_depth, dtype=np.intp)
        self.n_cn = len(cn_nodes)

        self.node_cn = {}
        for i, node_id in enumerate(cn_nodes):
            self.node_cn.setdefault(node_id, []).append(i)

        # flat-start voltage: each conductor at its serving source's setpoint
        v0 = np.empty(self.n_cn, dtype=complex)
        for i, node_id in enumerate(cn_nodes):
            v0[i] = self.source_of[node_id].voltage_setpoint * self.cn_vbase[i]
        self.v_flat = v0

        e_parent, e_child, e_z, e_rating, e_section = [], [], [], [], []
        self.section_edges = {}
        self.section_index = {}
        for k, sec in enumerate(self.tree_sections):
            child = sec.to_node if sec.to_node in self.parent_of and \
                self.parent_of[sec.to_node][1] is sec else sec.from_node
            parent = self.parent_of[child][0]
            idxs = []
            for ph in sec.phases:
                idxs.append(len(e_parent))
                e_parent.append(cn_index[(parent, ph)])
                e_child.append(cn_index[(child, ph)])
                e_z.append(sec.impedance)
                e_rating.append(sec.thermal_rating)
            e_section.extend([k] * len(sec.phases))
            self.section_edges[sec.id] = idxs
            self.section_index[sec.id] = k

        self.e_parent = np.array(e_parent, dtype=np.intp)
        self.e_child = np.array(e_child, dtype=np.intp)
        self.e_z = np.array(e_z, dtype=complex)
        self.e_rating = np.array(e_rating, dtype=float)
        self.e_section = np.array(e_section, dtype=np.intp)
        self.n_edges = len(e_parent)

        # order edges by (parent depth, parent, child) so each sweep level is a
        # contiguous block and parents repeat contiguously for reduceat
        if self.n_edges:
            pdepth = np.array([cn_depth[p] for p in self.e_parent])
            order = np.lexsort((self.e_child, self.e_parent, pdepth))
            for name in ("e_parent", "e_child", "e_z", "e_rating", "e_section"):
                setattr(self, name, getattr(self, name)[order])
            inverse = np.empty_like(order)
            inverse[order] = np.arange(len(order))
            for sid, idxs in self.section_edges.items():
                self.section_edges[sid] = [int(inverse[i]) for i in idxs]
            pdepth = pdepth[order]
            self.levels = _build_levels(self.e_parent, pdepth)
        else:
            self.levels = []

        self.root_cn = {}
        for src in sorted(self.source_of.values(), key=lambda s: s.feeder_id):
            if src.node_id in self.node_cn:
                self.root_cn[src.feeder_id] = self.node_cn[src.node_id]

        # edge lists for head sections (per source) and closed switched sections
        self.head_edges = {}
        for src in sorted({s.feeder_id: s for s in self.source_of.values()}.values(),
                          key=lambda s: s.feeder_id):
            idxs = self.section_edges.get(src.head_section_id)
            if idxs:
                self.head_edges[src.feeder_id] = idxs

        self.energized_loads = [ld for ld in net.loads if ld.node_id in self.source_of]

    def load_extraction_va(self, node_kva: dict) -> np.ndarray:
        """Spread per-node complex kVA over the node's energized phases.

        Returns the (n_cn,) extraction vector in VA (consumption positive).
        """
        s = np.zeros(self.n_cn, dtype=complex)
        for node_id, kva in node_kva.items():
            rows = self.node_cn.get(node_id)
            if not rows:
                continue
            s[rows] += kva * 1000.0 / len(rows)
        return s


def apply_configuration(network: Network, config: Configuration) -> EnergizedView:
    """Build the energized view for a configuration.

    Raises NonRadialError (with diagnostics) if the configuration creates a
    loop or a multiply-sourced path. De-energized nodes are allowed and
    flagged on the view.
    """
    return EnergizedView(network, config)


def sections_by_distance(network: Network, bucket_miles: float, phase_class: str) -> dict:
    """Group base-energized sections into distance buckets by to_node distance.

    phase_class is "three_phase" or "one_two_phase"; each section lands in
    exactly one bucket of exactly one class.
    """
    if bucket_miles <= 0:
        raise ValueError("bucket_miles must be positive")
    if phase_class not in ("three_phase", "one_two_phase"):
        raise ValueError(f"unknown phase class {phase_class!r}")
    base = network.base_configuration()
    in_service = {s.id for s in _in_service_sections(network, base)}
    buckets = {}
    for s in network.sections:
        if s.id not in in_service:
            continue
        want3 = phase_class == "three_phase"
        if (s.n_phases == 3) != want3:
            continue
        b = int(network.node_by_id[s.to_node].distance_from_source / bucket_miles)
        buckets.setdefault(b, []).append(s)
    return buckets


# ---------------------------------------------------------------------------
# synthetic feeder generation
# ---------------------------------------------------------------------------

@dataclass
class FeederSpec:
    """Targets for one synthetic radial feeder.

    Aggregates (section count, peak load, conductor miles, customers) are met
    exactly or within 1%; the min/peak ratio parameterizes the default demand
    shape attached to the feeder's loads.
    """
    feeder_id: str
    section_count: int
    peak_mw: float
    min_mw: float
    conductor_miles: float
    customer_count: int
    seed: int = 0
    lateral_single_phase_share: float = 0.7   # remaining laterals are two-phase
    trunk_fraction: float = 0.30
    nominal_voltage: float = 7199.6           # volts L-G (12.47 kV class)
    source_setpoint: float = 1.02             # pu
    power_factor: float = 0.95
    trunk_z_per_mile: complex = 0.09 + 0.32j  # ohms/mi, heavy 3-phase mains
    lateral_z_per_mile: complex = 0.58 + 0.62j
    trunk_rating_amps: float = 850.0
    lateral_rating_amps: float = 220.0
    load_profile_id: str = ""

    def __post_init__(self):
        if not self.load_profile_id:
            self.load_profile_id = f"{self.feeder_id}_load"

    @property
    def min_peak_ratio(self) -> float:
        return self.min_mw / self.peak_mw if self.peak_mw > 0 else 1.0


def _scaled_integer_split(weights, total):
    """Split integer `total` proportionally to weights (largest remainder)."""
    weights = np.asarray(weights, dtype=float)
    if weights.sum() <= 0 or total == 0:
        return np.zeros(len(weights), dtype=int)
    raw = weights / weights.sum() * total
    base = np.floor(raw).astype(int)
    short = total - base.sum()
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return base


def generate_synthetic_feeder(spec: FeederSpec) -> Network:
    """Grow a deterministic radial feeder matching the requested aggregates.

    Topology: a 3-phase trunk (main run plus a few trunk branches) with 1-2
    phase laterals hung off trunk nodes. Section count is exact; total length
    and total peak load are scaled to the targets.
    """
    if spec.section_count < 1:
        raise InvalidFeederSpecError("section_count must be >= 1")
    if spec.section_count == 0 and spec.peak_mw > 0:
        raise InvalidFeederSpecError("cannot place load on a feeder with no sections")
    if spec.conductor_miles <= 0:
        raise InvalidFeederSpecError("conductor_miles must be positive")

    rng = np.random.default_rng(spec.seed)
    fid = spec.feeder_id
    n_total = spec.section_count
    n_trunk = max(1, int(round(spec.trunk_fraction * n_total)))
    n_trunk = min(n_trunk, n_total)

    nodes = {}
    sections = []
    node_seq = [0]

    def new_node(phases, distance):
        k = node_seq[0]
        node_seq[0] += 1
        nid = f"{fid}:n{k:05d}"
        nodes[nid] = [phases, distance]
        return nid

    def new_section(from_n, to_n, phases, weight, kind):
        sid = f"{fid}:s{len(sections):05d}"
        sections.append([sid, from_n, to_n, phases, weight, kind])
        return sid

    root = new_node("ABC", 0.0)

    # trunk: main run sized ~n_trunk^0.72 keeps the feeder reach realistic on
    # big feeders; the rest of the trunk hangs off it as shorter branches
    m_main = max(1, min(n_trunk, int(round(n_trunk ** 0.72))))
    trunk_nodes = [root]
    cur = root
    for _ in range(m_main):
        nxt = new_node("ABC", 0.0)
        new_section(cur, nxt, "ABC", 1.3 * rng.uniform(0.7, 1.3), "trunk")
        trunk_nodes.append(nxt)
        cur = nxt
    remaining_trunk = n_trunk - m_main
    while remaining_trunk > 0:
        length = int(min(remaining_trunk, rng.integers(10, 41)))
        attach_at = int(rng.integers(1, max(2, int(len(trunk_nodes) * 0.7))))
        cur = trunk_nodes[attach_at]
        for _ in range(length):
            nxt = new_node("ABC", 0.0)
            new_section(cur, nxt, "ABC", 1.3 * rng.uniform(0.7, 1.3), "trunk")
            trunk_nodes.append(nxt)
            cur = nxt
        remaining_trunk -= length

    # laterals: short 1-2 phase taps off random trunk nodes
    lateral_ends = []
    remaining = n_total - n_trunk
    while remaining > 0:
        length = int(min(remaining, 1 + rng.geometric(0.45)))
        length = min(length, 8)
        anchor = trunk_nodes[int(rng.integers(1, len(trunk_nodes)))]
        if rng.uniform() < spec.lateral_single_phase_share:
            phases = PHASE_ORDER[int(rng.integers(0, 3))]
        else:
            pair = sorted(rng.choice(3, size=2, replace=False))
            phases = "".join(PHASE_ORDER[i] for i in pair)
        cur = anchor
        for _ in range(length):
            nxt = new_node(phases, 0.0)
            new_section(cur, nxt, phases, rng.uniform(0.25, 1.0), "lateral")
            cur = nxt
        lateral_ends.append(cur)
        remaining -= length

    # scale section lengths to the conductor-mile target, then walk distances
    weights = np.array([s[4] for s in sections])
    lengths = weights / weights.sum() * spec.conductor_miles
    children = {}
    for i, s in enumerate(sections):
        children.setdefault(s[1], []).append(i)
    stack = [root]
    while stack:
        nid = stack.pop()
        for i in children.get(nid, ()):
            s = sections[i]
            nodes[s[2]][1] = nodes[nid][1] + lengths[i]
            stack.append(s[2])

    # loads: lateral tails always, lateral interiors sometimes, a few trunk
    # nodes act as larger (commercial-scale) service points
    lateral_nodes = [nid for nid, (ph, _) in nodes.items() if len(ph) < 3]
    load_nodes, customer_w = [], []
    for nid in lateral_nodes:
        if nid in lateral_ends or rng.uniform() < 0.4:
            load_nodes.append(nid)
            customer_w.append(rng.uniform(1, 6))
    for nid in trunk_nodes[1:]:
        if rng.uniform() < 0.05:
            load_nodes.append(nid)
            customer_w.append(rng.uniform(8, 25))
    if spec.peak_mw > 0 and not load_nodes:
        load_nodes = [trunk_nodes[-1]]
        customer_w = [1.0]

    loads = []
    if spec.peak_mw > 0:
        customers = _scaled_integer_split(customer_w, spec.customer_count)
        kw_w = np.array(customer_w) * rng.uniform(0.8, 1.25, size=len(customer_w))
        kw = kw_w / kw_w.sum() * spec.peak_mw * 1000.0
        for nid, cust, p in zip(load_nodes, customers, kw):
            loads.append(LoadPoint(nid, float(p), spec.power_factor,
                                   spec.load_profile_id, int(cust)))

    node_objs = [Node(nid, ph, dist, spec.nominal_voltage)
                 for nid, (ph, dist) in nodes.items()]
    section_objs = []
    for (sid, fr, to, phases, _w, kind), length in zip(sections, lengths):
        if kind == "trunk":
            z = spec.trunk_z_per_mile * length
            rating = spec.trunk_rating_amps
        else:
            z = spec.lateral_z_per_mile * length
            rating = spec.lateral_rating_amps
        section_objs.append(Section(sid, fr, to, phases, z, float(length), rating))

    source = SourceBus(root, spec.source_setpoint, fid, section_objs[0].id)
    net = Network(node_objs, section_objs, [], [source], loads, [fid])

    total_len = sum(s.length for s in net.sections)
    total_kw = sum(ld.peak_kw for ld in net.loads)
    if abs(total_len - spec.conductor_miles) > 0.01 * spec.conductor_miles:
        raise InvalidFeederSpecError("generated length misses target by more than 1%")
    if spec.peak_mw > 0 and abs(total_kw - spec.peak_mw * 1000) > 10 * spec.peak_mw:
        raise InvalidFeederSpecError("generated peak load misses target by more than 1%")
    return net


def make_feeder_pair(spec1: FeederSpec, spec2: FeederSpec,
                     tie_length_miles: float = 0.2,
                     tie_rating_amps: float = 400.0,
                     boundary_positions=(0.4, 0.78)) -> Network:
    """Join two synthetic feeders with a normally-open mainline tie.

    Each trunk gets SCADA block-boundary switches at the given fractional
    positions along its main run, which with the tie partitions the pair into
    2*(len(boundary_positions)+1) switching blocks.
    """
    f1 = generate_synthetic_feeder(spec1)
    f2 = generate_synthetic_feeder(spec2)

    nodes = f1.nodes + f2.nodes
    sections = list(f1.sections) + list(f2.sections)
    loads = f1.loads + f2.loads
    sources = f1.sources + f2.sources
    switches = []

    def main_run(net, spec):
        """Follow the first-built child chain from the source: the main run."""
        view = apply_configuration(net, net.base_configuration())
        run = []
        cur = net.sources[0].node_id
        while True:
            nxt = None
            for sec in view.tree_sections:
                if sec.from_node == cur and sec.n_phases == 3:
                    nxt = sec
                    break
            if nxt is None:
                break
            run.append(nxt)
            cur = nxt.to_node
        return run

    for net, spec in ((f1, spec1), (f2, spec2)):
        run = main_run(net, spec)
        for j, pos in enumerate(boundary_positions):
            sec = run[min(len(run) - 1, int(pos * len(run)))]
            switches.append(Switch(f"{spec.feeder_id}_blk{j + 1}", sec.id,
                                   scada_controlled=True, normally_open=False,
                                   switching_block_boundary=True))

    run1, run2 = main_run(f1, spec1), main_run(f2, spec2)
    end1, end2 = run1[-1].to_node, run2[-1].to_node
    tie_z = spec1.trunk_z_per_mile * tie_length_miles
    tie_sec = Section("tie:s0", end1, end2, "ABC", tie_z, tie_length_miles, tie_rating_amps)
    sections.append(tie_sec)
    switches.append(Switch("tie_1", tie_sec.id, scada_controlled=True,
                           normally_open=True, switching_block_boundary=True))

    return Network(nodes, sections, switches, sources, loads,
                   [spec1.feeder_id, spec2.feeder_id])


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def network_to_dict(network: Network) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "feeder_ids": list(network.feeder_ids),
        "nodes": [
            {"id": n.id, "phases": n.phases,
             "distance_from_source": n.distance_from_source,
             "nominal_voltage": n.nominal_voltage}
            for n in network.nodes
        ],
        "sections": [
            {"id": s.id, "from_node": s.from_node, "to_node": s.to_node,
             "phases": s.phases, "resistance_ohm": s.impedance.real,
             "reactance_ohm": s.impedance.imag, "length_miles": s.length,
             "thermal_rating_amps": s.thermal_rating}
            for s in network.sections
        ],
        "switches": [
            {"id": s.id, "section_id": s.section_id,
             "scada_controlled": s.scada_controlled,
             "normally_open": s.normally_open,
             "switching_block_boundary": s.switching_block_boundary}
            for s in network.switches
        ],
        "sources": [
            {"node_id": s.node_id, "voltage_setpoint": s.voltage_setpoint,
             "feeder_id": s.feeder_id, "head_section_id": s.head_section_id}
            for s in network.sources
        ],
        "loads": [
            {"node_id": ld.node_id, "peak_kw": ld.peak_kw,
             "power_factor": ld.power_factor, "profile_id": ld.profile_id,
             "customer_count": ld.customer_count}
            for ld in network.loads
        ],
        "configurations": [
            {"id": c.id, "open_switches": sorted(c.open_switches),
             "closed_switches": sorted(c.closed_switches),
             "probability": c.probability}
            for c in network.configurations
        ],
    }


def network_from_dict(doc: dict) -> Network:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise NetworkError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    nodes = [Node(d["id"], d["phases"], d["distance_from_source"], d["nominal_voltage"])
             for d in doc["nodes"]]
    sections = [Section(d["id"], d["from_node"], d["to_node"], d["phases"],
                        complex(d["resistance_ohm"], d["reactance_ohm"]),
                        d["length_miles"], d["thermal_rating_amps"])
                for d in doc["sections"]]
    switches = [Switch(d["id"], d["section_id"], d["scada_controlled"],
                       d["normally_open"], d["switching_block_boundary"])
                for d in doc.get("switches", [])]
    sources = [SourceBus(d["node_id"], d["voltage_setpoint"], d["feeder_id"],
                         d["head_section_id"]) for d in doc["sources"]]
    loads = [LoadPoint(d["node_id"], d["peak_kw"], d["power_factor"],
                       d["profile_id"], d["customer_count"]) for d in doc["loads"]]
    configs = [Configuration(d["id"], frozenset(d["open_switches"]),
                             frozenset(d["closed_switches"]), d.get("probability", 1.0))
               for d in doc.get("configurations", [])]
    return Network(nodes, sections, switches, sources, loads,
                   doc["feeder_ids"], configs)


def save_network(network: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(network), indent=1, sort_keys=True))


def load_network(path) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()))
