"""Per-section hosting capacity: worst-interval flat values and interval
profiles, with the binding criterion recorded.

Capacity at a section is the largest uniform injection at its to_node (added
constant-power load for the load kind) that leaves every enabled criterion
satisfied, searched on a 1 kW lattice. The search brackets then bisects, all
sections of a source tree batched as independent solver cases; the returned
boundary is re-verified with cold-started solves and falls back to a linear
sweep if the pass/fail boundary is inconsistent (non-monotone margins).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .criteria import BatchCriteria, CriteriaRegime, UNCONSTRAINED
from .network import EnergizedView
from .power_flow import sweep_solve

DAY_TYPES = ("weekday", "weekend")
DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)

GENERATION = "generation"
LOAD = "load"


@dataclass(frozen=True, order=True)
class IntervalIndex:
    month: int        # 1..12
    day_type: str     # weekday | weekend
    hour: int         # 0..23

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} outside 1..12")
        if self.day_type not in DAY_TYPES:
            raise ValueError(f"day_type {self.day_type!r}")
        if not 0 <= self.hour <= 23:
            raise ValueError(f"hour {self.hour} outside 0..23")

    def label(self) -> str:
        return f"{self.month:02d}/{self.day_type}/{self.hour:02d}"

    @classmethod
    def parse(cls, label: str) -> "IntervalIndex":
        month, day_type, hour = label.split("/")
        return cls(int(month), day_type, int(hour))

    def weight_hours(self) -> float:
        """Hours per representative (non-leap) year this interval stands for."""
        days = DAYS_IN_MONTH[self.month - 1]
        share = 5 / 7 if self.day_type == "weekday" else 2 / 7
        return days * share


def interval_grid() -> list:
    """The 576-interval study grid: month x day type x hour."""
    return [IntervalIndex(m, dt, h)
            for m in range(1, 13) for dt in DAY_TYPES for h in range(24)]


@dataclass
class HcResult:
    section_id: str
    kind: str
    flat_kw: float
    profile: dict                  # IntervalIndex -> kW
    profile_binding: dict          # IntervalIndex -> criterion name
    binding_criterion: str         # at the flat (minimum) interval
    regime_name: str = ""
    configuration_id: str = ""
    scenario_id: str = ""


def _assemble_result(section_id, kind, profile, profile_binding,
                     regime_name, config_id, scenario_id) -> HcResult:
    worst = min(sorted(profile), key=lambda iv: (profile[iv], iv))
    return HcResult(section_id, kind, profile[worst], dict(profile),
                    dict(profile_binding), profile_binding[worst],
                    regime_name, config_id, scenario_id)


class HcSearchError(Exception):
    pass


class _CaseSet:
    """Injection bookkeeping for one batch of sections on one tree."""

    def __init__(self, tree, sections, kind: str, resolution_kw: float):
        self.tree = tree
        self.kind = kind
        self.res = float(resolution_kw)
        self.sections = sections
        self.sign = -1.0 if kind == GENERATION else 1.0  # extraction delta per kW
        self.rows = []
        self.weights = []
        for sec in sections:
            rows = tree.node_cn.get(sec.to_node)
            if not rows:
                raise HcSearchError(f"section {sec.id}: to_node {sec.to_node} is de-energized")
            self.rows.append(np.array(rows, dtype=np.intp))
            self.weights.append(1000.0 / len(rows))
        peak_kva = sum(ld.peak_kw / ld.power_factor for ld in tree.energized_loads)
        self.peak_kva = peak_kva
        self.cap_units = np.full(
            len(sections), max(1, math.ceil(2.0 * peak_kva / self.res)), dtype=np.int64)

    def build_s(self, s_base, case_idx, x_units):
        """Case-major extraction matrix for the cases at sizes x (units)."""
        width = len(case_idx)
        s = np.empty((width, self.tree.n_cn), dtype=complex)
        s[:] = s_base[None, :]
        for row, (ci, xu) in enumerate(zip(case_idx, x_units)):
            if xu:
                s[row, self.rows[ci]] += self.sign * float(xu) * self.res * self.weights[ci]
        return s


def _evaluate(bc, cases, s_base, case_idx, x_units, v_warm, chunk):
    """Solve and score a set of cases; returns (feasible, margins, v_new)."""
    n = len(case_idx)
    tree = cases.tree
    feas = np.zeros(n, dtype=bool)
    margins = np.empty((len(bc.keys), n))
    v_new = np.empty((n, tree.n_cn), dtype=complex)
    for lo in range(0, n, chunk):
        sl = slice(lo, min(lo + chunk, n))
        s = cases.build_s(s_base, case_idx[sl], x_units[sl])
        v0 = v_warm[sl] if v_warm is not None else None
        batch = sweep_solve(tree, s, v0=v0)
        m = bc.margins(batch)
        margins[:, sl] = m
        feas[sl] = bc.feasible(m)
        v_new[sl] = batch.v_cm
    return feas, margins, v_new


def hc_for_sections(view: EnergizedView, regime: CriteriaRegime, s_base,
                    sections, kind: str = GENERATION, resolution_kw: float = 1.0,
                    chunk: int = 1024) -> dict:
    """Hosting capacity for many sections at one interval state.

    s_base is the (n_cn,) extraction vector of the interval with no candidate
    injection. Returns {section_id: (hc_kw, binding_criterion)} where the
    binding criterion fails at hc + resolution (UNCONSTRAINED at the cap).
    The search runs independently per source tree: injections in one tree
    leave the others at their base state.
    """
    sections = sorted(sections, key=lambda s: s.id)
    components = view.components()

    # base case must clear the regime across the whole forest
    base = {}
    for comp in components:
        b = sweep_solve(comp, s_base[comp.cn_global])
        base_vmag = np.abs(b.v_cm[0]) / comp.cn_vbase
        scale = sum(ld.peak_kw / ld.power_factor for ld in comp.energized_loads)
        bc = BatchCriteria(comp, regime, base_vmag_pu=base_vmag, flow_scale_kw=scale)
        m0 = bc.margins(b)
        base[comp.feeder_id] = (comp, bc, b)
        if not bc.feasible(m0)[0]:
            binding = bc.binding(m0[:, 0])
            return {sec.id: (0.0, binding) for sec in sections}

    by_feeder = {}
    for sec in sections:
        fid = view.source_of[sec.to_node].feeder_id
        by_feeder.setdefault(fid, []).append(sec)

    results = {}
    for fid in sorted(by_feeder):
        comp, bc, b = base[fid]
        results.update(_search_tree(comp, bc, b, regime, s_base[comp.cn_global],
                                    by_feeder[fid], kind, resolution_kw, chunk))
    return results


def _search_tree(tree, bc, base, regime, s_base, sections, kind,
                 resolution_kw, chunk):
    """Bracket + lattice bisection for all sections served by one tree."""
    cases = _CaseSet(tree, sections, kind, resolution_kw)
    n = len(sections)
    res = cases.res

    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, -1, dtype=np.int64)            # -1: not bracketed yet
    m_hi = np.full((len(bc.keys), n), np.inf)
    v_store = np.repeat(base.v_cm, n, axis=0)
    all_idx = np.arange(n)

    # bracket: start from the head-flow guess for generation (injection beyond
    # the served load must reverse the head), expand on pass
    if kind == GENERATION and regime.reverse_flow_at_head and tree.head_edges:
        head_kw = float(base.head_flow_kw(tree.feeder_id)[0])
        start = max(1, math.ceil((head_kw * 1.35 + 50.0) / res))
        guess = np.minimum(cases.cap_units, start)
    else:
        guess = cases.cap_units.copy()

    pending = all_idx.copy()
    while len(pending):
        feas, margins, v_new = _evaluate(bc, cases, s_base, pending,
                                         guess[pending], v_store[pending], chunk)
        v_store[pending] = v_new
        hit = pending[~feas]
        hi[hit] = guess[hit]
        m_hi[:, hit] = margins[:, ~feas]
        ok = pending[feas]
        lo[ok] = guess[ok]
        at_cap = guess[ok] >= cases.cap_units[ok]
        hi[ok[at_cap]] = guess[ok[at_cap]]         # cap reached while feasible
        grow = ok[~at_cap]
        guess[grow] = np.minimum(cases.cap_units[grow], guess[grow] * 4)
        pending = grow

    # bisect on the kW lattice
    while True:
        active = np.flatnonzero((hi - lo > 1) & (lo < cases.cap_units))
        if not len(active):
            break
        mid = (lo[active] + hi[active]) // 2
        feas, margins, v_new = _evaluate(bc, cases, s_base, active, mid,
                                         v_store[active], chunk)
        v_store[active] = v_new
        lo[active[feas]] = mid[feas]
        hi[active[~feas]] = mid[~feas]
        m_hi[:, active[~feas]] = margins[:, ~feas]

    capped = lo >= cases.cap_units

    # cold verification of both boundary points; disagreement means the warm
    # path crossed a non-monotone margin, so fall back to an exhaustive sweep
    feas_lo, _m, _v = _evaluate(bc, cases, s_base, all_idx, lo, None, chunk)
    up = np.minimum(lo + 1, cases.cap_units)
    feas_up, m_up, _v = _evaluate(bc, cases, s_base, all_idx, up, None, chunk)
    suspects = (~feas_lo) | (feas_up & ~capped)

    results = {}
    for j, sec in enumerate(sections):
        if suspects[j]:
            hc_units, binding = _linear_sweep(bc, cases, s_base, j, chunk)
        elif capped[j]:
            hc_units, binding = lo[j], UNCONSTRAINED
        else:
            hc_units, binding = lo[j], bc.binding(m_up[:, j])
        results[sec.id] = (hc_units * res, binding)
    return results


def _linear_sweep(bc, cases, s_base, case_j, chunk):
    """1-resolution-step upward sweep for one case; first failure stops it."""
    cap = int(cases.cap_units[case_j])
    x = 1
    while x <= cap:
        width = min(chunk, cap - x + 1)
        xs = np.arange(x, x + width, dtype=np.int64)
        idx = np.full(width, case_j, dtype=np.intp)
        feas, margins, _v = _evaluate(bc, cases, s_base, idx, xs, None, chunk)
        bad = np.flatnonzero(~feas)
        if len(bad):
            k = int(bad[0])
            return int(xs[k]) - 1, bc.binding(margins[:, k])
        x += width
    return cap, UNCONSTRAINED


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _resolve_sections(view, sections):
    net = view.network
    if sections is None:
        out = [s for s in net.sections if s.to_node in view.source_of]
    else:
        out = [net.section_by_id[s] if isinstance(s, str) else s for s in sections]
    return sorted(out, key=lambda s: s.id)


def hc_at(section, interval: IntervalIndex, view: EnergizedView,
          regime: CriteriaRegime, net_load, kind: str = GENERATION,
          resolution_kw: float = 1.0):
    """Hosting capacity (kW, binding criterion) of one section at one interval.

    net_load is an applied scenario (see scenarios.apply_penetration).
    """
    [section] = _resolve_sections(view, [section])
    s_base = net_load.extraction_va(view, interval)
    out = hc_for_sections(view, regime, s_base, [section], kind, resolution_kw)
    return out[section.id]


def hc_profile(section, view: EnergizedView, regime: CriteriaRegime, net_load,
               kind: str = GENERATION, intervals=None,
               resolution_kw: float = 1.0) -> HcResult:
    """Capacity of one section at every interval of the grid."""
    results = hc_profile_all(view, regime, net_load, kind,
                             sections=[section], intervals=intervals,
                             resolution_kw=resolution_kw)
    return next(iter(results.values()))


def hc_profile_all(view: EnergizedView, regime: CriteriaRegime, net_load,
                   kind: str = GENERATION, sections=None, intervals=None,
                   resolution_kw: float = 1.0) -> dict:
    """Interval HC profiles for many sections; returns {section_id: HcResult}."""
    sections = _resolve_sections(view, sections)
    intervals = sorted(intervals) if intervals is not None else interval_grid()
    profiles = {sec.id: {} for sec in sections}
    bindings = {sec.id: {} for sec in sections}
    for iv in intervals:
        s_base = net_load.extraction_va(view, iv)
        cell = hc_for_sections(view, regime, s_base, sections, kind, resolution_kw)
        for sid, (kw, binding) in cell.items():
            profiles[sid][iv] = kw
            bindings[sid][iv] = binding
    return {
        sid: _assemble_result(sid, kind, profiles[sid], bindings[sid],
                              regime.name, view.config.id,
                              getattr(net_load, "scenario_id", ""))
        for sid in profiles
    }


def flat_snapshot_hc(view: EnergizedView, regime: CriteriaRegime, net_load,
                     kind: str = GENERATION, sections=None,
                     resolution_kw: float = 1.0) -> dict:
    """Worst-case flat HC from the percentile demand snapshots.

    The min/peak study mode: generation HC binds at light load and is
    evaluated at the minimum-demand interval of the 10th-percentile profiles;
    load HC binds at heavy load and uses the peak interval of the
    90th-percentile profiles.
    """
    sections = _resolve_sections(view, sections)
    profiles = {sec.id: {} for sec in sections}
    bindings = {sec.id: {} for sec in sections}
    snapshots = net_load.snapshot_intervals()
    chosen = [snapshots[0]] if kind == GENERATION else [snapshots[1]]
    for iv, basis in chosen:
        s_base = net_load.extraction_va(view, iv, basis=basis)
        cell = hc_for_sections(view, regime, s_base, sections, kind, resolution_kw)
        for sid, (kw, binding) in cell.items():
            profiles[sid][iv] = kw
            bindings[sid][iv] = binding
    return {
        sid: _assemble_result(sid, kind, profiles[sid], bindings[sid],
                              regime.name, view.config.id,
                              getattr(net_load, "scenario_id", ""))
        for sid in profiles
    }


def lost_der_opportunity(result: HcResult) -> float:
    """Annual DER energy (kWh) foregone by flattening the profile to its
    minimum: sum of (interval HC - flat HC) times interval hours."""
    if result.kind != GENERATION:
        raise ValueError("lost DER opportunity applies to generation results")
    return sum((kw - result.flat_kw) * iv.weight_hours()
               for iv, kw in result.profile.items())


def limiting_distribution(results) -> dict:
    """Histogram of flat binding criteria across HC results."""
    counts = {}
    for r in results:
        counts[r.binding_criterion] = counts.get(r.binding_criterion, 0) + 1
    return dict(sorted(counts.items()))
