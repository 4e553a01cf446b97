"""Hosting-capacity criteria: regimes, pass/fail reports, batched margins.

A regime is the active set of limit checks. `evaluate` produces per-criterion
reports with worst margins and locations for a single solved state;
`BatchCriteria` computes the same margins across many solver cases at once
(normalized, no locations) for the capacity search. Failures are data, not
errors.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .network import EnergizedView
from .power_flow import BatchSolution, PowerFlowSolution


class Criterion(str, enum.Enum):
    THERMAL = "thermal"
    OVER_VOLTAGE = "over_voltage"
    UNDER_VOLTAGE = "under_voltage"
    VOLTAGE_DEVIATION = "voltage_deviation"
    REVERSE_FLOW_HEAD = "reverse_flow_head"
    OPFLEX_DEVICE = "opflex_device"
    NON_CONVERGENCE = "non_convergence"
    PROTECTION = "protection"

    def __str__(self):
        return self.value


UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class CriteriaRegime:
    """Active limit checks and thresholds.

    protection_plugin, when present, is called as plugin(view, solution) and
    must return (margin, location), negative margin meaning failure; the slot
    ships disabled.
    """
    name: str = "custom"
    thermal_enabled: bool = True
    loading_limit_fraction: float = 1.00
    voltage_band: tuple = (0.95, 1.05)     # pu
    voltage_deviation_limit: float = 0.03  # pu, with-DER vs without-DER
    reverse_flow_at_head: bool = True
    opflex_scada_zero_flow: bool = False
    protection_plugin: object = None

    def __post_init__(self):
        v_min, v_max = self.voltage_band
        if not 0 < v_min < v_max:
            raise ValueError(f"invalid voltage band {self.voltage_band}")
        if not 0 < self.voltage_deviation_limit <= 0.1:
            raise ValueError(f"deviation limit {self.voltage_deviation_limit} outside (0, 0.1]")
        if self.loading_limit_fraction <= 0:
            raise ValueError("loading limit fraction must be positive")


@dataclass(frozen=True)
class CriterionReport:
    criterion: Criterion
    worst_margin: float           # signed, criterion's natural unit
    location: str | None = None   # section or node id attaining the margin

    @property
    def passed(self) -> bool:
        return self.worst_margin >= 0


def regime_presets() -> dict:
    """Named regimes: classical limits, OpFlex, and per-configuration transfer
    study (classical checks, SCADA rule off)."""
    classical = CriteriaRegime(name="classical")
    opflex = CriteriaRegime(name="opflex", opflex_scada_zero_flow=True)
    transfer = CriteriaRegime(name="transfer_study", opflex_scada_zero_flow=False)
    return {"classical": classical, "opflex": opflex, "transfer_study": transfer}


def transfer_device_sections(view: EnergizedView) -> list:
    """Closed SCADA switches subject to the zero-reverse-flow rule, as
    (switch_id, section_id) pairs. Manual switches never qualify."""
    out = []
    for sw in view.closed_switches():
        if not sw.scada_controlled:
            continue
        if not (sw.switching_block_boundary or sw.normally_open):
            continue
        if sw.section_id in view.section_edges:
            out.append((sw.id, sw.section_id))
    return sorted(out)


class BatchCriteria:
    """Vectorized margin evaluation over solver batches.

    Margins are normalized to comparable scales (thermal relative to rating,
    voltages in pu, flows relative to connected feeder peak) so the worst
    failing criterion can be picked per column. Row order is `self.keys`.
    Works on a full view or a single tree component.
    """

    def __init__(self, tree, regime: CriteriaRegime,
                 base_vmag_pu=None, flow_scale_kw: float = 1.0):
        self.view = tree
        self.regime = regime
        self.base_vmag_pu = base_vmag_pu
        self.flow_scale = max(float(flow_scale_kw), 1.0)
        self.inv_vbase = 1.0 / tree.cn_vbase
        rating = tree.e_rating * regime.loading_limit_fraction
        self.inv_rating2 = 1.0 / np.maximum(rating, 1e-9) ** 2
        self.head_feeders = sorted(tree.head_edges) if regime.reverse_flow_at_head else []
        self.devices = transfer_device_sections(tree) if regime.opflex_scada_zero_flow else []
        self.keys = [
            Criterion.THERMAL, Criterion.UNDER_VOLTAGE, Criterion.OVER_VOLTAGE,
            Criterion.VOLTAGE_DEVIATION, Criterion.REVERSE_FLOW_HEAD,
            Criterion.OPFLEX_DEVICE, Criterion.NON_CONVERGENCE,
        ]
        self._head_rows, self._head_par, self._head_ptr = self._pack(
            [tree.head_edges[f] for f in self.head_feeders])
        self._dev_rows, self._dev_par, self._dev_ptr = self._pack(
            [tree.section_edges[sec] for _sw, sec in self.devices])

    def _pack(self, groups):
        rows = np.array([r for g in groups for r in g], dtype=np.intp)
        ptr = np.cumsum([0] + [len(g) for g in groups]).astype(np.intp)
        par = self.view.e_parent[rows] if len(rows) else rows
        return rows, par, ptr

    def margins(self, batch: BatchSolution) -> np.ndarray:
        """(len(keys), C) normalized margins; >= 0 everywhere means feasible."""
        view, regime = self.view, self.regime
        n = batch.n_cases
        out = np.empty((len(self.keys), n))
        dev_on = self.base_vmag_pu is not None
        base_vmag = self.base_vmag_pu if dev_on else np.zeros(view.n_cn)
        v_min, v_max = regime.voltage_band

        if _kernels.HAVE_NUMBA:
            _kernels.margins_kernel(
                batch.v_cm, batch.i_cm, self.inv_rating2, self.inv_vbase,
                base_vmag, batch.converged,
                bool(regime.thermal_enabled and view.n_edges), v_min, v_max,
                dev_on, regime.voltage_deviation_limit,
                self._head_rows, self._head_par, self._head_ptr,
                self._dev_rows, self._dev_par, self._dev_ptr,
                self.flow_scale, out)
            return out

        inf = np.full(n, math.inf)
        v = batch.v_cm
        if regime.thermal_enabled and view.n_edges:
            i = batch.i_cm
            t = i.real * i.real
            t += i.imag * i.imag
            t *= self.inv_rating2[None, :]
            out[0] = 1.0 - np.sqrt(t.max(axis=1))
        else:
            out[0] = inf

        vmag = v.real * v.real
        vmag += v.imag * v.imag
        np.sqrt(vmag, out=vmag)
        vmag *= self.inv_vbase[None, :]
        out[1] = vmag.min(axis=1) - v_min
        out[2] = v_max - vmag.max(axis=1)
        if dev_on:
            vmag -= base_vmag[None, :]
            np.abs(vmag, out=vmag)
            out[3] = regime.voltage_deviation_limit - vmag.max(axis=1)
        else:
            out[3] = inf

        if self.head_feeders:
            head = np.stack([batch.head_flow_kw(f) for f in self.head_feeders])
            out[4] = head.min(axis=0) / self.flow_scale
        else:
            out[4] = inf
        if self.devices:
            dev_flow = np.stack([batch.section_flow_kw(sec) for _sw, sec in self.devices])
            out[5] = dev_flow.min(axis=0) / self.flow_scale
        else:
            out[5] = inf

        out[6] = np.where(batch.converged, math.inf, -1.0)
        bad = ~batch.converged
        if bad.any():
            out[:6, bad] = math.inf
        return out

    def feasible(self, margins: np.ndarray) -> np.ndarray:
        return (margins >= 0).all(axis=0)

    def binding(self, margins_col) -> str:
        """Worst failing criterion of one column, or UNCONSTRAINED."""
        k = int(np.argmin(margins_col))
        if margins_col[k] >= 0:
            return UNCONSTRAINED
        return self.keys[k].value


def evaluate(solution: PowerFlowSolution, solution_without_der: PowerFlowSolution,
             view: EnergizedView, regime: CriteriaRegime) -> list:
    """Evaluate one solved state against a regime.

    solution_without_der is the same interval solved with the candidate DER
    tripped (zero injection); the deviation criterion compares the two.
    Returns one CriterionReport per enabled criterion.
    """
    if not (solution.converged and solution_without_der.converged):
        return [CriterionReport(Criterion.NON_CONVERGENCE, -1.0, None)]

    batch = solution.batch
    base = solution_without_der.batch
    reports = []

    if regime.thermal_enabled and view.n_edges:
        amps = np.abs(batch.i_edge[:, 0])
        margin = view.e_rating * regime.loading_limit_fraction - amps
        k = int(np.argmin(margin))
        loc = view.tree_sections[view.e_section[k]].id
        reports.append(CriterionReport(Criterion.THERMAL, float(margin[k]), loc))

    vmag = np.abs(batch.v[:, 0]) / view.cn_vbase
    v_min, v_max = regime.voltage_band
    k = int(np.argmin(vmag))
    reports.append(CriterionReport(Criterion.UNDER_VOLTAGE, float(vmag[k] - v_min),
                                   view.cn_nodes[k]))
    k = int(np.argmax(vmag))
    reports.append(CriterionReport(Criterion.OVER_VOLTAGE, float(v_max - vmag[k]),
                                   view.cn_nodes[k]))

    base_vmag = np.abs(base.v[:, 0]) / view.cn_vbase
    dev = np.abs(vmag - base_vmag)
    k = int(np.argmax(dev))
    reports.append(CriterionReport(Criterion.VOLTAGE_DEVIATION,
                                   float(regime.voltage_deviation_limit - dev[k]),
                                   view.cn_nodes[k]))

    if regime.reverse_flow_at_head:
        worst, loc = math.inf, None
        for feeder_id in sorted(view.head_edges):
            kw = float(batch.head_flow_kw(feeder_id)[0])
            if kw < worst:
                src = next(s for s in view.network.sources if s.feeder_id == feeder_id)
                worst, loc = kw, src.head_section_id
        reports.append(CriterionReport(Criterion.REVERSE_FLOW_HEAD, worst, loc))

    if regime.opflex_scada_zero_flow:
        worst, loc = math.inf, None
        for _sw_id, sec_id in transfer_device_sections(view):
            kw = float(batch.section_flow_kw(sec_id)[0])
            if kw < worst:
                worst, loc = kw, sec_id
        reports.append(CriterionReport(Criterion.OPFLEX_DEVICE, worst, loc))

    if regime.protection_plugin is not None:
        margin, loc = regime.protection_plugin(view, solution)
        reports.append(CriterionReport(Criterion.PROTECTION, margin, loc))
    return reports
