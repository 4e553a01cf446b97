"""Steady-state radial power flow by forward/backward sweeps.

The sweep core operates on the per-phase conductor arrays of an
EnergizedView and is batched: the extraction vector may carry many
independent cases as columns (the hosting-capacity search exploits this).
Loads and candidate DER are constant-power; an optional volt-var droop
couples injected reactive power to local voltage inside the fixed point.

Sign conventions: extraction is consumption-positive; branch flows are
measured at the source-side end of each section, positive away from the
source (so a flow at a device includes everything downstream, losses too).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .network import EnergizedView, SourceBus, Switch

VOLTAGE_TOLERANCE_PU = 1e-6
MAX_SWEEPS = 50

# volt-var droop breakpoints: full capacitive below the first knee, dead band
# in the middle, full inductive above the last knee
VOLT_VAR_KNEES = (0.96, 0.98, 1.02, 1.04)
_VV_X = np.array(VOLT_VAR_KNEES)
_VV_Y = np.array([1.0, 0.0, 0.0, -1.0])


class PowerFlowError(Exception):
    pass


def apply_volt_var(voltage_pu):
    """Reactive output as a fraction of rated kVA for a given voltage.

    Positive is capacitive (var injection). Accepts scalars or arrays.
    """
    return np.interp(voltage_pu, _VV_X, _VV_Y)


@dataclass(frozen=True)
class InjectionSet:
    """Candidate DER injections in kW + j*kvar per node (generation positive)."""
    injections: dict = field(default_factory=dict)
    volt_var_enabled: bool = False


class BatchSolution:
    """Raw sweep result over conductor arrays; cases are array rows.

    `tree` is either a full EnergizedView or one of its TreeComponents.
    The (n_cn, C) column views `.v` and `.i_edge` serve single-case callers.
    """

    def __init__(self, tree, v_cm, i_cm, converged, iterations):
        self.view = tree
        self.v_cm = v_cm              # (C, n_cn) complex volts
        self.i_cm = i_cm              # (C, n_edges) complex amps
        self.converged = converged    # (C,) bool
        self.iterations = iterations

    @property
    def n_cases(self) -> int:
        return self.v_cm.shape[0]

    @property
    def v(self):
        return self.v_cm.T

    @property
    def i_edge(self):
        return self.i_cm.T

    def vmag_pu(self):
        return np.abs(self.v) / self.view.cn_vbase[:, None]

    def losses_kw(self):
        r = self.view.e_z.real
        return (np.abs(self.i_cm) ** 2 * r[None, :]).sum(axis=1) / 1000.0

    def rows_flow_kw(self, rows):
        """Real power through the given edge rows, summed; (C,) in kW."""
        f = self.v_cm[:, self.view.e_parent[rows]] * np.conj(self.i_cm[:, rows])
        return f.real.sum(axis=1) / 1000.0

    def section_flow_kw(self, section_id: str):
        return self.rows_flow_kw(self.view.section_edges[section_id])

    def head_flow_kw(self, feeder_id: str):
        return self.rows_flow_kw(self.view.head_edges[feeder_id])


_NO_ROWS = np.empty(0, dtype=np.intp)
_NO_C = np.empty(0, dtype=complex)
_NO_F = np.empty(0, dtype=float)


def sweep_solve(tree, s_extraction_va, v0=None,
                tol: float = VOLTAGE_TOLERANCE_PU, max_iter: int = MAX_SWEEPS,
                volt_var_rows=None, volt_var_rated_va=None) -> BatchSolution:
    """Iterate backward current accumulation / forward voltage updates to a
    fixed point on a view or tree component.

    s_extraction_va: (n_cn,) for one case or case-major (C, n_cn), complex VA,
    consumption positive. Convergence is per case: max |dV| <= tol in per
    unit. Each case sweeps its tree independently to its own fixed point.
    """
    s = np.ascontiguousarray(s_extraction_va, dtype=complex)
    if s.ndim == 1:
        s = s[None, :]
    n_cases, n_cn = s.shape
    if n_cn != tree.n_cn:
        raise PowerFlowError(f"extraction vector has {n_cn} entries, view has {tree.n_cn}")

    if v0 is None:
        v = np.repeat(tree.v_flat[None, :], n_cases, axis=0)
    else:
        v = np.array(v0, dtype=complex)
        if v.ndim == 1:
            v = np.repeat(v[None, :], n_cases, axis=0)
        else:
            v = np.ascontiguousarray(v)

    volt_var = volt_var_rows is not None and len(volt_var_rows) > 0
    s_conj = np.conj(s)
    if volt_var:
        if n_cases != 1:
            raise PowerFlowError("volt-var injections solve one case at a time")
        vv_rows = np.asarray(volt_var_rows, dtype=np.intp)
        vv_base = s[0, vv_rows].copy()
        vv_rated = np.asarray(volt_var_rated_va, dtype=float)
        vv_inv_vb = 1.0 / tree.cn_vbase[vv_rows]
    else:
        vv_rows, vv_base, vv_rated, vv_inv_vb = _NO_ROWS, _NO_C, _NO_F, _NO_F

    i_cm = np.empty((n_cases, tree.n_edges), dtype=complex)
    converged = np.zeros(n_cases, dtype=np.bool_)
    inv_vb2 = (1.0 / tree.cn_vbase[tree.e_child]) ** 2 if tree.n_edges else _NO_F
    tol2 = tol * tol

    if tree.n_edges == 0:
        converged[:] = True
        return BatchSolution(tree, v, i_cm, converged, 1)

    if _kernels.HAVE_NUMBA:
        iterations = _kernels.sweep_kernel(
            v, s_conj, tree.e_parent, tree.e_child, tree.e_z, inv_vb2,
            tol2, max_iter, vv_rows, vv_base, vv_rated, vv_inv_vb,
            np.asarray(VOLT_VAR_KNEES), i_cm, converged)
        return BatchSolution(tree, v, i_cm, converged, int(iterations))

    # numpy fallback, level-vectorized
    e_parent, e_child, e_z = tree.e_parent, tree.e_child, tree.e_z
    iterations = 0
    vv_q = np.zeros(len(vv_rows))
    with np.errstate(all="ignore"):
        for iterations in range(1, max_iter + 1):
            if volt_var:
                frac = apply_volt_var(np.abs(v[0, vv_rows]) * vv_inv_vb)
                vv_q += _kernels.VOLT_VAR_DAMPING * (frac * vv_rated - vv_q)
                s_conj[:, vv_rows] = np.conj(vv_base - 1j * vv_q)[None, :]
            w = v.real * v.real
            w += v.imag * v.imag
            acc = s_conj * v
            acc /= w
            for start, end, seg_starts, seg_parents in reversed(tree.levels):
                blk_i = acc[:, e_child[start:end]]
                i_cm[:, start:end] = blk_i
                acc[:, seg_parents] += np.add.reduceat(blk_i, seg_starts, axis=1)
            dv2 = np.zeros(n_cases)
            for start, end, _ss, _sp in tree.levels:
                child = e_child[start:end]
                v_new = v[:, e_parent[start:end]] - e_z[None, start:end] * i_cm[:, start:end]
                d = v_new - v[:, child]
                step = d.real * d.real
                step += d.imag * d.imag
                step *= inv_vb2[None, start:end]
                np.maximum(dv2, step.max(axis=1), out=dv2)
                v[:, child] = v_new
            converged = dv2 <= tol2
            if converged.all():
                break
    bad = ~np.isfinite(v).all(axis=1)
    if bad.any():
        converged = converged & ~bad
    return BatchSolution(tree, v, i_cm, converged, iterations)


@dataclass
class PowerFlowSolution:
    """One interval, one configuration: per-phase voltages and section flows."""
    node_voltages: dict          # node -> {phase: complex pu}
    branch_flows: dict           # section -> {phase: complex kVA}
    losses: float                # kW, network total
    converged: bool
    iterations: int
    view: EnergizedView = None
    batch: BatchSolution = None

    def voltage_pu(self, node_id: str, phase: str) -> complex:
        return self.node_voltages[node_id][phase]

    def voltages_csv(self) -> str:
        lines = ["node,phase,voltage_pu"]
        for node_id in sorted(self.node_voltages):
            for ph, v in sorted(self.node_voltages[node_id].items()):
                lines.append(f"{node_id},{ph},{abs(v):.6f}")
        return "\n".join(lines) + "\n"

    def flows_csv(self) -> str:
        lines = ["section,phase,kw,kvar"]
        for sec_id in sorted(self.branch_flows):
            for ph, f in sorted(self.branch_flows[sec_id].items()):
                lines.append(f"{sec_id},{ph},{f.real:.3f},{f.imag:.3f}")
        return "\n".join(lines) + "\n"


def _injection_extraction(view: EnergizedView, injections: InjectionSet):
    """Extraction delta (negative for generation) plus volt-var row metadata."""
    delta = np.zeros(view.n_cn, dtype=complex)
    vv_rows, vv_rated = [], []
    for node_id in sorted(injections.injections):
        rows = view.node_cn.get(node_id)
        if not rows:
            raise PowerFlowError(f"injection at de-energized or unknown node {node_id}")
        kva = injections.injections[node_id]
        delta[rows] -= kva * 1000.0 / len(rows)
        if injections.volt_var_enabled:
            rated_va = abs(kva) * 1000.0 / len(rows)
            vv_rows.extend(rows)
            vv_rated.extend([rated_va] * len(rows))
    return delta, np.array(vv_rows, dtype=np.intp), np.array(vv_rated, dtype=float)


def solve(view: EnergizedView, loads_at_interval: dict,
          injections: InjectionSet | None = None) -> PowerFlowSolution:
    """Solve one interval on an energized view.

    loads_at_interval maps node id -> complex kVA (consumption, Re >= 0).
    Injections are generation-positive and may enable the volt-var droop.
    Non-convergence is reported on the solution, not raised.
    """
    for node_id, kva in loads_at_interval.items():
        if complex(kva).real < 0:
            raise PowerFlowError(f"load at {node_id} has negative real part")
    s = view.load_extraction_va(loads_at_interval)
    vv_rows = vv_rated = None
    if injections is not None and injections.injections:
        delta, rows, rated = _injection_extraction(view, injections)
        s = s + delta
        if injections.volt_var_enabled:
            vv_rows, vv_rated = rows, rated

    batch = sweep_solve(view, s, volt_var_rows=vv_rows, volt_var_rated_va=vv_rated)

    node_voltages = {}
    for (node_id, ph), idx in view.cn_index.items():
        node_voltages.setdefault(node_id, {})[ph] = batch.v_cm[0, idx] / view.cn_vbase[idx]
    flow = batch.v_cm[0, view.e_parent] * np.conj(batch.i_cm[0])
    branch_flows = {}
    for sec in view.tree_sections:
        per_phase = {}
        for ph, e in zip(sec.phases, view.section_edges[sec.id]):
            per_phase[ph] = flow[e] / 1000.0
        branch_flows[sec.id] = per_phase
    return PowerFlowSolution(
        node_voltages=node_voltages,
        branch_flows=branch_flows,
        losses=float(batch.losses_kw()[0]),
        converged=bool(batch.converged[0]),
        iterations=batch.iterations,
        view=view,
        batch=batch,
    )


def head_flow(solution: PowerFlowSolution, source: SourceBus) -> float:
    """Real power (kW) through the feeder head; negative means reverse flow
    into the substation."""
    if not solution.converged:
        raise PowerFlowError("head flow undefined on an unconverged solution")
    flows = solution.branch_flows.get(source.head_section_id)
    if flows is None:
        raise PowerFlowError(f"head section {source.head_section_id} not energized")
    return sum(f.real for f in flows.values())


def device_flow(solution: PowerFlowSolution, switch: Switch) -> float:
    """Real power (kW) through a closed switch's section, positive toward the
    load side."""
    if not solution.converged:
        raise PowerFlowError("device flow undefined on an unconverged solution")
    view = solution.view
    states = {sw.id for sw in view.closed_switches()}
    if switch.id not in states:
        raise PowerFlowError(f"switch {switch.id} is open: no defined flow")
    flows = solution.branch_flows.get(switch.section_id)
    if flows is None:
        raise PowerFlowError(f"section {switch.section_id} is not energized")
    return sum(f.real for f in flows.values())
