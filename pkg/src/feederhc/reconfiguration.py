"""Transfer analysis across switching configurations.

Enumerates the radial transfer configurations reachable by closing a
normally-open tie and opening a block-boundary switch, evaluates hosting
capacity per configuration (classical checks, no SCADA proxy rule), and
aggregates: worst-config transfer HC, OpFlex-vs-transfer differences, and
probability-weighted expected-outcome statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .criteria import CriteriaRegime
from .hosting import (GENERATION, LOAD, HcResult, _assemble_result,
                      flat_snapshot_hc, hc_for_sections, hc_profile_all)
from .network import Configuration, Network, apply_configuration, validate_radiality

BASE_CONFIG_ID = "base"
DE_ENERGIZED = "de_energized"


class TransferError(Exception):
    pass


def enumerate_configurations(network: Network, transfer_probability: float = 0.01,
                             diagnostics: list | None = None) -> list:
    """Base configuration plus every radial (close tie, open boundary) pair.

    Non-radial candidates are filtered silently; pass a diagnostics list to
    collect what was dropped. The base case keeps the residual probability,
    which by construction dominates any single transfer.
    """
    ties = sorted((sw for sw in network.switches if sw.normally_open), key=lambda s: s.id)
    boundaries = sorted(
        (sw for sw in network.switches
         if sw.switching_block_boundary and not sw.normally_open),
        key=lambda s: s.id)

    base = network.base_configuration()
    transfers = []
    for tie in ties:
        for boundary in boundaries:
            cand = Configuration(
                f"transfer_{tie.id}_{boundary.id}",
                open_switches=(base.open_switches - {tie.id}) | {boundary.id},
                closed_switches=(base.closed_switches - {boundary.id}) | {tie.id},
                probability=transfer_probability,
            )
            ok, diags = validate_radiality(network, cand)
            if ok:
                transfers.append(cand)
            elif diagnostics is not None:
                diagnostics.append(f"filtered {cand.id}: " + "; ".join(diags))

    base_probability = 1.0 - transfer_probability * len(transfers)
    if base_probability <= 0:
        raise TransferError("transfer probabilities exceed 1; lower transfer_probability")
    base = Configuration(BASE_CONFIG_ID, base.open_switches, base.closed_switches,
                         base_probability)
    return [base] + transfers


def _require_base(configs) -> None:
    if not configs:
        raise TransferError("configuration list is empty")
    if not any(c.id == BASE_CONFIG_ID for c in configs):
        raise TransferError("configuration list must include the base case")


def transfer_hc_all(network: Network, regime: CriteriaRegime, net_load,
                    configs, kind: str = GENERATION, sections=None,
                    mode: str = "flat", resolution_kw: float = 1.0) -> dict:
    """Transfer-aware HC: per interval, the minimum over configurations in
    which the section is energized.

    Returns {section_id: HcResult} with bindings recorded as
    "criterion@configuration". mode "flat" evaluates the percentile demand
    snapshots, "profile" the full interval grid.
    """
    _require_base(configs)
    per_config = {}
    for config in sorted(configs, key=lambda c: c.id):
        view = apply_configuration(network, config)
        if mode == "flat":
            per_config[config.id] = flat_snapshot_hc(
                view, regime, net_load, kind, sections, resolution_kw)
        else:
            per_config[config.id] = hc_profile_all(
                view, regime, net_load, kind, sections=sections,
                resolution_kw=resolution_kw)

    base_results = per_config[BASE_CONFIG_ID]
    out = {}
    for sid in sorted(base_results):
        profile, binding = {}, {}
        intervals = sorted(base_results[sid].profile)
        for iv in intervals:
            best = None
            for cid in sorted(per_config):
                r = per_config[cid].get(sid)
                if r is None or iv not in r.profile:
                    continue            # section de-energized under cid
                if best is None or r.profile[iv] < best[0]:
                    best = (r.profile[iv], f"{r.profile_binding[iv]}@{cid}")
            if best is None:
                best = (0.0, DE_ENERGIZED)
            profile[iv], binding[iv] = best
        result = _assemble_result(sid, kind, profile, binding, regime.name,
                                  "transfer", getattr(net_load, "scenario_id", ""))
        out[sid] = result
    return out


def transfer_hc(section, network: Network, regime: CriteriaRegime, net_load,
                configs, kind: str = GENERATION, mode: str = "flat",
                resolution_kw: float = 1.0) -> HcResult:
    """Transfer-aware HC for one section (see transfer_hc_all)."""
    sid = section if isinstance(section, str) else section.id
    results = transfer_hc_all(network, regime, net_load, configs, kind,
                              sections=[sid], mode=mode, resolution_kw=resolution_kw)
    return results[sid]


@dataclass
class DiffResult:
    per_section: dict        # section_id -> (hc_opflex, hc_transfer, diff)
    total_diff_kw: float
    by_feeder: dict          # feeder_id -> summed diff kW
    by_phase_class: dict     # phase class -> summed diff kW
    scenario_id: str = ""

    def diffs(self) -> np.ndarray:
        return np.array([d for _o, _t, d in self.per_section.values()])


def opflex_vs_transfer_diff(results_opflex: dict, results_transfer: dict,
                            network: Network) -> DiffResult:
    """Per-section flat HC difference, OpFlex minus transfer analysis.

    Both inputs map section_id -> HcResult over the same section set;
    mismatches are rejected with the offending ids.
    """
    only_a = sorted(set(results_opflex) - set(results_transfer))
    only_b = sorted(set(results_transfer) - set(results_opflex))
    if only_a or only_b:
        raise TransferError(
            f"section sets differ: opflex-only={only_a[:5]} transfer-only={only_b[:5]}")

    base_view = apply_configuration(network, network.base_configuration())
    per_section, by_feeder, by_class = {}, {}, {}
    total = 0.0
    for sid in sorted(results_opflex):
        o = results_opflex[sid].flat_kw
        t = results_transfer[sid].flat_kw
        d = o - t
        per_section[sid] = (o, t, d)
        total += d
        sec = network.section_by_id[sid]
        src = base_view.serving_source(sec.to_node)
        feeder = src.feeder_id if src else "de_energized"
        by_feeder[feeder] = by_feeder.get(feeder, 0.0) + d
        cls = "three_phase" if sec.n_phases == 3 else "one_two_phase"
        by_class[cls] = by_class.get(cls, 0.0) + d
    scenario = next(iter(results_opflex.values())).scenario_id if results_opflex else ""
    return DiffResult(per_section, total, dict(sorted(by_feeder.items())),
                      dict(sorted(by_class.items())), scenario)


def expected_outcome_stats(hc_by_config: dict, probabilities: dict,
                           epsilon: float):
    """Probability-weighted statistics over per-configuration HC values.

    Returns (expectation, chance_constrained): the expectation sum(p*HC), and
    the largest X whose total probability of HC >= X is at least 1-epsilon.
    """
    if set(hc_by_config) != set(probabilities):
        raise TransferError("configuration sets of values and probabilities differ")
    total_p = sum(probabilities.values())
    if abs(total_p - 1.0) > 1e-9:
        raise TransferError(f"configuration probabilities sum to {total_p!r}, not 1")
    if not 0 <= epsilon < 1:
        raise TransferError(f"epsilon {epsilon} outside [0, 1)")

    expectation = sum(probabilities[c] * hc_by_config[c] for c in hc_by_config)
    ranked = sorted(hc_by_config, key=lambda c: -hc_by_config[c])
    cum = 0.0
    chance = min(hc_by_config.values())
    for c in ranked:
        cum += probabilities[c]
        if cum >= 1.0 - epsilon - 1e-12:
            chance = hc_by_config[c]
            break
    return expectation, chance


def expected_outcome_hc(section, network: Network, net_load, configs,
                        epsilon: float, regime: CriteriaRegime | None = None,
                        kind: str = GENERATION, resolution_kw: float = 1.0):
    """Expected-outcome HC of one section over configuration probabilities.

    Per-configuration HC uses average (mean-basis) demand at the mean-demand
    extreme intervals, not the percentile envelopes. Returns
    (expectation_kw, chance_constrained_kw, hc_by_config).
    """
    _require_base(configs)
    if regime is None:
        regime = CriteriaRegime(name="transfer_study")
    sid = section if isinstance(section, str) else section.id
    sec = network.section_by_id[sid]

    totals = None
    hc_by_config, probabilities = {}, {}
    for config in sorted(configs, key=lambda c: c.id):
        probabilities[config.id] = config.probability
        view = apply_configuration(network, config)
        if sec.to_node not in view.source_of:
            hc_by_config[config.id] = 0.0
            continue
        if totals is None:
            mean = net_load.total_net_kw("mean")
            iv_min = net_load.grid[int(np.argmin(mean))]
            iv_peak = net_load.grid[int(np.argmax(mean))]
            totals = (iv_min, iv_peak)
        values = []
        for iv in totals:
            s_base = net_load.extraction_va(view, iv, basis="mean")
            cell = hc_for_sections(view, regime, s_base, [sec], kind, resolution_kw)
            values.append(cell[sid][0])
        hc_by_config[config.id] = min(values)

    expectation, chance = expected_outcome_stats(hc_by_config, probabilities, epsilon)
    return expectation, chance, hc_by_config


DEFAULT_CENSUS_EDGES = (0.0, 1.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2500.0,
                        5000.0, math.inf)


@dataclass
class CensusResult:
    configuration_id: str
    values: dict             # section_id -> load HC kW
    zero_hc_sections: int
    histogram: list          # counts per bucket
    bucket_edges: tuple


def load_hc_census(network: Network, configs, regime: CriteriaRegime, net_load,
                   sections=None, bucket_edges=DEFAULT_CENSUS_EDGES,
                   resolution_kw: float = 1.0) -> dict:
    """Distribution of flat load HC across sections at peak demand, per
    configuration, with the count of zero-HC sections."""
    _require_base(configs)
    iv_peak, basis = net_load.snapshot_intervals()[1]
    out = {}
    for config in sorted(configs, key=lambda c: c.id):
        view = apply_configuration(network, config)
        wanted = network.sections if sections is None else [
            network.section_by_id[s] if isinstance(s, str) else s for s in sections]
        secs = [s for s in wanted if s.to_node in view.source_of]
        s_base = net_load.extraction_va(view, iv_peak, basis=basis)
        cell = hc_for_sections(view, regime, s_base, secs, LOAD, resolution_kw)
        values = {sid: kw for sid, (kw, _b) in cell.items()}
        arr = np.array(list(values.values())) if values else np.array([])
        zero = int((arr < resolution_kw / 2).sum()) if arr.size else 0
        counts, _ = np.histogram(arr, bins=np.array(bucket_edges))
        out[config.id] = CensusResult(config.id, values, zero,
                                      counts.tolist(), tuple(bucket_edges))
    return out
