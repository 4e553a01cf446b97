import math

import numpy as np
import pytest

from feederhc import (Configuration, CriteriaRegime, Criterion, InjectionSet,
                      apply_configuration, evaluate, regime_presets, solve)
from feederhc.criteria import BatchCriteria, transfer_device_sections

from .conftest import chain_network, two_feeder_tie


def base_view(net):
    return apply_configuration(net, net.base_configuration())


def report_by(reports, criterion):
    return next(r for r in reports if r.criterion == criterion)


class TestEvaluate:
    def test_healthy_base_passes_everything(self):
        net = chain_network([0.05 + 0.1j] * 2, [150.0, 100.0])
        view = base_view(net)
        sol = solve(view, {"n1": 150 + 0j, "n2": 100 + 0j})
        reports = evaluate(sol, sol, view, regime_presets()["classical"])
        assert all(r.passed for r in reports)
        assert {r.criterion for r in reports} == {
            Criterion.THERMAL, Criterion.UNDER_VOLTAGE, Criterion.OVER_VOLTAGE,
            Criterion.VOLTAGE_DEVIATION, Criterion.REVERSE_FLOW_HEAD}

    def test_deviation_margin_is_limit_when_der_absent(self):
        net = chain_network([0.05 + 0.1j], [200.0])
        view = base_view(net)
        sol = solve(view, {"n1": 200 + 0j})
        regime = regime_presets()["classical"]
        rep = report_by(evaluate(sol, sol, view, regime), Criterion.VOLTAGE_DEVIATION)
        assert rep.worst_margin == pytest.approx(regime.voltage_deviation_limit)

    def test_reverse_flow_margin_equals_negative_excess(self):
        # lossless: head flow = load - injection exactly
        net = chain_network([0j], [400.0])
        view = base_view(net)
        base = solve(view, {"n1": 400 + 0j})
        sol = solve(view, {"n1": 400 + 0j}, InjectionSet({"n1": 650 + 0j}))
        rep = report_by(evaluate(sol, base, view, regime_presets()["classical"]),
                        Criterion.REVERSE_FLOW_HEAD)
        assert not rep.passed
        assert rep.worst_margin == pytest.approx(-250.0, abs=1e-6)
        assert rep.location == "s0"

    def test_opflex_device_fails_while_head_passes(self):
        # injection downstream of the SCADA switch exceeds the downstream
        # load but stays below the feeder total: device reverses, head holds
        net = two_feeder_tie(load1_kw=150.0, load2_kw=400.0)
        view = base_view(net)
        loads = {"a2": 150 + 0j, "b2": 400 + 0j, "a1": 0j}
        loads["a1"] = 300 + 0j
        base = solve(view, loads)
        sol = solve(view, loads, InjectionSet({"a2": 250 + 0j}))
        reports = evaluate(sol, base, view, regime_presets()["opflex"])
        head = report_by(reports, Criterion.REVERSE_FLOW_HEAD)
        dev = report_by(reports, Criterion.OPFLEX_DEVICE)
        assert head.passed
        assert not dev.passed
        assert dev.location == "sa1"

    def test_thermal_location_attains_worst_margin(self):
        net = chain_network([0.05 + 0.1j] * 3, [100.0, 100.0, 3000.0])
        view = base_view(net)
        loads = {"n1": 100 + 0j, "n2": 100 + 0j, "n3": 3000 + 0j}
        sol = solve(view, loads)
        rep = report_by(evaluate(sol, sol, view, regime_presets()["classical"]),
                        Criterion.THERMAL)
        # re-scan all sections: reported location carries the max current
        amps = {sid: abs(list(sol.branch_flows[sid].values())[0]) * 1000
                / (abs(sol.node_voltages[view.network.section_by_id[sid].from_node]["A"]) * 7199.6)
                for sid in sol.branch_flows}
        assert rep.location == max(amps, key=amps.get)

    def test_non_convergence_single_failure_report(self):
        net = chain_network([5 + 10j] * 2, [20000.0, 20000.0])
        view = base_view(net)
        sol = solve(view, {"n1": 20000 + 0j, "n2": 20000 + 0j})
        reports = evaluate(sol, sol, view, regime_presets()["classical"])
        assert len(reports) == 1
        assert reports[0].criterion == Criterion.NON_CONVERGENCE
        assert not reports[0].passed

    def test_protection_plugin_slot(self):
        net = chain_network([0.05 + 0.1j], [100.0])
        view = base_view(net)
        sol = solve(view, {"n1": 100 + 0j})
        regime = CriteriaRegime(name="p", protection_plugin=lambda v, s: (-1.5, "relay7"))
        rep = report_by(evaluate(sol, sol, view, regime), Criterion.PROTECTION)
        assert not rep.passed
        assert rep.location == "relay7"


class TestRegimePresets:
    def test_preset_flags(self):
        presets = regime_presets()
        assert set(presets) == {"classical", "opflex", "transfer_study"}
        assert not presets["classical"].opflex_scada_zero_flow
        assert presets["opflex"].opflex_scada_zero_flow
        assert not presets["transfer_study"].opflex_scada_zero_flow
        for r in presets.values():
            assert r.thermal_enabled and r.reverse_flow_at_head

    def test_opflex_without_scada_switches_equals_classical(self):
        net = chain_network([0.05 + 0.1j] * 2, [150.0, 100.0])
        view = base_view(net)
        sol = solve(view, {"n1": 150 + 0j, "n2": 100 + 0j})
        rep_c = evaluate(sol, sol, view, regime_presets()["classical"])
        rep_o = evaluate(sol, sol, view, regime_presets()["opflex"])
        # no transfer devices: the opflex report set adds nothing failing
        assert {r.criterion for r in rep_o} - {r.criterion for r in rep_c} <= {
            Criterion.OPFLEX_DEVICE}
        dev = report_by(rep_o, Criterion.OPFLEX_DEVICE)
        assert dev.passed and math.isinf(dev.worst_margin)

    def test_classical_vs_opflex_differ_only_in_device_report(self):
        net = two_feeder_tie(load1_kw=150.0, load2_kw=400.0)
        view = base_view(net)
        loads = {"a1": 300 + 0j, "a2": 150 + 0j, "b2": 400 + 0j}
        base = solve(view, loads)
        sol = solve(view, loads, InjectionSet({"a2": 250 + 0j}))
        rep_c = {r.criterion: r for r in evaluate(sol, base, view, regime_presets()["classical"])}
        rep_o = {r.criterion: r for r in evaluate(sol, base, view, regime_presets()["opflex"])}
        assert set(rep_o) - set(rep_c) == {Criterion.OPFLEX_DEVICE}
        for crit, rep in rep_c.items():
            assert rep_o[crit].worst_margin == rep.worst_margin

    def test_invalid_regimes_rejected(self):
        with pytest.raises(ValueError):
            CriteriaRegime(voltage_band=(1.05, 0.95))
        with pytest.raises(ValueError):
            CriteriaRegime(voltage_deviation_limit=0.5)


class TestMonotoneRegimeStrength:
    @pytest.mark.parametrize("inj_kw", [0.0, 100.0, 250.0, 500.0, 900.0])
    def test_opflex_failures_superset_of_classical(self, inj_kw):
        net = two_feeder_tie(load1_kw=150.0, load2_kw=400.0)
        view = base_view(net)
        loads = {"a1": 300 + 0j, "a2": 150 + 0j, "b2": 400 + 0j}
        base = solve(view, loads)
        sol = solve(view, loads, InjectionSet({"a2": inj_kw + 0j}) if inj_kw else None)
        failed_c = {r.criterion for r in
                    evaluate(sol, base, view, regime_presets()["classical"]) if not r.passed}
        failed_o = {r.criterion for r in
                    evaluate(sol, base, view, regime_presets()["opflex"]) if not r.passed}
        assert failed_c <= failed_o


class TestBatchCriteria:
    def test_device_selection_rules(self):
        net = two_feeder_tie()
        view = base_view(net)
        devices = transfer_device_sections(view)
        # closed mainline boundary qualifies; the open tie does not
        assert [sec for _sw, sec in devices] == ["sa1"]
        transfer = Configuration("t", frozenset({"sw_a"}), frozenset({"sw_tie"}))
        devices_t = transfer_device_sections(apply_configuration(net, transfer))
        assert [sec for _sw, sec in devices_t] == ["tie"]

    def test_margins_match_rich_reports(self):
        net = two_feeder_tie(load1_kw=150.0, load2_kw=400.0)
        view = base_view(net)
        loads = {"a1": 300 + 0j, "a2": 150 + 0j, "b2": 400 + 0j}
        base = solve(view, loads)
        sol = solve(view, loads, InjectionSet({"a2": 250 + 0j}))
        regime = regime_presets()["opflex"]
        base_vmag = np.abs(base.batch.v_cm[0]) / view.cn_vbase
        bc = BatchCriteria(view, regime, base_vmag_pu=base_vmag, flow_scale_kw=850.0)
        m = bc.margins(sol.batch)
        reports = {r.criterion: r for r in evaluate(sol, base, view, regime)}
        k = bc.keys
        assert m[k.index(Criterion.REVERSE_FLOW_HEAD), 0] * 850.0 == pytest.approx(
            reports[Criterion.REVERSE_FLOW_HEAD].worst_margin, abs=1e-6)
        assert m[k.index(Criterion.OPFLEX_DEVICE), 0] * 850.0 == pytest.approx(
            reports[Criterion.OPFLEX_DEVICE].worst_margin, abs=1e-6)
        assert m[k.index(Criterion.UNDER_VOLTAGE), 0] == pytest.approx(
            reports[Criterion.UNDER_VOLTAGE].worst_margin, abs=1e-9)
        assert (m >= 0).all(axis=0)[0] == all(r.passed for r in reports.values())
