import numpy as np
import pytest

from feederhc import (FeederSpec, InjectionSet, PowerFlowError,
                      apply_configuration, apply_volt_var, device_flow,
                      generate_synthetic_feeder, head_flow, solve)
from feederhc.power_flow import sweep_solve

from .conftest import VB, chain_network, two_feeder_tie
from .oracles import power_balance_voltages, two_bus_voltage_pu

S_BASE_1PH = 1e6          # VA per phase used to define per-unit test cases
Z_BASE = VB * VB / S_BASE_1PH


def base_view(net):
    return apply_configuration(net, net.base_configuration())


class TestSolveBasics:
    def test_zero_load_flat_profile(self):
        net = chain_network([0.1 + 0.2j] * 3, [None, None, None])
        sol = solve(base_view(net), {})
        assert sol.converged
        assert sol.losses == 0.0
        for node in ("n0", "n1", "n2", "n3"):
            assert abs(sol.node_voltages[node]["A"]) == pytest.approx(1.0, abs=1e-12)
        for sec in ("s0", "s1", "s2"):
            assert sol.branch_flows[sec]["A"] == 0

    def test_two_bus_matches_closed_form(self):
        # z = 0.01 + j0.02 pu, load 0.10 + j0.05 pu
        z = (0.01 + 0.02j) * Z_BASE
        net = chain_network([z], [None])
        expected = two_bus_voltage_pu(0.10, 0.05, 0.01, 0.02)
        assert expected == pytest.approx(0.99799485, abs=1e-7)
        sol = solve(base_view(net), {"n1": (0.10 + 0.05j) * S_BASE_1PH / 1000})
        assert sol.converged
        assert abs(sol.node_voltages["n1"]["A"]) == pytest.approx(expected, abs=1e-6)

    def test_balanced_injection_zeroes_head_flow(self):
        # lossless wire, injection equal to the local load at every load node
        net = chain_network([0j, 0j], [400.0, 250.0])
        view = base_view(net)
        loads = {"n1": 400 + 0j, "n2": 250 + 0j}
        inj = InjectionSet({"n1": 400 + 0j, "n2": 250 + 0j})
        sol = solve(view, loads, inj)
        assert head_flow(sol, net.sources[0]) == pytest.approx(0.0, abs=1e-9)

    def test_negative_load_rejected(self):
        net = chain_network([0.1 + 0.1j], [100.0])
        with pytest.raises(PowerFlowError, match="negative real"):
            solve(base_view(net), {"n1": -50 + 0j})

    def test_injection_at_unknown_node_rejected(self):
        net = chain_network([0.1 + 0.1j], [100.0])
        with pytest.raises(PowerFlowError, match="de-energized or unknown"):
            solve(base_view(net), {}, InjectionSet({"zz": 100 + 0j}))

    def test_csv_serialization_shapes(self):
        net = chain_network([0.1 + 0.2j], [120.0])
        sol = solve(base_view(net), {"n1": 120 + 0j})
        v_lines = sol.voltages_csv().strip().splitlines()
        f_lines = sol.flows_csv().strip().splitlines()
        assert v_lines[0] == "node,phase,voltage_pu"
        assert len(v_lines) == 3
        assert f_lines[0] == "section,phase,kw,kvar"
        assert len(f_lines) == 2


class TestHeadAndDeviceFlow:
    def test_pure_load_feeder_positive_head(self):
        net = chain_network([0.05 + 0.1j] * 2, [300.0, 200.0])
        sol = solve(base_view(net), {"n1": 300 + 0j, "n2": 200 + 0j})
        assert head_flow(sol, net.sources[0]) > 500.0  # loads plus losses

    def test_injection_above_load_reverses_head(self):
        net = chain_network([0.05 + 0.1j] * 2, [300.0, None])
        sol = solve(base_view(net), {"n1": 300 + 0j},
                    InjectionSet({"n2": 800 + 0j}))
        assert head_flow(sol, net.sources[0]) < 0

    def test_device_flow_includes_downstream_losses(self):
        # 3-node chain, SCADA switch on the middle section; flow at the
        # device equals downstream load plus downstream (not upstream) losses
        from feederhc import LoadPoint, Network, Node, Section, SourceBus, Switch
        z = (1.0 + 2.0j)
        nodes = [Node(f"n{k}", "A", k, VB) for k in range(3)]
        secs = [Section("s0", "n0", "n1", "A", z, 1, 400),
                Section("s1", "n1", "n2", "A", z, 1, 400)]
        sw = Switch("dev", "s1", scada_controlled=True)
        net = Network(nodes, secs, [sw], [SourceBus("n0", 1.0, "F", "s0")],
                      [LoadPoint("n2", 200.0, 1.0, "p", 1)], ["F"])
        view = base_view(net)
        sol = solve(view, {"n2": 200 + 0j})
        v = power_balance_voltages(view, view.load_extraction_va({"n2": 200 + 0j}))
        i12 = (v[1] - v[2]) / z
        expected_kw = (v[1] * np.conj(i12)).real / 1000
        assert device_flow(sol, sw) == pytest.approx(expected_kw, abs=1e-3)
        assert expected_kw > 200.0
        assert device_flow(sol, sw) < head_flow(sol, net.sources[0])

    def test_downstream_injection_reverses_device(self):
        net = two_feeder_tie(load1_kw=200.0)
        view = base_view(net)
        sw = net.switch_by_id["sw_a"]
        sol = solve(view, {"a2": 200 + 0j, "b2": 300 + 0j},
                    InjectionSet({"a2": 300 + 0j}))
        assert device_flow(sol, sw) == pytest.approx(-100.0, abs=1.0)

    def test_open_switch_has_no_flow(self):
        net = two_feeder_tie()
        view = base_view(net)
        sol = solve(view, {"a2": 100 + 0j, "b2": 100 + 0j})
        with pytest.raises(PowerFlowError, match="open"):
            device_flow(sol, net.switch_by_id["sw_tie"])

    def test_zero_downstream_zero_flow(self):
        net = two_feeder_tie(load1_kw=0.0, load2_kw=150.0)
        view = base_view(net)
        sol = solve(view, {"b2": 150 + 0j})
        assert device_flow(sol, net.switch_by_id["sw_a"]) == pytest.approx(0.0, abs=1e-9)


class TestVoltVar:
    def test_curve_points(self):
        assert apply_volt_var(1.00) == 0.0
        assert apply_volt_var(1.04) == -1.0
        assert apply_volt_var(1.03) == pytest.approx(-0.5)
        assert apply_volt_var(0.96) == 1.0
        assert apply_volt_var(0.90) == 1.0
        assert apply_volt_var(1.10) == -1.0
        assert apply_volt_var(0.97) == pytest.approx(0.5)

    def test_curve_monotone_nonincreasing(self):
        vs = np.linspace(0.9, 1.1, 401)
        fr = apply_volt_var(vs)
        assert (np.diff(fr) <= 1e-12).all()

    def test_volt_var_absorbs_at_high_voltage(self):
        # large injection pushes voltage up; the droop must absorb vars and
        # pull the magnitude back toward the dead band
        z = (0.02 + 0.04j) * Z_BASE
        net = chain_network([z], [None], setpoint=1.02)
        view = base_view(net)
        inj = 1.3 * S_BASE_1PH / 1000
        plain = solve(view, {}, InjectionSet({"n1": inj + 0j}))
        with_vv = solve(view, {}, InjectionSet({"n1": inj + 0j}, volt_var_enabled=True))
        assert with_vv.converged
        v_plain = abs(plain.node_voltages["n1"]["A"])
        v_vv = abs(with_vv.node_voltages["n1"]["A"])
        assert v_plain > 1.04
        assert v_vv < v_plain


class TestProperties:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_conservation_on_random_feeders(self, seed):
        spec = FeederSpec("C", 25, 0.4, 0.2, 2.0, 40, seed=seed)
        net = generate_synthetic_feeder(spec)
        view = base_view(net)
        rng = np.random.default_rng(seed)
        loads = {ld.node_id: complex(ld.peak_kw, ld.peak_kw * 0.3) * rng.uniform(0.4, 1.0)
                 for ld in net.loads}
        inj_nodes = [s.to_node for s in net.sections[::7]]
        inj = InjectionSet({n: 30 + 0j for n in inj_nodes})
        sol = solve(view, loads, inj)
        assert sol.converged
        head = head_flow(sol, net.sources[0])
        total_load = sum(v.real for v in loads.values())
        total_inj = 30.0 * len(inj_nodes)
        assert head == pytest.approx(total_load + sol.losses - total_inj, abs=1e-3)

    def test_voltage_monotone_decline_unity_pf(self):
        net = chain_network([0.3 + 0.5j] * 5, [100.0] * 5, pf=1.0)
        sol = solve(base_view(net), {f"n{k}": 100 + 0j for k in range(1, 6)})
        mags = [abs(sol.node_voltages[f"n{k}"]["A"]) for k in range(6)]
        assert all(a >= b - 1e-12 for a, b in zip(mags, mags[1:]))

    def test_impedance_scale_invariant_at_zero_load(self):
        z = [0.1 + 0.2j] * 4
        net1 = chain_network(z, [None] * 4)
        net2 = chain_network([2 * zz for zz in z], [None] * 4)
        s1 = solve(base_view(net1), {})
        s2 = solve(base_view(net2), {})
        for k in range(5):
            assert s1.node_voltages[f"n{k}"]["A"] == s2.node_voltages[f"n{k}"]["A"]

    @pytest.mark.parametrize("seed", [10, 11, 12])
    def test_matches_power_balance_oracle(self, seed):
        """Sweep voltages equal an independent admittance-form Newton solve."""
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 10))
        zs = [(rng.uniform(0.2, 1.0) + 1j * rng.uniform(0.4, 1.5)) for _ in range(n)]
        loads = [float(rng.uniform(50, 250)) for _ in range(n)]
        net = chain_network(zs, loads, pf=0.95)
        view = base_view(net)
        kva = {f"n{k}": complex(w, w * 0.3) for k, w in enumerate(loads, start=1)}
        sol = solve(view, kva)
        v_oracle = power_balance_voltages(view, view.load_extraction_va(kva))
        assert v_oracle is not None
        v_sweep = sol.batch.v_cm[0]
        assert np.abs(v_sweep - v_oracle).max() / VB < 1e-5

    def test_oracle_on_branched_feeder_with_injection(self, oracle_feeder):
        view = base_view(oracle_feeder)
        loads = {ld.node_id: complex(ld.peak_kw, ld.peak_kw * 0.2)
                 for ld in oracle_feeder.loads}
        inj = InjectionSet({oracle_feeder.sections[-1].to_node: 150 + 0j})
        sol = solve(view, loads, inj)
        s = view.load_extraction_va(loads)
        from feederhc.power_flow import _injection_extraction
        delta, _r, _w = _injection_extraction(view, inj)
        v_oracle = power_balance_voltages(view, s + delta)
        assert v_oracle is not None
        assert np.abs(sol.batch.v_cm[0] - v_oracle).max() / VB < 1e-5

    def test_unconverged_flagged_not_raised(self):
        # absurd loading far beyond the voltage collapse point
        net = chain_network([5 + 10j] * 2, [20000.0, 20000.0])
        sol = solve(base_view(net), {"n1": 20000 + 0j, "n2": 20000 + 0j})
        assert not sol.converged
        with pytest.raises(PowerFlowError):
            head_flow(sol, net.sources[0])

    def test_batch_columns_independent(self):
        net = chain_network([0.2 + 0.4j] * 3, [100.0, None, 80.0])
        view = base_view(net)
        s1 = view.load_extraction_va({"n1": 100 + 0j, "n3": 80 + 0j})
        s2 = view.load_extraction_va({"n1": 40 + 0j, "n3": 10 + 0j})
        batch = sweep_solve(view, np.vstack([s1, s2]))
        single1 = sweep_solve(view, s1)
        single2 = sweep_solve(view, s2)
        assert np.allclose(batch.v_cm[0], single1.v_cm[0], atol=1e-9)
        assert np.allclose(batch.v_cm[1], single2.v_cm[0], atol=1e-9)
