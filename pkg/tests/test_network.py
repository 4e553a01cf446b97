import json

import pytest

from feederhc import (Configuration, FeederSpec, Network, NetworkError,
                      NonRadialError, apply_configuration,
                      generate_synthetic_feeder, load_network, save_network,
                      sections_by_distance, validate_radiality)
from feederhc.network import UnknownSwitchError, network_to_dict

from .conftest import two_feeder_tie
from .oracles import reachable_from


class TestRadiality:
    def test_base_configuration_is_radial(self):
        net = two_feeder_tie()
        ok, diags = validate_radiality(net, net.base_configuration())
        assert ok
        assert diags == []

    def test_closing_tie_without_opening_creates_loop(self):
        net = two_feeder_tie()
        config = Configuration("bad", open_switches=frozenset(),
                               closed_switches=frozenset({"sw_tie", "sw_a"}))
        ok, diags = validate_radiality(net, config)
        assert not ok
        assert any("loop" in d for d in diags)

    def test_transfer_with_mainline_open_is_radial(self):
        net = two_feeder_tie()
        config = Configuration("transfer", open_switches=frozenset({"sw_a"}),
                               closed_switches=frozenset({"sw_tie"}))
        ok, diags = validate_radiality(net, config)
        assert ok
        # traversal oracle: every node reachable from exactly one source
        from_f1 = reachable_from(net, config, "a0")
        from_f2 = reachable_from(net, config, "b0")
        assert from_f1 & from_f2 == set()
        assert from_f1 | from_f2 == {n.id for n in net.nodes}

    def test_unknown_switch_id_rejected(self):
        net = two_feeder_tie()
        config = Configuration("oops", open_switches=frozenset({"nope"}))
        with pytest.raises(UnknownSwitchError, match="nope"):
            validate_radiality(net, config)

    def test_switch_both_open_and_closed_rejected(self):
        with pytest.raises(NetworkError):
            Configuration("c", open_switches=frozenset({"sw"}),
                          closed_switches=frozenset({"sw"}))


class TestApplyConfiguration:
    def test_base_serves_each_feeder_from_its_own_source(self):
        net = two_feeder_tie()
        view = apply_configuration(net, net.base_configuration())
        assert view.serving_source("a2").feeder_id == "F1"
        assert view.serving_source("b2").feeder_id == "F2"
        assert view.de_energized_nodes == []

    def test_transfer_moves_downstream_block(self):
        net = two_feeder_tie()
        config = Configuration("transfer", open_switches=frozenset({"sw_a"}),
                               closed_switches=frozenset({"sw_tie"}))
        view = apply_configuration(net, config)
        assert view.serving_source("a2").feeder_id == "F2"
        assert view.serving_source("a1").feeder_id == "F1"
        # oracle: a2 reachable from b0 but not from a0
        assert "a2" in reachable_from(net, config, "b0")
        assert "a2" not in reachable_from(net, config, "a0")
        assert view.upstream_path("a2") == ["tie", "sb1", "sb0"]

    def test_opening_without_alternative_flags_de_energized(self):
        net = two_feeder_tie()
        config = Configuration("drop", open_switches=frozenset({"sw_a"}))
        ok, diags = validate_radiality(net, config)
        assert ok
        assert any(d.startswith("island") for d in diags)
        view = apply_configuration(net, config)
        assert view.de_energized_nodes == ["a2"]
        assert not view.is_energized("a2")

    def test_non_radial_config_raises_with_diagnostics(self):
        net = two_feeder_tie()
        config = Configuration("bad", closed_switches=frozenset({"sw_tie"}))
        with pytest.raises(NonRadialError) as err:
            apply_configuration(net, config)
        assert any("loop" in d for d in err.value.diagnostics)

    def test_apply_is_pure(self):
        net = two_feeder_tie()
        before = json.dumps(network_to_dict(net), sort_keys=True)
        for cfg in (net.base_configuration(),
                    Configuration("t", frozenset({"sw_a"}), frozenset({"sw_tie"}))):
            apply_configuration(net, cfg)
        assert json.dumps(network_to_dict(net), sort_keys=True) == before


class TestDistanceBuckets:
    def test_buckets_by_to_node_distance(self):
        net = two_feeder_tie()
        buckets = sections_by_distance(net, 1.0, "three_phase")
        # tie carries a normally-open switch: excluded from base energization
        got = {b: sorted(s.id for s in secs) for b, secs in buckets.items()}
        assert got == {1: ["sa0", "sb0"], 2: ["sa1", "sb1"]}
        # half-mile buckets: to_node at 1.0 and 2.0 miles land in 2 and 4
        halves = sections_by_distance(net, 0.5, "three_phase")
        assert sorted(halves) == [2, 4]

    def test_phase_class_partition(self, oracle_feeder):
        three = sections_by_distance(oracle_feeder, 1.0, "three_phase")
        onetwo = sections_by_distance(oracle_feeder, 1.0, "one_two_phase")
        ids3 = {s.id for secs in three.values() for s in secs}
        ids12 = {s.id for secs in onetwo.values() for s in secs}
        assert ids3 & ids12 == set()
        assert ids3 | ids12 == {s.id for s in oracle_feeder.sections}
        assert all(s.n_phases == 3 for secs in three.values() for s in secs)
        assert all(s.n_phases < 3 for secs in onetwo.values() for s in secs)

    def test_max_bucket_tracks_max_path_distance(self, pair_network):
        buckets = sections_by_distance(pair_network, 1.0, "three_phase")
        buckets12 = sections_by_distance(pair_network, 1.0, "one_two_phase")
        max_bucket = max(list(buckets) + list(buckets12))
        max_dist = max(n.distance_from_source for n in pair_network.nodes)
        assert max_bucket == int(max_dist)

    def test_bad_args(self, oracle_feeder):
        with pytest.raises(ValueError):
            sections_by_distance(oracle_feeder, 0.0, "three_phase")
        with pytest.raises(ValueError):
            sections_by_distance(oracle_feeder, 1.0, "two_phase")


class TestSyntheticFeeder:
    def test_f1_aggregates(self):
        spec = FeederSpec("F1", 1376, 11.3, 5.6, 62.2, 1306, seed=11)
        net = generate_synthetic_feeder(spec)
        assert len(net.sections) == 1376
        assert abs(sum(s.length for s in net.sections) - 62.2) <= 0.622
        assert abs(sum(ld.peak_kw for ld in net.loads) - 11300) <= 113
        assert sum(ld.customer_count for ld in net.loads) == 1306
        ok, _ = validate_radiality(net, net.base_configuration())
        assert ok

    def test_f2_aggregates(self):
        spec = FeederSpec("F2", 825, 9.4, 1.2, 48.7, 1382, seed=3)
        net = generate_synthetic_feeder(spec)
        assert len(net.sections) == 825
        assert abs(sum(s.length for s in net.sections) - 48.7) <= 0.487
        assert abs(sum(ld.peak_kw for ld in net.loads) - 9400) <= 94
        assert sum(ld.customer_count for ld in net.loads) == 1382

    def test_single_stub_section(self):
        net = generate_synthetic_feeder(FeederSpec("S", 1, 0.0, 0.0, 0.1, 0, seed=1))
        assert len(net.sections) == 1
        assert net.loads == []

    def test_trunk_three_phase_laterals_one_two(self, oracle_feeder):
        trunk = [s for s in oracle_feeder.sections if s.n_phases == 3]
        lats = [s for s in oracle_feeder.sections if s.n_phases < 3]
        assert trunk and lats
        head = oracle_feeder.sources[0].head_section_id
        assert any(s.id == head for s in trunk)

    def test_seed_determinism_bit_identical(self):
        spec = FeederSpec("D", 120, 1.0, 0.4, 8.0, 150, seed=42)
        a = json.dumps(network_to_dict(generate_synthetic_feeder(spec)), sort_keys=True)
        b = json.dumps(network_to_dict(generate_synthetic_feeder(spec)), sort_keys=True)
        assert a == b

    def test_different_seed_differs(self):
        n1 = generate_synthetic_feeder(FeederSpec("D", 120, 1.0, 0.4, 8.0, 150, seed=1))
        n2 = generate_synthetic_feeder(FeederSpec("D", 120, 1.0, 0.4, 8.0, 150, seed=2))
        assert json.dumps(network_to_dict(n1)) != json.dumps(network_to_dict(n2))

    def test_infeasible_specs_rejected(self):
        from feederhc.network import InvalidFeederSpecError
        with pytest.raises(InvalidFeederSpecError):
            generate_synthetic_feeder(FeederSpec("X", 0, 1.0, 0.5, 5.0, 10))
        with pytest.raises(InvalidFeederSpecError):
            generate_synthetic_feeder(FeederSpec("X", 10, 1.0, 0.5, 0.0, 10))


class TestFeederPair:
    def test_pair_has_six_switching_blocks(self, pair_network):
        boundaries = [sw for sw in pair_network.switches
                      if sw.switching_block_boundary and not sw.normally_open]
        ties = [sw for sw in pair_network.switches if sw.normally_open]
        # 4 internal boundaries + 1 tie partition the pair into 6 blocks
        assert len(boundaries) == 4
        assert len(ties) == 1
        assert all(sw.scada_controlled for sw in boundaries + ties)

    def test_pair_radial_and_fully_energized(self, pair_network):
        view = apply_configuration(pair_network, pair_network.base_configuration())
        assert view.de_energized_nodes == []
        assert len(view.tree_sections) == len(pair_network.sections) - 1  # tie open


class TestSerialization:
    def test_round_trip(self, tmp_path, oracle_feeder):
        path = tmp_path / "net.json"
        save_network(oracle_feeder, path)
        loaded = load_network(path)
        assert network_to_dict(loaded) == network_to_dict(oracle_feeder)

    def test_schema_version_required(self, tmp_path, oracle_feeder):
        path = tmp_path / "net.json"
        doc = network_to_dict(oracle_feeder)
        doc["schema_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(NetworkError, match="schema_version"):
            load_network(path)

    def test_validation_rejects_dangling_section(self):
        from feederhc import Node, Section
        nodes = [Node("n0", "A", 0, 7200.0)]
        secs = [Section("s0", "n0", "missing", "A", 0.1 + 0.1j, 1.0, 100.0)]
        with pytest.raises(NetworkError, match="unknown node"):
            Network(nodes, secs, [], [], [], ["F"])
