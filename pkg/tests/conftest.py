"""Shared fixtures: hand-built micro-networks and generated feeders."""

import pytest

from feederhc import (FeederSpec, LoadPoint, Network, Node, Section,
                      SourceBus, Switch, build_default_library,
                      generate_synthetic_feeder, interval_grid,
                      make_feeder_pair)

VB = 7199.6  # volts line-to-ground, 12.47 kV class


def chain_network(impedances, loads_kw, phases="A", rating=600.0,
                  setpoint=1.0, pf=1.0, vb=VB):
    """Single-phase-class radial chain: n0 -s0- n1 -s1- n2 ...

    impedances: per-section complex ohms; loads_kw: kW at nodes 1..n
    (None entries skip the load point).
    """
    n = len(impedances)
    nodes = [Node(f"n{k}", phases, float(k), vb) for k in range(n + 1)]
    sections = [Section(f"s{k}", f"n{k}", f"n{k + 1}", phases, z, 1.0, rating)
                for k, z in enumerate(impedances)]
    load_points = []
    for k, kw in enumerate(loads_kw, start=1):
        if kw is not None:
            load_points.append(LoadPoint(f"n{k}", kw, pf, "p", 1))
    source = SourceBus("n0", setpoint, "F", "s0")
    return Network(nodes, sections, [], [source], load_points, ["F"])


def two_feeder_tie(load1_kw=300.0, load2_kw=300.0, z=0.05 + 0.1j,
                   tie_normally_open=True):
    """Two 2-section feeders joined by one switchable tie section.

    F1: a0 - a1 - a2 ; F2: b0 - b1 - b2 ; tie between a2 and b2.
    Mainline switch sw_a on section a1-a2.
    """
    nodes = [Node(n, "ABC", d, VB) for n, d in
             [("a0", 0), ("a1", 1), ("a2", 2), ("b0", 0), ("b1", 1), ("b2", 2)]]
    sections = [
        Section("sa0", "a0", "a1", "ABC", z, 1.0, 400.0),
        Section("sa1", "a1", "a2", "ABC", z, 1.0, 400.0),
        Section("sb0", "b0", "b1", "ABC", z, 1.0, 400.0),
        Section("sb1", "b1", "b2", "ABC", z, 1.0, 400.0),
        Section("tie", "a2", "b2", "ABC", z, 1.0, 400.0),
    ]
    switches = [
        Switch("sw_a", "sa1", scada_controlled=True, normally_open=False,
               switching_block_boundary=True),
        Switch("sw_tie", "tie", scada_controlled=True,
               normally_open=tie_normally_open, switching_block_boundary=True),
    ]
    sources = [SourceBus("a0", 1.0, "F1", "sa0"), SourceBus("b0", 1.0, "F2", "sb0")]
    loads = [LoadPoint("a2", load1_kw, 1.0, "p", 2), LoadPoint("b2", load2_kw, 1.0, "p", 2)]
    return Network(nodes, sections, switches, sources, loads, ["F1", "F2"])


@pytest.fixture(scope="session")
def oracle_feeder():
    """~30-section generated feeder, light load, used by search-oracle tests."""
    spec = FeederSpec("T", 30, 0.25, 0.10, 2.5, 40, seed=7)
    return generate_synthetic_feeder(spec)


@pytest.fixture(scope="session")
def pair_network():
    """The synthetic study pair used by the acceptance-scale checks."""
    spec1 = FeederSpec("F1", 1376, 11.3, 5.6, 62.2, 1306, seed=11)
    spec2 = FeederSpec("F2", 825, 9.4, 1.2, 48.7, 1382, seed=12)
    return make_feeder_pair(spec1, spec2)


@pytest.fixture(scope="session")
def pair_library():
    return build_default_library({"F1_load": 5.6 / 11.3, "F2_load": 1.2 / 9.4})


class FixedLoads:
    """Minimal net-load stand-in: one kVA mapping per (interval, basis)."""

    scenario_id = "fixed"

    def __init__(self, default, by_interval=None, snapshots=None):
        self.default = default
        self.by_interval = by_interval or {}
        self.snapshots = snapshots

    def loads_at(self, interval, basis="mean"):
        return self.by_interval.get((interval, basis),
                                    self.by_interval.get(interval, self.default))

    def extraction_va(self, view, interval, basis="mean"):
        return view.load_extraction_va(self.loads_at(interval, basis))

    def snapshot_intervals(self):
        if self.snapshots:
            return self.snapshots
        grid = interval_grid()
        return [(grid[0], "p10"), (grid[1], "p90")]
