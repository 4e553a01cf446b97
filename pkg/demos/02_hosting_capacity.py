"""Per-section hosting capacity and what binds it.

Run:  python demos/02_hosting_capacity.py
"""

from collections import Counter

from feederhc import (FeederSpec, PenetrationScenario, apply_configuration,
                      apply_penetration, build_default_library, flat_snapshot_hc,
                      make_feeder_pair, regime_presets)

# a feeder pair: the tie and block boundaries are SCADA transfer devices,
# so the OpFlex zero-reverse-flow rule has somewhere to bite
f1 = FeederSpec("F1", 150, 1.8, 0.8, 10.0, 200, seed=3)
f2 = FeederSpec("F2", 110, 1.4, 0.3, 8.0, 160, seed=4)
net = make_feeder_pair(f1, f2)
library = build_default_library({"F1_load": f1.min_peak_ratio,
                                 "F2_load": f2.min_peak_ratio})
net_load = apply_penetration(net, PenetrationScenario(0.0, 0.0, 1), library)
view = apply_configuration(net, net.base_configuration())

regimes = regime_presets()
results = {}
for name in ("classical", "opflex"):
    results[name] = flat_snapshot_hc(view, regimes[name], net_load, "generation")
    values = sorted(r.flat_kw for r in results[name].values())
    bindings = Counter(r.binding_criterion for r in results[name].values())
    print(f"\n{name}: median HC {values[len(values) // 2]:.0f} kW, "
          f"min {values[0]:.0f}, max {values[-1]:.0f}")
    print(f"  binding criteria: {dict(bindings)}")

tightened = [sid for sid in results["classical"]
             if results["opflex"][sid].flat_kw < results["classical"][sid].flat_kw]
print(f"\nsections tightened by the SCADA zero-flow rule: {len(tightened)} "
      f"of {len(results['classical'])}")
worst = min(tightened, key=lambda sid: results["opflex"][sid].flat_kw
            - results["classical"][sid].flat_kw, default=None)
if worst:
    c = results["classical"][worst].flat_kw
    o = results["opflex"][worst].flat_kw
    print(f"largest cut: {worst} from {c:.0f} kW down to {o:.0f} kW")

# the same sections under the load (demand) kind, at peak percentile demand
load_results = flat_snapshot_hc(view, regimes["classical"], net_load, "load")
zeros = sum(1 for r in load_results.values() if r.flat_kw < 0.5)
print(f"\nload HC at peak: {zeros} zero-headroom sections of {len(load_results)}")
