"""Probability-weighted hosting capacity over switching configurations.

Worst-case-over-configurations is one policy; weighting configurations by
how likely they are is another. Both statistics are computed side by side.

Run:  python demos/06_expected_outcome.py
"""

from feederhc import (FeederSpec, PenetrationScenario, apply_penetration,
                      build_default_library, enumerate_configurations,
                      expected_outcome_hc, expected_outcome_stats,
                      make_feeder_pair)

# the worked two-configuration example
hc = {"base": 1000.0, "transfer_1": 0.0}
p = {"base": 0.9, "transfer_1": 0.1}
for eps in (0.05, 0.2):
    expectation, chance = expected_outcome_stats(hc, p, eps)
    print(f"eps={eps}: expectation {expectation:.0f} kW, "
          f"chance-constrained {chance:.0f} kW")

# the same statistics on a synthetic pair
f1 = FeederSpec("F1", 200, 2.0, 0.9, 13.0, 240, seed=11)
f2 = FeederSpec("F2", 160, 1.6, 0.3, 10.0, 200, seed=12)
net = make_feeder_pair(f1, f2)
library = build_default_library({"F1_load": f1.min_peak_ratio,
                                 "F2_load": f2.min_peak_ratio})
net_load = apply_penetration(net, PenetrationScenario(0.0, 0.0, 1), library)
configs = enumerate_configurations(net)

section = net.sections[len(net.sections) // 2]
expectation, chance, by_config = expected_outcome_hc(
    section, net, net_load, configs, epsilon=0.05)
print(f"\nsection {section.id} (average demand profiles):")
for cid, kw in sorted(by_config.items()):
    prob = next(c.probability for c in configs if c.id == cid)
    print(f"  {cid}: {kw:7.0f} kW  (p={prob:.2f})")
print(f"expectation {expectation:.0f} kW; chance-constrained (eps=0.05) "
      f"{chance:.0f} kW; worst-case {min(by_config.values()):.0f} kW")
