"""Interval HC profiles and the energy left behind by a flat limit.

Publishing one worst-interval number forfeits everything above it at every
other interval; the profile shows how much.

Run:  python demos/04_interval_profiles.py
"""

import numpy as np

from feederhc import (FeederSpec, PenetrationScenario, apply_configuration,
                      apply_penetration, build_default_library,
                      generate_synthetic_feeder, hc_profile,
                      lost_der_opportunity, regime_presets)

spec = FeederSpec("demo", 60, 0.9, 0.35, 4.5, 110, seed=5)
net = generate_synthetic_feeder(spec)
library = build_default_library({"demo_load": spec.min_peak_ratio})
net_load = apply_penetration(net, PenetrationScenario(0.0, 0.0, 1), library)
view = apply_configuration(net, net.base_configuration())

section = net.sections[len(net.sections) // 3]
result = hc_profile(section, view, regime_presets()["classical"], net_load)

values = np.array([result.profile[iv] for iv in sorted(result.profile)])
print(f"section {section.id}: flat HC {result.flat_kw:.0f} kW "
      f"(binding {result.binding_criterion})")
print(f"profile spread: {values.min():.0f} .. {values.max():.0f} kW, "
      f"mean {values.mean():.0f} kW over 576 intervals")
print(f"lost DER opportunity at the flat limit: "
      f"{lost_der_opportunity(result) / 1000:.1f} MWh/year")

# a July weekday, hour by hour
print("\nJuly weekday profile (kW):")
july = [(iv, kw) for iv, kw in sorted(result.profile.items())
        if iv.month == 7 and iv.day_type == "weekday"]
for iv, kw in july:
    bar = "#" * int(40 * kw / values.max())
    print(f"  h{iv.hour:02d} {kw:7.0f} {bar}")
