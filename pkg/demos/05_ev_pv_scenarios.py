"""EV charging synthesis, PV shapes, and penetration scenarios.

Run:  python demos/05_ev_pv_scenarios.py
"""

import numpy as np

from feederhc import (EvFleetSpec, FeederSpec, IntervalIndex,
                      PenetrationScenario, apply_penetration,
                      build_default_library, ev_charger_mix, ev_profile,
                      generate_synthetic_feeder, pv_profile, table1_matrix)

# the calibration reference point: 1000 EVs at 45 miles/day
fleet = EvFleetSpec(ev_count=1000, daily_miles_by_month=(45,) * 12)
print("active chargers for 1000 EVs @ 45 mi/day:", ev_charger_mix(fleet))

fleet = EvFleetSpec(ev_count=1000)
for day_type in ("weekday", "weekend"):
    prof = ev_profile(fleet, 6, day_type)
    print(f"\nJune {day_type}: {prof.sum():.0f} kWh/day, "
          f"peak {prof.max():.0f} kW at h{int(np.argmax(prof)):02d}")
    for h in range(0, 24, 3):
        print(f"  h{h:02d} {prof[h]:6.0f} " + "#" * int(30 * prof[h] / prof.max()))

print("\nPV unit output (kW), January vs June, commercial site:")
jan, jun = pv_profile("commercial", 1), pv_profile("commercial", 6)
for h in range(5, 21):
    print(f"  h{h:02d}  jan {jan[h]:5.1f}  jun {jun[h]:5.1f}")

# expand a scenario onto a feeder
spec = FeederSpec("demo", 80, 1.2, 0.5, 6.0, 150, seed=2)
net = generate_synthetic_feeder(spec)
library = build_default_library({"demo_load": spec.min_peak_ratio})
print("\nscenario matrix:", [s.id for s in table1_matrix(seed=1)])
for scenario in (PenetrationScenario(0.0, 0.0, 1), PenetrationScenario(0.4, 0.4, 1)):
    nl = apply_penetration(net, scenario, library)
    noon = IntervalIndex(6, "weekday", 12)
    evening = IntervalIndex(6, "weekday", 19)
    total_noon = sum(nl.loads_at(noon).values()).real
    total_eve = sum(nl.loads_at(evening).values()).real
    print(f"{scenario.id}: net load noon {total_noon:.0f} kW, "
          f"evening {total_eve:.0f} kW")
