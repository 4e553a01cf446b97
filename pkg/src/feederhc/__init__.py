"""feederhc: distribution-feeder hosting capacity with transfer analysis.

Computes per-section generation and load hosting capacity under configurable
criteria regimes (classical limits, OpFlex zero-reverse-flow at transfer
devices, and explicit load-transfer analysis over switching configurations),
as flat worst-interval values or full interval profiles, across PV/EV
penetration scenarios.
"""

from .criteria import (BatchCriteria, CriteriaRegime, Criterion,
                       CriterionReport, evaluate, regime_presets)
from .hosting import (GENERATION, LOAD, HcResult, IntervalIndex,
                      flat_snapshot_hc, hc_at, hc_for_sections, hc_profile,
                      hc_profile_all, interval_grid, limiting_distribution,
                      lost_der_opportunity)
from .network import (Configuration, EnergizedView, FeederSpec, LoadPoint,
                      Network, NetworkError, Node, NonRadialError, Section,
                      SourceBus, Switch, apply_configuration,
                      generate_synthetic_feeder, load_network,
                      make_feeder_pair, save_network, sections_by_distance,
                      validate_radiality)
from .power_flow import (InjectionSet, PowerFlowError, PowerFlowSolution,
                         apply_volt_var, device_flow, head_flow, solve,
                         sweep_solve)
from .reconfiguration import (CensusResult, DiffResult, TransferError,
                              enumerate_configurations, expected_outcome_hc,
                              expected_outcome_stats, load_hc_census,
                              opflex_vs_transfer_diff, transfer_hc,
                              transfer_hc_all)
from .reporting import ConfigError, ReportError, report, run_study, load_run_config
from .scenarios import (DemandEnvelope, EvFleetSpec, NetLoadModel,
                        PenetrationScenario, ProfileLibrary, apply_penetration,
                        build_default_library, default_load_shape,
                        demand_percentiles, ev_charger_mix, ev_profile,
                        pv_profile, synth_demand_history, table1_matrix)

__version__ = "0.1.0"
