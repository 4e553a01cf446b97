"""Interval load and generation scenario modeling.

Builds the profile machinery behind penetration studies: EV charging demand
synthesized from a charger-mix reference point and per-class utilization
templates (shipped as editable data files), tabulated PV output shapes,
percentile demand envelopes, and the expansion of a PV/EV penetration
scenario onto feeder loads as a per-node interval net-load model.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .hosting import DAY_TYPES, DAYS_IN_MONTH, IntervalIndex, interval_grid

EV_KWH_PER_MILE = 0.30

# Table of average daily miles per vehicle by month (Jan..Dec)
DEFAULT_DAILY_MILES = (24, 24, 26, 26, 26, 28, 28, 28, 26, 26, 26, 24)

# Active chargers per 1000 EVs at the 45 mi/day reference point
CHARGER_CLASSES = ("home_l1", "home_l2", "work_l1", "work_l2", "public_l2", "dcfc")
REFERENCE_MIX_PER_1000 = {
    "home_l1": 331, "home_l2": 132, "work_l1": 30,
    "work_l2": 79, "public_l2": 82, "dcfc": 2,
}
REFERENCE_MILES = 45.0

PV_CLASS_KW = {"residential": 2.5, "commercial": 30.0}


class ScenarioError(Exception):
    pass


def _round_half_up(x) -> int:
    return int(math.floor(x + 0.5))


def _load_data(name: str) -> dict:
    with resources.files("feederhc.data").joinpath(name).open() as f:
        return json.load(f)


_EV_TEMPLATES = None
_PV_SHAPES = None


def ev_templates() -> dict:
    global _EV_TEMPLATES
    if _EV_TEMPLATES is None:
        _EV_TEMPLATES = _load_data("ev_charging_templates.json")
    return _EV_TEMPLATES


def pv_shape_table() -> dict:
    global _PV_SHAPES
    if _PV_SHAPES is None:
        _PV_SHAPES = {int(k): np.array(v) for k, v in _load_data("pv_shapes.json").items()}
    return _PV_SHAPES


@dataclass(frozen=True)
class EvFleetSpec:
    """Light-duty EV fleet parameters behind the charging-demand synthesis."""
    ev_count: int
    daily_miles_by_month: tuple = DEFAULT_DAILY_MILES
    pct_bev: float = 0.5
    pct_sedan: float = 0.8
    charger_power: tuple = (("L1", 1.4), ("L2", 6.2), ("DCFC", 50.0))  # kW
    home_charging_access: float = 1.0
    home_l1_share: float = 0.5
    strategy: str = "immediate"

    def __post_init__(self):
        if self.ev_count < 0:
            raise ScenarioError("ev_count must be >= 0")
        for frac in (self.pct_bev, self.pct_sedan, self.home_charging_access, self.home_l1_share):
            if not 0 <= frac <= 1:
                raise ScenarioError(f"fleet fraction {frac} outside [0, 1]")
        if len(self.daily_miles_by_month) != 12:
            raise ScenarioError("daily_miles_by_month needs 12 entries")
        if self.strategy not in ("immediate", "delayed"):
            raise ScenarioError(f"unknown charging strategy {self.strategy!r}")

    def power_kw(self, key: str) -> float:
        return dict(self.charger_power)[key]

    def class_power_kw(self, cls: str) -> float:
        if cls == "dcfc":
            return self.power_kw("DCFC")
        return self.power_kw("L1") if cls.endswith("l1") else self.power_kw("L2")

    def miles(self, month: int) -> float:
        return float(self.daily_miles_by_month[month - 1])


def ev_charger_mix(fleet: EvFleetSpec, month: int | None = None) -> dict:
    """Active chargers by class for the fleet.

    The count of modelled chargers is lower than the EV count; it scales
    linearly in fleet size and in daily miles (charging need), calibrated to
    the calibration reference point of 1000 EVs at 45 mi/day.
    """
    if month is None:
        miles = float(np.mean(fleet.daily_miles_by_month))
    else:
        miles = fleet.miles(month)
    factor = (fleet.ev_count / 1000.0) * (miles / REFERENCE_MILES)
    return {cls: _round_half_up(REFERENCE_MIX_PER_1000[cls] * factor)
            for cls in CHARGER_CLASSES}


def ev_profile(fleet: EvFleetSpec, month: int, day_type: str) -> np.ndarray:
    """Aggregate fleet charging demand, kW by hour of day.

    Shape comes from charger counts times per-class utilization templates;
    the daily energy is pinned to count * miles * kWh-per-mile.
    """
    if not 1 <= month <= 12:
        raise ScenarioError(f"month {month} outside 1..12")
    if day_type not in DAY_TYPES:
        raise ScenarioError(f"unknown day type {day_type!r}")
    templates = ev_templates()[fleet.strategy][day_type]
    counts = ev_charger_mix(fleet, month)
    raw = np.zeros(24)
    for cls in CHARGER_CLASSES:
        if cls not in templates:
            raise ScenarioError(f"missing charging template for class {cls}")
        raw += counts[cls] * fleet.class_power_kw(cls) * np.array(templates[cls])
    target_kwh = fleet.ev_count * fleet.miles(month) * EV_KWH_PER_MILE
    total = raw.sum()
    if total <= 0 or target_kwh <= 0:
        return np.zeros(24)
    return raw * (target_kwh / total)


def pv_profile(site_class: str, month: int) -> np.ndarray:
    """Unit-system PV output, kW by hour, from the tabulated monthly shapes.

    January peaks at the class rating (residential 2.5 kW, commercial 30 kW);
    other months scale with the tabulated seasonal amplitude.
    """
    if site_class not in PV_CLASS_KW:
        raise ScenarioError(f"unknown PV site class {site_class!r}")
    table = pv_shape_table()
    if month not in table:
        raise ScenarioError(f"no PV shape for month {month}")
    return PV_CLASS_KW[site_class] * table[month]


# ---------------------------------------------------------------------------
# profile library
# ---------------------------------------------------------------------------

class ProfileLibrary:
    """Named shapes over the 576-interval grid (fraction of peak)."""

    def __init__(self):
        self._shapes = {}   # profile_id -> (kind, (576,) array)

    def add(self, profile_id: str, kind: str, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (576,):
            raise ScenarioError(f"profile {profile_id}: expected 576 values")
        if kind == "load":
            if values.min() < 0 or values.max() > 1 + 1e-9:
                raise ScenarioError(f"load profile {profile_id} outside [0, 1]")
            if abs(values.max() - 1.0) > 1e-9:
                raise ScenarioError(f"load profile {profile_id} must peak at 1.0")
        if kind == "pv":
            if values.min() < 0:
                raise ScenarioError(f"pv profile {profile_id} has negative output")
            night = [i for i, iv in enumerate(interval_grid()) if iv.hour in (0, 1, 2, 3)]
            if np.any(values[night] > 0):
                raise ScenarioError(f"pv profile {profile_id} nonzero at night")
        self._shapes[profile_id] = (kind, values)

    def get(self, profile_id: str) -> np.ndarray:
        if profile_id not in self._shapes:
            raise ScenarioError(f"unknown profile id {profile_id!r}")
        return self._shapes[profile_id][1]

    def kind(self, profile_id: str) -> str:
        return self._shapes[profile_id][0]

    def ids(self):
        return sorted(self._shapes)

    def __contains__(self, profile_id: str) -> bool:
        return profile_id in self._shapes

    def to_csv(self) -> str:
        lines = ["profile_id,month,day_type,hour,value"]
        grid = interval_grid()
        for pid in self.ids():
            values = self._shapes[pid][1]
            for iv, v in zip(grid, values):
                lines.append(f"{pid},{iv.month},{iv.day_type},{iv.hour},{v:.6f}")
        return "\n".join(lines) + "\n"


_WEEKDAY_24 = np.array([0.58, 0.54, 0.52, 0.51, 0.52, 0.56, 0.64, 0.74, 0.78, 0.76,
                        0.74, 0.73, 0.72, 0.71, 0.72, 0.76, 0.84, 0.93, 1.00, 0.99,
                        0.95, 0.88, 0.76, 0.65])
_WEEKEND_24 = np.array([0.60, 0.56, 0.53, 0.52, 0.53, 0.55, 0.60, 0.68, 0.76, 0.82,
                        0.86, 0.88, 0.88, 0.86, 0.84, 0.84, 0.88, 0.94, 0.98, 0.97,
                        0.93, 0.86, 0.76, 0.66])
_SEASON_12 = np.array([0.90, 0.87, 0.80, 0.74, 0.79, 0.93, 1.00, 0.99, 0.88, 0.76,
                       0.82, 0.92])


def default_load_shape(min_peak_ratio: float) -> np.ndarray:
    """Diurnal/seasonal demand shape over the grid, affinely mapped so the
    grid maximum is 1.0 and the minimum equals the feeder's min/peak ratio."""
    if not 0 <= min_peak_ratio <= 1:
        raise ScenarioError("min/peak ratio outside [0, 1]")
    grid = interval_grid()
    raw = np.empty(576)
    for i, iv in enumerate(grid):
        day = _WEEKDAY_24 if iv.day_type == "weekday" else _WEEKEND_24
        raw[i] = day[iv.hour] * _SEASON_12[iv.month - 1]
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.ones(576)
    return min_peak_ratio + (1.0 - min_peak_ratio) * (raw - lo) / (hi - lo)


def pv_grid_shape(site_class: str) -> np.ndarray:
    """PV unit shape over the 576 grid, normalized to the January peak."""
    rating = PV_CLASS_KW[site_class]
    out = np.empty(576)
    for i, iv in enumerate(interval_grid()):
        out[i] = pv_profile(site_class, iv.month)[iv.hour] / rating
    return out


def build_default_library(load_profiles: dict) -> ProfileLibrary:
    """Library with the named load shapes plus the two PV classes.

    load_profiles maps profile_id -> min/peak ratio.
    """
    lib = ProfileLibrary()
    for pid, ratio in sorted(load_profiles.items()):
        lib.add(pid, "load", default_load_shape(ratio))
    lib.add("pv_residential", "pv", pv_grid_shape("residential"))
    lib.add("pv_commercial", "pv", pv_grid_shape("commercial"))
    return lib


# ---------------------------------------------------------------------------
# demand percentile envelopes
# ---------------------------------------------------------------------------

@dataclass
class DemandEnvelope:
    p10: dict            # IntervalIndex -> value
    p90: dict
    mean: dict
    mean_weekday: np.ndarray
    mean_weekend: np.ndarray


def synth_demand_history(shape_576, seed: int, n_days: int = 365,
                         sigma_daily: float = 0.10, sigma_hourly: float = 0.03):
    """One representative year of daily 24-hour records around a grid shape.

    Returns [(month, day_type, values), ...] with a calendar starting Monday
    Jan 1; multiplicative day-level and hour-level noise, seeded.
    """
    shape = np.asarray(shape_576, dtype=float)
    grid_index = {(iv.month, iv.day_type, iv.hour): i for i, iv in enumerate(interval_grid())}
    rng = np.random.default_rng(seed)
    month_starts = np.cumsum((0,) + DAYS_IN_MONTH)
    records = []
    for day in range(n_days):
        doy = day % 365
        month = int(np.searchsorted(month_starts, doy, side="right"))
        day_type = "weekday" if day % 7 < 5 else "weekend"
        daily = float(np.clip(rng.normal(1.0, sigma_daily), 0.55, 1.45))
        hourly = np.clip(rng.normal(1.0, sigma_hourly, 24), 0.8, 1.2)
        base = np.array([shape[grid_index[(month, day_type, h)]] for h in range(24)])
        records.append((month, day_type, base * daily * hourly))
    return records


def demand_percentiles(history) -> DemandEnvelope:
    """Per-interval-of-day 10th/90th percentiles and means across a year of
    daily records [(month, day_type, 24 values), ...]."""
    if len(history) < 365:
        raise ScenarioError(
            f"need at least one year of daily records, got {len(history)}")
    cells = {}
    for month, day_type, values in history:
        values = np.asarray(values, dtype=float)
        if values.shape != (24,):
            raise ScenarioError("each history record must carry 24 hourly values")
        cells.setdefault((month, day_type), []).append(values)

    p10, p90, mean = {}, {}, {}
    for iv in interval_grid():
        rows = cells.get((iv.month, iv.day_type))
        if not rows:
            raise ScenarioError(f"history has no days for {iv.month}/{iv.day_type}")
        col = np.array([r[iv.hour] for r in rows])
        p10[iv] = float(np.percentile(col, 10))
        p90[iv] = float(np.percentile(col, 90))
        mean[iv] = float(col.mean())

    def day_mean(day_type):
        return np.array([
            np.mean([mean[IntervalIndex(m, day_type, h)] for m in range(1, 13)])
            for h in range(24)
        ])

    return DemandEnvelope(p10, p90, mean, day_mean("weekday"), day_mean("weekend"))


# ---------------------------------------------------------------------------
# penetration scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PenetrationScenario:
    pv_level: float
    ev_level: float
    placement_seed: int = 0

    def __post_init__(self):
        for level in (self.pv_level, self.ev_level):
            if not 0 <= level <= 1:
                raise ScenarioError(f"penetration level {level} outside [0, 1]")

    @property
    def id(self) -> str:
        return f"pv{int(round(self.pv_level * 100)):02d}_ev{int(round(self.ev_level * 100)):02d}"


def table1_matrix(levels=(0.0, 0.20, 0.40), seed: int = 0) -> list:
    """The 3x3 PV/EV penetration grid; the (0, 0) cell is the base case."""
    return [PenetrationScenario(pv, ev, seed)
            for pv in levels for ev in levels]


class NetLoadModel:
    """Per-node interval net load for one scenario applied to one network.

    Net load = base demand (mean or percentile basis) + allocated EV charging
    - placed PV output. PV systems are placed per selected customer,
    commercial-scale on 3-phase nodes and residential elsewhere; EV demand is
    spread over load nodes proportional to customer count.
    """

    def __init__(self, network, scenario: PenetrationScenario,
                 library: ProfileLibrary, fleet: EvFleetSpec | None = None,
                 envelope_sigma_daily: float = 0.08,
                 envelope_sigma_hourly: float = 0.03,
                 envelope_seed_base: int = 20210101):
        self.network = network
        self.scenario = scenario
        self.library = library
        self.grid = interval_grid()
        self._grid_pos = {iv: i for i, iv in enumerate(self.grid)}

        loads = sorted(network.loads, key=lambda ld: ld.node_id)
        self.load_nodes = [ld.node_id for ld in loads]
        peak = np.array([ld.peak_kw for ld in loads])
        pf = np.array([ld.power_factor for ld in loads])
        self.tan_phi = np.tan(np.arccos(pf))
        self.peak_kw = peak

        # demand envelope per load shape, shared across scenarios for
        # comparability (seeded by profile id only)
        self._basis = {}
        for basis in ("mean", "p10", "p90"):
            self._basis[basis] = np.zeros((len(loads), 576))
        env_cache = {}
        for i, ld in enumerate(loads):
            pid = ld.profile_id
            if pid not in env_cache:
                shape = library.get(pid)
                seed = envelope_seed_base ^ zlib.crc32(pid.encode())
                hist = synth_demand_history(shape, seed, 365,
                                            envelope_sigma_daily, envelope_sigma_hourly)
                env = demand_percentiles(hist)
                env_cache[pid] = {
                    "mean": shape,
                    "p10": np.array([env.p10[iv] for iv in self.grid]),
                    "p90": np.array([env.p90[iv] for iv in self.grid]),
                }
            for basis in ("mean", "p10", "p90"):
                self._basis[basis][i] = env_cache[pid][basis] * peak[i]

        total_customers = int(sum(ld.customer_count for ld in loads))
        rng = np.random.default_rng(scenario.placement_seed)

        # PV placement: choose hosting customers without replacement,
        # node-weighted by customer count
        self.pv_kw = np.zeros((len(loads), 576))
        n_pv = _round_half_up(scenario.pv_level * total_customers)
        if n_pv > 0 and total_customers > 0:
            counts = rng.multivariate_hypergeometric(
                [ld.customer_count for ld in loads], n_pv)
            res_shape = library.get("pv_residential")
            com_shape = library.get("pv_commercial")
            for i, (ld, cnt) in enumerate(zip(loads, counts)):
                if cnt == 0:
                    continue
                node = network.node_by_id[ld.node_id]
                if len(node.phases) == 3:
                    self.pv_kw[i] = cnt * PV_CLASS_KW["commercial"] * com_shape
                else:
                    self.pv_kw[i] = cnt * PV_CLASS_KW["residential"] * res_shape

        # EV allocation proportional to customers
        self.ev_kw = np.zeros((len(loads), 576))
        n_ev = _round_half_up(scenario.ev_level * total_customers)
        self.fleet = replace(fleet or EvFleetSpec(ev_count=0), ev_count=n_ev)
        if n_ev > 0 and total_customers > 0:
            share = np.array([ld.customer_count for ld in loads], dtype=float)
            share /= share.sum()
            fleet_grid = np.empty(576)
            for m in range(1, 13):
                for dt in DAY_TYPES:
                    prof = ev_profile(self.fleet, m, dt)
                    for h in range(24):
                        fleet_grid[self._grid_pos[IntervalIndex(m, dt, h)]] = prof[h]
            self.ev_kw = share[:, None] * fleet_grid[None, :]

    @property
    def scenario_id(self) -> str:
        return self.scenario.id

    def interval_kva(self, interval: IntervalIndex, basis: str = "mean") -> np.ndarray:
        """Complex kVA per load node (consumption positive; PV may net it
        negative)."""
        t = self._grid_pos[interval]
        p_base = self._basis[basis][:, t]
        p = p_base + self.ev_kw[:, t] - self.pv_kw[:, t]
        q = p_base * self.tan_phi
        return p + 1j * q

    def loads_at(self, interval: IntervalIndex, basis: str = "mean") -> dict:
        kva = self.interval_kva(interval, basis)
        return dict(zip(self.load_nodes, kva))

    def extraction_va(self, view, interval: IntervalIndex, basis: str = "mean") -> np.ndarray:
        return view.load_extraction_va(self.loads_at(interval, basis))

    def total_net_kw(self, basis: str = "mean") -> np.ndarray:
        """Network-total real net load over the grid, (576,) kW."""
        return (self._basis[basis].sum(axis=0) + self.ev_kw.sum(axis=0)
                - self.pv_kw.sum(axis=0))

    def snapshot_intervals(self) -> list:
        """(interval, basis) pair for the minimum-demand and peak snapshots."""
        iv_min = self.grid[int(np.argmin(self.total_net_kw("p10")))]
        iv_peak = self.grid[int(np.argmax(self.total_net_kw("p90")))]
        return [(iv_min, "p10"), (iv_peak, "p90")]


def apply_penetration(network, scenario: PenetrationScenario,
                      library: ProfileLibrary,
                      fleet: EvFleetSpec | None = None) -> NetLoadModel:
    """Expand a penetration scenario onto feeder loads.

    Returns the per-node interval net-load model (base + EV - PV), with
    placement driven by the scenario's seed.
    """
    return NetLoadModel(network, scenario, library, fleet)
