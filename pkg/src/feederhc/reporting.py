"""Study orchestration and report artifacts.

run_study executes a declarative run-config (network, scenario matrix,
regimes, configurations, mode) and writes the results bundle: interval and
flat CSVs, transfer aggregation, OpFlex-vs-transfer diffs, optional load
census, and a manifest with content hashes. Reports re-render bundle data
into comparison CSVs plus small static SVG plots; both passes are
deterministic byte-for-byte for a fixed seed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import network as netmod
from .criteria import regime_presets
from .hosting import (GENERATION, LOAD, IntervalIndex, flat_snapshot_hc,
                      hc_profile_all)
from .network import FeederSpec, Network, apply_configuration
from .reconfiguration import (BASE_CONFIG_ID, enumerate_configurations,
                              load_hc_census)
from .scenarios import (EvFleetSpec, PenetrationScenario, apply_penetration,
                        build_default_library)

MANIFEST = "manifest.json"


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    network_path: str | None
    generate: dict | None
    seed: int
    scenarios: list                  # PenetrationScenario
    regimes: list                    # subset of {"classical", "opflex"}
    configurations: object           # "all" | "base" | [ids]
    kind: str
    mode: str                        # "flat" | "profile"
    load_profiles: dict
    sections: list | None
    intervals: list | None
    fleet: dict
    census_scenarios: list
    workers: int | None
    output_dir: str
    resolution_kw: float
    raw: dict = field(default_factory=dict)


def parse_run_config(doc: dict, base_dir: Path) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("run config must be a JSON object")

    network_path = doc.get("network")
    generate = doc.get("generate")
    if (network_path is None) == (generate is None):
        raise ConfigError("config needs exactly one of 'network' or 'generate'")
    if network_path is not None:
        network_path = str((base_dir / network_path).resolve())
        if not Path(network_path).is_file():
            raise ConfigError(f"'network': file not found: {network_path}")

    seed = int(doc.get("seed", 0))
    sc = doc.get("scenarios", {"pv_levels": [0.0], "ev_levels": [0.0]})
    scenarios = []
    if isinstance(sc, dict):
        for pv in sc.get("pv_levels", [0.0]):
            for ev in sc.get("ev_levels", [0.0]):
                scenarios.append(PenetrationScenario(pv, ev, seed))
    elif isinstance(sc, list):
        for entry in sc:
            scenarios.append(PenetrationScenario(entry["pv"], entry["ev"], seed))
    else:
        raise ConfigError("'scenarios': expected object with levels or a list")

    regimes = doc.get("regimes", ["classical", "opflex"])
    for r in regimes:
        if r not in ("classical", "opflex"):
            raise ConfigError(f"'regimes': unknown regime {r!r}")

    mode = doc.get("mode", "flat")
    if mode not in ("flat", "profile"):
        raise ConfigError(f"'mode': expected flat or profile, got {mode!r}")
    kind = doc.get("kind", GENERATION)
    if kind not in (GENERATION, LOAD):
        raise ConfigError(f"'kind': expected generation or load, got {kind!r}")

    intervals = doc.get("intervals")
    if intervals is not None:
        intervals = [IntervalIndex.parse(s) for s in intervals]

    return RunConfig(
        network_path=network_path,
        generate=generate,
        seed=seed,
        scenarios=scenarios,
        regimes=list(regimes),
        configurations=doc.get("configurations", "all"),
        kind=kind,
        mode=mode,
        load_profiles=dict(doc.get("load_profiles", {})),
        sections=doc.get("sections"),
        intervals=intervals,
        fleet=dict(doc.get("fleet", {})),
        census_scenarios=list(doc.get("census_scenarios", [])),
        workers=doc.get("workers"),
        output_dir=str(doc.get("output_dir", "hc_out")),
        resolution_kw=float(doc.get("resolution_kw", 1.0)),
        raw=dict(doc),
    )


def load_run_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_run_config(doc, path.parent)


def _build_network(cfg: RunConfig) -> Network:
    if cfg.network_path:
        return netmod.load_network(cfg.network_path)
    gen = cfg.generate
    feeders = gen.get("feeders")
    if not feeders:
        raise ConfigError("'generate': needs a 'feeders' list of specs")
    specs = []
    for j, f in enumerate(feeders):
        try:
            spec = FeederSpec(
                feeder_id=f["feeder_id"], section_count=f["section_count"],
                peak_mw=f["peak_mw"], min_mw=f["min_mw"],
                conductor_miles=f["conductor_miles"],
                customer_count=f["customer_count"],
                seed=f.get("seed", cfg.seed + j),
                **{k: f[k] for k in ("source_setpoint", "power_factor",
                                     "trunk_fraction") if k in f})
        except KeyError as exc:
            raise ConfigError(f"'generate.feeders[{j}]': missing field {exc}") from exc
        specs.append(spec)
        cfg.load_profiles.setdefault(spec.load_profile_id, spec.min_peak_ratio)
    if len(specs) == 2:
        return netmod.make_feeder_pair(
            specs[0], specs[1],
            tie_rating_amps=gen.get("tie_rating_amps", 400.0),
            tie_length_miles=gen.get("tie_length_miles", 0.2))
    if len(specs) == 1:
        return netmod.generate_synthetic_feeder(specs[0])
    raise ConfigError("'generate': expected 1 feeder or a pair")


def _study_configs(cfg: RunConfig, network: Network) -> list:
    if cfg.configurations == "base":
        base = network.base_configuration()
        return [netmod.Configuration(BASE_CONFIG_ID, base.open_switches,
                                     base.closed_switches, 1.0)]
    if cfg.configurations == "all":
        if network.configurations:
            return sorted(network.configurations, key=lambda c: c.id)
        return enumerate_configurations(network)
    by_id = {c.id: c for c in network.configurations}
    for c in enumerate_configurations(network):
        by_id.setdefault(c.id, c)
    out = []
    for cid in cfg.configurations:
        if cid not in by_id:
            raise ConfigError(f"'configurations': unknown configuration id {cid!r}")
        out.append(by_id[cid])
    return sorted(out, key=lambda c: c.id)


def _cell_plan(cfg: RunConfig, configs) -> list:
    """(scenario, regime_name, config) triples; classical fans over configs,
    opflex applies to the base case only."""
    base = next(c for c in configs if c.id == BASE_CONFIG_ID)
    cells = []
    for scenario in sorted(cfg.scenarios, key=lambda s: s.id):
        if "classical" in cfg.regimes:
            for config in configs:
                cells.append((scenario, "classical", config))
        if "opflex" in cfg.regimes:
            cells.append((scenario, "opflex", base))
    return cells


def _fleet_from_config(cfg: RunConfig) -> EvFleetSpec:
    allowed = {"daily_miles_by_month", "pct_bev", "pct_sedan", "charger_power",
               "home_charging_access", "home_l1_share", "strategy"}
    bad = set(cfg.fleet) - allowed
    if bad:
        raise ConfigError(f"'fleet': unknown fields {sorted(bad)}")
    kwargs = dict(cfg.fleet)
    if "daily_miles_by_month" in kwargs:
        kwargs["daily_miles_by_month"] = tuple(kwargs["daily_miles_by_month"])
    if "charger_power" in kwargs:
        kwargs["charger_power"] = tuple(sorted(kwargs["charger_power"].items()))
    return EvFleetSpec(ev_count=0, **kwargs)


def _run_cell(network, library, fleet, scenario, regime_name, config,
              kind, mode, sections, intervals, resolution_kw):
    regime = regime_presets()[regime_name]
    view = apply_configuration(network, config)
    net_load = apply_penetration(network, scenario, library, fleet)
    if mode == "flat":
        results = flat_snapshot_hc(view, regime, net_load, kind,
                                   sections, resolution_kw)
    else:
        results = hc_profile_all(view, regime, net_load, kind,
                                 sections=sections, intervals=intervals,
                                 resolution_kw=resolution_kw)
    packed = {}
    for sid, r in sorted(results.items()):
        packed[sid] = {iv.label(): (r.profile[iv], r.profile_binding[iv])
                       for iv in sorted(r.profile)}
    return packed


def _run_cell_task(args):
    return args[0], _run_cell(*args[1])


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return "sha256:" + h.hexdigest()


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    path.write_text(buf.getvalue())


def _flat_of(per_interval: dict):
    """(flat_kw, binding, interval_label) from {label: (kw, binding)}."""
    label = min(sorted(per_interval), key=lambda k: (per_interval[k][0], k))
    kw, binding = per_interval[label]
    return kw, binding, label


def run_study(cfg: RunConfig, output_dir=None) -> Path:
    """Execute the study matrix and write the results bundle.

    Idempotent for a fixed seed: repeated runs produce byte-identical files.
    Returns the bundle directory.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    network = _build_network(cfg)
    missing = sorted({ld.profile_id for ld in network.loads} - set(cfg.load_profiles))
    if missing:
        raise ConfigError(f"'load_profiles': no min/peak ratio for {missing}")
    library = build_default_library(cfg.load_profiles)
    fleet = _fleet_from_config(cfg)

    config_echo = {k: v for k, v in cfg.raw.items() if k != "output_dir"}
    files = {}
    cell_meta = []
    if not cfg.scenarios:
        manifest = {"schema": 1, "config": config_echo, "cells": [], "files": {}}
        _write_manifest(out, manifest)
        return out
    netmod.save_network(network, out / "network.json")
    (out / "profiles.csv").write_text(library.to_csv())
    files["profiles.csv"] = None

    configs = _study_configs(cfg, network)
    cells = _cell_plan(cfg, configs)

    tasks = []
    for scenario, regime_name, config in cells:
        key = (scenario.id, regime_name, config.id)
        tasks.append((key, (network, library, fleet, scenario, regime_name,
                            config, cfg.kind, cfg.mode, cfg.sections,
                            cfg.intervals, cfg.resolution_kw)))

    results = {}
    workers = cfg.workers
    if workers is None:
        workers = min(len(tasks), os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, packed in pool.map(_run_cell_task, tasks):
                results[key] = packed
    else:
        for key, args in tasks:
            results[key] = _run_cell(*args)

    # interval-level and flat rows
    interval_rows, flat_rows = [], []
    for (scenario_id, regime_name, config_id) in sorted(results):
        packed = results[(scenario_id, regime_name, config_id)]
        for sid in sorted(packed):
            per_iv = packed[sid]
            for label in sorted(per_iv):
                kw, binding = per_iv[label]
                interval_rows.append((sid, cfg.kind, regime_name, config_id,
                                      scenario_id, label, f"{kw:.1f}", binding))
            kw, binding, _ = _flat_of(per_iv)
            flat_rows.append((sid, cfg.kind, regime_name, config_id,
                              scenario_id, f"{kw:.1f}", binding))
        cell_meta.append({"scenario": scenario_id, "regime": regime_name,
                          "config": config_id, "kind": cfg.kind, "mode": cfg.mode,
                          "sections": len(packed)})

    # transfer aggregation: min across classical configurations per interval
    scenario_ids = sorted({s.id for s in cfg.scenarios})
    classical_configs = sorted({c.id for c in configs}) if "classical" in cfg.regimes else []
    if len(classical_configs) > 1:
        for scenario_id in scenario_ids:
            agg = {}
            for config_id in classical_configs:
                packed = results.get((scenario_id, "classical", config_id), {})
                for sid, per_iv in packed.items():
                    for label, (kw, binding) in per_iv.items():
                        cur = agg.setdefault(sid, {}).get(label)
                        if cur is None or kw < cur[0]:
                            agg[sid][label] = (kw, f"{binding}@{config_id}")
            for sid in sorted(agg):
                for label in sorted(agg[sid]):
                    kw, binding = agg[sid][label]
                    interval_rows.append((sid, cfg.kind, "transfer", "transfer",
                                          scenario_id, label, f"{kw:.1f}", binding))
                kw, binding, _ = _flat_of(agg[sid])
                flat_rows.append((sid, cfg.kind, "transfer", "transfer",
                                  scenario_id, f"{kw:.1f}", binding))
            results[(scenario_id, "transfer", "transfer")] = agg

    header = ["section_id", "kind", "regime", "config", "scenario",
              "interval", "hc_kw", "binding_criterion"]
    _write_csv(out / "results.csv", header, sorted(interval_rows))
    files["results.csv"] = None
    flat_header = ["section_id", "kind", "regime", "config", "scenario",
                   "flat_hc_kw", "binding_criterion"]
    _write_csv(out / "flat_summary.csv", flat_header, sorted(flat_rows))
    files["flat_summary.csv"] = None

    # per-scenario OpFlex vs transfer diff
    if "opflex" in cfg.regimes and len(classical_configs) > 1:
        for scenario_id in scenario_ids:
            opflex = results.get((scenario_id, "opflex", BASE_CONFIG_ID))
            transfer = results.get((scenario_id, "transfer", "transfer"))
            if not opflex or not transfer:
                continue
            rows = []
            for sid in sorted(set(opflex) & set(transfer)):
                o = _flat_of(opflex[sid])[0]
                t = _flat_of(transfer[sid])[0]
                rows.append((sid, f"{o:.1f}", f"{t:.1f}", f"{o - t:.1f}"))
            name = f"diff_{scenario_id}.csv"
            _write_csv(out / name,
                       ["section_id", "hc_opflex_kw", "hc_transfer_kw", "diff_kw"],
                       rows)
            files[name] = None

    # load HC census at peak demand
    if cfg.census_scenarios:
        census_rows = []
        for scenario in sorted(cfg.scenarios, key=lambda s: s.id):
            if scenario.id not in cfg.census_scenarios:
                continue
            net_load = apply_penetration(network, scenario, library, fleet)
            census = load_hc_census(network, configs, regime_presets()["classical"],
                                    net_load, sections=cfg.sections,
                                    resolution_kw=cfg.resolution_kw)
            for cid in sorted(census):
                c = census[cid]
                for j, count in enumerate(c.histogram):
                    lo = c.bucket_edges[j]
                    hi = c.bucket_edges[j + 1]
                    census_rows.append((scenario.id, cid, f"{lo:.1f}",
                                        "inf" if hi == float("inf") else f"{hi:.1f}",
                                        count, c.zero_hc_sections))
        _write_csv(out / "census.csv",
                   ["scenario", "config", "bucket_lo_kw", "bucket_hi_kw",
                    "count", "zero_hc_sections"], census_rows)
        files["census.csv"] = None

    files["network.json"] = None
    manifest = {"schema": 1, "config": config_echo,
                "cells": sorted(cell_meta, key=lambda c: (c["scenario"], c["regime"], c["config"])),
                "files": {}}
    for name in files:
        manifest["files"][name] = _sha256(out / name)
    _write_manifest(out, manifest)
    return out


def _write_manifest(out: Path, manifest: dict) -> None:
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# reports: CSV + static SVG renderings of the bundle
# ---------------------------------------------------------------------------

class ReportError(Exception):
    pass


REPORT_KINDS = ("distance", "limits", "diff", "load_census", "profile")


def _svg_header(width, height, title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="15">{title}</text>',
    ]


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _svg_bar_chart(title, categories, series, ylabel, width=920, height=430):
    """Grouped bar chart; series is {name: [values per category]}."""
    left, right, top, bottom = 70, 20, 40, 70
    plot_w, plot_h = width - left - right, height - top - bottom
    names = list(series)
    all_vals = [v for vals in series.values() for v in vals] or [0.0]
    vmax = max(max(all_vals), 0.0)
    vmin = min(min(all_vals), 0.0)
    span = (vmax - vmin) or 1.0
    y0 = top + plot_h * (vmax / span)

    parts = _svg_header(width, height, title)
    parts.append(f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">{ylabel}</text>')
    for k in range(5):
        val = vmin + span * k / 4
        y = top + plot_h * (vmax - val) / span
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" y2="{y:.1f}" '
                     f'stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{val:.6g}</text>')
    n_cat = max(len(categories), 1)
    group_w = plot_w / n_cat
    bar_w = max(group_w * 0.8 / max(len(names), 1), 1.0)
    for ci, cat in enumerate(categories):
        gx = left + ci * group_w
        for si, name in enumerate(names):
            val = series[name][ci]
            h = abs(val) / span * plot_h
            y = y0 - h if val >= 0 else y0
            x = gx + group_w * 0.1 + si * bar_w
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                         f'height="{h:.2f}" fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{gx + group_w / 2:.1f}" y="{height - bottom + 16}" '
                     f'text-anchor="middle">{cat}</text>')
    parts.append(f'<line x1="{left}" y1="{y0:.1f}" x2="{width - right}" y2="{y0:.1f}" '
                 f'stroke="#333"/>')
    for si, name in enumerate(names):
        lx = left + si * 150
        ly = height - 24
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _svg_scatter(title, series, xlabel, ylabel, width=920, height=430,
                 opacity=0.35):
    """Scatter plot; series is {name: [(x, y), ...]}."""
    left, right, top, bottom = 70, 20, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    pts = [p for v in series.values() for p in v] or [(0, 0)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(min(ys), 0.0), max(ys)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    parts = _svg_header(width, height, title)
    parts.append(f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">{ylabel}</text>')
    for k in range(5):
        val = ymin + yspan * k / 4
        y = top + plot_h * (ymax - val) / yspan
        parts.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - right}" y2="{y:.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{val:.6g}</text>')
    for k in range(5):
        val = xmin + xspan * k / 4
        x = left + plot_w * (val - xmin) / xspan
        parts.append(f'<text x="{x:.1f}" y="{height - bottom + 16}" text-anchor="middle">{val:.6g}</text>')
    for si, (name, points) in enumerate(series.items()):
        color = _PALETTE[si % len(_PALETTE)]
        for x, y in points:
            px = left + plot_w * (x - xmin) / xspan
            py = top + plot_h * (ymax - y) / yspan
            parts.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.4" '
                         f'fill="{color}" fill-opacity="{opacity}"/>')
    for si, name in enumerate(series):
        lx = left + si * 120
        ly = height - 28
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[si % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _read_csv(path: Path):
    if not path.is_file():
        raise ReportError(f"bundle file missing: {path.name}")
    with path.open() as f:
        return list(csv.DictReader(f))


def _criterion_of(binding: str) -> str:
    return binding.split("@", 1)[0]


def report(kind: str, bundle_dir, bucket_miles: float = 1.0) -> list:
    """Render one report kind from a bundle; returns the files written.

    Reports are pure functions of the bundle: re-rendering is byte-identical.
    """
    if kind not in REPORT_KINDS:
        raise ReportError(f"unknown report kind {kind!r} (expected one of {REPORT_KINDS})")
    out = Path(bundle_dir)
    if not (out / MANIFEST).is_file():
        raise ReportError(f"{out} is not a results bundle (no {MANIFEST})")
    manifest = json.loads((out / MANIFEST).read_text())
    rep_dir = out / "reports"
    rep_dir.mkdir(exist_ok=True)
    written = []

    if kind == "distance":
        flat = _read_csv(out / "flat_summary.csv")
        network = netmod.load_network(out / "network.json")
        rows = {}
        for r in flat:
            sec = network.section_by_id[r["section_id"]]
            cls = "three_phase" if sec.n_phases == 3 else "one_two_phase"
            bucket = int(network.node_by_id[sec.to_node].distance_from_source / bucket_miles)
            key = (r["regime"], r["config"], r["scenario"], cls, bucket)
            agg = rows.setdefault(key, [0.0, 0])
            agg[0] += float(r["flat_hc_kw"])
            agg[1] += 1
        table = [(reg, cfg, scen, cls, f"{b * bucket_miles:.1f}",
                  f"{v[0]:.1f}", v[1])
                 for (reg, cfg, scen, cls, b), v in sorted(rows.items())]
        _write_csv(rep_dir / "distance.csv",
                   ["regime", "config", "scenario", "phase_class",
                    "bucket_miles", "aggregate_hc_kw", "section_count"], table)
        written.append("reports/distance.csv")

        scen0 = sorted({r["scenario"] for r in flat})[0]
        for cls in ("three_phase", "one_two_phase"):
            buckets = sorted({b for (rg, cf, sc, cl, b) in rows
                              if sc == scen0 and cl == cls})
            series = {}
            for (rg, cf, sc, cl, b), v in sorted(rows.items()):
                if sc != scen0 or cl != cls:
                    continue
                series.setdefault(f"{rg}/{cf}", {})[b] = v[0]
            chart = {name: [vals.get(b, 0.0) for b in buckets]
                     for name, vals in series.items()}
            svg = _svg_bar_chart(
                f"Aggregate {manifest['cells'][0]['kind'] if manifest['cells'] else 'generation'} "
                f"HC by distance, {cls}, scenario {scen0}",
                [f"{b * bucket_miles:.0f}" for b in buckets], chart,
                "aggregate HC (kW)")
            name = f"reports/distance_{cls}.svg"
            (out / name).write_text(svg)
            written.append(name)

    elif kind == "limits":
        flat = _read_csv(out / "flat_summary.csv")
        counts = {}
        for r in flat:
            key = (r["regime"], r["config"], r["scenario"],
                   _criterion_of(r["binding_criterion"]))
            counts[key] = counts.get(key, 0) + 1
        table = [(rg, cf, sc, crit, n) for (rg, cf, sc, crit), n in sorted(counts.items())]
        _write_csv(rep_dir / "limits.csv",
                   ["regime", "config", "scenario", "criterion", "count"], table)
        written.append("reports/limits.csv")

        scen0 = sorted({r["scenario"] for r in flat})[0]
        crits = sorted({c for (rg, cf, sc, c) in counts if sc == scen0})
        series = {}
        for (rg, cf, sc, c), n in sorted(counts.items()):
            if sc != scen0:
                continue
            series.setdefault(f"{rg}/{cf}", {})[c] = n
        chart = {name: [vals.get(c, 0) for c in crits] for name, vals in series.items()}
        svg = _svg_bar_chart(f"Constraining limits distribution, scenario {scen0}",
                             crits, chart, "sections")
        (out / "reports/limits.svg").write_text(svg)
        written.append("reports/limits.svg")

    elif kind == "diff":
        diff_files = sorted(out.glob("diff_*.csv"))
        if not diff_files:
            have = {(c["scenario"], c["regime"]) for c in manifest["cells"]}
            raise ReportError(
                "no diff data in bundle; needs opflex and multi-configuration "
                f"classical cells, bundle has {sorted(have)}")
        table = []
        totals = {}
        for f in diff_files:
            scenario = f.stem[len("diff_"):]
            pos = neg = 0
            total = 0.0
            for r in _read_csv(f):
                d = float(r["diff_kw"])
                total += d
                pos += d > 0
                neg += d < 0
            totals[scenario] = total
            table.append((scenario, f"{total:.1f}", pos, neg))
        _write_csv(rep_dir / "diff_summary.csv",
                   ["scenario", "total_diff_kw", "sections_positive",
                    "sections_negative"], table)
        written.append("reports/diff_summary.csv")
        scens = sorted(totals)
        svg = _svg_bar_chart("Aggregate HC difference, OpFlex minus transfer",
                             scens, {"diff": [totals[s] for s in scens]},
                             "kW")
        (out / "reports/diff.svg").write_text(svg)
        written.append("reports/diff.svg")

    elif kind == "load_census":
        rows = _read_csv(out / "census.csv")
        if not rows:
            raise ReportError("census.csv is empty: no census scenarios were run")
        scen0 = sorted({r["scenario"] for r in rows})[0]
        configs = sorted({r["config"] for r in rows if r["scenario"] == scen0})
        buckets = []
        for r in rows:
            if r["scenario"] == scen0 and r["config"] == configs[0]:
                buckets.append(f'{r["bucket_lo_kw"]}-{r["bucket_hi_kw"]}')
        series = {}
        for cfg_id in configs:
            series[cfg_id] = [int(r["count"]) for r in rows
                              if r["scenario"] == scen0 and r["config"] == cfg_id]
        svg = _svg_bar_chart(f"Load HC distribution at peak, scenario {scen0}",
                             buckets, series, "sections")
        (out / "reports/load_census.svg").write_text(svg)
        written.append("reports/load_census.svg")
        zero = [(r["scenario"], r["config"], r["zero_hc_sections"]) for r in rows
                if r["bucket_lo_kw"] == "0.0"]
        _write_csv(rep_dir / "load_census_zero.csv",
                   ["scenario", "config", "zero_hc_sections"], sorted(set(zero)))
        written.append("reports/load_census_zero.csv")

    elif kind == "profile":
        cells = [c for c in manifest["cells"] if c.get("mode") == "profile"]
        if not cells:
            raise ReportError("no profile-mode cells in bundle; run with mode=profile")
        rows = _read_csv(out / "results.csv")
        scen0 = cells[0]["scenario"]
        regime0 = cells[0]["regime"]
        config0 = cells[0]["config"]
        window = []
        series = {}
        for r in rows:
            if (r["scenario"], r["regime"], r["config"]) != (scen0, regime0, config0):
                continue
            iv = IntervalIndex.parse(r["interval"])
            if not 6 <= iv.hour <= 18:
                continue
            window.append((r["section_id"], r["interval"], r["hc_kw"],
                           r["binding_criterion"]))
            if iv.day_type == "weekday":
                series.setdefault(f"m{iv.month:02d}", []).append(
                    (iv.hour, float(r["hc_kw"])))
        _write_csv(rep_dir / "profile_window.csv",
                   ["section_id", "interval", "hc_kw", "binding_criterion"],
                   sorted(window))
        written.append("reports/profile_window.csv")
        svg = _svg_scatter(
            f"Interval HC, 6AM-6PM weekdays, {regime0}/{config0}, scenario {scen0}",
            dict(sorted(series.items())), "hour of day", "HC (kW)")
        (out / "reports/profile.svg").write_text(svg)
        written.append("reports/profile.svg")

    for name in written:
        manifest["files"][name] = _sha256(out / name)
    _write_manifest(out, manifest)
    return written
