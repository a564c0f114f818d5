"""Monte-Carlo experiment driver: sweeps, per-trial records, CSV persistence.

A sweep point is one (subregion division, slots per frame, pilot subcarriers,
SNR) combination; each point runs a fixed number of trials, and every requested
method consumes the SAME scene and measurement within a trial so the curves
are paired.  Rows append to a CSV that can be resumed: completed
(point, trial, method) rows are skipped on a rerun.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import METHODS
from .geometry import (
    Measurement,
    SystemConfig,
    build_port_grid,
    generate_scene,
    simulate_measurement,
    synthesize_channel,
)
from .metrics import CSV_COLUMNS, MetricRecord, matched_mae, nmse, ospa
from .presets import PRESETS, AlgoParams

log = logging.getLogger(__name__)

# Sentinel scores recorded when a method raises instead of returning; a row
# is always written so a sweep never aborts mid-flight.
FAILED_ROW = dict(nmse=1.0, angle_mae_deg=90.0, n_clu=0)


@dataclass(frozen=True)
class ExperimentPlan:
    """A full sweep: base configuration plus the axes to vary."""

    config: SystemConfig
    algo: AlgoParams
    snr_db_list: tuple = (20.0,)
    nt_list: tuple = ()  # empty: keep config.slots_per_frame
    kc_list: tuple = ()  # empty: keep config.pilot_subcarriers
    division_list: tuple = ()  # empty: keep config.subregion_division
    trials: int = 50
    methods: tuple = tuple(METHODS)
    master_seed: int = 0
    out_path: str = "results.csv"

    def points(self):
        """Deterministic sweep-point order; index identifies a point forever."""
        divisions = self.division_list or (self.config.subregion_division,)
        nts = self.nt_list or (self.config.slots_per_frame,)
        kcs = self.kc_list or (self.config.pilot_subcarriers,)
        out = []
        for div in divisions:
            for nt in nts:
                for kc in kcs:
                    for snr in self.snr_db_list:
                        out.append(
                            replace(
                                self.config,
                                subregion_division=tuple(div),
                                slots_per_frame=int(nt),
                                pilot_subcarriers=int(kc),
                                snr_db=float(snr),
                            )
                        )
        return out


def measurement_fingerprint(measurement: Measurement) -> str:
    """Short stable hash of a measurement (pilots + selections)."""
    h = hashlib.sha1()
    for block in measurement.per_subregion_pilots:
        h.update(np.ascontiguousarray(block).tobytes())
    for idx in measurement.visited_port_sets:
        h.update(np.ascontiguousarray(idx).tobytes())
    h.update(np.ascontiguousarray(measurement.pilot_subcarrier_set).tobytes())
    return h.hexdigest()[:12]


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def run_trial(config: SystemConfig, algo: AlgoParams, methods, seed) -> list:
    """One scene, one measurement, every method scored on it."""
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    scene_rng, meas_rng = (np.random.default_rng(s) for s in seed_seq.spawn(2))
    scene = generate_scene(config, scene_rng, algo.tau_max_s)
    grid = build_port_grid(config)
    channel = synthesize_channel(scene.scatterers, grid, config)
    measurement = simulate_measurement(channel, grid, config, rng_seed=meas_rng)
    fingerprint = measurement_fingerprint(measurement)

    div = "x".join(str(d) for d in config.subregion_division)
    cr_ports = config.num_subregions * config.slots_per_frame / config.num_ports
    cr_sc = config.pilot_subcarriers / config.num_subcarriers
    common = dict(
        snr_db=config.snr_db, cr_ports=cr_ports, cr_subcarriers=cr_sc,
        subregion_div=div, scene_hash=fingerprint,
    )

    records = []
    for name in methods:
        t0 = time.perf_counter()
        try:
            result = METHODS[name](measurement, grid, config, algo)
            scores = dict(
                nmse=nmse(result.h_hat, channel.entries),
                ospa_m=ospa(scene.positions, result.positions, algo.ospa_cutoff_m),
                n_clu=result.n_clu,
            )
            scores["angle_mae_deg"], scores["distance_mae_m"] = matched_mae(
                scene.scatterers, result.scatterers, algo.ospa_cutoff_m
            )
        except Exception:  # diagnostic failures become rows, never aborts
            log.exception("method %s failed on seed %s", name, seed)
            scores = dict(FAILED_ROW)
            scores["distance_mae_m"] = algo.ospa_cutoff_m
            scores["ospa_m"] = algo.ospa_cutoff_m
        records.append(
            MetricRecord(
                method=name, trial=-1, runtime_ms=(time.perf_counter() - t0) * 1e3,
                **common, **scores,
            )
        )
    return records


def _point_trial_worker(args):
    config, algo, methods, master_seed, point_idx, trial = args
    seed = np.random.SeedSequence([master_seed, point_idx, trial])
    records = run_trial(config, algo, methods, seed)
    return trial, [replace(r, trial=trial) for r in records]


def _existing_keys(path: Path) -> set:
    keys = set()
    if not path.exists():
        return keys
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            keys.add((row["method"], row["snr_db"], row["cr_ports"],
                      row["cr_subcarriers"], row["subregion_div"], row["trial"]))
    return keys


def run_sweep(plan: ExperimentPlan, jobs: int = 1, resume: bool = True) -> Path:
    """Execute every (point, trial, method) and append rows to the plan's CSV.

    Rows within a point are emitted sorted by (trial, method) so serial and
    parallel runs produce identical files apart from the runtime column.
    Returns the output path.
    """
    out = Path(plan.out_path)
    done = _existing_keys(out) if resume else set()
    new_file = not out.exists() or not resume
    if new_file:
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w", newline="") as fh:
            csv.writer(fh).writerow(CSV_COLUMNS)

    for point_idx, config in enumerate(plan.points()):
        config.validate()
        todo = []
        for trial in range(plan.trials):
            missing = [
                m for m in plan.methods
                if _row_key(m, config, trial) not in done
            ]
            if missing:
                todo.append((config, plan.algo, tuple(plan.methods), plan.master_seed,
                             point_idx, trial))
        if not todo:
            continue
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_point_trial_worker, todo))
        else:
            results = [_point_trial_worker(a) for a in todo]
        results.sort(key=lambda tr: tr[0])
        with out.open("a", newline="") as fh:
            writer = csv.writer(fh)
            for _, records in results:
                for rec in sorted(records, key=lambda r: r.method):
                    key = (rec.method, _format_value(rec.snr_db), _format_value(rec.cr_ports),
                           _format_value(rec.cr_subcarriers), rec.subregion_div, str(rec.trial))
                    if key in done:
                        continue
                    writer.writerow([_format_value(getattr(rec, c)) for c in CSV_COLUMNS])
        log.info("point %d/%d done (%d trials)", point_idx + 1, len(plan.points()), len(todo))
    return out


def _row_key(method, config: SystemConfig, trial):
    div = "x".join(str(d) for d in config.subregion_division)
    cr_ports = config.num_subregions * config.slots_per_frame / config.num_ports
    cr_sc = config.pilot_subcarriers / config.num_subcarriers
    return (method, _format_value(float(config.snr_db)), _format_value(cr_ports),
            _format_value(cr_sc), div, str(trial))


def summarize(csv_path) -> list[dict]:
    """Per-(point, method) means of every metric, sorted for stable output."""
    groups: dict[tuple, list[dict]] = {}
    with Path(csv_path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["subregion_div"], float(row["cr_ports"]), float(row["cr_subcarriers"]),
                   float(row["snr_db"]), row["method"])
            groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups):
        rows = groups[key]
        mean = lambda c: float(np.mean([float(r[c]) for r in rows]))
        div, crp, crs, snr, method = key
        out.append(dict(
            subregion_div=div, cr_ports=crp, cr_subcarriers=crs, snr_db=snr,
            method=method, trials=len(rows), nmse=mean("nmse"),
            nmse_db=10 * np.log10(max(mean("nmse"), 1e-300)),
            angle_mae_deg=mean("angle_mae_deg"), distance_mae_m=mean("distance_mae_m"),
            ospa_m=mean("ospa_m"),
        ))
    return out


def print_summary(csv_path):
    rows = summarize(csv_path)
    hdr = f"{'div':>5} {'crP':>5} {'crSC':>5} {'snr':>6} {'method':>10} {'n':>4} " \
          f"{'nmse_db':>8} {'angMAE':>8} {'dstMAE':>8} {'ospa':>7}"
    print(hdr)
    for r in rows:
        print(f"{r['subregion_div']:>5} {r['cr_ports']:>5.3g} {r['cr_subcarriers']:>5.3g} "
              f"{r['snr_db']:>6.1f} {r['method']:>10} {r['trials']:>4d} {r['nmse_db']:>8.2f} "
              f"{r['angle_mae_deg']:>8.3f} {r['distance_mae_m']:>8.3f} {r['ospa_m']:>7.3f}")


def load_plan_file(path, preset: str = "desk") -> ExperimentPlan:
    """Build a plan from a JSON config file layered over a preset.

    System keys (carrier_freq_hz, ports_per_axis, port_spacing_in_wavelengths,
    ...) override the preset's SystemConfig; estimator keys (l_pre, g_theta,
    ...) override its AlgoParams; sweep keys (snr_db_list, nt_list, kc_list,
    division_list, trials, methods, master_seed, out_path) shape the sweep.
    """
    raw = json.loads(Path(path).read_text()) if path else {}
    return plan_from_dict(raw, preset)


def plan_from_dict(raw: dict, preset: str = "desk") -> ExperimentPlan:
    config, algo = PRESETS[preset]()
    raw = dict(raw)
    sys_keys = {k: raw.pop(k) for k in list(raw) if k in SystemConfig.__dataclass_fields__
                or k == "port_spacing_in_wavelengths"}
    algo_keys = {k: raw.pop(k) for k in list(raw) if k in AlgoParams.__dataclass_fields__}
    plan_keys = {k: raw.pop(k) for k in list(raw)
                 if k in ExperimentPlan.__dataclass_fields__ and k not in ("config", "algo")}
    if raw:
        raise ValueError(f"unknown plan keys: {sorted(raw)}")
    if sys_keys:
        merged = {f: getattr(config, f) for f in SystemConfig.__dataclass_fields__}
        merged.update(sys_keys)
        config = SystemConfig.from_dict(merged)
    if algo_keys:
        algo = replace(algo, **algo_keys)
    for key in ("snr_db_list", "nt_list", "kc_list", "methods"):
        if key in plan_keys:
            plan_keys[key] = tuple(plan_keys[key])
    if "division_list" in plan_keys:
        plan_keys["division_list"] = tuple(tuple(d) for d in plan_keys["division_list"])
    return ExperimentPlan(config=config, algo=algo, **plan_keys)
