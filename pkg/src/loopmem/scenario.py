"""Scenario files, named presets, and the experiment pipelines behind the CLI.

A scenario is a JSON object; `load_scenario` validates it into a frozen
Scenario and reports violations with the dotted path of the offending field.
A scenario may start from a named preset and override individual fields.

Every table written by `run` carries the scenario content hash and the seed,
and CSV output is byte-identical across re-runs; wall-clock timestamps only
appear in JSON metadata.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

from .components import (
    CIRCULATOR_ARM, COUPLER, FIBER_SEGMENT, FPC, POCKELS_CELL, RETROREFLECTOR,
    ComponentSpec,
)
from .counting import DecayScan, MalusScan, TomographyScan, run_scan
from .engine import (MemoryConfig, TransmissionParams, derive_transmission_params,
                     efficiency, simulate_storage)
from .errors import SchemaError
from .fitting import fit_decay, fit_malus, project_budget, route_inventory
from .polarization import A, D, H, L, PureState, R, V, fidelity, make_pure
from .tomography import MeasurementSet, counts_from_dataset, mle_reconstruct, reconstruct_with_uncertainty

STATE_NAMES = {"H": H, "V": V, "D": D, "A": A, "R": R, "L": L}

_SOURCE_KEYS = {"pair_rate", "detection_eff", "acquisition_s"}
_MEMORY_KEYS = {
    "delta_tau", "pass_through_time", "pc_rise_time", "herald_latency",
    "delay_line_compensation", "coincidence_window", "x_dl_enabled",
    "params", "inventory", "wavelength_nm",
    "pc_rotation_error", "fpc_rotation_error", "delay_static_phase",
    "circulator_arm_phase",
}
_TOP_KEYS = {
    "preset", "label", "seed", "n_values", "input_states", "malus_points",
    "malus_angles_deg", "malus_cycles", "tomo_cycles", "mc_samples",
    "source", "memory",
}
_COMPONENT_KEYS = {"kind", "transmission", "rotation_error", "static_phase",
                   "length_m", "atten_db_per_km"}

PRESETS: dict[str, dict] = {
    # short storage line: measured per-segment transmissions, 36.5 ns cycle
    "paper-short": {
        "label": "paper-short",
        "memory": {
            "delta_tau": 36.5,
            "params": {"g13": 0.541, "g12": 0.419, "g22": 0.50, "g23": 0.662},
        },
    },
    # long storage line: same device with the 0.526 us delay spool
    "paper-long": {
        "label": "paper-long",
        "memory": {
            "delta_tau": 526.0,
            "params": {"g13": 0.541, "g12": 0.398, "g22": 0.44, "g23": 0.662},
        },
    },
    # upgraded-component inventory: free-space couplers, low-loss switch,
    # spliced fiber joints, short storage span at 780 nm
    "paper-improved": {
        "label": "paper-improved",
        "memory": {
            "delta_tau": 36.5,
            "wavelength_nm": 780.0,
            "inventory": [
                {"kind": COUPLER, "transmission": 0.96},
                {"kind": COUPLER, "transmission": 0.96},
                {"kind": COUPLER, "transmission": 0.96},
                {"kind": CIRCULATOR_ARM, "transmission": 0.98},
                {"kind": POCKELS_CELL, "transmission": 0.99},
                {"kind": FIBER_SEGMENT, "length_m": 0.5},
                {"kind": RETROREFLECTOR, "transmission": 0.98},
                {"kind": FPC},
            ],
        },
    },
}


@dataclass(frozen=True)
class Scenario:
    label: str
    config: MemoryConfig
    input_states: tuple[tuple[str, PureState], ...]
    n_values: tuple[int, ...]
    malus_angles: tuple[float, ...]
    malus_cycles: int
    tomo_cycles: int
    pair_rate: float
    detection_eff: float
    acquisition_s: float
    seed: int
    mc_samples: int
    wavelength_nm: float | None
    raw: dict

    def content_hash(self) -> str:
        """Hash of the resolved definition, seed excluded."""
        blob = {k: v for k, v in self.raw.items() if k != "seed"}
        text = json.dumps(blob, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _fail(msg: str, path: str):
    raise SchemaError(msg, field=path)


def _check_keys(d: dict, allowed: set, path: str):
    if not isinstance(d, dict):
        _fail("expected an object", path)
    for key in d:
        if key not in allowed:
            _fail(f"unknown key {key!r}", f"{path}.{key}" if path else key)


def _number(d: dict, key: str, path: str, default=None):
    if key not in d:
        if default is None:
            _fail("missing required field", f"{path}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail("expected a number", f"{path}.{key}")
    return float(v)


def _component(d: dict, path: str) -> ComponentSpec:
    _check_keys(d, _COMPONENT_KEYS, path)
    if "kind" not in d:
        _fail("missing required field", f"{path}.kind")
    t = d.get("transmission", 1.0)
    if isinstance(t, list):
        if len(t) != 2:
            _fail("transmission list must have two entries", f"{path}.transmission")
        t = (float(t[0]), float(t[1]))
    return ComponentSpec(
        d["kind"], t,
        rotation_error=_number(d, "rotation_error", path, 0.0),
        static_phase=_number(d, "static_phase", path, 0.0),
        length_m=_number(d, "length_m", path, 0.0),
        atten_db_per_km=_number(d, "atten_db_per_km", path, 0.0))


def _parse_state(entry, path: str) -> tuple[str, PureState]:
    if isinstance(entry, str):
        if entry not in STATE_NAMES:
            _fail(f"unknown state name {entry!r}; known: {sorted(STATE_NAMES)}", path)
        return entry, STATE_NAMES[entry]
    if isinstance(entry, dict):
        _check_keys(entry, {"label", "alpha", "beta"}, path)
        try:
            alpha = complex(entry["alpha"][0], entry["alpha"][1])
            beta = complex(entry["beta"][0], entry["beta"][1])
            return str(entry["label"]), make_pure(alpha, beta)
        except (KeyError, IndexError, TypeError):
            _fail("state needs label, alpha [re, im], beta [re, im]", path)
    _fail("expected a state name or object", path)


def _build_config(mem: dict) -> tuple[MemoryConfig, float | None]:
    _check_keys(mem, _MEMORY_KEYS, "memory")
    if "params" in mem and "inventory" in mem:
        _fail("params and inventory are mutually exclusive", "memory")
    delta_tau = _number(mem, "delta_tau", "memory")

    timing = {}
    for key in ("pass_through_time", "pc_rise_time", "herald_latency",
                "delay_line_compensation", "coincidence_window"):
        if key in mem:
            timing[key] = _number(mem, key, "memory")
    if "x_dl_enabled" in mem:
        if not isinstance(mem["x_dl_enabled"], bool):
            _fail("expected a boolean", "memory.x_dl_enabled")
        timing["x_dl_enabled"] = mem["x_dl_enabled"]

    if "inventory" in mem:
        if not isinstance(mem["inventory"], list) or not mem["inventory"]:
            _fail("expected a non-empty list", "memory.inventory")
        for knob in ("pc_rotation_error", "fpc_rotation_error",
                     "delay_static_phase", "circulator_arm_phase"):
            if knob in mem:
                _fail("set rotation_error/static_phase on the inventory "
                      "component instead", f"memory.{knob}")
        parts = [_component(c, f"memory.inventory[{i}]")
                 for i, c in enumerate(mem["inventory"])]
        cfg = replace(route_inventory(parts, delta_tau), **timing)
    else:
        if "params" in mem:
            p = mem["params"]
            _check_keys(p, {"g13", "g12", "g22", "g23"}, "memory.params")
            params = TransmissionParams(
                _number(p, "g13", "memory.params"), _number(p, "g12", "memory.params"),
                _number(p, "g22", "memory.params"), _number(p, "g23", "memory.params"))
            cfg = MemoryConfig.from_params(params, delta_tau=delta_tau, **timing)
        else:
            cfg = MemoryConfig(delta_tau=delta_tau, **timing)
        if "pc_rotation_error" in mem:
            eps = _number(mem, "pc_rotation_error", "memory")
            cfg = replace(cfg, switch_zone=(ComponentSpec(POCKELS_CELL, rotation_error=eps),))
        if "fpc_rotation_error" in mem or "delay_static_phase" in mem:
            eps = _number(mem, "fpc_rotation_error", "memory", 0.0)
            phi = _number(mem, "delay_static_phase", "memory", 0.0)
            fiber = next(c for c in cfg.delay_zone if c.kind == FIBER_SEGMENT)
            cfg = replace(cfg, delay_zone=(
                replace(fiber, static_phase=phi),
                ComponentSpec(RETROREFLECTOR),
                ComponentSpec(FPC, rotation_error=eps)))
        if "circulator_arm_phase" in mem:
            phi = _number(mem, "circulator_arm_phase", "memory")
            cfg = replace(cfg, circulator_zone=(
                ComponentSpec(CIRCULATOR_ARM, static_phase=phi),))

    wavelength = mem.get("wavelength_nm")
    return cfg, (float(wavelength) if wavelength is not None else None)


def _build(raw: dict) -> Scenario:
    _check_keys(raw, _TOP_KEYS, "")
    if "memory" not in raw:
        _fail("missing required field", "memory")
    cfg, wavelength = _build_config(raw["memory"])

    label = raw.get("label", "scenario")
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail("expected a nonnegative integer", "seed")

    n_values = raw.get("n_values", list(range(1, 9)))
    if (not isinstance(n_values, list) or not n_values
            or any(isinstance(n, bool) or not isinstance(n, int) or n < 0 for n in n_values)):
        _fail("expected a non-empty list of integers >= 0", "n_values")

    states = raw.get("input_states", ["H", "D", "R"])
    if not isinstance(states, list) or not states:
        _fail("expected a non-empty list", "input_states")
    input_states = tuple(_parse_state(s, f"input_states[{i}]")
                         for i, s in enumerate(states))

    if "malus_angles_deg" in raw:
        degs = raw["malus_angles_deg"]
        if not isinstance(degs, list) or len(degs) < 5:
            _fail("expected a list of at least 5 angles", "malus_angles_deg")
        angles = tuple(math.radians(float(a)) for a in degs)
    else:
        pts = raw.get("malus_points", 13)
        if isinstance(pts, bool) or not isinstance(pts, int) or pts < 5:
            _fail("expected an integer >= 5", "malus_points")
        angles = tuple(np.linspace(0.0, math.pi, pts))

    def _int_field(key, default, minimum):
        v = raw.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            _fail(f"expected an integer >= {minimum}", key)
        return v

    malus_cycles = _int_field("malus_cycles", 1, 0)
    tomo_cycles = _int_field("tomo_cycles", 1, 0)
    mc_samples = _int_field("mc_samples", 10000, 2)

    source = raw.get("source", {})
    _check_keys(source, _SOURCE_KEYS, "source")
    pair_rate = _number(source, "pair_rate", "source", 2000.0)
    detection_eff = _number(source, "detection_eff", "source", 1.0)
    acquisition_s = _number(source, "acquisition_s", "source", 60.0)

    return Scenario(label, cfg, input_states, tuple(n_values), angles,
                    malus_cycles, tomo_cycles, pair_rate, detection_eff,
                    acquisition_s, seed, mc_samples, wavelength, raw)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key == "preset":
            continue
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def resolve(raw: dict) -> Scenario:
    """Expand a preset reference, merge overrides, and validate."""
    if not isinstance(raw, dict):
        raise SchemaError("scenario must be a JSON object", field="")
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            _fail(f"unknown preset {name!r}; known: {sorted(PRESETS)}", "preset")
        raw = _deep_merge(PRESETS[name], raw)
    return _build(raw)


def preset_scenario(name: str) -> Scenario:
    return resolve({"preset": name})


def load_scenario(path: str | os.PathLike) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}", field="(file)") from exc
    return resolve(raw)


# ---------------------------------------------------------------------------
# pipelines

class _Emitter:
    """Deterministic file writer; stamps hash+seed, isolates timestamps."""

    def __init__(self, scenario: Scenario, out_dir: str):
        self.scenario = scenario
        self.out_dir = out_dir
        self.written: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def _emit(self, name: str, text: str) -> str:
        path = os.path.join(self.out_dir, name)
        tmp = path + ".tmp"
        with open(tmp, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
        self.written.append(path)
        return path

    def csv(self, name: str, columns: tuple[str, ...], rows) -> str:
        lines = [f"# scenario={self.scenario.content_hash()} seed={self.scenario.seed}"]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_cell(v) for v in row))
        return self._emit(name, "\n".join(lines) + "\n")

    def json(self, name: str, payload: dict) -> str:
        obj = {
            "metadata": {
                "scenario_hash": self.scenario.content_hash(),
                "seed": self.scenario.seed,
                "label": self.scenario.label,
                "generated_at": datetime.now(timezone.utc).isoformat(),
            },
        }
        obj.update(payload)
        return self._emit(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


class _SeedPlan:
    """Stable per-task sub-seeds derived from the scenario seed."""

    def __init__(self, master: int):
        self.master = master
        self.count = 0

    def next(self) -> int:
        seq = np.random.SeedSequence([self.master, self.count])
        self.count += 1
        return int(seq.generate_state(1)[0])


def _rho_flat(rho: np.ndarray) -> list[float]:
    out: list[float] = []
    for i in range(2):
        for j in range(2):
            out.extend([float(rho[i, j].real), float(rho[i, j].imag)])
    return out


def _fit_payload(fit) -> dict:
    return {"visibility": fit.visibility, "sigma_visibility": fit.sigma_visibility,
            "theta0_rad": fit.theta0, "amplitude": fit.amplitude, "clamped": fit.clamped}


def run(scenario: Scenario, subcommand: str, out_dir: str,
        figure: str | None = None) -> tuple[dict, list[str]]:
    """Execute one pipeline; returns (summary, written file paths)."""
    emitter = _Emitter(scenario, out_dir)
    seeds = _SeedPlan(scenario.seed)
    handlers = {
        "simulate": _run_simulate, "decay": _run_decay, "malus": _run_malus,
        "tomo": _run_tomo, "budget": _run_budget,
    }
    if subcommand == "reproduce":
        figures = {"fig2c": _run_fig2c, "fig3": _run_fig3, "fig4": _run_fig4}
        if figure not in figures:
            raise SchemaError(f"unknown figure {figure!r}; known: {sorted(figures)}",
                              field="reproduce")
        summary = figures[figure](scenario, emitter, seeds)
    elif subcommand in handlers:
        summary = handlers[subcommand](scenario, emitter, seeds)
    else:
        raise SchemaError(f"unknown subcommand {subcommand!r}", field="subcommand")
    return summary, emitter.written


def _run_simulate(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    rows = []
    summary: dict = {}
    for label, state in sc.input_states:
        for n in sc.n_values:
            out = simulate_storage(sc.config, state, n)
            rows.append((label, n, "retrieved", out.retrieved.time,
                         out.retrieved.weight, fidelity(out.retrieved.state, state)))
            for ev in out.exits:
                rows.append((label, n, "exit", ev.time, ev.weight,
                             fidelity(ev.state, state)))
            for ev in out.ejections:
                rows.append((label, n, "ejected", ev.time, ev.weight, None))
            rows.append((label, n, "absorbed", None, out.absorbed, None))
            summary[f"{label}/N={n}"] = {
                "retrieved_weight": out.retrieved.weight,
                "fidelity": fidelity(out.retrieved.state, state),
                "weight_balance": out.weight_balance(),
            }
    emitter.csv("simulate_events.csv",
                ("input_state", "n_cycles", "event", "time_ns", "weight", "fidelity"),
                rows)
    emitter.json("simulate.json", {"outcomes": summary})
    return {"outcomes": len(summary)}


def _run_decay(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    n_values = tuple(n for n in sc.n_values if n >= 1)
    if len(n_values) < 3:
        raise SchemaError("decay needs at least 3 values of n >= 1", field="n_values")
    scan = DecayScan(n_values)
    rows = []
    fits = {}
    for label, state in sc.input_states:
        ds = run_scan(sc.config, state, scan, pair_rate=sc.pair_rate,
                      detection_eff=sc.detection_eff,
                      acquisition_s=sc.acquisition_s, seed=seeds.next())
        for r in ds.records:
            rows.append((label, r.setting_value, r.counts, r.acquisition_s, r.seed))
        fit = fit_decay(ds.values(), ds.counts())
        fits[label] = {"gamma_per_cycle": fit.gamma_per_cycle,
                       "sigma_gamma": fit.sigma_gamma, "prefactor": fit.prefactor,
                       "n_excluded": fit.n_excluded, "clamped": fit.clamped}
    emitter.csv("decay_counts.csv",
                ("input_state", "n_cycles", "counts", "acquisition_s", "seed"), rows)

    params = derive_transmission_params(sc.config)
    eta = {str(n): efficiency(params, n) for n in range(0, max(n_values) + 1)}
    emitter.json("decay.json", {"fits": fits, "eta_closed_form": eta})
    return {"fits": fits}


def _run_malus(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    rows = []
    fits = {}
    scan = MalusScan(sc.malus_angles, sc.malus_cycles)
    for label, state in sc.input_states:
        ds = run_scan(sc.config, state, scan, pair_rate=sc.pair_rate,
                      detection_eff=sc.detection_eff,
                      acquisition_s=sc.acquisition_s, seed=seeds.next())
        for r in ds.records:
            rows.append((label, r.setting_value, r.counts, r.acquisition_s, r.seed))
        fits[label] = _fit_payload(fit_malus(ds.values(), ds.counts()))
    emitter.csv("malus_counts.csv",
                ("input_state", "angle_rad", "counts", "acquisition_s", "seed"), rows)
    emitter.json("malus.json", {"fits": fits, "n_cycles": sc.malus_cycles})
    return {"fits": fits}


def _run_tomo(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    mset = MeasurementSet()
    rows = []
    recon = {}
    scan = TomographyScan(sc.tomo_cycles)
    for label, state in sc.input_states:
        ds = run_scan(sc.config, state, scan, pair_rate=sc.pair_rate,
                      detection_eff=sc.detection_eff,
                      acquisition_s=sc.acquisition_s, seed=seeds.next())
        for r in ds.records:
            rows.append((label, r.setting_label, r.counts, r.acquisition_s, r.seed))
        counts = counts_from_dataset(ds, mset)
        res = reconstruct_with_uncertainty(counts, mset, state,
                                           n_samples=sc.mc_samples, seed=seeds.next())
        recon[label] = {
            "rho": _rho_flat(res.rho.matrix), "fidelity": res.fidelity,
            "flux": res.flux, "converged": res.converged,
            "mc_mean": res.mc_mean, "mc_std": res.mc_std,
            "n_samples": res.n_samples, "n_failed": res.n_failed,
        }
    emitter.csv("tomo_counts.csv",
                ("input_state", "setting", "counts", "acquisition_s", "seed"), rows)
    emitter.json("tomo.json", {"reconstructions": recon, "n_cycles": sc.tomo_cycles})
    return {"reconstructions": {k: v["fidelity"] for k, v in recon.items()}}


def _run_budget(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    n_max = max(max(sc.n_values), 8)
    report = project_budget(sc.config, wavelength_nm=sc.wavelength_nm, n_max=n_max)
    payload = {
        "params": {"g13": report.params.g13, "g12": report.params.g12,
                   "g22": report.params.g22, "g23": report.params.g23},
        "per_cycle": report.per_cycle,
        "lifetime_cycles_1e": report.lifetime_cycles_1e,
        "lifetime_time_1e_ns": report.lifetime_time_1e_ns,
        "fiber_factor": report.fiber_factor,
        "wavelength_nm": report.wavelength_nm,
        "delta_tau": report.delta_tau,
    }
    emitter.csv("budget_eta.csv", ("n_cycles", "eta"),
                [(n, e) for n, e in enumerate(report.eta_table)])
    emitter.json("budget.json", payload)
    return payload


def _run_fig2c(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    """Efficiency-vs-cycles bundle: closed-form table plus a sampled decay fit."""
    label, state = sc.input_states[0]
    n_values = tuple(range(1, 9))
    params = derive_transmission_params(sc.config)
    ds = run_scan(sc.config, state, DecayScan(n_values), pair_rate=sc.pair_rate,
                  detection_eff=sc.detection_eff, acquisition_s=sc.acquisition_s,
                  seed=seeds.next())
    fit = fit_decay(ds.values(), ds.counts())
    scale = sc.pair_rate * sc.detection_eff * sc.acquisition_s
    rows = [(n, efficiency(params, n), efficiency(params, n) * scale, r.counts)
            for n, r in zip(n_values, ds.records)]
    emitter.csv("fig2c.csv", ("n_cycles", "eta", "counts_mean", "counts_sampled"), rows)
    payload = {
        "input_state": label,
        "gamma_fit": fit.gamma_per_cycle, "gamma_sigma": fit.sigma_gamma,
        "prefactor": fit.prefactor,
        "eta_pass_through": efficiency(params, 0),
        "params": {"g13": params.g13, "g12": params.g12,
                   "g22": params.g22, "g23": params.g23},
    }
    emitter.json("fig2c.json", payload)
    return payload


def _run_fig3(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    """Fringe + tomography bundle at one cycle count."""
    mrows = []
    fits = {}
    for label, state in (("H", H), ("D", D)):
        ds = run_scan(sc.config, state, MalusScan(sc.malus_angles, sc.malus_cycles),
                      pair_rate=sc.pair_rate, detection_eff=sc.detection_eff,
                      acquisition_s=sc.acquisition_s, seed=seeds.next())
        for r in ds.records:
            mrows.append((label, r.setting_value, r.counts, r.acquisition_s, r.seed))
        fits[label] = _fit_payload(fit_malus(ds.values(), ds.counts()))
    emitter.csv("fig3_malus.csv",
                ("input_state", "angle_rad", "counts", "acquisition_s", "seed"), mrows)

    mset = MeasurementSet()
    ds = run_scan(sc.config, R, TomographyScan(sc.tomo_cycles),
                  pair_rate=sc.pair_rate, detection_eff=sc.detection_eff,
                  acquisition_s=sc.acquisition_s, seed=seeds.next())
    emitter.csv("fig3_tomo.csv", ("setting", "counts", "acquisition_s", "seed"),
                [(r.setting_label, r.counts, r.acquisition_s, r.seed) for r in ds.records])
    res = reconstruct_with_uncertainty(counts_from_dataset(ds, mset), mset, R,
                                       n_samples=sc.mc_samples, seed=seeds.next())
    payload = {
        "visibility_h": fits["H"], "visibility_d": fits["D"],
        "tomo_r": {"fidelity": res.fidelity, "mc_mean": res.mc_mean,
                   "mc_std": res.mc_std, "n_samples": res.n_samples,
                   "n_failed": res.n_failed, "rho": _rho_flat(res.rho.matrix)},
        "n_cycles": {"malus": sc.malus_cycles, "tomo": sc.tomo_cycles},
    }
    emitter.json("fig3.json", payload)
    return payload


def _run_fig4(sc: Scenario, emitter: _Emitter, seeds: _SeedPlan) -> dict:
    """Output-quality-vs-storage-time bundle: visibilities and fidelities per n.

    Fidelities are MLE point estimates; the Monte Carlo error bars are left to
    the dedicated tomo pipeline to keep this sweep fast.
    """
    mset = MeasurementSet()
    rows = []
    per_n = {}
    for n in sc.n_values:
        entry = {}
        for label, state in (("H", H), ("D", D)):
            ds = run_scan(sc.config, state, MalusScan(sc.malus_angles, n),
                          pair_rate=sc.pair_rate, detection_eff=sc.detection_eff,
                          acquisition_s=sc.acquisition_s, seed=seeds.next())
            fit = fit_malus(ds.values(), ds.counts())
            entry[f"visibility_{label.lower()}"] = fit.visibility
            entry[f"sigma_v{label.lower()}"] = fit.sigma_visibility
        for label, state in (("H", H), ("D", D), ("R", R)):
            ds = run_scan(sc.config, state, TomographyScan(n),
                          pair_rate=sc.pair_rate, detection_eff=sc.detection_eff,
                          acquisition_s=sc.acquisition_s, seed=seeds.next())
            res = mle_reconstruct(counts_from_dataset(ds, mset), mset, state)
            entry[f"fidelity_{label.lower()}"] = res.fidelity
        rows.append((n, n * sc.config.delta_tau,
                     entry["visibility_h"], entry["sigma_vh"],
                     entry["visibility_d"], entry["sigma_vd"],
                     entry["fidelity_h"], entry["fidelity_d"], entry["fidelity_r"]))
        per_n[str(n)] = entry
    emitter.csv("fig4.csv",
                ("n_cycles", "storage_time_ns", "visibility_h", "sigma_vh",
                 "visibility_d", "sigma_vd", "fidelity_h", "fidelity_d", "fidelity_r"),
                rows)
    emitter.json("fig4.json", {"per_n": per_n})
    return {"per_n": per_n}
