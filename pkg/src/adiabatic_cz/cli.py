"""Command-line entry point.

Each subcommand runs one study and writes CSV/JSON files into an output
directory.  A study is described by a JSON config::

    {"study": "spectrum", "preset": "measured_device", "output": "out",
     "seed": 0, "params": {"grid": {"start": 2500, "stop": 3600, "points": 201}}}

Fields can be overridden on the command line with ``--set path=value``
(``value`` is parsed as JSON when possible).  Exit codes: 0 success,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import dynamics, fitting, pulses, rbstats
from .adiabaticity import adiabatic_factor, total_D
from .device import COMPUTATIONAL, HilbertLabel, load_device
from .errors import AdiabaticCZError, ConfigError, NumericalError
from .export import metadata, write_csv, write_json
from .schema import STUDIES, validate_study
from .spectrum import hybridization, track_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_GRID = {
    "type": "object",
    "properties": {
        "start": {"type": "number", "exclusiveMinimum": 0},
        "stop": {"type": "number", "exclusiveMinimum": 0},
        "points": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}
_LABEL = {"type": "string", "pattern": r"^\s*\|?\s*\d+\s*,?\s*\d+\s*,\s*\d+\s*>?\s*$"}

PARAM_SCHEMAS = {
    "spectrum": {
        "properties": {"grid": _GRID, "anchor": {"type": "number"}, "state": _LABEL},
    },
    "dfactor": {
        "properties": {"grid": _GRID, "anchor": {"type": "number"}, "source": _LABEL,
                       "manifold_only": {"type": "boolean"}},
    },
    "pulse": {
        "properties": {
            "type": {"enum": ["cosine", "awp"]},
            "t_cz": {"type": "number", "exclusiveMinimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "coefficients": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            "domain": {"enum": ["frequency", "flux"]},
            "calibrate": {"type": "boolean"},
            "target_phase": {"type": "number"},
            "target_frequency": {"type": "number", "exclusiveMinimum": 0},
            "lambda": {"type": "number", "exclusiveMinimum": 0},
            "dt_solver": {"type": "number", "exclusiveMinimum": 0},
            "d_grid_points": {"type": "integer", "minimum": 10},
            "pad": {"type": "number", "minimum": 0},
        },
    },
    "leakage": {
        "properties": {
            "t_cz": {"type": "number", "exclusiveMinimum": 0},
            "target_frequency": {"type": "number", "exclusiveMinimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "domain": {"enum": ["frequency", "flux"]},
            "delays": {
                "type": "object",
                "properties": {"start": {"type": "number", "minimum": 0},
                               "stop": {"type": "number", "minimum": 0},
                               "step": {"type": "number", "exclusiveMinimum": 0}},
                "additionalProperties": False,
            },
            "max_cycles": {"type": "integer", "minimum": 1},
            "labels": {"type": "array", "items": _LABEL},
            "dt_solver": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "compare": {
        "properties": {
            "presets": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
            "grid": _GRID,
        },
    },
    "fit": {
        "required": ["dataset"],
        "properties": {
            "dataset": {"type": "string"},
            "free": {"type": "array", "items": {"enum": list(fitting.FREE_PARAMETERS)}, "uniqueItems": True},
            "anchor": {"type": "number"},
        },
    },
    "rb": {
        "required": ["rb", "irb"],
        "properties": {
            "rb": {"type": "string"},
            "irb": {"type": "string"},
            "d": {"type": "integer", "minimum": 2},
            "samples": {"type": "integer", "minimum": 10},
            "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
    },
}

DEFAULTS = {
    "spectrum": {"state": "11,0"},
    "dfactor": {"source": "11,0", "manifold_only": False},
    "pulse": {"type": "cosine", "t_cz": 24.0, "dt": 0.1, "coefficients": [0.5], "domain": "flux",
              "calibrate": True, "target_phase": math.pi, "dt_solver": dynamics.DEFAULT_DT,
              "d_grid_points": 200, "pad": 0.0},
    "leakage": {"t_cz": 24.0, "target_frequency": 3500.0, "dt": 0.01, "domain": "frequency",
                "delays": {"start": 0.0, "stop": 30.0, "step": 0.05}, "max_cycles": 40,
                "labels": ["02,0", "20,0", "01,1"], "dt_solver": dynamics.DEFAULT_DT},
    "compare": {"presets": ["sym_comparison", "asym_comparison"]},
    "fit": {"free": list(fitting.FREE_PARAMETERS)},
    "rb": {"d": 4, "samples": 10000, "level": 0.95},
}
DEFAULT_PRESET = {"compare": "sym_comparison"}


# ---------------------------------------------------------------------------
# config handling


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    """Apply one ``path=value`` override in place.

    Paths are dotted; a path whose first segment is not a top-level field
    is taken relative to ``params``.
    """
    path, sep, value = assignment.partition("=")
    if not sep or not path.strip():
        raise ConfigError(f"--set expects path=value, got {assignment!r}")
    keys = path.strip().split(".")
    if keys[0] not in ("study", "preset", "output", "seed", "params"):
        keys = ["params"] + keys
    node = config
    for k in keys[:-1]:
        nxt = node.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"--set path {path!r} crosses a non-object value")
        node = nxt
    node[keys[-1]] = _parse_value(value)


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else copy.deepcopy(v)
    return out


def build_config(study: str, config_path=None, overrides=(), preset=None, output=None, seed=None) -> dict:
    config: dict = {"study": study}
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {config_path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a JSON object")
        if loaded.get("study", study) != study:
            raise ConfigError(f"config describes study {loaded['study']!r}, not {study!r}")
        config.update(loaded)
    for key, value in (("preset", preset), ("output", output), ("seed", seed)):
        if value is not None:
            config[key] = value
    for item in overrides:
        apply_override(config, item)
    validate_study(config)
    schema = dict(PARAM_SCHEMAS[study], type="object", additionalProperties=False)
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(config.get("params", {})),
                    key=lambda e: list(e.absolute_path))
    if errors:
        where = "/".join(["params", *map(str, errors[0].absolute_path)])
        raise ConfigError(f"invalid study config at {where}: {errors[0].message}")
    config["params"] = _merge(DEFAULTS.get(study, {}), config.get("params", {}))
    config.setdefault("preset", DEFAULT_PRESET.get(study, "measured_device"))
    config.setdefault("output", str(Path("out") / study))
    config.setdefault("seed", 0)
    return config


def _output_dir(config) -> Path:
    out = Path(config["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _grid(device, params, points=201):
    g = params.get("grid", {})
    start = g.get("start", device.coupler.f_min * 1.0001)
    stop = g.get("stop", device.coupler.f_max * 0.9999)
    if not start < stop:
        raise ConfigError("grid start must be below grid stop")
    return np.linspace(start, stop, g.get("points", points))


def _anchor(device, params, grid):
    anchor = params.get("anchor")
    if anchor is None:
        anchor = device.operating_point()
    return float(anchor), np.union1d(grid, [anchor])


def _label_name(lab) -> str:
    return "".join(map(str, lab[:2])) + "_" + str(lab[2])


def _meta(device, config, **extra):
    return metadata(device, config["seed"], study=config["study"], **extra)


# ---------------------------------------------------------------------------
# studies


def cmd_spectrum(config) -> list:
    device = load_device(config["preset"])
    p, out = config["params"], _output_dir(config)
    anchor, grid = _anchor(device, p, _grid(device, p))
    spec = track_spectrum(device, grid, anchor)
    meta = _meta(device, config, anchor_MHz=anchor)
    labels = [str(lab) for lab in spec.labels]
    files = [write_csv(out / "spectrum.csv", ["f_c_MHz", *labels],
                       [[f, *e] for f, e in zip(spec.grid, spec.energies)], meta)]
    hyb = hybridization(spec, p["state"])
    files.append(write_csv(out / "hybridization.csv", ["f_c_MHz", *labels],
                           [[f, *w] for f, w in zip(spec.grid, hyb.weights)],
                           dict(meta, state=str(hyb.state))))
    files.append(write_csv(out / "zeta.csv", ["f_c_MHz", "zeta_MHz"],
                           list(zip(spec.grid, spec.zeta_curve())), meta))
    return files


def cmd_dfactor(config) -> list:
    device = load_device(config["preset"])
    p, out = config["params"], _output_dir(config)
    anchor, grid = _anchor(device, p, _grid(device, p))
    spec = track_spectrum(device, grid, anchor)
    curve = adiabatic_factor(device, grid, p["source"], anchor, spectrum=spec, manifold_only=p["manifold_only"])
    tot = total_D(device, grid, anchor, spectrum=spec, manifold_only=p["manifold_only"])
    source = curve.sources[0]
    partners = [lab for lab in curve.partners if lab != source]
    header = ["f_c_MHz"] + [f"D_{lab}_ns2" for lab in partners] + ["D_source_sum_ns2", "D_total_ns2"]
    rows = []
    for g, f in enumerate(curve.grid):
        rows.append([f, *(curve.component(source, lab)[g] for lab in partners),
                     curve.per_state[g, 0], tot.total[g]])
    meta = _meta(device, config, anchor_MHz=anchor, source=str(source),
                 total_over=";".join(str(c) for c in COMPUTATIONAL))
    return [write_csv(out / "dfactor.csv", header, rows, meta)]


def _awp_curve(device, idle, points):
    grid = np.linspace(idle, device.coupler.f_max * (1 - 1e-6), points)
    return pulses.refined_total_D(device, grid, idle)


def cmd_pulse(config) -> list:
    device = load_device(config["preset"])
    p, out = config["params"], _output_dir(config)
    idle = device.operating_point()
    info: dict = {"type": p["type"], "t_cz_ns": p["t_cz"], "idle_MHz": idle, "domain": p["domain"]}
    if p["type"] == "awp":
        curve = _awp_curve(device, idle, p["d_grid_points"])
        if p["calibrate"]:
            cal = dynamics.calibrate_amplitude(device, pulses.AwpSpec(p["t_cz"], 1.0, curve, idle),
                                               p["target_phase"], dt=p["dt"], dt_solver=p["dt_solver"],
                                               pad=p["pad"])
        else:
            lam = p.get("lambda")
            if lam is None:
                raise ConfigError("params/lambda is required for an uncalibrated AWP")
            wave = pulses.awp_generate(pulses.AwpSpec(p["t_cz"], lam, curve, idle), p["dt"]).padded(p["pad"], p["pad"])
            cal = None
    else:
        env = pulses.fourier_cosine(p["t_cz"], p["coefficients"], p["dt"])
        if p["calibrate"]:
            cal = dynamics.calibrate_amplitude(device, env, p["target_phase"], idle=idle, dt_solver=p["dt_solver"],
                                               domain=p["domain"], pad=p["pad"])
        else:
            target = p.get("target_frequency")
            if target is None:
                raise ConfigError("params/target_frequency is required for an uncalibrated cosine pulse")
            wave = pulses.scale_envelope(env, idle, target - idle, domain=p["domain"],
                                         coupler=device.coupler).padded(p["pad"], p["pad"])
            cal = None
    if cal is not None:
        wave = cal.pulse
        info.update(scale=cal.scale, phase_rad=cal.phase, max_frequency_MHz=cal.max_frequency,
                    monotone_scan=cal.monotone, scan=[list(s) for s in cal.scan])
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            info["phase_rad"] = dynamics.conditional_phase(device, wave, p["dt_solver"]).phase
        info["max_frequency_MHz"] = float(wave.samples.max())
    info["descriptor"] = wave.descriptor
    meta = _meta(device, config)
    return [wave.save_csv(out / "waveform.csv", meta),
            write_json(out / "pulse.json", {"metadata": meta, "pulse": info})]


def cmd_leakage(config) -> list:
    device = load_device(config["preset"])
    p, out = config["params"], _output_dir(config)
    idle = device.operating_point()
    wave = pulses.cosine_pulse(p["t_cz"], idle, p["target_frequency"], p["dt"], domain=p["domain"],
                               coupler=device.coupler)
    d = p["delays"]
    n = int(round((d["stop"] - d["start"]) / d["step"]))
    if n < 1:
        raise ConfigError("delay grid needs stop > start")
    delays = d["start"] + d["step"] * np.arange(n + 1)
    basis = dynamics.idle_basis(device, idle)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lmap = dynamics.leakage_amplification(device, wave, delays, p["max_cycles"], p["dt_solver"], basis=basis)
    labels = [HilbertLabel.parse(s) for s in p["labels"]]
    meta = _meta(device, config, t_cz_ns=p["t_cz"], target_MHz=p["target_frequency"])
    files = lmap.export(out, labels, meta)
    e11 = basis.energies[basis.column((1, 1, 0))]
    report = {}
    for lab in labels:
        gap = abs(e11 - basis.energies[basis.column(lab)])
        entry = {"idle_gap_MHz": gap, "expected_period_ns": 1e3 / gap}
        try:
            entry["peak_spacing_ns"] = dynamics.peak_spacing(lmap, lab)
        except NumericalError as exc:
            entry["peak_spacing_ns"] = None
            entry["note"] = str(exc)
        report[_label_name(lab)] = entry
    files.append(write_json(out / "peaks.json", {"metadata": meta, "peaks": report}))
    return files


def cmd_compare(config) -> list:
    p, out = config["params"], _output_dir(config)
    devices = [load_device(name) for name in p["presets"]]
    grid = _grid(devices[0], p, 301)
    tags = [Path(str(name)).stem for name in p["presets"]]
    zetas, totals, files = [], [], []
    for tag, dev in zip(tags, devices):
        anchor, g = _anchor(dev, {}, grid)
        spec = track_spectrum(dev, g, anchor)
        keep = np.isin(spec.grid, grid)
        zetas.append(spec.zeta_curve()[keep])
        totals.append(total_D(dev, g, anchor, spectrum=spec).total[keep])
        files.append(write_csv(out / f"energies_{tag}.csv", ["f_c_MHz", *map(str, spec.labels)],
                               [[f, *e] for f, e in zip(spec.grid[keep], spec.energies[keep])],
                               _meta(dev, config, anchor_MHz=anchor)))
    header = ["f_c_MHz"] + [f"zeta_{t}_MHz" for t in tags] + [f"D_total_{t}_ns2" for t in tags]
    rows = [[f, *(z[i] for z in zetas), *(d[i] for d in totals)] for i, f in enumerate(grid)]
    meta = _meta(devices[0], config, compared=";".join(tags))
    files.append(write_csv(out / "compare.csv", header, rows, meta))
    return files


def cmd_fit(config) -> list:
    device = load_device(config["preset"])
    p, out = config["params"], _output_dir(config)
    try:
        data = fitting.SpectroscopyDataset.from_csv(p["dataset"])
    except FileNotFoundError as exc:
        raise ConfigError(f"dataset not found: {p['dataset']}") from exc
    result = fitting.joint_fit(data, device, p["free"], anchor=p.get("anchor"))
    meta = _meta(device, config, dataset=Path(p["dataset"]).name)
    return [write_json(out / "fit.json", {"metadata": meta, **result.to_dict()})]


def _rb_rows(tag, data, level):
    rows = []
    for m, k, n in data.rows():
        wi = rbstats.wilson_interval(k, n, level)
        wa = rbstats.wald_interval(k, n, level, clamp=True)
        rows.append([tag, m, k, n, k / n, wi.lower, wi.upper, wa.lower, wa.upper, wa.clamped])
    return rows


def cmd_rb(config) -> list:
    p, out = config["params"], _output_dir(config)
    try:
        rb = rbstats.RBDataset.from_csv(p["rb"])
        irb = rbstats.RBDataset.from_csv(p["irb"])
    except FileNotFoundError as exc:
        raise ConfigError(f"RB counts file not found: {exc.filename}") from exc
    except ValueError as exc:
        raise ConfigError(f"invalid RB counts file: {exc}") from exc
    fit_rb, fit_irb = rbstats.mle_fit(rb), rbstats.mle_fit(irb)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", rbstats.NonPhysical)
        r = rbstats.gate_error(fit_rb.p, fit_irb.p, p["d"])
    est = rbstats.monte_carlo_ci(fit_rb, fit_irb, p["d"], p["samples"], p["level"], config["seed"])
    meta = metadata(None, config["seed"], study="rb")
    header = ["dataset", "depth", "successes", "trials", "p_hat", "wilson_lo", "wilson_hi",
              "wald_lo", "wald_hi", "wald_clamped"]
    rows = _rb_rows("rb", rb, p["level"]) + _rb_rows("irb", irb, p["level"])
    summary = {
        "metadata": meta, "rb": fit_rb.to_dict(), "irb": fit_irb.to_dict(),
        "gate_error": r, "physical": not caught, "monte_carlo": est.to_dict(),
        "gate_fidelity": 1.0 - r,
    }
    return [write_csv(out / "intervals.csv", header, rows, meta), write_json(out / "rb.json", summary)]


COMMANDS = {
    "spectrum": cmd_spectrum, "dfactor": cmd_dfactor, "pulse": cmd_pulse, "leakage": cmd_leakage,
    "compare": cmd_compare, "fit": cmd_fit, "rb": cmd_rb,
}
assert set(COMMANDS) == set(STUDIES)

HELP = {
    "spectrum": "dressed energies, hybridization and ZZ versus coupler frequency",
    "dfactor": "adiabatic factors of one dressed state and the computational total",
    "pulse": "Fourier-cosine or AWP waveform, optionally calibrated to a target phase",
    "leakage": "leakage amplification map and peak-spacing report",
    "compare": "ZZ and total adiabatic factor for two presets on a shared grid",
    "fit": "joint fit of spectroscopy and ZZ data",
    "rb": "RB / interleaved RB analysis from count files",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adiabatic-cz", description="Tunable-coupler CZ gate studies.")
    sub = parser.add_subparsers(dest="study", required=True)
    for name, func in COMMANDS.items():
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", "-c", help="JSON study config")
        sp.add_argument("--preset", help="preset name or path")
        sp.add_argument("--output", "-o", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                        help="override a config field, e.g. --set t_cz=20")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args.study, args.config, args.overrides, args.preset, args.output, args.seed)
        files = COMMANDS[args.study](config)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, AdiabaticCZError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
