"""Experiment runner: ``skewspec <command> --config <path> [--set key=value ...] --out <dir>``.

The config is an INI file with sections

    [run]        sizes (comma list of N), seed, format (json | csv)
    [potential]  family and its parameters (see potentials.spec_from_config)
    [grids]      nx, ny (phase-torus sweep, or "auto"), nt, ne, phase_nx, phase_ny
    [options]    command-specific keys, listed in COMMAND_OPTIONS

``--set section.key=value`` overrides a file value.  Every key is validated
before any computation starts, unknown keys are errors, and the fully
resolved config (defaults included) is written next to the results as
``config.ini``; parsing that file gives back the same config.

Exit codes: 0 success, 2 config error, 3 numerical or output failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import SWEEP_FAMILIES, approx_eigenvector_bound, eigenpair_distance_bound, sigma_plus_bound
from .gaps import certify_gap, default_phase_set, distance_profile, gap_bound_pipeline, largest_window_gap
from .lyapunov import NORM_CAP, lyapunov_curve
from .potentials import PotentialSpec, spec_from_config, spec_to_config
from .tridiag import EigenSolverError, all_eigenvalues, build_restriction, dump_eigenvalues, eigenpairs

COMMANDS = ("eig", "spectrum-scan", "sigma", "gap-profile", "gap-bound", "certify-gap", "lyap")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _ints(s):
    out = [int(v) for v in str(s).split(",") if v.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _grid(s):
    return "auto" if str(s).strip().lower() == "auto" else int(s)


def _choice(*allowed):
    def parse(s):
        s = str(s).strip().lower()
        if s not in allowed:
            raise ValueError(f"expected one of {allowed}")
        return s

    return parse


def _bool(s):
    s = str(s).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _regions(s):
    names = [v.strip().lower() for v in str(s).split(",") if v.strip()]
    bad = [v for v in names if v not in ("left", "center", "right")]
    if bad or not names:
        raise ValueError(f"regions must be drawn from left,center,right (got {s!r})")
    return names


def _interval(s):
    a, b = (float(v) for v in str(s).split(","))
    if not a <= b:
        raise ValueError("interval needs a <= b")
    return a, b


def _fmt_list(v):
    return ",".join(str(x) for x in v)


def _fmt_interval(v):
    return f"{v[0]!r},{v[1]!r}"


# section -> key -> (parser, default, formatter)
RUN_KEYS = {
    "sizes": (_ints, "200", _fmt_list),
    "seed": (int, "0", str),
    "format": (_choice("json", "csv"), "json", str),
}
GRID_KEYS = {
    "nx": (_grid, "auto", str),
    "ny": (_grid, "auto", str),
    "nt": (int, "16384", str),
    "ne": (int, "161", str),
    "phase_nx": (int, "64", str),
    "phase_ny": (int, "64", str),
}
COMMAND_OPTIONS = {
    "eig": {
        "regions": (_regions, "left,center,right", _fmt_list),
        "neighbors": (int, "1", str),
    },
    "spectrum-scan": {"gap_threshold": (float, "0.05", repr)},
    "sigma": {},
    "gap-profile": {},
    "gap-bound": {"with_sigma": (_bool, "true", lambda v: "true" if v else "false")},
    "certify-gap": {"interval": (_interval, None, _fmt_interval)},
    "lyap": {
        "e_min": (float, "-4.0", repr),
        "e_max": (float, "4.0", repr),
        "num_phases": (int, "32", str),
        "cap": (float, repr(NORM_CAP), repr),
    },
}


@dataclass
class ExperimentConfig:
    command: str
    spec: PotentialSpec
    run: dict
    grids: dict
    options: dict

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["run"] = {"command": self.command, **_format(RUN_KEYS, self.run)}
        cp["potential"] = spec_to_config(self.spec)
        cp["grids"] = _format(GRID_KEYS, self.grids)
        cp["options"] = _format(COMMAND_OPTIONS[self.command], self.options)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def echo(self) -> dict:
        return {
            "command": self.command,
            "run": _format(RUN_KEYS, self.run),
            "potential": spec_to_config(self.spec),
            "grids": _format(GRID_KEYS, self.grids),
            "options": _format(COMMAND_OPTIONS[self.command], self.options),
        }


def _format(schema, values):
    return {k: schema[k][2](values[k]) for k in schema}


def _resolve(section_name, schema, raw):
    unknown = set(raw) - set(schema)
    if unknown:
        raise ConfigError(f"[{section_name}] unknown keys: {sorted(unknown)}")
    out = {}
    for key, (parse, default, _) in schema.items():
        text = raw.get(key, default)
        if text is None:
            raise ConfigError(f"[{section_name}] missing required key {key!r}")
        try:
            out[key] = parse(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section_name}] {key} = {text!r}: {exc}") from None
    return out


def parse_config(command: str, text: str, overrides=()) -> ExperimentConfig:
    """Parse and validate; raises ConfigError on any problem."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = lambda s: s.strip().lower()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    sections = {name: dict(cp[name]) for name in cp.sections()}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        sec, key = lhs.split(".", 1)
        sections.setdefault(sec.strip().lower(), {})[key.strip().lower()] = value.strip()
    unknown = set(sections) - {"run", "potential", "grids", "options"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    run_raw = dict(sections.get("run", {}))
    file_cmd = run_raw.pop("command", None)
    if file_cmd is not None and file_cmd.strip().lower() != command:
        raise ConfigError(f"config is for command {file_cmd!r}, invoked as {command!r}")
    run = _resolve("run", RUN_KEYS, run_raw)
    if any(n < 2 for n in run["sizes"]):
        raise ConfigError("[run] sizes must all be >= 2")
    grids = _resolve("grids", GRID_KEYS, sections.get("grids", {}))
    for key in ("nt", "ne", "phase_nx", "phase_ny"):
        if grids[key] < 1:
            raise ConfigError(f"[grids] {key} must be >= 1")
    for key in ("nx", "ny"):
        if grids[key] != "auto" and grids[key] < 1:
            raise ConfigError(f"[grids] {key} must be >= 1 or auto")
    options = _resolve("options", COMMAND_OPTIONS[command], sections.get("options", {}))
    if "potential" not in sections:
        raise ConfigError("missing [potential] section")
    try:
        spec = spec_from_config(sections["potential"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[potential] {exc}") from None
    if command in ("sigma", "certify-gap") or (command == "gap-bound" and options["with_sigma"]):
        if spec.family not in SWEEP_FAMILIES:
            raise ConfigError(f"{command} supports families {[f.value for f in SWEEP_FAMILIES]}, not {spec.family.value}")
    if command == "lyap":
        if not options["e_min"] <= options["e_max"]:
            raise ConfigError("[options] e_min must be <= e_max")
        if options["num_phases"] < 1:
            raise ConfigError("[options] num_phases must be >= 1")
        if not options["cap"] > 1:
            raise ConfigError("[options] cap must be > 1")
    if command == "eig" and options["neighbors"] < 0:
        raise ConfigError("[options] neighbors must be >= 0")
    return ExperimentConfig(command, spec, run, grids, options)


# ---------------------------------------------------------------------------
# output helpers


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _write_result(out: Path, stem: str, payload: dict, cfg: ExperimentConfig) -> None:
    payload = {"config": cfg.echo(), "version": __version__, **payload}
    if cfg.run["format"] == "json":
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
        (out / f"{stem}.json").write_text(text)
    else:
        flat = _flatten(payload)
        with open(out / f"{stem}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["key", "value"])
            for k in sorted(flat):
                w.writerow([k, flat[k]])


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, float):
            out[key] = f"{v:.17g}"
        elif isinstance(v, (list, tuple)) and v and all(isinstance(x, dict) for x in v):
            for i, x in enumerate(v):
                out.update(_flatten(x, f"{key}.{i}."))
        elif isinstance(v, (list, tuple)):
            out[key] = ",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in v)
        else:
            out[key] = str(v)
    return out


def _grid_args(cfg):
    nx, ny = cfg.grids["nx"], cfg.grids["ny"]
    return (None if nx == "auto" else nx), (None if ny == "auto" else ny)


# ---------------------------------------------------------------------------
# commands


def _region_indices(N, regions, nb):
    centre = math.ceil(N / 2)
    picks = {"left": 1, "center": centre, "right": N}
    out = set()
    for r in regions:
        j = picks[r]
        out.update(k for k in range(j - nb, j + nb + 1) if 1 <= k <= N)
    return sorted(out)


def run_eig(cfg, out):
    for N in cfg.run["sizes"]:
        op = build_restriction(cfg.spec, 0, N)
        values = all_eigenvalues(op)
        dump_eigenvalues(out / f"eigenvalues_N{N}.csv", values)
        idx = _region_indices(N, cfg.options["regions"], cfg.options["neighbors"])
        pairs = eigenpairs(op, [j - 1 for j in idx])
        with open(out / f"eigenvectors_N{N}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n"] + [f"xi_{p.index + 1}" for p in pairs])
            for n in range(N):
                w.writerow([n] + [f"{p.vector[n]:.17g}" for p in pairs])
        summary = [
            {
                "j": p.index + 1,
                "lambda": p.value,
                "boundary_weight": p.boundary_weight,
                "bracket": p.bracket,
                "residual": p.residual,
                "distance_bound": eigenpair_distance_bound(p),
                "approx_eigenvector_bound": approx_eigenvector_bound(op, p.vector, p.value),
            }
            for p in pairs
        ]
        _write_result(out, f"eigenpairs_N{N}", {"N": N, "eigenpairs": summary}, cfg)


def run_spectrum_scan(cfg, out):
    thr = cfg.options["gap_threshold"]
    rows = []
    for N in cfg.run["sizes"]:
        values = all_eigenvalues(build_restriction(cfg.spec, 0, N))
        dump_eigenvalues(out / f"eigenvalues_N{N}.csv", values)
        width, lo, hi = largest_window_gap(values, values[0], values[-1])
        gaps = np.diff(values)
        rows.append((N, width, lo, hi, int(np.sum(gaps > thr))))
    with open(out / "gap_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "max_gap", "gap_left", "gap_right", "gaps_above_threshold"])
        for N, width, lo, hi, count in rows:
            w.writerow([N, f"{width:.17g}", f"{lo:.17g}", f"{hi:.17g}", count])


def run_sigma(cfg, out):
    nx, ny = _grid_args(cfg)
    for N in cfg.run["sizes"]:
        sb = sigma_plus_bound(cfg.spec, N, nx, ny)
        _write_result(out, f"sigma_N{N}", {"spectrum_bound": sb.to_dict()}, cfg)


def run_gap_profile(cfg, out):
    g = cfg.grids
    for N in cfg.run["sizes"]:
        phases = default_phase_set(cfg.spec, g["phase_nx"], g["phase_ny"])
        r = cfg.spec.bound + 2.0
        prof = distance_profile(cfg.spec, N, phases, np.linspace(-r, r, g["nt"]))
        prof.to_csv(out / f"profile_N{N}.csv")
        summary = {
            "N": N,
            "max_d": float(np.max(prof.d_values)),
            "lipschitz_violation": prof.lipschitz_violation(),
            "reach": [prof.reach_lower, prof.reach_upper],
            "num_phases": len(phases),
        }
        _write_result(out, f"profile_N{N}", summary, cfg)


def run_gap_bound(cfg, out):
    g = cfg.grids
    nx, ny = _grid_args(cfg)
    for N in cfg.run["sizes"]:
        sb = sigma_plus_bound(cfg.spec, N, nx, ny) if cfg.options["with_sigma"] else None
        gb, prof = gap_bound_pipeline(cfg.spec, N, g["phase_nx"], g["phase_ny"], g["nt"], sigma=sb)
        prof.to_csv(out / f"profile_N{N}.csv")
        payload = {"gap_bound": dict(gb.__dict__)}
        if sb is not None:
            payload["spectrum_bound"] = sb.to_dict()
        _write_result(out, f"gap_bound_N{N}", payload, cfg)


def run_certify_gap(cfg, out):
    nx, ny = _grid_args(cfg)
    for N in cfg.run["sizes"]:
        grid = (nx or 4096, ny or 1)
        cert = certify_gap(cfg.spec, N, cfg.options["interval"], grid)
        _write_result(out, f"certificate_N{N}", {"N": N, "certificate": dict(cert.__dict__)}, cfg)


def run_lyap(cfg, out):
    o = cfg.options
    energies = np.linspace(o["e_min"], o["e_max"], cfg.grids["ne"])
    for N in cfg.run["sizes"]:
        curve = lyapunov_curve(cfg.spec, energies, N, o["num_phases"], cfg.run["seed"], o["cap"])
        curve.to_csv(out / f"lyapunov_N{N}.csv")
        _write_result(out, f"lyapunov_N{N}", {"metadata": curve.metadata()}, cfg)


RUNNERS = {
    "eig": run_eig,
    "spectrum-scan": run_spectrum_scan,
    "sigma": run_sigma,
    "gap-profile": run_gap_profile,
    "gap-bound": run_gap_bound,
    "certify-gap": run_certify_gap,
    "lyap": run_lyap,
}


def _set_threads():
    raw = os.environ.get("SKEWSPEC_THREADS")
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError("SKEWSPEC_THREADS must be >= 1")
    import numba

    n = min(n, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(n)
    return n


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="skewspec", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("--out", required=True, type=Path)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK

    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"skewspec: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(args.command, text, args.overrides)
        threads = _set_threads()
    except (ConfigError, ValueError) as exc:
        print(f"skewspec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "config.ini").write_text(cfg.to_ini())
        RUNNERS[cfg.command](cfg, args.out)
        meta = {
            "command": cfg.command,
            "version": __version__,
            "threads": threads,
            "wall_time_seconds": time.perf_counter() - start,
        }
        (args.out / "run_metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        print(f"skewspec: cannot write output under {args.out}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (EigenSolverError, FloatingPointError, ArithmeticError, ValueError) as exc:
        print(f"skewspec: {cfg.command} failed for {cfg.spec.family.value}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
