"""Command-line surface: one JSON config per run, deterministic outputs.

Subcommands: muvol, solve, path, energy, phase, futaki.
Exit codes: 0 success, 2 config error, 3 numerical failure.
The only honored environment variable is MUCSCK_OUT_DIR (output directory
override); everything else lives in the config for reproducibility.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dh import TorusWeight
from .errors import ConfigError, MucsckError
from .functionals import FunctionalContext, d_mu_vol, find_critical, mu_vol, vol_report
from .io import profile_rows, write_csv, write_json
from .path import phase_diagram, trace
from .solver import solve_chi
from .surfaces import SurfaceSpec

COMMANDS = ("muvol", "solve", "path", "energy", "phase", "futaki")


def _check_keys(blob: dict, allowed, where: str):
    unknown = set(blob) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _monotone(grid, where: str):
    diffs = np.diff(np.asarray(grid, dtype=float))
    if len(grid) == 0:
        raise ConfigError(f"{where} must be nonempty")
    if len(diffs) and not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError(f"{where} must be strictly monotone")
    return [float(g) for g in grid]


def parse_surface(blob) -> SurfaceSpec:
    if not isinstance(blob, dict):
        raise ConfigError("surface must be an object")
    _check_keys(blob, {"kind", "m", "k", "genus"}, "surface")
    kind = blob.get("kind")
    try:
        if kind == "CP1":
            return SurfaceSpec.cp1(float(blob.get("m", 1.0)))
        if kind == "Ruled":
            return SurfaceSpec.ruled(
                int(blob.get("k", 1)), int(blob.get("genus", 0)), float(blob.get("m", 2.0))
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad surface parameters: {exc}")
    raise ConfigError(f"surface.kind must be CP1 or Ruled, got {kind!r}")


def load_config(path: str, command: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"surface", "output"} | _COMMAND_KEYS[command]
    _check_keys(cfg, allowed, "config")
    if "surface" not in cfg:
        raise ConfigError("config requires a surface block")
    return cfg


def resolve_output(cfg: dict, args) -> tuple:
    out_blob = cfg.get("output", {})
    if not isinstance(out_blob, dict):
        raise ConfigError("output must be an object")
    _check_keys(out_blob, {"path", "format"}, "output")
    path = args.out or out_blob.get("path")
    fmt = args.format or out_blob.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if path is None:
        raise ConfigError("no output path given (config output.path or --out)")
    out_dir = os.environ.get("MUCSCK_OUT_DIR")
    if out_dir:
        path = os.path.join(out_dir, os.path.basename(path))
    return path, fmt


def _positive(cfg, key, default=None):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(f"missing required key {key!r}")
    val = float(val)
    if val <= 0:
        raise ConfigError(f"{key} must be positive, got {val}")
    return val


def cmd_muvol(cfg, spec, path, fmt, quiet):
    lam = float(cfg.get("lambda", 0.0))
    grid = _monotone(cfg.get("chi_grid", list(np.linspace(-3, 3, 61))), "chi_grid")
    ctx = FunctionalContext(spec)
    rows = []
    for chi in grid:
        w = TorusWeight(chi)
        rows.append(["sample", chi, mu_vol(ctx, w, lam), d_mu_vol(ctx, w, lam, TorusWeight(1.0))])
    for root in find_critical(ctx, lam):
        w = TorusWeight(root)
        rows.append(["critical", root, mu_vol(ctx, w, lam), d_mu_vol(ctx, w, lam, TorusWeight(1.0))])
    if fmt == "csv":
        write_csv(path, ["kind", "chi", "mu_vol", "d_mu_vol"], rows)
    else:
        write_json(path, [
            {"kind": k, "chi": c, "mu_vol": m, "d_mu_vol": d} for k, c, m, d in rows
        ])
    if not quiet:
        print(f"wrote {path}")
    return 0


def cmd_solve(cfg, spec, path, fmt, quiet):
    lam = float(cfg.get("lambda", 0.0))
    bracket = cfg.get("bracket")
    if (not isinstance(bracket, (list, tuple))) or len(bracket) != 2:
        raise ConfigError("solve requires bracket: [lo, hi]")
    res = solve_chi(spec, lam, (float(bracket[0]), float(bracket[1])))
    if fmt == "json":
        payload = res.to_dict()
        payload["x"] = spec.chi_to_x(res.chi)
        write_json(path, payload)
    else:
        n = int(cfg.get("profile_points", 257))
        if n <= 0:
            raise ConfigError("profile_points must be positive")
        rows = profile_rows(spec, res.profile, TorusWeight(res.chi), res.lam, n)
        write_csv(path, ["tau", "phi", "dphi", "s_mu"], rows)
    if not quiet:
        print(f"chi = {res.chi!r}, certified = {res.certified}")
    return 0


def cmd_path(cfg, spec, path, fmt, quiet):
    grid = _monotone(cfg.get("lambda_grid", []), "lambda_grid")
    bracket = cfg.get("seed_bracket")
    if (not isinstance(bracket, (list, tuple))) or len(bracket) != 2:
        raise ConfigError("path requires seed_bracket: [lo, hi]")
    pts = trace(spec, grid, (float(bracket[0]), float(bracket[1])))
    header = ["lambda", "chi", "a", "b", "c", "residual", "ode_sup_residual", "positive"]
    if fmt == "csv":
        write_csv(path, header, [p.to_row() for p in pts])
    else:
        write_json(path, [dict(zip(header, p.to_row())) for p in pts])
    if not quiet:
        ok = sum(1 for p in pts if p.ok)
        print(f"traced {ok}/{len(pts)} points -> {path}")
    return 0


def cmd_energy(cfg, spec, path, fmt, quiet):
    from .energy import GeodesicPath, muk_energy_partial, potential_from_profile

    lam = float(cfg.get("lambda", 0.0))
    w = TorusWeight(float(cfg.get("chi", 0.0)))
    t_grid = _monotone(cfg.get("t_grid", list(np.linspace(0.0, 1.0, 21))), "t_grid")
    if any(t < 0.0 for t in t_grid):
        raise ConfigError("t_grid entries must be nonnegative")
    u0 = potential_from_profile(spec.reference_profile(), spec)
    end = cfg.get("endpoint", {"kind": "fs"})
    _check_keys(end, {"kind", "lambda", "bracket", "eps"}, "endpoint")
    kind = end.get("kind")
    if kind == "fs":
        u1 = u0
    elif kind == "solve":
        bracket = end.get("bracket")
        if (not isinstance(bracket, (list, tuple))) or len(bracket) != 2:
            raise ConfigError("endpoint.kind=solve requires bracket")
        res = solve_chi(spec, float(end.get("lambda", lam)), tuple(map(float, bracket)))
        u1 = potential_from_profile(res.profile, spec)
    elif kind == "perturbed":
        u1 = potential_from_profile(
            spec.perturbed_profile(float(end.get("eps", 0.05))), spec
        )
    else:
        raise ConfigError(f"endpoint.kind must be fs, solve, or perturbed, got {kind!r}")
    geo = GeodesicPath(u0, u1)
    vals = [muk_energy_partial(spec, w, lam, geo, t) for t in t_grid]
    second = np.full(len(vals), np.nan)
    if len(vals) >= 3:
        second[1:-1] = np.diff(vals, 2)
    rows = [
        [t, v, (None if np.isnan(s) else s)] for t, v, s in zip(t_grid, vals, second)
    ]
    if fmt == "csv":
        write_csv(path, ["t", "M_value", "second_difference"], rows)
    else:
        write_json(path, [
            {"t": t, "M_value": v, "second_difference": s} for t, v, s in rows
        ])
    if not quiet:
        print(f"wrote {path}")
    return 0


def cmd_phase(cfg, spec, path, fmt, quiet):
    grid = _monotone(cfg.get("lambda_grid", []), "lambda_grid")
    pd = phase_diagram(spec, grid)
    if fmt == "json":
        write_json(path, pd.to_dict())
    else:
        rows = [
            [lam, count, pd.transition_lambda]
            for lam, count in zip(pd.lambda_grid, pd.critical_counts)
        ]
        write_csv(path, ["lambda", "critical_count", "transition_lambda"], rows)
    if not quiet:
        print(f"counts: {pd.critical_counts}, transition: {pd.transition_lambda}")
    return 0


def cmd_futaki(cfg, spec, path, fmt, quiet):
    lam = float(cfg.get("lambda", 0.0))
    w = TorusWeight(float(cfg.get("chi", 0.0)))
    w_dir = TorusWeight(float(cfg.get("chi_dir", 1.0)))
    ctx = FunctionalContext(spec)
    rep = vol_report(ctx, w, lam)
    payload = rep.to_dict()
    payload["futaki_dir"] = d_mu_vol(ctx, w, lam, w_dir)
    payload["chi"] = w.chi
    payload["chi_dir"] = w_dir.chi
    payload["x"] = spec.chi_to_x(w.chi)
    payload["lambda"] = lam
    if fmt == "json":
        write_json(path, payload)
    else:
        keys = sorted(payload)
        write_csv(path, keys, [[payload[k] for k in keys]])
    if not quiet:
        print(f"futaki = {payload['futaki_dir']!r}")
    return 0


_COMMAND_KEYS = {
    "muvol": {"lambda", "chi_grid"},
    "solve": {"lambda", "bracket", "profile_points"},
    "path": {"lambda_grid", "seed_bracket"},
    "energy": {"lambda", "chi", "t_grid", "endpoint"},
    "phase": {"lambda_grid"},
    "futaki": {"lambda", "chi", "chi_dir"},
}

_HANDLERS = {
    "muvol": cmd_muvol,
    "solve": cmd_solve,
    "path": cmd_path,
    "energy": cmd_energy,
    "phase": cmd_phase,
    "futaki": cmd_futaki,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mucsck",
        description="Numerical laboratory for weighted constant-curvature metrics",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output file (overrides config)")
    parser.add_argument("--format", default=None, choices=("csv", "json"))
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
        spec = parse_surface(cfg["surface"])
        out_path, fmt = resolve_output(cfg, args)
        return _HANDLERS[args.command](cfg, spec, out_path, fmt, args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MucsckError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
