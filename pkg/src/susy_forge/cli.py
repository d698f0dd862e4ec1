"""
Command-line front end: ``susy-forge {partner|spectrum|verify|sweep}``.

A run is described by a JSON config plus flag overrides (flags win). The
resolved config is hashed, and the hash heads every output file so a result
can be traced back to the exact inputs. CSV numbers use the shortest
round-trip representation and ``\\n`` line endings, so equal configs give
byte-identical files.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 singular transformation, 4 no level of either potential in the eigensolver bracket.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ConfigError, EigenSolveError, SingularTransformError, SusyError
from .hyperconfluent3 import transform_model
from .models import coulomb_pack, free_particle_pack, local_minimum
from .numerics import TRIM, EigenSolveConfig, eigensolve
from .verify import config_hash, diagnostics, jsonable, run_suite, suite_defaults

log = logging.getLogger("susy_forge")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SINGULAR, EXIT_BRACKET = 0, 1, 2, 3, 4

COMMON_KEYS = {"model", "k", "l", "f0", "grid_n"}
COMMAND_KEYS = {
    "partner": set(),
    "spectrum": {"levels", "bracket"},
    "verify": {"route_f0", "sweep_f0"},
    "sweep": {"f0_values", "f0_range"},
}
DEFAULTS = {"model": "free", "k": 1.0, "l": 0, "grid_n": None, "levels": 3,
            "bracket": [-10.0, 0.0]}
DEFAULT_F0 = {"free": -0.25, "coulomb": -0.1}


# ---------------------------------------------------------------------------
# config

def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _number(cfg: dict, key: str, kind=float):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if kind is int and int(v) != v:
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return kind(v)


def resolve_config(command: str, file_cfg: dict, overrides: dict) -> dict:
    """Merge defaults, the config file and flags (flags win); validate."""
    allowed = COMMON_KEYS | COMMAND_KEYS[command] | {"out"}
    unknown = sorted(set(file_cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {k: v for k, v in DEFAULTS.items() if k in COMMON_KEYS | COMMAND_KEYS[command]}
    cfg.update(file_cfg)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    cfg.pop("out", None)
    if cfg["model"] not in DEFAULT_F0:
        raise ConfigError(f"unknown model {cfg['model']!r} (choose free or coulomb)")
    cfg.setdefault("f0", DEFAULT_F0[cfg["model"]])
    cfg["f0"] = _number(cfg, "f0")
    cfg["k"] = _number(cfg, "k")
    cfg["l"] = _number(cfg, "l", int)
    if cfg["model"] == "free":
        cfg.pop("l")
        if not cfg["k"] > 0:
            raise ConfigError("k must be > 0")
    else:
        cfg.pop("k")
    if cfg["grid_n"] is not None:
        cfg["grid_n"] = _number(cfg, "grid_n", int)
        if cfg["grid_n"] < 3:
            raise ConfigError("grid_n must be >= 3")
    if command == "spectrum":
        cfg["levels"] = _number(cfg, "levels", int)
        if cfg["levels"] < 1:
            raise ConfigError("levels must be >= 1")
        b = cfg["bracket"]
        if not (isinstance(b, (list, tuple)) and len(b) == 2):
            raise ConfigError("bracket must be a pair [lo, hi]")
        cfg["bracket"] = [float(b[0]), float(b[1])]
        if not cfg["bracket"][0] < cfg["bracket"][1]:
            raise ConfigError("bracket needs lo < hi")
    if command == "sweep":
        cfg["f0_values"] = sweep_values(cfg)
        cfg.pop("f0_range", None)
    cfg["command"] = command
    return cfg


def sweep_values(cfg: dict) -> list:
    """``f0_values`` as given, or the inclusive arithmetic range ``f0_range``."""
    if "f0_values" in cfg and cfg.get("f0_range") is not None:
        raise ConfigError("give either f0_values or f0_range, not both")
    if cfg.get("f0_range") is not None:
        rng = cfg["f0_range"]
        if isinstance(rng, dict):
            rng = [rng.get("start"), rng.get("stop"), rng.get("step")]
        if len(rng) != 3 or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in rng):
            raise ConfigError("f0_range needs numeric start, stop, step")
        start, stop, step = map(float, rng)
        if not step > 0:
            raise ConfigError("f0_range step must be > 0")
        if stop < start:
            return []
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # rounding keeps decimal steps such as 0.01 free of accumulated error
        return [round(start + i * step, 12) for i in range(n)]
    vals = cfg.get("f0_values", [cfg["f0"]])
    if not isinstance(vals, list):
        raise ConfigError("f0_values must be a list")
    out = []
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"f0 value {v!r} is not a number")
        out.append(float(v))
    return out


def output_dir(flag: Optional[str], file_cfg: dict) -> Path:
    d = flag or file_cfg.get("out") or os.environ.get("SUSY_FORGE_OUT") or "."
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# serialization

def fmt(v) -> str:
    """Shortest round-trip text of a number; non-finite values as nan/inf/-inf."""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, chash: str, header: list, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={chash}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text + "\n")


def _columns(*arrays):
    return zip(*[np.asarray(a).tolist() for a in arrays])


# ---------------------------------------------------------------------------
# commands

def _model_and_grid(cfg: dict):
    if cfg["model"] == "free":
        pack = free_particle_pack(cfg["k"])
        grid = pack.default_grid() if cfg["grid_n"] is None else pack.default_grid(cfg["grid_n"])
    else:
        pack = coulomb_pack(cfg["l"])
        grid = pack.default_grid(cfg["grid_n"])
    return pack, pack.model(), grid


def _well(x: np.ndarray, v3: np.ndarray):
    m = local_minimum(x[TRIM:-TRIM], v3[TRIM:-TRIM])
    return (math.nan, math.nan) if m is None else m


def cmd_partner(cfg: dict, out: Path) -> int:
    chash = config_hash(cfg)
    pack, model, grid = _model_and_grid(cfg)
    res = transform_model(model, cfg["f0"], grid=grid)
    c = res.chain
    x = grid.x
    write_csv(out / "potentials.csv", chash, ["x", "V0", "V2", "V3_direct", "V3_iterative"],
              _columns(x, c.V0.values, res.v2.values, res.v3.values, res.v3_iterative.values))
    write_csv(out / "chain.csv", chash, ["x", "u1", "u2", "u3", "w", "f", "psi_eps3"],
              _columns(x, c.u1.values, c.u2.values, c.u3.values, c.w.values, c.f.values,
                       res.psi_eps.values))
    well_x, well_depth = _well(x, res.v3.values)
    if cfg["model"] == "coulomb":
        write_csv(out / "well_profile.csv", chash, ["r", "V0", "V3"], _columns(x, c.V0.values, res.v3.values))
    meta = {
        "config_hash": chash, "config": cfg, "model": cfg["model"], "f0": res.f0_used,
        "sigma_minus": res.sigma_minus, "f0_window_upper": -res.sigma_minus,
        "regime": res.regime.value, "epsilon": c.epsilon, "grid": grid.describe(),
        "missing_state": {"status": res.psi_eps.meta["status"], "raw_norm": res.psi_eps.meta["raw_norm"]},
        "well": {"x": well_x, "depth": well_depth},
        "tolerances": {"trim": TRIM, "quadrature": "uniform cubic (4th order)",
                       "derivatives": "5-point (4th order)"},
    }
    write_json(out / "meta.json", meta)
    print(f"partner: regime={res.regime.value} sigma_minus={res.sigma_minus!r} -> {out}")
    return EXIT_OK


def cmd_spectrum(cfg: dict, out: Path) -> int:
    chash = config_hash(cfg)
    pack, model, grid = _model_and_grid(cfg)
    res = transform_model(model, cfg["f0"], grid=grid)
    ecfg = EigenSolveConfig(n_levels=cfg["levels"], energy_bracket=tuple(cfg["bracket"]))
    spectra, errors = {}, []
    for name, V in (("V0", res.chain.V0), ("V3", res.v3)):
        try:
            spectra[name] = eigensolve(V, ecfg).to_dict()
        except EigenSolveError as exc:
            # an empty spectrum is a result (the free V0 has no bound state)
            spectra[name] = {"eigenvalues": [], "error": str(exc), "reason": exc.reason}
            errors.append(exc)
    if len(errors) == 2:
        raise errors[1]
    write_json(out / "spectrum.json", {"config_hash": chash, "config": cfg,
                                       "regime": res.regime.value, **spectra})
    found = {k: [lv["E"] for lv in v["eigenvalues"]] for k, v in spectra.items()}
    print(f"spectrum: V0 {found['V0']} V3 {found['V3']} -> {out}")
    return EXIT_OK


def cmd_verify(cfg: dict, out: Path) -> int:
    chash = config_hash(cfg)
    given = {k: v for k, v in cfg.items() if k != "command" and v is not None}
    suite = {**suite_defaults(cfg["model"]), **given}
    rep = run_suite(suite)
    payload = rep.to_dict()
    payload["config_hash"] = chash
    payload["diagnostics"] = diagnostics(rep)
    write_json(out / "report.json", payload)
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} value={c.value!r} {c.relation} {c.threshold!r}")
    if not rep.passed:
        tags = ", ".join(payload["diagnostics"]) or "none"
        print(f"verify: {len(rep.failed())} check(s) failed; diagnostics: {tags}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


SWEEP_HEADER = ["f0", "sigma_margin", "regime", "psi_norm", "psi_status", "x1", "v3_min", "error"]


def cmd_sweep(cfg: dict, out: Path) -> int:
    chash = config_hash(cfg)
    pack, model, grid = _model_and_grid(cfg)
    rows = []
    for f0 in cfg["f0_values"]:
        try:
            res = transform_model(model, f0, grid=grid)
        except SingularTransformError as exc:
            sigma = pack.sigma_minus
            rows.append([f0, -sigma - f0, "singular", math.nan, "", math.nan, math.nan, str(exc)])
            continue
        x1, depth = _well(grid.x, res.v3.values)
        rows.append([f0, -res.sigma_minus - f0, res.regime.value, res.psi_eps.meta["raw_norm"],
                     res.psi_eps.meta["status"], x1, depth, ""])
    write_csv(out / "sweep.csv", chash, SWEEP_HEADER, rows)
    print(f"sweep: {len(rows)} rows -> {out}")
    return EXIT_OK


COMMANDS = {"partner": cmd_partner, "spectrum": cmd_spectrum, "verify": cmd_verify,
            "sweep": cmd_sweep}


def _f0_list(text: str) -> list:
    if not text.strip():
        return []
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="susy-forge",
                                description="Hyperconfluent third-order partner potentials.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("partner", "build V2 and V3 and write potentials and chain"),
                        ("spectrum", "eigenvalues of V0 and V3"),
                        ("verify", "run the verification suite"),
                        ("sweep", "scan f0 and tabulate norms and wells")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--model", choices=["free", "coulomb"])
        s.add_argument("--k", type=float, help="free-particle decay constant")
        s.add_argument("--l", type=int, help="Coulomb angular momentum")
        s.add_argument("--f0", type=float, help="integration constant of f")
        s.add_argument("--grid-n", type=int, dest="grid_n", help="number of grid points")
        s.add_argument("--out", help="output directory (default $SUSY_FORGE_OUT or .)")
        if name == "spectrum":
            s.add_argument("--levels", type=int)
            s.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
        if name == "sweep":
            s.add_argument("--f0-values", type=_f0_list, dest="f0_values",
                           help="comma-separated f0 list")
            s.add_argument("--f0-range", type=float, nargs=3, dest="f0_range",
                           metavar=("START", "STOP", "STEP"))
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        file_cfg = load_config(args.config)
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("command", "config", "verbose", "out")}
        if overrides.get("bracket") is not None:
            overrides["bracket"] = list(overrides["bracket"])
        if overrides.get("f0_range") is not None:
            overrides["f0_range"] = list(overrides["f0_range"])
            file_cfg.pop("f0_values", None)
        if overrides.get("f0_values") is not None:
            file_cfg.pop("f0_range", None)
        cfg = resolve_config(args.command, file_cfg, overrides)
        out = output_dir(args.out, file_cfg)
        return COMMANDS[args.command](cfg, out)
    except SingularTransformError as exc:
        loc = "beyond the grid" if math.isnan(exc.location) else f"x = {exc.location!r}"
        print(f"error: singular transformation, node of {exc.what} at {loc}", file=sys.stderr)
        return EXIT_SINGULAR
    except EigenSolveError as exc:
        print(f"error: eigensolver: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SusyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
