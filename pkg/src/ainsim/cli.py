"""Command line batch runner.

Subcommands: simulate, rational, multihop, check-phases, dump-channel.
Exit codes: 0 success, 2 configuration error, 3 numeric or capacity error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .beamforming import phase_condition
from .channel import DEFAULT_BOUNDS, MODELS, ChannelRealization, sample_channel
from .errors import CapacityError, ConditioningError, DegenerateInputError, ParameterError, SimulationError
from .experiments import DEFAULT_P_GRID_DB, aligned_sweep, dof_experiment, rotation_sweep, slope_of
from .multihop import GainAssignment, reduce_to_two_hops, solve_gains, two_hop_infeasibility
from .rational import rational_sweep

log = logging.getLogger("ainsim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

DEFAULTS = {
    "simulate": {"m": 2, "seeds": 10, "seed": 0, "p_grid": "30,40,50,60", "trials": 100_000,
                 "noise_var": 1.0, "scheme": "aligned", "bounds": list(DEFAULT_BOUNDS), "out": "out"},
    "rational": {"m": 2, "seed": 3, "p_grid": "abs:1e4,1e6,1e8,1e10", "trials": 10_000, "gamma": 1.0,
                 "epsilon": 0.2, "noise_var": 1.0, "bounds": list(DEFAULT_BOUNDS), "out": "out"},
    "multihop": {"hops": 2, "seeds": 100, "seed": 0, "m": 2, "p_grid": "30,40,50,60", "trials": 20_000,
                 "tolerance": 1e-10, "max_fail_fraction": 0.05, "reduce": False, "noise_var": 1.0,
                 "bounds": list(DEFAULT_BOUNDS), "out": "out"},
    "check-phases": {"seed": 0, "channel": None, "p_grid": "30,40,50,60", "trials": 100_000,
                     "tolerance": 1e-9, "noise_var": 1.0, "bounds": list(DEFAULT_BOUNDS), "out": None},
    "dump-channel": {"seed": 0, "hops": 2, "m": 1, "model": "time_varying",
                     "bounds": list(DEFAULT_BOUNDS), "out": None},
}


class ConfigError(Exception):
    pass


def parse_p_grid(text) -> tuple[list[float], list[float]]:
    """Parse "30,40,50" (dB) or "abs:1e4,1e6" (linear).  Returns (linear, dB)."""
    if isinstance(text, (list, tuple)):
        text = ",".join(str(x) for x in text)
    s = str(text).strip()
    absolute = s.startswith("abs:")
    if absolute:
        s = s[4:]
    try:
        vals = [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad power grid {text!r}") from exc
    if not vals:
        raise ConfigError("empty power grid")
    if absolute:
        if any(v <= 0 for v in vals):
            raise ConfigError("absolute powers must be positive")
        return vals, [10 * math.log10(v) for v in vals]
    return [10 ** (v / 10) for v in vals], vals


def _positive_int(name, value, minimum=1) -> int:
    try:
        v = int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be an integer") from exc
    if v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}")
    return v


def resolve_jobs(value) -> int:
    if value is None:
        value = os.environ.get("AIN_SIM_JOBS", 1)
    return _positive_int("jobs", value)


def build_config(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(cfg) - {"jobs"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    for key, value in vars(args).items():
        if key in ("command", "config", "func", "verbose") or value is None:
            continue
        cfg[key] = value
    cfg.setdefault("jobs", None)
    return cfg


def config_hash(cfg: dict) -> str:
    body = {k: v for k, v in cfg.items() if k not in ("jobs", "out")}
    body["version"] = __version__
    text = json.dumps(body, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _out_dir(cfg) -> Path:
    d = Path(cfg["out"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_csv(path: Path, cfg: dict, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# ainsim {__version__} config_sha256={config_hash(cfg)}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[h]) for h in header])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_json(path: Optional[Path], payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _finite(x: float):
    return x if math.isfinite(x) else None


def _bounds(cfg) -> tuple[float, float]:
    b = cfg["bounds"]
    if isinstance(b, str):
        b = [float(x) for x in b.split(",")]
    if len(b) != 2:
        raise ConfigError("bounds need two values")
    return float(b[0]), float(b[1])


def _executor(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None


def cmd_simulate(cfg: dict) -> int:
    m = _positive_int("m", cfg["m"])
    n_seeds = _positive_int("seeds", cfg["seeds"])
    trials = _positive_int("trials", cfg["trials"], 10)
    _, pdb = parse_p_grid(cfg["p_grid"])
    scheme = cfg["scheme"]
    if scheme not in ("aligned", "tdma"):
        raise ConfigError("scheme must be aligned or tdma")
    base = int(cfg["seed"])
    seeds = [base + i for i in range(n_seeds)]
    jobs = resolve_jobs(cfg.get("jobs"))
    if len(pdb) < 3:
        raise ConfigError("simulate needs at least 3 powers")
    ex = _executor(jobs)
    try:
        results, rates, _ = dof_experiment(m, seeds, pdb, trials, scheme, _bounds(cfg),
                                           float(cfg["noise_var"]), ex)
    finally:
        if ex is not None:
            ex.shutdown()
    try:
        slope = slope_of(results)[1]
    except ParameterError:
        slope = None
    rows = []
    for j, p in enumerate(pdb):
        sinr = np.mean([r.sinrs[j] for r in results], axis=0)
        leak = max(float(r.leakage[j]) for r in results)
        for k, s in enumerate(sinr):
            rows.append({"scheme": scheme, "M": m, "P_db": p, "stream": k,
                         "sinr_db": float(10 * np.log10(s)), "sum_rate": float(rates[j]), "leakage": leak})
    out = _out_dir(cfg)
    write_csv(out / "simulate.csv", cfg, ["scheme", "M", "P_db", "stream", "sinr_db", "sum_rate", "leakage"], rows)
    summary = {"scheme": scheme, "M": m, "seeds": seeds, "p_grid_db": pdb, "mean_sum_rate": rates.tolist(),
               "dof_slope": slope, "target_dof": (2 * m - 1) / m if scheme == "aligned" else 1.0,
               "min_cut_reference": 2.0, "config_sha256": config_hash(cfg)}
    write_json(out / "summary.json", summary)
    print(json.dumps({"dof_slope": slope}))
    return EXIT_OK


def cmd_rational(cfg: dict) -> int:
    m = _positive_int("m", cfg["m"])
    trials = _positive_int("trials", cfg["trials"])
    powers, _ = parse_p_grid(cfg["p_grid"])
    ch = sample_channel(int(cfg["seed"]), 2, 1, "constant_real", _bounds(cfg))
    pts = rational_sweep(ch, m, powers, trials, float(cfg["gamma"]), float(cfg["epsilon"]),
                         int(cfg["seed"]), float(cfg["noise_var"]))
    header = ["P", "M", "gamma", "epsilon", "relay1_ser", "relay2_ser", "d1_ser", "d2_ser",
              "rate_lb_1", "rate_lb_2"]
    rows = [pt.row() for pt in pts]
    write_csv(_out_dir(cfg) / "rational.csv", cfg, header, rows)
    for r in rows:
        print(",".join(str(_fmt(r[h])) for h in header))
    return EXIT_OK


def _multihop_two(cfg, seeds) -> int:
    gaps = [two_hop_infeasibility(sample_channel(s, 2, 1, "time_varying", _bounds(cfg))) for s in seeds]
    payload = {"hops": 2, "count": len(gaps), "min_ratio_gap": min(gaps),
               "median_ratio_gap": float(np.median(gaps)), "max_ratio_gap": max(gaps),
               "config_sha256": config_hash(cfg)}
    write_json(_out_dir(cfg) / "multihop.json", payload)
    print(json.dumps({"min_ratio_gap": payload["min_ratio_gap"]}))
    return EXIT_OK


def _solve_one(args):
    seed, hops, bounds, tol = args
    ch = sample_channel(seed, hops, 1, "time_varying", bounds)
    r = solve_gains(ch, tol=min(tol, 1e-13), seed=seed)
    rep = r.report(hops)
    rep["seed"] = seed
    rep["converged"] = bool(r.residual < tol and r.diag_min > 1e-6)
    return rep


def _multihop_reduce(cfg, hops: int) -> int:
    m = _positive_int("m", cfg["m"])
    _, pdb = parse_p_grid(cfg["p_grid"])
    base = int(cfg["seed"])
    results = []
    for i in range(_positive_int("seeds", cfg["seeds"])):
        ch = sample_channel(base + i, hops, m, "time_varying", _bounds(cfg))
        rng = np.random.default_rng([base + i, 1])
        phases = np.exp(2j * np.pi * rng.random((hops - 2, 2)))
        reduced, extra = reduce_to_two_hops(ch, GainAssignment(phases), float(cfg["noise_var"]))
        dvar = float(cfg["noise_var"]) + extra
        results.append(aligned_sweep(reduced, pdb, _positive_int("trials", cfg["trials"], 10),
                                     [base + i, 0], float(cfg["noise_var"]), dvar))
    rates, slope = slope_of(results)
    payload = {"hops": hops, "reduce": True, "M": m, "p_grid_db": pdb, "mean_sum_rate": rates.tolist(),
               "dof_slope": slope, "target_dof": (2 * m - 1) / m,
               "max_leakage": max(float(r.leakage.max()) for r in results),
               "config_sha256": config_hash(cfg)}
    write_json(_out_dir(cfg) / "multihop.json", payload)
    print(json.dumps({"dof_slope": slope}))
    return EXIT_OK


def cmd_multihop(cfg: dict) -> int:
    hops = _positive_int("hops", cfg["hops"], 2)
    n = _positive_int("seeds", cfg["seeds"])
    seeds = [int(cfg["seed"]) + i for i in range(n)]
    if hops == 2:
        return _multihop_two(cfg, seeds)
    if cfg.get("reduce"):
        return _multihop_reduce(cfg, hops)
    tol = float(cfg["tolerance"])
    jobs = resolve_jobs(cfg.get("jobs"))
    args = [(s, hops, _bounds(cfg), tol) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_solve_one, args))
    else:
        reports = [_solve_one(a) for a in args]
    ok = sum(r["converged"] for r in reports)
    payload = {"hops": hops, "instances": n, "converged": ok, "results": reports,
               "config_sha256": config_hash(cfg)}
    write_json(_out_dir(cfg) / "multihop.json", payload)
    print(json.dumps({"hops": hops, "converged": ok, "instances": n}))
    if n - ok > float(cfg["max_fail_fraction"]) * n:
        log.error("solver failed on %d of %d instances", n - ok, n)
        return EXIT_NUMERIC
    return EXIT_OK


def _load_channel(path: str) -> ChannelRealization:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read channel file: {exc}") from exc
    try:
        return ChannelRealization.from_json(text)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_check_phases(cfg: dict) -> int:
    tol = float(cfg["tolerance"])
    if cfg.get("channel"):
        ch = _load_channel(cfg["channel"])
        if ch.n_hops < 2:
            raise ConfigError("channel file needs two hops")
    else:
        ch = sample_channel(int(cfg["seed"]), 2, 1, "constant_complex", _bounds(cfg))
    F, G = ch.scalar_hop(0), ch.scalar_hop(1)
    try:
        rep = phase_condition(F, G, tol)
    except DegenerateInputError as exc:
        raise ConfigError(str(exc)) from exc
    ok = rep.first_hop_ok and rep.second_hop_ok
    payload = {"first_hop_ok": rep.first_hop_ok, "second_hop_ok": rep.second_hop_ok,
               "margins": list(rep.margins), "tolerance": tol, "degenerate": not ok,
               "near_degenerate": bool(any(0 < mg <= tol for mg in rep.margins)),
               "pipeline_run": False, "dof_slope": None}
    if ok:
        _, pdb = parse_p_grid(cfg["p_grid"])
        res = rotation_sweep(F, G, pdb, _positive_int("trials", cfg["trials"], 10), int(cfg["seed"]),
                             float(cfg["noise_var"]), tol)
        payload.update(pipeline_run=True, dof_slope=slope_of([res])[1], target_dof=1.5,
                       mean_sum_rate=res.rates.tolist(), p_grid_db=pdb)
    out = Path(cfg["out"]) / "check_phases.json" if cfg.get("out") else None
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, payload)
    return EXIT_OK


def cmd_dump_channel(cfg: dict) -> int:
    if cfg["model"] not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}")
    ch = sample_channel(int(cfg["seed"]), _positive_int("hops", cfg["hops"], 2),
                        _positive_int("m", cfg["m"]), cfg["model"], _bounds(cfg))
    text = json.dumps(ch.to_dict(), indent=2)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "rational": cmd_rational, "multihop": cmd_multihop,
            "check-phases": cmd_check_phases, "dump-channel": cmd_dump_channel}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ainsim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ainsim {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *flags):
        sp.add_argument("--config", help="JSON file with default values for this command")
        sp.add_argument("--out", help="output directory (file for dump-channel/check-phases)")
        sp.add_argument("--bounds", help="channel magnitude bounds 'lo,hi'")
        for f in flags:
            if f == "m":
                sp.add_argument("--m", type=int, help="symbol extension length M")
            elif f == "seeds":
                sp.add_argument("--seeds", type=int, help="number of channel seeds")
            elif f == "seed":
                sp.add_argument("--seed", type=int, help="base channel seed")
            elif f == "p_grid":
                sp.add_argument("--p-grid", dest="p_grid", help="powers in dB, or 'abs:' followed by linear values")
            elif f == "trials":
                sp.add_argument("--trials", type=int, help="Monte-Carlo samples or trials per point")
            elif f == "jobs":
                sp.add_argument("--jobs", type=int, help="worker processes (default $AIN_SIM_JOBS or 1)")
            elif f == "noise_var":
                sp.add_argument("--noise-var", dest="noise_var", type=float, help="noise variance")
            elif f == "tolerance":
                sp.add_argument("--tolerance", type=float, help="numeric tolerance")

    sp = sub.add_parser("simulate", help="aligned neutralization DoF sweep")
    common(sp, "m", "seeds", "seed", "p_grid", "trials", "jobs", "noise_var")
    sp.add_argument("--scheme", choices=("aligned", "tdma"))

    sp = sub.add_parser("rational", help="integer signaling SER sweep on a constant real channel")
    common(sp, "m", "seed", "p_grid", "trials", "noise_var")
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--epsilon", type=float)

    sp = sub.add_parser("multihop", help="AF gain feasibility and solving")
    common(sp, "m", "seeds", "seed", "p_grid", "trials", "jobs", "noise_var", "tolerance")
    sp.add_argument("--hops", type=int)
    sp.add_argument("--reduce", action="store_true", default=None,
                    help="fold extra hops with random gains and run the aligned scheme")
    sp.add_argument("--max-fail-fraction", dest="max_fail_fraction", type=float)

    sp = sub.add_parser("check-phases", help="phase conditions for a constant complex channel")
    common(sp, "seed", "p_grid", "trials", "noise_var", "tolerance")
    sp.add_argument("--channel", help="channel JSON file")

    sp = sub.add_parser("dump-channel", help="print a sampled channel as JSON")
    common(sp, "m", "seed")
    sp.add_argument("--hops", type=int)
    sp.add_argument("--model", choices=MODELS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, ConditioningError, DegenerateInputError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
