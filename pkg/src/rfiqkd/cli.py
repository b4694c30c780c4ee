"""Batch command-line front end.

Subcommands::

    curve-c         C lower bound over a (qber, beta, variant) grid
    rate-single     asymptotic single-photon rates vs distance or qber
    rate-decoy      optimized decoy-state finite-key and asymptotic rates
    analyze-counts  decoy-state estimation chain on a measured counts file
    optimize        parameter optimization at one distance

Configuration is a JSON file (``--config``); individual flags override the
file.  Output is CSV with a schema-version comment line, comma delimiter,
'.' decimal separator, UTF-8; every row carries its full grid coordinates.
Grid points can be dispatched to a process pool (``--jobs``); rows are
always written in deterministic grid order.

Exit codes: 0 success, 2 configuration error, 3 input-data error, 4 solver
failure on every grid point.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from rfiqkd import bounds, channel, finitekey, keyrates, optimize
from rfiqkd.sdp import SolverError

SCHEMA_COMMENT = "# rfiqkd-csv v1"

VARIANT_ALIASES = {
    "six": "six_state",
    "four": "four_state",
    "three": "three_state",
    "bb84": "bb84_three_state",
}


class ConfigError(ValueError):
    pass


DEFAULT_CONFIG = {
    "variant": "three",
    "beta": 0.0,
    "seed": 0,
    "jobs": 1,
    "device": {
        "eta_det": 0.13,
        "e_d": 8e-6,
        "e_o": 0.01,
        "loss_coeff_db_per_km": 0.21,
        "channel_att_db": None,
        "excess_loss_db": {},
        "e_flip": {},
    },
    "source": {
        "mu": 0.58,
        "nu": 0.25,
        "omega": 0.0,
        "p_mu": 0.6,
        "p_nu": 0.31,
        "p_omega": 0.09,
        "pr_z_a": 0.9,
        "n_pulses": 1e10,
    },
    "security": {
        "epsilon": 1e-10,
        "epsilon_ec": 1e-10,
        "epsilon_pa": 1e-10,
        "epsilon_bar": 1e-10,
        "f_ec": 1.16,
    },
    "sweep": {
        "e_zz": [0.0, 0.02, 0.04, 0.06, 0.08, 0.10],
        "beta": [0.0],
        "distance_km": [10.0, 25.0, 50.0, 75.0, 100.0],
    },
    "slack": 1e-6,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if key in out and isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = DEFAULT_CONFIG
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        cfg = _deep_merge(cfg, user)
    cfg = _deep_merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    variant = cfg.get("variant")
    if variant not in VARIANT_ALIASES and variant not in bounds.VARIANTS:
        raise ConfigError(
            f"variant must be one of {sorted(VARIANT_ALIASES)} (or a full tag), got {variant!r}"
        )
    src = cfg["source"]
    if src["mu"] <= src["nu"]:
        raise ConfigError(f"source needs mu > nu, got mu={src['mu']} nu={src['nu']}")
    psum = src["p_mu"] + src["p_nu"] + src["p_omega"]
    if abs(psum - 1.0) > 1e-9:
        raise ConfigError(f"intensity probabilities must sum to 1, got {psum}")
    for key in ("e_zz", "beta", "distance_km"):
        grid = cfg["sweep"].get(key, [])
        if len(grid) == 0:
            raise ConfigError(f"sweep grid {key!r} is empty")
        if any(b < a for a, b in zip(grid, grid[1:])):
            raise ConfigError(f"sweep grid {key!r} must be nondecreasing")
    try:
        channel_params(cfg)
        source_params(cfg)
        security_params(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def canonical_variant(tag: str) -> str:
    return VARIANT_ALIASES.get(tag, tag)


def channel_params(cfg: dict, beta: float | None = None, distance: float | None = None):
    dev = cfg["device"]
    return channel.ChannelParams(
        beta=cfg["beta"] if beta is None else beta,
        e_flip=dict(dev.get("e_flip", {})),
        eta_det=dev["eta_det"],
        e_d=dev["e_d"],
        e_o=dev["e_o"],
        distance_km=0.0 if distance is None else distance,
        loss_coeff_db_per_km=dev["loss_coeff_db_per_km"],
        channel_att_db=dev.get("channel_att_db"),
        excess_loss_db=dict(dev.get("excess_loss_db", {})),
    )


def source_params(cfg: dict):
    return channel.SourceParams(**cfg["source"])


def security_params(cfg: dict):
    return finitekey.SecurityParams(**cfg["security"])


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def write_csv(path: str | None, header: list, rows: list) -> None:
    out = open(path, "w", newline="", encoding="utf-8") if path else sys.stdout
    try:
        out.write(SCHEMA_COMMENT + "\n")
        writer = csv.writer(out)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    finally:
        if path:
            out.close()


def _pool_map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ----------------------------------------------------------------- curve-c

def _curve_c_point(task):
    cfg, variant, e, beta = task
    ch = channel.ChannelParams(beta=beta, e_flip={"X": e, "Y": e, "Z": e})
    try:
        stats = channel.statistics_table(variant, ch)
        res = bounds.lower_bound_C(variant, stats, slack=cfg["slack"])
    except SolverError as exc:
        return (e, beta, variant, None, f"solver:{exc}")
    return (e, beta, variant, res.c_l, "ok")


def cmd_curve_c(cfg: dict, out_path: str | None) -> int:
    variants = (
        [canonical_variant(cfg["variant"])]
        if cfg.get("single_variant")
        else ["six_state", "four_state", "three_state"]
    )
    tasks = [
        (cfg, v, float(e), float(b))
        for v in variants
        for b in cfg["sweep"]["beta"]
        for e in cfg["sweep"]["e_zz"]
    ]
    rows = _pool_map(_curve_c_point, tasks, cfg["jobs"])
    write_csv(out_path, ["e_zz", "beta", "variant", "c_l", "status"], rows)
    return 4 if all(r[4] != "ok" for r in rows) else 0


# ------------------------------------------------------------- rate-single

def _rate_single_point(task):
    cfg, variant, mode, x, beta = task
    try:
        if mode == "distance":
            ch = channel_params(cfg, beta=beta, distance=x)
            rate = keyrates.single_photon_rate(variant, ch, slack=cfg["slack"])["rate"]
        else:
            rate = keyrates.qber_family_rate(variant, x, slack=cfg["slack"])
    except SolverError as exc:
        return (mode, x, variant, beta, None, f"solver:{exc}")
    return (mode, x, variant, beta, rate, "ok")


def cmd_rate_single(cfg: dict, out_path: str | None) -> int:
    variants = ["six_state", "four_state", "three_state", "bb84_three_state"]
    sweep_mode = cfg.get("rate_single_mode", "distance")
    if sweep_mode not in ("distance", "qber"):
        raise ConfigError(f"rate_single_mode must be 'distance' or 'qber', got {sweep_mode!r}")
    grid = cfg["sweep"]["distance_km"] if sweep_mode == "distance" else cfg["sweep"]["e_zz"]
    tasks = [
        (cfg, v, sweep_mode, float(x), float(b))
        for v in variants
        for b in cfg["sweep"]["beta"]
        for x in grid
    ]
    rows = _pool_map(_rate_single_point, tasks, cfg["jobs"])
    write_csv(out_path, ["mode", "x", "variant", "beta", "rate", "status"], rows)
    return 4 if all(r[5] != "ok" for r in rows) else 0


# -------------------------------------------------------------- rate-decoy

def _rate_decoy_point(task):
    cfg, variant, distance, beta = task
    ch = channel_params(cfg, beta=beta)
    sec = security_params(cfg)
    n_pulses = cfg["source"]["n_pulses"]
    try:
        vec, rate = optimize.optimize_rate(distance, variant, ch, sec, n_pulses)
        src = vec.source(n_pulses)
        from dataclasses import replace

        asym = keyrates.wcs_finite_key(
            variant, replace(ch, distance_km=distance), src, sec, "asymptotic",
            slack=cfg["slack"],
        ).rate
    except (SolverError, ValueError) as exc:
        return [
            (distance, variant, beta, "finite", None, None, None, None, None, None, f"solver:{exc}"),
        ]
    pv = (vec.mu, vec.nu, vec.p_mu, vec.p_nu, vec.pr_z_a)
    return [
        (distance, variant, beta, "finite", rate) + pv + ("ok",),
        (distance, variant, beta, "asymptotic", asym) + pv + ("ok",),
    ]


def cmd_rate_decoy(cfg: dict, out_path: str | None) -> int:
    variant = canonical_variant(cfg["variant"])
    tasks = [
        (cfg, variant, float(d), float(b))
        for b in cfg["sweep"]["beta"]
        for d in cfg["sweep"]["distance_km"]
    ]
    results = _pool_map(_rate_decoy_point, tasks, cfg["jobs"])
    rows = [row for group in results for row in group]
    write_csv(
        out_path,
        ["distance_km", "variant", "beta", "mode", "rate", "mu", "nu", "p_mu", "p_nu", "pr_z_a", "status"],
        rows,
    )
    return 4 if all(r[-1] != "ok" for r in rows) else 0


# ---------------------------------------------------------- analyze-counts

def cmd_analyze_counts(cfg: dict, counts_path: str, out_path: str | None) -> int:
    variant = canonical_variant(cfg["variant"])
    try:
        counts = finitekey.read_counts_file(counts_path)
    except finitekey.CountsFileError as exc:
        print(f"counts file rejected: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"cannot read counts file: {exc}", file=sys.stderr)
        return 3
    src = source_params(cfg)
    sec = security_params(cfg)
    try:
        report = finitekey.finite_key_report(counts, src, sec, variant, slack=cfg["slack"])
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"counts data invalid for {variant}: {exc}", file=sys.stderr)
        return 3
    est = report.estimate
    header = [
        "variant", "s_zz_0", "s_zz_1", "e_zz_1", "e_xx_1", "e_xy_1", "e_yx_1",
        "e_yy_1", "c_l", "e_zz_observed", "n_zz", "key_length", "rate",
    ]
    row = [
        variant,
        est.s_zz_0,
        est.s_zz_1,
        est.e_zz_1,
        est.e_pair.get(("X", "X")),
        est.e_pair.get(("X", "Y")),
        est.e_pair.get(("Y", "X")),
        est.e_pair.get(("Y", "Y")),
        report.c_lower,
        report.e_zz_observed,
        report.n_zz,
        report.length,
        report.rate,
    ]
    write_csv(out_path, header, [row])
    return 0


# ---------------------------------------------------------------- optimize

def cmd_optimize(cfg: dict, distance: float, out_path: str | None) -> int:
    variant = canonical_variant(cfg["variant"])
    ch = channel_params(cfg, beta=cfg["beta"])
    sec = security_params(cfg)
    vec, rate = optimize.optimize_rate(distance, variant, ch, sec, cfg["source"]["n_pulses"])
    write_csv(
        out_path,
        ["distance_km", "variant", "beta", "rate", "mu", "nu", "p_mu", "p_nu", "pr_z_a"],
        [(distance, variant, cfg["beta"], rate, vec.mu, vec.nu, vec.p_mu, vec.p_nu, vec.pr_z_a)],
    )
    return 0


# --------------------------------------------------------------- arg plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rfiqkd",
        description="Reference-frame-independent QKD bounds, channel models and key rates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output CSV path (default stdout)")
        p.add_argument("--seed", type=int, help="seed for sampled-count modes")
        p.add_argument("--variant", choices=sorted(VARIANT_ALIASES), help="protocol variant")
        p.add_argument("--beta", type=float, help="reference-frame misalignment (radians)")
        p.add_argument("--jobs", type=int, help="process-pool width for grid points")

    p = sub.add_parser("curve-c", help="C lower bound over the (e_zz, beta) grid")
    common(p)
    p.add_argument("--single-variant", action="store_true", help="only the configured variant")

    p = sub.add_parser("rate-single", help="asymptotic single-photon-source rates")
    common(p)
    p.add_argument("--sweep-qber", action="store_true", help="sweep e_zz instead of distance")

    p = sub.add_parser("rate-decoy", help="optimized decoy finite-key and asymptotic rates")
    common(p)

    p = sub.add_parser("analyze-counts", help="decoy estimation chain on a counts file")
    common(p)
    p.add_argument("counts_file", help="counts CSV (see docs for the schema)")

    p = sub.add_parser("optimize", help="optimize protocol parameters at one distance")
    common(p)
    p.add_argument("--distance-km", type=float, required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: getattr(args, k, None) for k in ("variant", "beta", "seed", "jobs")
    }
    if getattr(args, "single_variant", False):
        overrides["single_variant"] = True
    if getattr(args, "sweep_qber", False):
        overrides["rate_single_mode"] = "qber"
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "curve-c":
            return cmd_curve_c(cfg, args.out)
        if args.command == "rate-single":
            return cmd_rate_single(cfg, args.out)
        if args.command == "rate-decoy":
            return cmd_rate_decoy(cfg, args.out)
        if args.command == "analyze-counts":
            return cmd_analyze_counts(cfg, args.counts_file, args.out)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.distance_km, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
