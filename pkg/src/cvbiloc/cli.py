"""Command-line front end: ``cvbiloc {sweep,verify,sample,info}``.

All subcommands write plain CSV (one header row, floats at 17 significant
digits) to ``--out`` or stdout.  Settings resolve as command-line flags,
then the ``CV_BILOC_NMAX`` environment variable (cutoff only), then a flat
``key = value`` file given by ``--config``, then built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

import numpy as np

from . import biloc, closed_form, oracle, sampler, states
from .errors import BilocError
from .fock import FockCutoff

ROUTE_CHOICES = {"closed": ("closed_form",), "svd": ("svd",), "grid": ("grid",), "all": biloc.ROUTES}
PHOTON_LABELS = ("TMSV",) + closed_form.PHOTON_CONFIGS
WERNER_LABELS = ("case1", "case2")
DEFAULTS = {"route": "closed", "seed": 0, "shots": 100_000, "workers": None, "nmax": None, "out": None}


class UsageError(Exception):
    pass


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def parse_range(text: str) -> tuple[str, np.ndarray]:
    """``name=start:stop:count`` to a name and an inclusive linspace."""
    try:
        name, spec = text.split("=", 1)
        start, stop, count = spec.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected name=start:stop:count") from None
    if count < 2:
        raise UsageError(f"range {name!r} needs count >= 2")
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise UsageError(f"range {name!r} must have finite endpoints")
    return name.strip(), np.linspace(start, stop, count)


def parse_param(text: str) -> tuple[str, object]:
    try:
        name, value = text.split("=", 1)
    except ValueError:
        raise UsageError(f"bad parameter {text!r}; expected name=value") from None
    try:
        return name.strip(), float(value)
    except ValueError:
        return name.strip(), value.strip()


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``range.NAME`` and ``param.NAME`` keys feed the lists."""
    settings: dict = {"range": [], "param": []}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key.startswith("range."):
                settings["range"].append(f"{key[6:]}={value}")
            elif key.startswith("param."):
                settings["param"].append(f"{key[6:]}={value}")
            else:
                settings[key] = value
    return settings


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge flags, environment, config file and defaults in that order."""
    file_settings = read_config(args.config) if args.config else {"range": [], "param": []}
    merged = vars(args).copy()
    for key, default in DEFAULTS.items():
        if merged.get(key) is None:
            merged[key] = file_settings.get(key, default)
    for key in ("family", "config_label"):
        if merged.get(key) is None:
            merged[key] = file_settings.get(key)
    # list options: flags replace the file's entries for the same name
    for key in ("range", "param"):
        given = merged.get(key) or []
        names = {item.split("=", 1)[0] for item in given}
        merged[key] = [i for i in file_settings[key] if i.split("=", 1)[0] not in names] + given
    if args.nmax is None and os.environ.get("CV_BILOC_NMAX"):
        merged["nmax"] = os.environ["CV_BILOC_NMAX"]
    for key in ("seed", "shots", "nmax", "workers"):
        if merged[key] is not None:
            try:
                merged[key] = int(merged[key])
            except ValueError:
                raise UsageError(f"{key} must be an integer, got {merged[key]!r}") from None
    if merged["route"] not in ROUTE_CHOICES:
        raise UsageError(f"route must be one of {sorted(ROUTE_CHOICES)}")
    return argparse.Namespace(**merged)


def _labels(family: str, label: Optional[str]) -> list[Optional[str]]:
    if family == "photon":
        if label in (None, "all"):
            return list(PHOTON_LABELS)
        if label not in PHOTON_LABELS:
            raise UsageError(f"photon configuration must be one of {PHOTON_LABELS} or all")
        return [label]
    if family == "werner":
        if label in (None, "all"):
            return list(WERNER_LABELS)
        if label not in WERNER_LABELS:
            raise UsageError("werner configuration must be case1, case2 or all")
        return [label]
    if label not in (None, "all"):
        raise UsageError(f"family {family!r} takes no configuration label")
    return [None]


def _point_params(family: str, label: Optional[str], params: dict) -> dict:
    p = dict(params)
    if family == "photon":
        p["label"] = label
    elif family == "werner":
        p.setdefault("case", 1 if label == "case1" else 2)
    return p


def evaluate_point(family: str, label: Optional[str], params: dict, routes, nmax: Optional[int]) -> dict:
    """All requested routes at one parameter point; picklable for worker processes."""
    p = _point_params(family, label, params)
    cutoff = FockCutoff(nmax) if nmax is not None else None
    out: dict = {}
    scenario = None
    for route in routes:
        if route == "closed_form":
            result = biloc.closed_form_smax(family, **p)
        else:
            if scenario is None:
                scenario = biloc.scenario_for(family, cutoff, **p)
            result = (biloc.maximize_scenario_svd(scenario) if route == "svd"
                      else biloc.maximize_grid(scenario))
        out[route] = result
    if family == "photon":
        ref_params = {**p, "label": "TMSV"}
        first = routes[0]
        if label == "TMSV":
            ref = out[first].s_max
        elif first == "closed_form":
            ref = biloc.closed_form_smax(family, **ref_params).s_max
        else:
            ref = biloc.maximize(family, first, cutoff, **ref_params).s_max
        out["delta"] = biloc.enhancement_delta(out[first].s_max, ref)
    if scenario is not None:
        out["n_max"], out["tail_mass"] = scenario.n_max, scenario.tail_mass
    return out


def _executor_map(fn, jobs, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _write(rows: list[list], header: list[str], out: Optional[str]):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buffer.getvalue()
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def cmd_sweep(args) -> int:
    if not args.family:
        raise UsageError("sweep needs --family")
    if not args.range:
        raise UsageError("sweep needs at least one --range")
    ranges = [parse_range(r) for r in args.range]
    fixed = dict(parse_param(p) for p in args.param)
    routes = ROUTE_CHOICES[args.route]
    labels = _labels(args.family, args.config_label)
    names = [name for name, _ in ranges]
    jobs, keys = [], []
    for values in itertools.product(*(v for _, v in ranges)):
        for label in labels:
            point = {**fixed, **dict(zip(names, (float(v) for v in values)))}
            jobs.append((args.family, label, point, routes, args.nmax))
            keys.append((label, values))
    results = _executor_map(evaluate_point, jobs, args.workers)
    first = routes[0]
    header = ["family", "config", *names, *[f"s_max_{r}" for r in routes],
              "theta1", "theta2", "I", "J", "excess"]
    if args.family == "photon":
        header.append("delta")
    header += ["n_max", "tail_mass"]
    rows = []
    for (label, values), res in zip(keys, results):
        best = res[first]
        row = [args.family, label or "", *values, *[res[r].s_max for r in routes],
               best.theta1, best.theta2, best.I_at_opt, best.J_at_opt, best.s_max - 2.0]
        if args.family == "photon":
            row.append(res["delta"])
        row += [res.get("n_max"), res.get("tail_mass")]
        rows.append(row)
    _write(rows, header, args.out)
    return 0


def cmd_verify(args) -> int:
    families = None if args.family in (None, "all") else {args.family}
    reports = oracle.run_registry(families)
    if not reports:
        raise UsageError(f"no registered quantities for family {args.family!r}")
    rows = [[r.quantity, r.family, r.params_text(), r.closed, r.oracle, r.absdev, r.passed]
            for r in reports]
    _write(rows, ["quantity", "family", "params", "closed", "oracle", "absdev", "pass"], args.out)
    failures = sum(not r.passed for r in reports)
    print(f"{len(reports)} checks, {failures} failed", file=sys.stderr)
    return min(failures, 255)


def cmd_sample(args) -> int:
    if not args.family:
        raise UsageError("sample needs --family")
    if args.shots < 1:
        raise UsageError("--shots must be at least 1")
    labels = _labels(args.family, args.config_label)
    if len(labels) != 1:
        raise UsageError("sample runs one configuration; pass --config-label")
    p = _point_params(args.family, labels[0], dict(parse_param(x) for x in args.param))
    cutoff = FockCutoff(args.nmax) if args.nmax is not None else None
    sc = biloc.scenario_for(args.family, cutoff, **p)
    best = biloc.maximize_scenario_svd(sc)
    theta1 = 0.0 if best.degenerate else best.theta1
    theta2 = 0.0 if best.degenerate else best.theta2
    est = sampler.run_shots(sc, (theta1, theta2), sampler.ShotPlan(args.shots, args.seed))
    exact = biloc.s_biloc(sc, theta1, theta2)
    params = ";".join(f"{k}={fmt(v)}" for k, v in sorted(p.items()))
    header = ["family", "config", "params", "theta1", "theta2", "shots", "seed", "I_hat", "J_hat",
              "S_hat", "std_err_I", "std_err_J", "std_err_S", "S_exact", "n_max", "tail_mass"]
    row = [args.family, labels[0] or "", params, theta1, theta2, est.shots, est.seed, est.I_hat,
           est.J_hat, est.S_hat, est.std_err_I, est.std_err_J, est.std_err_S, exact, sc.n_max, sc.tail_mass]
    _write([row], header, args.out)
    return 0


def cmd_info(args) -> int:
    rows = []
    if args.family:
        for label in _labels(args.family, args.config_label):
            p = _point_params(args.family, label, dict(parse_param(x) for x in args.param))
            ctx = biloc.closed_form_context(args.family, **p)
            for key, value in ctx.values.items():
                rows.append(["closed_form", label or "", key, value])
            sc = biloc.scenario_for(args.family, None, **p)
            rows.append(["cutoff", label or "", "n_max", sc.n_max])
            rows.append(["cutoff", label or "", "tail_mass", sc.tail_mass])
    else:
        for q in oracle.REGISTRY.values():
            rows.append(["quantity", q.family, q.qid, len(q.points)])
        for family, offsets in states.FAMILY_OFFSETS.items():
            rows.append(["offsets", family, "q", f"{offsets[0]}:{offsets[1]}"])
    _write(rows, ["kind", "family", "name", "value"], args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", choices=biloc.FAMILIES + ("all",))
    common.add_argument("--config-label", help="photon: A1..C2, TMSV or all; werner: case1, case2 or all")
    common.add_argument("--range", action="append", default=[], metavar="NAME=START:STOP:COUNT")
    common.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--route", choices=sorted(ROUTE_CHOICES))
    common.add_argument("--nmax", type=int, help="Fock cutoff for every mode (default: automatic)")
    common.add_argument("--seed", type=int)
    common.add_argument("--shots", type=int, help="shots per setting")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--workers", type=int, help="worker processes (default: all CPUs)")
    common.add_argument("--config", help="flat key = value settings file")

    parser = argparse.ArgumentParser(prog="cvbiloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("sweep", cmd_sweep, "maximal bilocality value over a parameter grid"),
        ("verify", cmd_verify, "closed forms against trace-built oracles"),
        ("sample", cmd_sample, "finite-shot estimate of I, J and S"),
        ("info", cmd_info, "closed-form scalars, cutoffs and the oracle registry"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
        if args.family == "all" and args.command != "verify":
            raise UsageError("--family all is only meaningful for verify")
        return args.handler(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (BilocError, ValueError, KeyError) as exc:
        detail = f"missing parameter {exc}" if isinstance(exc, KeyError) else str(exc)
        parser.exit(2, f"cvbiloc: error: {detail}\n")
    except OSError as exc:
        parser.exit(1, f"cvbiloc: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
