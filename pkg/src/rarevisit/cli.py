"""Command-line entry point.

Exit codes: 0 success, 1 a statistical check failed (with --check),
2 usage or configuration error, 3 step budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import oracle
from .excursion import STRICT, WEAK, StreamExhausted, decompose, events_for, records_to_csv
from .experiments import EXPERIMENTS
from .localtime import BudgetExceeded, dyadic_checkpoints, f_trace
from .walk import CapacityError, simulate_dd, simulate_path

THREADS_ENV = "RAREVISIT_THREADS"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3

# every option a config file may set; flags override the file, the file overrides defaults
CONFIG_KEYS = {
    "seed": int,
    "trials": int,
    "steps": int,
    "r": int,
    "width": int,
    "jmax": int,
    "threads": int,
    "out": str,
    "format": str,
    "check": bool,
    "checkpoints": str,
    "convention": str,
    "dim": int,
}

DEFAULTS = {
    "simulate": {"seed": 0, "steps": 1000, "dim": 1, "format": "csv"},
    "ftrace": {"seed": 0, "steps": 1 << 20, "checkpoints": "dyadic", "format": "csv"},
    "decompose": {"seed": 0, "steps": 10**7, "jmax": 3, "r": 2, "convention": WEAK, "format": "csv"},
    "verify": {"format": "json"},
    "enumerate": {"steps": 8, "r": 2, "format": "csv"},
}


class UsageError(ValueError):
    pass


def _progress(msg: str) -> None:
    print(f"[rarevisit] {msg}", file=sys.stderr, flush=True)


def _add_common(p: argparse.ArgumentParser) -> None:
    # defaults are None so that config values can fill what flags leave unset
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--jmax", type=int)
    p.add_argument("--threads", type=int, help=f"worker count (default from ${THREADS_ENV}, else 1)")
    p.add_argument("--out", help="output file (default: standard output)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--check", action="store_true", default=None, help="exit 1 when a check fails")
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--quiet", action="store_true", help="no progress on standard error")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rarevisit", description="Local-time experiments for simple random walk.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a seeded walk as CSV (n, position)")
    _add_common(p)
    p.add_argument("--dim", type=int, choices=(1, 2, 3))

    p = sub.add_parser("ftrace", help="stream f(n), range size and g_1(n) at checkpoints")
    _add_common(p)
    p.add_argument("--checkpoints", choices=("dyadic", "linear"))

    p = sub.add_parser("decompose", help="excursion table of the stopping-time decomposition")
    _add_common(p)
    p.add_argument("--convention", choices=(WEAK, STRICT))

    p = sub.add_parser("verify", help="run a verification experiment")
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    _add_common(p)

    p = sub.add_parser("enumerate", help="exact laws by enumerating all 2^n paths")
    p.add_argument("quantity", choices=("f", "g1", "tau"))
    _add_common(p)
    return parser


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise UsageError(f"unknown config fields: {', '.join(unknown)}")
    for k, v in data.items():
        typ = CONFIG_KEYS[k]
        if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
            raise UsageError(f"config field {k} must be an integer")
        if typ is bool and not isinstance(v, bool):
            raise UsageError(f"config field {k} must be true or false")
        if typ is str and not isinstance(v, str):
            raise UsageError(f"config field {k} must be a string")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config over defaults and validate everything up front."""
    cfg = load_config(args.config) if args.config else {}
    opts = dict(DEFAULTS[args.command])
    opts.update(cfg)
    for k in CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    if "threads" not in opts:
        env = os.environ.get(THREADS_ENV)
        try:
            opts["threads"] = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    opts.setdefault("check", False)
    for k in ("trials", "steps", "r", "width", "threads"):
        if k in opts and opts[k] < 1:
            raise UsageError(f"--{k} must be >= 1")
    if "jmax" in opts and opts["jmax"] < 0:
        raise UsageError("--jmax must be >= 0")
    if "seed" in opts and not 0 <= opts["seed"] < 2**64:
        raise UsageError("--seed must be in [0, 2^64)")
    if opts.get("format") not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    if opts.get("checkpoints", "dyadic") not in ("dyadic", "linear"):
        raise UsageError("--checkpoints must be dyadic or linear")
    if opts.get("convention", WEAK) not in (WEAK, STRICT):
        raise UsageError("--convention must be weak or strict")
    if opts.get("dim", 1) not in (1, 2, 3):
        raise UsageError("--dim must be 1, 2 or 3")
    return opts


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)


# --- subcommands --------------------------------------------------------------------


def cmd_simulate(opts: dict) -> tuple[str, bool]:
    n, seed, dim = opts["steps"], opts["seed"], opts["dim"]
    path = simulate_path(n, seed) if dim == 1 else simulate_dd(dim, n, seed)
    pos = path.positions()
    if opts["format"] == "json":
        return json.dumps({"seed": seed, "dim": dim, "steps": n, "positions": pos.tolist()}) + "\n", True
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "position"] if dim == 1 else ["n"] + ["x", "y", "z"][:dim])
    if dim == 1:
        w.writerows(zip(range(n + 1), pos.tolist()))
    else:
        w.writerows([i, *row] for i, row in enumerate(pos.tolist()))
    return buf.getvalue(), True


def cmd_ftrace(opts: dict) -> tuple[str, bool]:
    n = opts["steps"]
    if opts["checkpoints"] == "dyadic":
        cps = dyadic_checkpoints(n)
    else:
        every = max(1, n // 1000)
        cps = np.unique(np.append(np.arange(0, n + 1, every), n))
    tr = f_trace(n, opts["seed"], checkpoints=cps)
    if opts["format"] == "json":
        body = {
            "seed": opts["seed"],
            "steps": n,
            "running_max": tr.running_max,
            "final_f": tr.final_f,
            "taus": [int(t) for t in tr.taus if t >= 0],
            "rows": [[int(v) for v in row] for row in tr.rows],
        }
        return json.dumps(body, sort_keys=True) + "\n", True
    return tr.to_csv(), True


def cmd_decompose(opts: dict) -> tuple[str, bool]:
    path = simulate_path(opts["steps"], opts["seed"])
    pos = path.positions()
    recs = decompose(pos, opts["jmax"], convention=opts["convention"])
    flags = [events_for(pos, rec, opts["r"]) for rec in recs]
    if opts["format"] == "json":
        rows = [{**rec.__dict__, "B_r": f.B_holds, "A_r": f.A_holds, "A1_r": f.A1_holds, "A2_r": f.A2_holds}
                for rec, f in zip(recs, flags)]
        return json.dumps({"seed": opts["seed"], "r": opts["r"], "convention": opts["convention"],
                           "records": rows}, sort_keys=True) + "\n", True
    return records_to_csv(recs, flags), True


_VERIFY_KEYS = ("seed", "trials", "steps", "r", "width", "jmax", "threads")


def cmd_verify(opts: dict, experiment: str, quiet: bool) -> tuple[str, bool]:
    params = {k: opts[k] for k in _VERIFY_KEYS if k in opts}
    if "threads" in params and experiment != "g1":
        params.pop("threads")
    if not quiet:
        params["progress"] = _progress
    rec = EXPERIMENTS[experiment](**params)
    if opts["format"] == "json":
        return rec.to_json() + "\n", rec.passed
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "estimate", "stderr", "ci_low", "ci_high", "trials", "seed", "pass"])
    lo, hi = rec.ci if rec.ci else ("", "")
    w.writerow([rec.experiment, "" if rec.estimate is None else repr(rec.estimate),
                "" if rec.stderr is None else repr(rec.stderr), lo, hi, rec.trials, rec.seed, int(rec.passed)])
    return buf.getvalue(), rec.passed


def cmd_enumerate(opts: dict, quantity: str) -> tuple[str, bool]:
    n, threads = opts["steps"], opts["threads"]
    if n > oracle.MAX_ENUM_STEPS:
        raise UsageError(f"--steps must be <= {oracle.MAX_ENUM_STEPS} for enumeration")
    if quantity == "tau":
        cdf = oracle.enumerate_tau_cdf(n, opts["r"], threads)
        if opts["format"] == "json":
            return json.dumps({"n": n, "r": opts["r"], "cdf": [str(q) for q in cdf]}) + "\n", True
        return oracle.table_csv(list(enumerate(cdf)), header=("m", "cdf", "numerator", "denominator")), True
    dist = oracle.enumerate_f(n, threads) if quantity == "f" else oracle.enumerate_g1(n, threads)
    if opts["format"] == "json":
        body = {"n": n, "quantity": quantity, "mean": str(dist.mean()),
                "law": {str(k): str(p) for k, p in dist.as_dict().items()}}
        return json.dumps(body, sort_keys=True) + "\n", True
    return dist.to_csv(n), True


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        opts = resolve(args)
        cmd = args.command
        if cmd == "simulate":
            text, ok = cmd_simulate(opts)
        elif cmd == "ftrace":
            text, ok = cmd_ftrace(opts)
        elif cmd == "decompose":
            text, ok = cmd_decompose(opts)
        elif cmd == "verify":
            text, ok = cmd_verify(opts, args.experiment, args.quiet)
        else:
            text, ok = cmd_enumerate(opts, args.quantity)
        _write(text, opts.get("out"))
    except (UsageError, CapacityError) as e:
        print(f"rarevisit: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExceeded, StreamExhausted) as e:
        print(f"rarevisit: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as e:
        print(f"rarevisit: I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if opts["check"] and not ok:
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
