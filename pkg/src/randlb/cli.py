"""Command line entry point: ``randlb gen|run|verify|sweep``.

Exit status: 0 on success, 1 when a checker finds a counterexample,
2 on usage errors.

A ``--config`` file holds ``key = value`` lines (``#`` starts a comment);
keys are the long option names without dashes (``k-list`` or ``k_list``).
Command-line flags override the file.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import _kernels
from .harness import (SUITES, ExperimentConfig, cap_probability_experiment, emit_results,
                      queries_to_epsilon, run_lemma_suite, sweep)
from .instance import build_instance, save_instance
from .optimizers import available_algorithms
from .vecspace import derive_seed

EXIT_OK, EXIT_COUNTEREXAMPLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int_list(s):
    try:
        return [int(p) for p in str(s).replace(" ", "").split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randlb", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--seed", type=int)

    g = sub.add_parser("gen", help="build and serialize a hard instance")
    common(g)
    g.add_argument("--k", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--L", type=float)
    g.add_argument("--B", type=float)
    g.add_argument("--out")
    g.add_argument("--text", action="store_true", default=None,
                   help="embed V in the JSON file (k*d <= 100000)")

    r = sub.add_parser("run", help="run one experiment")
    common(r)
    r.add_argument("--mode", choices=("lower_bound", "upper_bound", "cap_check", "lemma_suite"))
    r.add_argument("--algo", choices=available_algorithms())
    r.add_argument("--k", type=int)
    r.add_argument("--d", type=int)
    r.add_argument("--L", type=float)
    r.add_argument("--B", type=float)
    r.add_argument("--budget", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--mix", type=float, help="hybrid: weight of the random guess")
    r.add_argument("--d-prime", dest="d_prime", type=int, help="cap_check dimension")
    r.add_argument("--tau", type=float, help="cap_check threshold")
    r.add_argument("--samples", type=int, help="cap_check sample count")
    r.add_argument("--csv", help="CSV output path")
    r.add_argument("--json", help="JSON output path")

    v = sub.add_parser("verify", help="run invariant and lemma checkers")
    common(v)
    v.add_argument("--suite", choices=SUITES + ("all",))
    v.add_argument("--trials", type=int)
    v.add_argument("--k-list", dest="k_list", type=_int_list)
    v.add_argument("--d", type=int, help="fixed dimension (default 64k)")
    v.add_argument("--report", help="JSON report path")

    s = sub.add_parser("sweep", help="lower-bound experiments over a (k, d) grid")
    common(s)
    s.add_argument("--k-list", dest="k_list", type=_int_list)
    s.add_argument("--d-list", dest="d_list", type=_int_list)
    s.add_argument("--algo", choices=available_algorithms())
    s.add_argument("--trials", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--csv")
    s.add_argument("--json")
    return p


_CONVERTERS = {"k": int, "d": int, "L": float, "B": float, "budget": int, "trials": int,
               "seed": int, "workers": int, "mix": float, "d_prime": int, "tau": float,
               "samples": int, "k_list": _int_list, "d_list": _int_list,
               "text": lambda s: s.lower() in ("1", "true", "yes")}


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    opts = dict(defaults)
    if getattr(args, "config", None):
        for key, val in read_config(args.config).items():
            if key not in defaults:
                raise UsageError(f"unknown config key {key!r} for '{args.command}'")
            try:
                opts[key] = _CONVERTERS.get(key, str)(val)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad value for {key}: {val!r} ({exc})") from exc
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _write_outputs(stats, opts):
    if opts.get("csv"):
        emit_results(stats, opts["csv"], "csv")
    if opts.get("json"):
        emit_results(stats, opts["json"], "json")


def cmd_gen(args) -> int:
    o = _merge(args, {"k": 4, "d": 16, "L": 1.0, "B": 1.0, "seed": 0,
                      "out": "instance.json", "text": None})
    inst = build_instance(o["k"], o["d"], o["L"], o["B"], seed=o["seed"])
    for path in save_instance(inst, o["out"], text=o["text"]):
        print(path)
    return EXIT_OK


def cmd_run(args) -> int:
    o = _merge(args, {"mode": "lower_bound", "algo": "random-search", "k": 4, "d": 64,
                      "L": 1.0, "B": 1.0, "budget": None, "trials": 100, "seed": 0,
                      "workers": 1, "mix": None, "d_prime": 2000, "tau": 0.05,
                      "samples": 100_000, "csv": None, "json": None})
    if o["mode"] == "cap_check":
        res = cap_probability_experiment(o["d_prime"], o["tau"], o["samples"],
                                         rng=derive_seed(o["seed"], 0, "probe"))
        print(f"cap d'={res.d_prime} tau={res.tau}: empirical={res.empirical!r} "
              f"bound={res.analytic_bound!r} within_bound={res.within_bound}")
        return EXIT_OK if res.within_bound else EXIT_COUNTEREXAMPLE
    if o["mode"] == "lemma_suite":
        rep = run_lemma_suite(trials=o["trials"], k_list=(o["k"],), d=o["d"],
                              base_seed=o["seed"])
        return _print_report(rep, None)
    params = {"mix": o["mix"]} if o["mix"] is not None else {}
    cfg = ExperimentConfig(k=o["k"], d=o["d"], L=o["L"], B=o["B"], algo=o["algo"],
                           params=params, budget=o["budget"], trials=o["trials"],
                           base_seed=o["seed"], mode=o["mode"], workers=o["workers"])
    stats = queries_to_epsilon(cfg)
    _write_outputs(stats, o)
    print(f"{cfg.mode} algo={cfg.algo} k={cfg.k} d={cfg.d} budget={stats.budget} "
          f"trials={stats.trials}: success={stats.success_frac_value:.4f} "
          f"P_E_hat={stats.P_E_hat:.4f} (bound {stats.P_E_bound:.4f}) "
          f"median_first_success={stats.median_first_success}")
    return EXIT_OK


def _print_report(rep, path) -> int:
    for name, tally in rep.checks.items():
        print(f"{name:12s} cases={tally.cases:8d} counterexamples={tally.counterexamples}")
    for name, st in rep.selftests.items():
        print(f"selftest {name}: {st}")
    if path:
        Path(path).write_text(json.dumps(rep.to_dict(), indent=1, default=str) + "\n")
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_COUNTEREXAMPLE


def cmd_verify(args) -> int:
    o = _merge(args, {"suite": "all", "trials": 1000, "k_list": [1, 2, 4, 8], "d": None,
                      "seed": 0, "report": None})
    suites = SUITES if o["suite"] == "all" else (o["suite"],)
    rep = run_lemma_suite(trials=o["trials"], k_list=tuple(o["k_list"]), d=o["d"],
                          base_seed=o["seed"], suites=suites)
    return _print_report(rep, o["report"])


def cmd_sweep(args) -> int:
    o = _merge(args, {"k_list": [4], "d_list": [8, 64, 512, 4096], "algo": "random-search",
                      "trials": 100, "budget": None, "seed": 0, "workers": 1,
                      "csv": None, "json": None})
    rows = sweep(o["k_list"], o["d_list"], o["algo"], o["trials"], base_seed=o["seed"],
                 budget=o["budget"], workers=o["workers"])
    _write_outputs(rows, o)
    for s in rows:
        print(f"k={s.k} d={s.d}: success={s.success_frac_value:.4f} P_E_hat={s.P_E_hat:.4f} "
              f"bound={s.P_E_bound:.4f}")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).info("kernel backend: %s", _kernels.BACKEND)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"randlb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"randlb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
