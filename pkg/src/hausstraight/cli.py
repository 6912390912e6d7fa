"""Command-line entry point.

Subcommands: fixtures, content, straight-check, decompose, localize,
pde-solve, verify.  Exit codes: 0 success, 1 domain error (including an
inconclusive certification), 2 a computed density violation, 64 usage.
An optional JSON config file supplies flag defaults; explicit flags win.
The worker-thread count comes from HAUSSTRAIGHT_THREADS, then --threads,
then the logical core count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import verify as verify_mod
from .decomposition import ExtractionSchedule, decompose, localize
from .fixtures import FIXTURE_KINDS, FixtureSpec, generate
from .hausdorff import HausdorffParams, content
from .measure import MeasureFormatError, load_measure, save_measure
from .potential_pde import GridDomain, SchemeConfig, solve_with_measure
from .straightness import CertRequest, certify

USAGE_EXIT = 64
VIOLATED_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def resolve_threads(flag_value: int | None) -> int:
    env = os.environ.get("HAUSSTRAIGHT_THREADS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"HAUSSTRAIGHT_THREADS must be an integer, got {env!r}")
    elif flag_value is not None:
        n = flag_value
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ValueError("thread count must be >= 1")
    # numpy/scipy do their own pooling; cap their workers to the request
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    return n


def _build_parser() -> _Parser:
    p = _Parser(prog="hausstraight", description=__doc__)
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--threads", type=int, default=None, help="worker pool size")
    sub = p.add_subparsers(dest="command", required=True)

    fx = sub.add_parser("fixtures", parents=[], help="generate example measures")
    fx.add_argument("--kind", required=True, choices=FIXTURE_KINDS)
    fx.add_argument("--out", required=True)
    fx.add_argument("--seed", type=int, default=0)
    fx.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="fixture parameter, repeatable")

    ct = sub.add_parser("content", help="Hausdorff content/capacity estimate")
    ct.add_argument("--input", required=True)
    ct.add_argument("--s", type=float, required=True)
    ct.add_argument("--delta", type=float, default=math.inf)
    ct.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    ct.add_argument("--rho", type=float, default=0.0, help="per-ball radius floor")
    ct.add_argument("--convention", choices=["spherical", "diameter"], default="spherical")
    ct.add_argument("--out", default=None)

    sc = sub.add_parser("straight-check", help="certify the ball-density criterion")
    sc.add_argument("--input", required=True)
    sc.add_argument("--s", type=float, required=True)
    sc.add_argument("--rmin", type=float, required=True)
    sc.add_argument("--epsilon", type=float, default=0.0)
    sc.add_argument("--delta", type=float, default=math.inf)
    sc.add_argument("--budget", type=int, default=10_000_000)
    sc.add_argument("--out", default=None)

    dc = sub.add_parser("decompose", help="extract certified straight parts")
    dc.add_argument("--input", required=True)
    dc.add_argument("--s", type=float, required=True)
    dc.add_argument("--rmin", type=float, default=0.05)
    dc.add_argument("--epsilon", type=float, default=0.0)
    dc.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    dc.add_argument("--out", default=None)

    lc = sub.add_parser("localize", help="staged localization of a decomposition")
    lc.add_argument("--input", required=True)
    lc.add_argument("--s", type=float, required=True)
    lc.add_argument("--rmin", type=float, default=0.05)
    lc.add_argument("--epsilon", type=float, default=0.0)
    lc.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    lc.add_argument("--stages", default="0.5,0.1,0.01",
                    help="comma-separated decreasing mass targets")
    lc.add_argument("--out", default=None)

    pd = sub.add_parser("pde-solve", help="solve -Lap u + (e^u - 1) = nu")
    pd.add_argument("--input", required=True)
    pd.add_argument("--h", type=float, default=1 / 128)
    pd.add_argument("--domain", default="0,1,0,1", help="x0,x1,y0,y1")
    pd.add_argument("--stages", type=int, default=6)
    pd.add_argument("--out-csv", default=None)
    pd.add_argument("--out-report", default=None)

    vf = sub.add_parser("verify", help="run acceptance suites")
    vf.add_argument("--suite", default="all",
                    help="suite name or 'all'; options: " + ", ".join(sorted(verify_mod.SUITES)))
    vf.add_argument("--seed", type=int, default=0)
    vf.add_argument("--out", default=None)
    return p


def _parse_params(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ValueError(f"--param needs KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def _emit(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, default=str)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def run(argv=None) -> int:
    parser = _build_parser()
    args_list = list(sys.argv[1:] if argv is None else argv)
    # --config values become flag defaults; explicit flags still win
    if "--config" in args_list:
        idx = args_list.index("--config")
        try:
            with open(args_list[idx + 1], "r", encoding="utf-8") as fh:
                defaults = json.load(fh)
        except (IndexError, OSError, json.JSONDecodeError) as exc:
            print(f"hausstraight: bad --config: {exc}", file=sys.stderr)
            return 1
        if not isinstance(defaults, dict):
            print("hausstraight: config must be a JSON object", file=sys.stderr)
            return 1
        mapped = {k.replace("-", "_"): v for k, v in defaults.items()}
        parser.set_defaults(**mapped)
        # subparsers re-apply their own defaults, so push the overrides down
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                for sub in action.choices.values():
                    sub.set_defaults(**{k: v for k, v in mapped.items()
                                        if any(k == a.dest for a in sub._actions)})
    args = parser.parse_args(args_list)

    try:
        resolve_threads(args.threads)
        return _dispatch(args)
    except (ValueError, MeasureFormatError, OSError, RuntimeError) as exc:
        print(f"hausstraight: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "fixtures":
        spec = FixtureSpec(args.kind, _parse_params(args.param), seed=args.seed)
        save_measure(generate(spec), args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "content":
        mu = load_measure(args.input)
        params = HausdorffParams(s=args.s, delta=args.delta, convention=args.convention)
        est = content(mu, None, params, mode=args.mode, rho=args.rho)
        _emit({
            "lower": est.lower,
            "upper": est.upper,
            "mode": est.mode,
            "pitch": est.pitch,
            "lower_semantics": est.lower_semantics,
            "cover": est.witness.to_json(),
        }, args.out)
        return 0

    if args.command == "straight-check":
        mu = load_measure(args.input)
        params = HausdorffParams(s=args.s, delta=args.delta)
        cert = certify(CertRequest(mu, params, r_min=args.rmin, epsilon=args.epsilon,
                                   node_budget=args.budget))
        _emit(cert.to_json(), args.out)
        if cert.status == "violated":
            return VIOLATED_EXIT
        return 0 if cert.status == "certified" else 1

    if args.command == "decompose":
        mu = load_measure(args.input)
        dec = decompose(mu, HausdorffParams(s=args.s), ExtractionSchedule(r_min=args.rmin),
                        mode=args.mode, epsilon=args.epsilon)
        _emit(dec.to_json(), args.out)
        return 0

    if args.command == "localize":
        mu = load_measure(args.input)
        stages = [float(x) for x in args.stages.split(",") if x]
        dec = decompose(mu, HausdorffParams(s=args.s), ExtractionSchedule(r_min=args.rmin),
                        mode=args.mode, epsilon=args.epsilon)
        loc = localize(mu, dec, stages)
        _emit(loc.to_json(), args.out)
        return 0

    if args.command == "pde-solve":
        mu = load_measure(args.input)
        x0, x1, y0, y1 = (float(v) for v in args.domain.split(","))
        dom = GridDomain(x0, x1, y0, y1, args.h)
        u, report = solve_with_measure(dom, mu, SchemeConfig(n_stages=args.stages))
        if args.out_csv:
            u.to_csv(args.out_csv)
            print(f"wrote {args.out_csv}")
        _emit(report.to_json(), args.out_report)
        return 0

    if args.command == "verify":
        if args.suite == "all":
            results = verify_mod.run_all(args.seed)
        else:
            results = [verify_mod.run_suite(args.suite, args.seed)]
        width = max(len(r.name) for r in results)
        for r in results:
            mark = "PASS" if r.passed else "FAIL"
            print(f"{r.name:<{width}}  {mark}  {r.seconds:8.2f}s  {r.detail}")
        if args.out:
            _emit([r.to_json() for r in results], args.out)
        return 0 if all(r.passed for r in results) else 1

    raise ValueError(f"unknown command {args.command!r}")  # pragma: no cover


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
