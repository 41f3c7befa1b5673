"""``kent`` command line: estimate, verify, oracle.

Exit codes: 0 success, 1 property failure, 2 config or domain error,
3 numeric-floor refusal.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import verify as V
from .config import ConfigError, RunConfig, build_system, load_config, validate
from .entropy import ESTIMATE_CSV_COLUMNS, ball_sides, estimate, shift_sep_oracle, toral_formula
from .lattice import LatticeError, all_k, k_bits
from .report import json_text, write_csv, write_json
from .systems import NumericFloorError, ResourceError, ToralSystem, ValidationError, as_matrix

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_FLOOR = 0, 1, 2, 3
REPORT_CSV_COLUMNS = ("config_hash", *ESTIMATE_CSV_COLUMNS, "qualifier")


def _csv_list(cast):
    def parse(text: str):
        try:
            return [cast(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="system/run config file")
    p.add_argument("--k", type=_csv_list(int), help="comma-separated k values")
    p.add_argument("--mode", choices=("strict", "quadrant"))
    p.add_argument("--eps", type=_csv_list(float), help="decreasing comma-separated eps schedule")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kent", description="k-type topological entropy of Z^d-actions")
    sub = ap.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="estimate h_k from greedy counts")
    _add_run_flags(pe)
    pe.add_argument("--scheme", help="sampling scheme override")
    pe.add_argument("--quantity", choices=("sep-lower", "span-upper"))

    pv = sub.add_parser("verify", help="run a property suite")
    pv.add_argument("which", choices=sorted(V.SUITES))
    _add_run_flags(pv)
    pv.add_argument("--count", type=int, help="number of random systems")
    pv.add_argument("--json", action="store_true", help="print the full JSON report")

    po = sub.add_parser("oracle", help="closed-form and combinatorial values")
    osub = po.add_subparsers(dest="which", required=True)
    t = osub.add_parser("toral-formula")
    t.add_argument("--A", required=True, help="row-major entries, e.g. 2,1,1,1")
    t.add_argument("--B", help="second generator (optional)")
    s = osub.add_parser("shift-sep")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--j", type=int, required=True)
    s.add_argument("--log", action="store_true", help="print the natural log of the count")
    b = osub.add_parser("ball-sides")
    b.add_argument("--k", type=int, required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--lA", type=float, required=True)
    b.add_argument("--lB", type=float, required=True)
    return ap


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(system={"type": "toral",
                                                                          "matrices": "2,1,1,1; 5,3,3,2"})
    for attr in ("k", "mode", "eps", "n_min", "n_max", "samples", "seed", "out"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, attr, v)
    for attr in ("scheme", "quantity"):
        v = getattr(args, attr, None)
        if v is not None:
            setattr(cfg, attr, v)
    return cfg


def cmd_estimate(args) -> int:
    cfg = _run_config(args)
    S = build_system(cfg)
    validate(cfg, S)
    ks = cfg.k or [kx.k for kx in all_k(S.d)]
    digest = cfg.digest()
    sample = cfg.sample_config(S)
    results, rows = [], []
    for k in ks:
        est = estimate(S, k_bits(k, S.d), cfg.mode, cfg.eps, (cfg.n_min, cfg.n_max), sample, cfg.quantity)
        results.append(est.to_dict())
        rows += [{"config_hash": digest, **r, "qualifier": est.qualifier} for r in est.csv_rows()]
        print(f"k={k} mode={est.mode.value} {est.quantity} rate={est.extrapolated:.6f} "
              f"({est.qualifier}, eps={est.per_eps[-1].eps:g}, monotone={'yes' if est.monotone else 'no'})")
    out = Path(cfg.out or "kent-out")
    write_json(out / "estimate.json", {"config_hash": digest, "config": cfg.canonical(), "system": S.descriptor,
                                       "estimates": results})
    write_csv(out / "estimate.csv", REPORT_CSV_COLUMNS, rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    which = args.which
    kw: dict = {}
    if args.count is not None:
        if which not in ("chain", "product", "union", "factor", "conjugacy"):
            raise ConfigError("--count", f"not used by the {which} suite")
        kw["count"] = args.count
    if args.seed is not None and which not in ("torus-balls", "iterate", "d1-symmetry"):
        kw["seed"] = args.seed
    if which in V.TORAL_SUITES and args.config:
        cfg = _run_config(args)
        S = build_system(cfg)
        if not isinstance(S, ToralSystem):
            raise ConfigError("system.type", f"the {which} suite needs a toral system")
        kw["S"] = S
    if which in ("conjugacy", "iterate", "d1-symmetry"):
        if args.eps:
            kw["eps_schedule"] = args.eps
        if args.k:
            if which == "d1-symmetry":
                raise ConfigError("--k", "d1-symmetry always compares k=1 and k=2")
            kw["ks"] = args.k
        if args.n_min is not None or args.n_max is not None:
            kw["n_range"] = (args.n_min or 3, args.n_max or 7)
    rep = V.SUITES[which](**kw)
    d = rep.to_dict()
    if args.out:
        write_json(Path(args.out) / f"verify-{which}.json", d)
    if args.json:
        sys.stdout.write(json_text(d))
    print(f"verify {which}: {'PASS' if rep.passed else 'FAIL'} ({rep.cases} cases, {len(rep.failures)} failed)")
    if not rep.passed:
        print("witness: " + json_text(rep.failures[0]).strip(), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _matrix_arg(name: str, text: str):
    try:
        return as_matrix([int(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(name, f"expected 4 comma-separated integers, got {text!r}") from None


def cmd_oracle(args) -> int:
    if args.which == "toral-formula":
        A = _matrix_arg("--A", args.A)
        B = _matrix_arg("--B", args.B) if args.B else None
        print(f"{toral_formula(A, B):.6f}")
    elif args.which == "shift-sep":
        v = shift_sep_oracle(args.q, args.n, args.j, as_log=args.log)
        print(f"{v:.12g}" if args.log else v)
    else:
        s1, s2 = ball_sides(args.n, k_bits(args.k, 2), args.eps, args.lA, args.lB)
        print(f"{s1:.6f}, {s2:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"estimate": cmd_estimate, "verify": cmd_verify, "oracle": cmd_oracle}[args.command]
    try:
        return handler(args)
    except NumericFloorError as exc:
        print(f"error: numeric floor: {exc}", file=sys.stderr)
        return EXIT_FLOOR
    except (ConfigError, ValidationError, LatticeError, ResourceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
