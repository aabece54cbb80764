"""Command-line front end.

Exit codes: 0 pass, 1 property violation, 2 usage error.  Every output
starts with a header holding the tool version, the resolved parameters and
the seed, and carries no timestamps, so a fixed command and seed give
byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
import warnings

import numpy as np

from . import __version__
from . import pgm as pgm_mod
from . import protocol, qsim, rates
from .gf2 import BitVec, CandidateSet, hamming_ball, hamming_ball_size, random_bitvec
from .rng import as_generator, split

TOOL = "qkdcircuit"
EXIT_PASS, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
# keys that steer the run but are not experiment parameters
_PLUMBING = {"command", "output", "format", "config", "handler"}


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in str(text).split(",") if t.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# subcommands; each returns (result, rows or None, exit code)


def cmd_rate(args):
    if args.sweep:
        es = _floats(args.e_values) if args.e_values else [args.e]
        qs = _floats(args.q_values) if args.q_values else [args.q]
        return {"points": len(es) * len(qs)}, rates.sweep(args.protocol, es, qs), EXIT_PASS
    inp = rates.RateInput(args.protocol, args.e, args.q, args.n, args.s, args.d)
    result = {"protocol": inp.protocol, "e": inp.e, "q": inp.q, "rate": rates.per_bit_rate(inp)}
    if inp.n is not None:
        result["raw_rate"] = rates.raw_rate(inp)
    return result, None, EXIT_PASS


def cmd_threshold(args):
    fn = rates.RATE_FUNCTIONS[args.protocol]
    res = rates.threshold(fn, "sup" if args.q is None else args.q)
    out = res.to_dict()
    out["protocol"] = args.protocol
    out["tolerance"] = rates.THRESHOLD_TOL
    return out, None, EXIT_PASS


def _random_config(args, rng, flip_rule=protocol.coset_leader_rule):
    return protocol.ProtocolConfig.random(args.n, args.s, args.m, rng, d=args.d, flip_rule=flip_rule)


def cmd_simulate(args):
    """Run the actual and virtual protocols on random sifted keys and compare final keys."""
    if args.n + args.s > qsim.MAX_QUBITS:
        raise UsageError(f"n+s must be <= {qsim.MAX_QUBITS}")
    cfg_rng, run_rng = split(args.seed, 2)
    cfg = _random_config(args, as_generator(cfg_rng))
    rng = as_generator(run_rng)
    runs, mismatches = [], 0
    for _ in range(args.trials):
        sifted = random_bitvec(args.n + args.s, rng)
        bob = random_bitvec(args.s, rng)
        actual = protocol.run_actual(cfg, sifted, bob)
        virtual = protocol.run_virtual(cfg, qsim.StateVector.basis(sifted), bob, rng)
        agree = actual.final_key == virtual.final_key and actual.syndrome_alice == virtual.syndrome_alice
        mismatches += not agree
        runs.append({"sifted": str(sifted), "actual": actual.to_dict(), "virtual": virtual.to_dict(), "agree": agree})
    result = {"config": cfg.to_dict(), "runs": runs, "mismatches": mismatches, "passed": mismatches == 0}
    return result, None, EXIT_PASS if mismatches == 0 else EXIT_VIOLATION


def cmd_verify(args):
    if args.n + args.s > 10:
        raise UsageError("exact verification needs n+s <= 10")
    rule = protocol.shifted_rule if args.mismatch_flip_rule else None
    streams = split(args.seed, args.configs)
    reports, worst = [], 0.0
    for stream in streams:
        rng = as_generator(stream)
        cfg = _random_config(args, rng)
        for _ in range(args.trials):
            state = qsim.random_state(args.n + args.s, rng)
            rep = protocol.equivalence_check(cfg, state, trials=args.syndromes, seed=rng, actual_flip_rule=rule)
            worst = max(worst, rep.max_tv)
            reports.append(rep.to_dict())
    passed = worst <= protocol.TV_TOLERANCE
    result = {
        "configs": args.configs,
        "states_per_config": args.trials,
        "max_tv": worst,
        "tolerance": protocol.TV_TOLERANCE,
        "passed": passed,
        "reports": reports,
    }
    return result, None, EXIT_PASS if passed else EXIT_VIOLATION


def _candidates(kind: str, N: int, radius: int | None) -> CandidateSet:
    if kind == "pair":
        return CandidateSet((BitVec.zeros(N), BitVec((1 << N) - 1, N)), label="pair")
    if radius is None:
        radius = 0
        while radius < N and hamming_ball_size(N, radius + 1) <= 12:
            radius += 1
    if hamming_ball_size(N, radius) > 12:
        raise UsageError("ball candidate sets are limited to 12 members")
    return hamming_ball(BitVec.zeros(N), radius, label="ball")


def pgm_point(N, q, e, m, omega, epsilon, candidates, radius, mode, samples, seed, family) -> dict:
    """One PGM experiment: hashing-averaged success of the true pattern against the bound."""
    if not 1 <= N <= pgm_mod.MAX_PGM_QUBITS:
        raise UsageError(f"N must lie in 1..{pgm_mod.MAX_PGM_QUBITS}")
    T = _candidates(candidates, N, radius)
    true_x = T.members[0]
    rho = pgm_mod.rho_hat(q, e)
    P = pgm_mod.typical_projector(rho, N, omega)
    if mode == "exhaustive":
        avg = pgm_mod.average_over_hashing(true_x, T, m, rho, P, mode="exhaustive")
    else:
        avg = pgm_mod.average_over_hashing(true_x, T, m, rho, P, "monte_carlo", seed, samples, family)
    bound = pgm_mod.bound_avefail(N, m, q, e, epsilon, omega)
    vacuous = bound <= 0
    ok = vacuous or avg.mean >= bound - 3 * avg.stderr - 1e-12
    return {
        "N": N, "q": q, "e": e, "m": m, "omega": omega, "epsilon": epsilon,
        "candidates": len(T), "mode": mode, "success": avg.mean, "stderr": avg.stderr,
        "inclusion_rate": avg.inclusion_rate, "bound": bound,
        "bound_printed_sign": pgm_mod.bound_avefail(N, m, q, e, epsilon, omega, sign="printed"),
        "vacuous": vacuous, "passed": bool(ok),
    }


def cmd_pgm_exp(args):
    if args.sweep:
        grid = list(itertools.product(
            _ints(args.N_values or str(args.N)),
            _floats(args.q_values or str(args.q)),
            _floats(args.e_values or str(args.e)),
            _ints(args.m_values or str(args.m)),
        ))
        rows = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for (N, q, e, m), stream in zip(grid, split(args.seed, len(grid))):
                rows.append(pgm_point(N, q, e, m, args.omega, args.epsilon, args.candidates,
                                      args.radius, args.mode, args.samples, stream, args.family))
        ok = all(r["passed"] for r in rows)
        return {"points": len(rows), "passed": ok}, rows, EXIT_PASS if ok else EXIT_VIOLATION
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = pgm_point(args.N, args.q, args.e, args.m, args.omega, args.epsilon, args.candidates,
                        args.radius, args.mode, args.samples, args.seed, args.family)
    return res, None, EXIT_PASS if res["passed"] else EXIT_VIOLATION


def cmd_diagnose(args):
    T = _candidates(args.candidates, args.N, args.radius)
    rho = pgm_mod.rho_hat(args.q, args.e)
    P = pgm_mod.typical_projector(rho, args.N, args.omega)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        pg = pgm_mod.build_pgm(T, rho, P)
    rep = pgm_mod.appendix_diagnostics(pg, T, args.m, epsilon=args.epsilon)
    out = rep.to_dict()
    out["pgm_rank"] = pg.rank
    out["candidates"] = len(T)
    out["typical_tail_mass"] = P.tail_mass()
    out["typical_tail_bound"] = P.tail_bound()
    return out, None, EXIT_PASS if rep.passed else EXIT_VIOLATION


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for the counter-based generator")
    p.add_argument("--output", help="write to this path instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="default json; csv for sweeps")
    p.add_argument("--config", help="JSON file whose keys mirror the flags")


def _protocol_args(p: argparse.ArgumentParser, n=3, s=1, m=1, trials=1) -> None:
    p.add_argument("--n", type=int, default=n)
    p.add_argument("--s", type=int, default=s)
    p.add_argument("--m", type=int, default=m)
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--trials", type=int, default=trials)


def _pgm_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, default=6, help="number of shields")
    p.add_argument("--q", type=float, default=0.25)
    p.add_argument("--e", type=float, default=0.1)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--omega", type=float, default=0.25)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--candidates", choices=("ball", "pair"), default="ball")
    p.add_argument("--radius", type=int, default=None, help="ball radius (default: largest with <= 12 members)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog=TOOL, description="Virtual-protocol circuits and noisy-processing rates.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("rate", help="key rate per code bit")
    p.add_argument("--protocol", default="bb84",
                   choices=("case_i", "case_ii", "bb84", "sixstate", "bb84_noisy", "sixstate_noisy"))
    p.add_argument("--e", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--sweep", action="store_true", help="emit one row per (e, q) point")
    p.add_argument("--e-values", default=None, help="comma-separated e grid for --sweep")
    p.add_argument("--q-values", default=None, help="comma-separated q grid for --sweep")
    p.set_defaults(handler=cmd_rate)
    subs["rate"] = p

    p = sub.add_parser("threshold", help="largest tolerable bit error rate")
    p.add_argument("protocol", choices=("bb84", "sixstate"))
    p.add_argument("--q", type=float, default=None, help="fixed q (default: sup over q -> 1/2)")
    p.set_defaults(handler=cmd_threshold)
    subs["threshold"] = p

    p = sub.add_parser("simulate", help="actual vs virtual runs on random sifted keys")
    _protocol_args(p, trials=4)
    p.set_defaults(handler=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("verify", help="exact equivalence of virtual and actual output laws")
    _protocol_args(p, trials=5)
    p.add_argument("--configs", type=int, default=1, help="random configurations to test")
    p.add_argument("--syndromes", type=int, default=2, help="Bob syndromes per input state")
    p.add_argument("--mismatch-flip-rule", action="store_true", help="negative control: corrupt the actual flips")
    p.set_defaults(handler=cmd_verify)
    subs["verify"] = p

    p = sub.add_parser("pgm-exp", help="hashing-averaged PGM success against the analytic bound")
    _pgm_args(p)
    p.add_argument("--mode", choices=("exhaustive", "monte_carlo"), default="exhaustive")
    p.add_argument("--family", choices=("uniform", "rank", "toeplitz"), default="toeplitz")
    p.add_argument("--samples", type=int, default=4000)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--N-values", default=None)
    p.add_argument("--q-values", default=None)
    p.add_argument("--e-values", default=None)
    p.add_argument("--m-values", default=None)
    p.set_defaults(handler=cmd_pgm_exp)
    subs["pgm-exp"] = p

    p = sub.add_parser("diagnose", help="operator checks behind the success bound")
    _pgm_args(p)
    p.set_defaults(handler=cmd_diagnose)
    subs["diagnose"] = p

    for p in subs.values():
        _common(p)
    return parser, subs


def _apply_config(argv, parser, subs):
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sp = subs[args.command]
    known = {a.dest for a in sp._actions} - {"help", "config", "handler"}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    # config fills defaults; explicit flags still win
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


def _emit(header: dict, result, rows, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in header.items():
            buf.write(f"# {k}: {json.dumps(_jsonable(v), sort_keys=True)}\n")
        table = rows if rows is not None else [result]
        flat = [{k: v for k, v in r.items() if not isinstance(v, (dict, list))} for r in table]
        writer = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
        writer.writeheader()
        for r in flat:
            writer.writerow(_jsonable(r))
        return buf.getvalue()
    payload = {"header": header, "result": result}
    if rows is not None:
        payload["rows"] = rows
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def run(argv=None) -> tuple[int, str, str | None]:
    """Parse, execute and render; returns (exit code, text, output path)."""
    parser, subs = build_parser()
    try:
        args = _apply_config(argv, parser, subs)
        params = {k: v for k, v in vars(args).items() if k not in _PLUMBING}
        result, rows, code = args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0), "", None
    except (UsageError, ValueError, KeyError) as exc:
        return EXIT_USAGE, f"error: {exc}\n", None
    fmt = args.format or ("csv" if rows is not None else "json")
    header = {"tool": TOOL, "version": __version__, "command": args.command, "params": params, "seed": args.seed}
    return code, _emit(header, result, rows, fmt), args.output


def main(argv=None) -> int:
    code, text, path = run(argv)
    if code == EXIT_USAGE:
        sys.stderr.write(text)
    elif path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
