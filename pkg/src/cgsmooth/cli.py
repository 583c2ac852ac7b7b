"""Command-line interface.

Every command prints one primary number to stdout (4 significant digits) and
uses the documented exit codes:

====  =====================================================
0     success (``verify``: the check holds; ``solve``: alpha within bound)
1     the checked property fails
2     LP failure
3     bad input
4     algorithm parameters infeasible
5     move cap reached
====  =====================================================
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any

from . import algorithm, lowerbound, oracle, random_games, smoothness, taxes
from .game import CongestionGame, CostFunction, GameError, StrategyProfile, verify_alpha_equilibrium
from .lp import LazyNonConvergence, LPError

EXIT_OK, EXIT_FAIL, EXIT_LP, EXIT_INPUT, EXIT_PARAMS, EXIT_CAP = 0, 1, 2, 3, 4, 5

_OBJECTIVES = {"potential": smoothness.POTENTIAL, "socialcost": smoothness.SOCIAL_COST,
               "social_cost": smoothness.SOCIAL_COST}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors are bad input (exit 3), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """4 significant digits, keeping trailing zeros (``1.000``, ``2.012``)."""
    if not math.isfinite(x):
        return str(x)
    return f"{x:#.4g}".rstrip(".")


def _round6(obj):
    """Summary floats rounded to 6 decimals for report files."""
    if isinstance(obj, float):
        return round(obj, 6) if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round6(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_round6(v) for v in obj]
    return obj


def _load(path: str) -> dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _dump(data: dict[str, Any], path: str | None) -> None:
    if path is None:
        return
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def _game(path: str) -> CongestionGame:
    return CongestionGame.from_json(_load(path))


def _certificate(path: str) -> smoothness.SmoothnessCertificate:
    return smoothness.SmoothnessCertificate.from_json(_load(path))


def _monomial_or_game_certificate(args, family: str) -> smoothness.SmoothnessCertificate:
    if args.game is not None:
        return smoothness.certificate_for_game(_game(args.game), family)
    if args.degree is None:
        raise InputError("give --degree or --game")
    d = args.degree
    if not 1 <= d <= smoothness.MAX_DEGREE and args.N is None:
        raise InputError(f"--degree must be in 1..{smoothness.MAX_DEGREE} without --N")
    if args.N is not None:
        f = CostFunction.monomial(d)
        if family == smoothness.POTENTIAL:
            lam, fp = smoothness.solve_lp_phi(f, args.N, monotone_top=True)
        else:
            lam, fp = smoothness.solve_lp_sc(f, args.N, monotone_top=True)
        return smoothness.SmoothnessCertificate(
            fprime=(fp,), lam=lam, objective=family,
            scope=smoothness.ObjectiveFamily(family).scope, costs=(f,), degree=d)
    return smoothness.monomial_certificate(d, family, args.K)


# ---------------------------------------------------------------------------
# commands


def cmd_lambda(args) -> int:
    cert = _monomial_or_game_certificate(args, _OBJECTIVES[args.objective])
    _dump(cert.to_json(), args.out)
    print(fmt(cert.lam))
    return EXIT_OK


def cmd_solve(args) -> int:
    game = _game(args.game)
    cert = smoothness.fit_certificate(_certificate(args.cert), game)
    try:
        result = algorithm.run(game, cert, args.epsilon, c_override=args.c_override,
                               move_cap=args.move_cap)
    except algorithm.ParameterInfeasible as exc:
        print(f"parameters infeasible: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except algorithm.MoveCapExceeded as exc:
        print(str(exc), file=sys.stderr)
        _dump(_round6(exc.partial.to_json()), args.out)
        return EXIT_CAP
    _dump(_round6(result.to_json()), args.out)
    print(fmt(result.certified_alpha))
    ok = result.certified_alpha <= cert.lam * (1 + args.epsilon) * (1 + 1e-12)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_taxes(args) -> int:
    cert = _monomial_or_game_certificate(args, smoothness.SOCIAL_COST)
    table = taxes.taxes_from_certificate(cert)
    _dump(table.to_json(), args.out)
    print(fmt(table.lam))
    return EXIT_OK


def cmd_lowerbound(args) -> int:
    f = CostFunction.monomial(args.degree)
    dual = lowerbound.solve_lpd((f, args.N))
    inst = lowerbound.construct_instance(dual, args.epsilon, max_machines=args.max_machines)
    report = lowerbound.verify_gap(inst, dual.h)
    if args.out is not None:
        _dump(inst.to_json(f), args.out)
    if args.dual_out is not None:
        _dump(_round6(dual.to_json()), args.dual_out)
    print(fmt(report.ratio))
    print(f"machines={inst.n_machines} players={inst.n_players} dual={dual.objective:.6f} "
          f"pne={report.eq_is_pne}", file=sys.stderr)
    return EXIT_OK if report.eq_is_pne else EXIT_FAIL


def _family_costs(args, game: CongestionGame):
    """Modified costs requested by ``--cert``/``--taxes`` (None for the original costs)."""
    if getattr(args, "cert", None) and getattr(args, "taxes", None):
        raise InputError("give at most one of --cert and --taxes")
    if getattr(args, "cert", None):
        return smoothness.fit_certificate(_certificate(args.cert), game).fprime
    if getattr(args, "taxes", None):
        return taxes.TaxTable.from_json(_load(args.taxes)).taxed_costs(game)
    return None


def cmd_verify(args) -> int:
    if args.game is None:
        if args.cert is None:
            raise InputError("give --game (with --profile) or --cert")
        res = smoothness.verify_certificate(_certificate(args.cert), exhaustive=args.exhaustive)
        print(fmt(res.worst_relative))
        return EXIT_OK if res.valid else EXIT_FAIL
    if args.profile is None:
        raise InputError("--game needs --profile")
    game = _game(args.game)
    profile = StrategyProfile.from_json(game, _load(args.profile))
    chk = verify_alpha_equilibrium(game, profile, args.alpha, _family_costs(args, game))
    print(fmt(chk.worst_ratio))
    return EXIT_OK if chk.holds else EXIT_FAIL


def cmd_oracle(args) -> int:
    game = _game(args.game)
    fam = _family_costs(args, game)
    eqs = oracle.enumerate_equilibria(game, args.alpha, fam)
    opt, opt_profile = oracle.optimum_social_cost(game)
    report = {
        "poa": oracle.exact_poa(game, fam),
        "stretch": oracle.exact_stretch(game, args.alpha, eq_fprime=fam),
        "equilibria": [p.to_json() for p in eqs],
        "optimum": opt,
        "optimal_profile": opt_profile.to_json(),
    }
    _dump(_round6(report), args.out)
    print(fmt(report["poa"]))
    return EXIT_OK


def cmd_random_game(args) -> int:
    if args.singleton:
        game = random_games.random_singleton_game(args.players, args.resources, args.degree, args.seed)
    else:
        game = random_games.random_game(args.players, args.resources, args.degree, args.seed,
                                        max_strategies=args.max_strategies, max_size=args.max_size)
    data = game.to_json()
    if args.out is None:
        json.dump(data, sys.stdout)
        sys.stdout.write("\n")
    else:
        _dump(data, args.out)
        print(game.n_profiles)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cgsmooth", description="Smoothness LPs, taxes and "
                                     "approximate equilibria for congestion games.")
    sub = parser.add_subparsers(dest="command", required=True)

    def source(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--degree", type=int, help="monomial cost x^d")
        g.add_argument("--game", help="game JSON file (certificate for its resources)")
        p.add_argument("--K", type=int, help="truncation point of the tail LP")
        p.add_argument("--N", type=int, help="solve the finite LP over N players instead")
        p.add_argument("--out", help="output JSON file")

    p = sub.add_parser("lambda", help="optimal modified costs and their lambda")
    p.add_argument("--objective", choices=sorted(_OBJECTIVES), default="potential")
    source(p)
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("solve", help="run the block-phase dynamics")
    p.add_argument("--game", required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--c-override", type=float, dest="c_override")
    p.add_argument("--move-cap", type=int, dest="move_cap", default=algorithm.DEFAULT_MOVE_CAP)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("taxes", help="universal taxes from the social-cost LP")
    source(p)
    p.set_defaults(func=cmd_taxes)

    p = sub.add_parser("lowerbound", help="scheduling instance from the dual LP")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--N", type=int, default=60)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--max-machines", type=int, dest="max_machines", default=lowerbound.MAX_MACHINES)
    p.add_argument("--out", help="instance JSON")
    p.add_argument("--dual-out", dest="dual_out", help="dual solution JSON")
    p.set_defaults(func=cmd_lowerbound)

    p = sub.add_parser("verify", help="check an equilibrium or a certificate")
    p.add_argument("--game")
    p.add_argument("--profile")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--cert", help="judge moves by certificate costs, or verify it alone")
    p.add_argument("--taxes", help="judge moves by taxed costs")
    p.add_argument("--exhaustive", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="exact PoA, stretch and equilibria by enumeration")
    p.add_argument("--game", required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--cert")
    p.add_argument("--taxes")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("random-game", help="seeded random game JSON")
    p.add_argument("--players", type=int, default=4)
    p.add_argument("--resources", type=int, default=4)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--singleton", action="store_true")
    p.add_argument("--max-strategies", type=int, dest="max_strategies", default=3)
    p.add_argument("--max-size", type=int, dest="max_size", default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_random_game)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LPError, LazyNonConvergence) as exc:
        print(f"LP failure: {exc}", file=sys.stderr)
        return EXIT_LP
    except (InputError, GameError, smoothness.SmoothnessError, taxes.TaxError,
            lowerbound.LowerBoundError, oracle.TooLarge, KeyError, TypeError, ValueError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
