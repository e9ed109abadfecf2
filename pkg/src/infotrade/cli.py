"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 verification failure, 4 infeasible
target.  Every command prints a JSON summary on standard output; failures
also print a one-line diagnostic on standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections.abc import Sequence
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .environment import Belief, Environment, dump_environment, load_environment, read_environment, surplus
from .equilibrium import (
    SearchConfig,
    VerificationReport,
    payoffs,
    verify_sequential,
    verify_wpbe,
    with_price_independence,
)
from .errors import DocumentError, InfeasibleTarget, InvalidEnvironment, NonAffineCosts
from .figures import regions_svg
from .game import (
    InformationStructure,
    StrategyProfile,
    TrembleSchedule,
    profile_from_dict,
    structure_from_dict,
    trembles_from_dict,
)
from .geometry import (
    DEFAULT_WELFARE_WEIGHTS,
    PayoffRegion,
    pi_hat_s,
    region_all,
    region_fb,
    region_negative,
    region_us,
    s_lambda,
    seller_floor_fb,
    seller_floor_us,
    seller_guarantee,
)
from .icd import affine_p_star, binary_p, icd_decompose, is_icd, seller_opt_prices
from .structures import (
    buyer_revelation,
    construct_any,
    construct_discrete,
    construct_fb,
    construct_negative,
    construct_us_unique,
    garble_to_target,
)

OK, INPUT_ERROR, VERIFY_FAILED, INFEASIBLE = 0, 2, 3, 4


class UsageError(ValueError):
    """Command-line arguments that parse but make no sense."""


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(summary: dict[str, Any]) -> None:
    print(json.dumps(_jsonable(summary), indent=2))


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if count is not None and len(out) != count:
        raise UsageError(f"expected {count} numbers, got {text!r}")
    return out


def _read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: not valid JSON ({exc})") from exc


def _write(path: Path, text: str) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


# ---------------------------------------------------------------------------
# regions


def _regions_csv(regions: Sequence[PayoffRegion]) -> str:
    rows = ["region,pi_b,pi_s"]
    for region in regions:
        rows += [f"{region.kind},{float(x)!r},{float(y)!r}" for x, y in region.vertices]
    return "\n".join(rows) + "\n"


def cmd_regions(args: argparse.Namespace) -> int:
    env = read_environment(args.env)
    summary: dict[str, Any] = {"environment": env.name, "surplus": surplus(env)}
    if env.gains_from_trade:
        config = SearchConfig(segments=args.segments)
        us = seller_floor_us(env, config)
        fb_value, fb_prices = seller_floor_fb(env)
        regions = [region_all(env), region_us(env, us), region_fb(env)]
        summary.update(
            {
                "floors": [seller_guarantee(env), us.value, fb_value],
                "uninformed_floor": {"value": us.value, "flag": us.flag, "p_star": us.p_star},
                "fully_informed_prices": list(fb_prices),
            }
        )
    else:
        weights = _floats(args.lambda_grid) if args.lambda_grid else list(DEFAULT_WELFARE_WEIGHTS)
        regions = [region_negative(env, weights)]
        summary.update(
            {
                "pi_hat_s": pi_hat_s(env),
                "welfare_weights": weights,
                "frontier": {str(w): s_lambda(env, w) for w in weights},
            }
        )
    summary["regions"] = [r.to_dict() for r in regions]
    artifacts = []
    if args.svg:
        artifacts.append(_write(Path(args.svg), regions_svg(regions, env.name or "")))
    if args.csv:
        artifacts.append(_write(Path(args.csv), _regions_csv(regions)))
    summary["artifacts"] = artifacts
    _emit(summary)
    return OK


# ---------------------------------------------------------------------------
# icd


def cmd_icd(args: argparse.Namespace) -> int:
    env = read_environment(args.env)
    if args.action == "check":
        weights = _floats(args.weights, env.n) if args.weights else env.probs
        belief = Belief.normalized(env, weights)
        ok, constant = is_icd(env, belief)
        prices = list(seller_opt_prices(env, belief))
        _emit({"icd": ok, "constant": constant if ok else None, "optimal_prices": prices})
    elif args.action == "decompose":
        _emit(icd_decompose(env).to_dict())
    elif args.action == "pstar":
        ps = affine_p_star(env)
        _emit({"p_star": ps.p_star, "pi_us": ps.pi_us, "clamped": ps.clamped, "witness": ps.witness.to_dict()})
    else:
        root = binary_p(env)
        _emit({"p": root.p, "pi_us": root.pi_us, "method": root.method})
    return OK


# ---------------------------------------------------------------------------
# construct


def _report_status(report: VerificationReport) -> int:
    return OK if report.ok else VERIFY_FAILED


def cmd_construct(args: argparse.Namespace) -> int:
    env = read_environment(args.env)
    kind = args.kind
    target = tuple(_floats(args.target, 2)) if args.target else None
    if kind in ("any", "discrete", "garble", "us-unique") and target is None:
        raise UsageError(f"construct {kind} needs --target PI_B,PI_S")
    trembles: TrembleSchedule | None = None
    extra: dict[str, Any] = {}
    price_independent = False

    if kind == "any":
        structure, profile = construct_any(env, target)  # type: ignore[arg-type]
    elif kind == "fb":
        structure, profile = construct_fb(env, args.beta)
        price_independent = True
    elif kind == "negative":
        structure, profile = construct_negative(env, args.welfare_weight, args.tie_weight)
        extra["weighted_target"] = s_lambda(env, args.welfare_weight)
    elif kind == "garble":
        base = (
            structure_from_dict(_read_json(args.base), env) if args.base else buyer_revelation(env)
        )
        structure, profile, diag = garble_to_target(env, base, target)  # type: ignore[arg-type]
        extra["diagnostics"] = asdict(diag)
        price_independent = True
    elif kind == "us-unique":
        found = construct_us_unique(env, target, config=SearchConfig(segments=args.segments))  # type: ignore[arg-type]
        structure, profile = found.structure, found.profile
        extra["diagnostics"] = asdict(found.diagnostics)
        extra["uniqueness"] = {
            "floor": found.floor,
            "exact_floor": found.exact_floor,
            "max_other_profit": found.max_other_profit,
            "outside_band_profit": found.outside_band_profit,
            "certified": found.certified,
        }
        price_independent = True
    else:
        lo, hi = env.v_low, env.v_high
        steps = max(int(round((hi - lo) / args.grid_step)), 1)
        grid = np.linspace(lo, hi, steps + 1)
        built = construct_discrete(env, target, args.epsilon, grid)  # type: ignore[arg-type]
        structure, profile, trembles = built.structure, built.profile, built.trembles
        extra.update({"case": built.case, "reveal_mass": built.reveal_mass, "mix_floor": built.mix_floor})

    out = Path(args.out)
    artifacts = [
        _write(out / "structure.json", json.dumps(_jsonable(structure.to_dict()), indent=2)),
        _write(out / "profile.json", json.dumps(_jsonable(profile.to_dict()))),
    ]
    if trembles is not None:
        artifacts.append(_write(out / "trembles.json", json.dumps(trembles.to_dict())))
    summary: dict[str, Any] = {
        "kind": kind,
        "target": target,
        "payoffs": payoffs(env, structure, profile)._asdict(),
        "artifacts": artifacts,
        **extra,
    }
    status = OK
    if args.verify:
        report = _verify(env, structure, profile, trembles, price_independent)
        summary["verification"] = report.to_dict()
        status = _report_status(report)
        if kind == "us-unique" and not extra["uniqueness"]["certified"]:
            status = VERIFY_FAILED
    _emit(summary)
    if status != OK:
        print("verification failed", file=sys.stderr)
    return status


def _verify(
    env: Environment,
    structure: InformationStructure,
    profile: StrategyProfile,
    trembles: TrembleSchedule | None,
    price_independent: bool,
    tol: float = 1e-9,
) -> VerificationReport:
    if trembles is not None:
        report = verify_sequential(env, structure, profile, trembles, tol=tol)
    else:
        report = verify_wpbe(env, structure, profile, tol)
    if price_independent:
        report = with_price_independence(report, structure, profile)
    return report


# ---------------------------------------------------------------------------
# verify and reduce


def cmd_verify(args: argparse.Namespace) -> int:
    env = read_environment(args.env)
    structure = structure_from_dict(_read_json(args.structure), env)
    profile = profile_from_dict(_read_json(args.profile))
    profile.check_against(structure)
    trembles = trembles_from_dict(_read_json(args.sequential)) if args.sequential else None
    report = _verify(env, structure, profile, trembles, args.price_independent, args.tol)
    _emit({"payoffs": payoffs(env, structure, profile)._asdict(), "verification": report.to_dict()})
    if not report.ok:
        print("verification failed", file=sys.stderr)
    return _report_status(report)


def cmd_reduce(args: argparse.Namespace) -> int:
    doc = _read_json(args.rows)
    if isinstance(doc, list):
        doc = {"joint": doc}
    env = load_environment(doc)
    text = dump_environment(env)
    if args.out:
        _write(Path(args.out), text + "\n")
    print(text)
    return OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infotrade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("regions", help="payoff regions and seller floors")
    p.add_argument("env")
    p.add_argument("--svg")
    p.add_argument("--csv")
    p.add_argument("--lambda-grid", help="welfare weights for the negative-surplus envelope")
    p.add_argument("--segments", type=int, default=64, help="candidate means for the floor search")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("icd", help="incentive-compatible distribution tools")
    p.add_argument("action", choices=("check", "decompose", "pstar", "binary"))
    p.add_argument("env")
    p.add_argument("--weights", help="belief to check (defaults to the prior)")
    p.set_defaults(func=cmd_icd)

    p = sub.add_parser("construct", help="build an information structure and equilibrium")
    p.add_argument("kind", choices=("any", "discrete", "garble", "us-unique", "fb", "negative"))
    p.add_argument("env")
    p.add_argument("--target", help="PI_B,PI_S")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--welfare-weight", type=float, default=1.0)
    p.add_argument("--tie-weight", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--segments", type=int, default=64)
    p.add_argument("--base", help="base structure document for garble (default: buyer learns the value)")
    p.add_argument("--out", default=".", help="directory for the output documents")
    p.add_argument("--verify", action="store_true")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="check a structure and profile")
    p.add_argument("env")
    p.add_argument("structure")
    p.add_argument("profile")
    p.add_argument("--sequential", metavar="TREMBLES", help="tremble document for consistency checks")
    p.add_argument("--price-independent", action="store_true")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reduce", help="collapse [v, c, prob] rows into an environment")
    p.add_argument("rows")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except InfeasibleTarget as exc:
        print(f"infeasible target: {exc}", file=sys.stderr)
        return INFEASIBLE
    except (InvalidEnvironment, DocumentError, NonAffineCosts, UsageError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
