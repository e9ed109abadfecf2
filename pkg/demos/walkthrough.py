"""Guided tour of the library on three two-type markets.

Run from the repository root:

    python3 demos/walkthrough.py

Figures and JSON documents land in demos/out/.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from infotrade.environment import Environment, read_environment, surplus
from infotrade.equilibrium import payoffs, verify_price_independent, verify_sequential, verify_wpbe
from infotrade.figures import regions_svg
from infotrade.geometry import (
    PayoffPoint,
    region_all,
    region_fb,
    region_negative,
    region_us,
    s_lambda,
    seller_floor_fb,
    seller_floor_us,
    seller_guarantee,
)
from infotrade.icd import affine_p_star, icd_decompose
from infotrade.structures import (
    buyer_revelation,
    construct_any,
    construct_discrete,
    construct_negative,
    construct_us_unique,
    garble_to_target,
)

HERE = Path(__file__).resolve().parent
DATA, OUT = HERE / "data", HERE / "out"


def heading(text: str) -> None:
    print(f"\n== {text} ==")


def floors(env: Environment) -> None:
    us = seller_floor_us(env)
    print(f"surplus {surplus(env):.4f}")
    print(f"seller guarantee {seller_guarantee(env):.4f}")
    print(f"uninformed-seller floor {us.value:.4f} ({'exact' if us.exact else 'search bound'})")
    print(f"fully-informed floor {seller_floor_fb(env)[0]:.4f}")


def report(env: Environment, structure, profile) -> None:
    got = payoffs(env, structure, profile)
    rep = verify_wpbe(env, structure, profile)
    print(f"payoffs ({got.pi_b:.4f}, {got.pi_s:.4f}); equilibrium check {'ok' if rep.ok else 'FAILED'}")


def main() -> None:
    OUT.mkdir(exist_ok=True)
    e1 = read_environment(str(DATA / "e1.json"))
    e2 = read_environment(str(DATA / "e2.json"))
    e3 = read_environment(str(DATA / "e3.json"))

    heading("E1: private values, zero cost")
    floors(e1)
    target = PayoffPoint(0.25, 1.25)
    st, prof = construct_any(e1, target)
    print(f"any target {tuple(target)}:")
    report(e1, st, prof)
    shipped = json.loads((DATA / "e1_any" / "profile.json").read_text())
    print(f"shipped example profile has {len(shipped['grid'])} prices")

    out = garble_to_target(e1, buyer_revelation(e1), (0.3, 1.2))
    d = out.diagnostics
    print(f"garble to (0.3, 1.2): price {d.p_star:.4f}, pool fraction {d.pool_fraction:.4f}")
    report(e1, out.structure, out.profile)
    print(f"price independent: {verify_price_independent(out.structure, out.profile).ok}")

    grid = np.round(np.arange(0.0, 3.0001, 0.01), 10)
    built = construct_discrete(e1, target, 0.05, grid)
    seq = verify_sequential(e1, built.structure, built.profile, built.trembles)
    print("finite-grid construction, tremble distances:", [f"{dist:.1e}" for _, dist in seq.consistency_trace])
    report(e1, built.structure, built.profile)

    heading("E2: interdependent costs")
    floors(e2)
    dec = icd_decompose(e2)
    for part in dec:
        print(f"component weight {part.weight:.4f}, belief {np.round(part.belief.weights, 4).tolist()}")
    print(f"threshold price {affine_p_star(e2).p_star:.4f}")
    unique = construct_us_unique(e2, (0.1, 0.4))
    print(
        f"unique implementation of (0.1, 0.4): certified {unique.certified}, "
        f"best deviation outside the band {unique.outside_band_profit:.4f} vs floor {unique.floor:.4f}"
    )
    svg = regions_svg([region_all(e2), region_us(e2), region_fb(e2)], "E2 payoff regions")
    (OUT / "e2_regions.svg").write_text(svg)
    print(f"wrote {OUT / 'e2_regions.svg'}")

    heading("E3: trade can destroy value")
    print(f"surplus {surplus(e3):.4f}")
    for weight in (1.0, 2.0, 5.0):
        st, prof = construct_negative(e3, weight)
        got = payoffs(e3, st, prof)
        print(
            f"welfare weight {weight:g}: weighted payoff {weight * got.pi_b + got.pi_s:.4f}, "
            f"frontier {s_lambda(e3, weight):.4f}"
        )
    (OUT / "e3_envelope.svg").write_text(regions_svg([region_negative(e3)], "E3 envelope"))
    print(f"wrote {OUT / 'e3_envelope.svg'}")


if __name__ == "__main__":
    main()
