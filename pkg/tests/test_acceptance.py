"""Acceptance criteria 1 to 10.

Each test records a one-line verdict that ``conftest.py`` prints in the terminal
summary, and also prints it directly (visible with ``pytest -s``). Criteria 4
and 5 share one 50-drop campaign, which takes several minutes on one core.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import optimize, stats

from conftest import ACCEPTANCE, cpu_workers, fading_rates
from mmshare import cli, duopoly, simengine
from mmshare.duopoly import MarketParams
from mmshare.errors import DegenerateMarketError
from mmshare.scheduler import EQUAL_SHARING, SchedulerState, run_slots


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# --- 1-3: scheduler ---------------------------------------------------------------

WEIGHT_VECTORS = {
    "uniform-4": np.full(4, 0.25),
    "(0.7,0.3)": np.array([0.7, 0.3]),
    "3x0.2+2x0.2": np.array([0.6 / 3] * 3 + [0.4 / 2] * 2),
}


def test_criterion_1_temporal_shares_converge():
    worst = 0.0
    for name, w in WEIGHT_VECTORS.items():
        for seed in range(10):
            rates = fading_rates(np.random.default_rng([1, seed]), 100_000, len(w))
            run = run_slots(rates, SchedulerState.initial(w, gamma=0.01))
            worst = max(worst, float(np.abs(run.shares - w).max()))
    record(1, worst < 0.01, f"max |share - a_j| = {worst:.5f} over 3 weight vectors x 10 seeds (tol 0.01)")


def test_criterion_2_scheduler_limits():
    rng = np.random.default_rng(2)
    rates = fading_rates(rng, 20_000, 5)
    w = rng.dirichlet(np.ones(5))
    greedy = run_slots(rates, SchedulerState.initial(w, gamma=0.0))
    argmax_exact = bool(np.array_equal(greedy.selections, rates.argmax(axis=1)))

    T, n = 10_000, 4
    rr = run_slots(fading_rates(rng, T, n), SchedulerState.initial(np.full(n, 1 / n), gamma=1e9))
    rr_dev = float(np.abs(rr.shares - 1 / n).max())
    ok = argmax_exact and rr_dev <= 1 / T
    record(2, ok, f"gamma=0 equals per-slot argmax: {argmax_exact}; gamma=1e9 max share error {rr_dev:.2e} (tol 1/T={1 / T:.0e})")


def test_criterion_3_credit_conservation():
    worst = 0.0
    for name, w in WEIGHT_VECTORS.items():
        rates = fading_rates(np.random.default_rng(3), 1_000_000, len(w))
        run = run_slots(rates, SchedulerState.initial(w, gamma=0.01))
        worst = max(worst, abs(float(run.state.credits.sum())))
    record(3, worst < 1e-6, f"max |sum b_j| after 1e6 slots = {worst:.2e} (tol 1e-6)")


# --- 4-5: simulator campaign ------------------------------------------------------


@pytest.fixture(scope="module")
def campaign():
    cfg = simengine.SimConfig(num_drops=50, slots_per_drop=10_000, workers=cpu_workers())
    return cfg, simengine.sweep_psi(cfg)


@pytest.mark.slow
def test_criterion_4_sharing_gain_ordering(campaign):
    cfg, sweep = campaign
    ns, es = sweep.no_sharing, sweep.equal_sharing

    p_gain = [
        stats.ttest_rel(es.samples[:, k], ns.samples[:, k], alternative="greater").pvalue for k in range(2)
    ]
    a_ok = all(p < 0.01 for p in p_gain)

    lo = ns.total_cell_tput - ns.ci_total
    hi = es.total_cell_tput + es.ci_total
    misses = [
        m.psi1
        for m in sweep.weighted
        if not (m.total_cell_tput + m.ci_total >= lo and m.total_cell_tput - m.ci_total <= hi)
    ]
    b_ok = not misses

    sym = simengine.run_campaign(cfg.with_(n1=0.5), EQUAL_SHARING)
    p_sym = stats.ttest_rel(sym.samples[:, 0], sym.samples[:, 1]).pvalue
    c_ok = p_sym >= 0.01

    record(
        4,
        a_ok and b_ok and c_ok,
        f"(a) ES>NS paired p = {p_gain[0]:.1e}, {p_gain[1]:.1e}; "
        f"(b) weighted totals outside [NS, ES] band at psi1 = {misses or 'none'}; "
        f"(c) n1=0.5 ES NSP1 vs NSP2 p = {p_sym:.3f}",
    )


@pytest.mark.slow
def test_criterion_5_linear_in_psi(campaign):
    _, sweep = campaign
    psi = sweep.psi_values
    u1 = np.array([m.user_tput[0] for m in sweep.weighted])
    fit = stats.linregress(psi, u1)
    r2 = fit.rvalue**2
    record(5, r2 >= 0.95 and fit.slope > 0, f"R^2 = {r2:.4f}, slope = {fit.slope:.3e} bit/s per unit psi1 (need R^2 >= 0.95)")


# --- 6-9: pricing game ------------------------------------------------------------


def _random_market(rng: np.random.Generator, regime: str) -> MarketParams:
    n1 = rng.uniform(0.1, 0.9)
    n2 = rng.uniform(0.05, min(n1, 1.0 - n1))
    return MarketParams(
        n1=n1, n2=n2, c1=rng.uniform(0, 0.1), c2=rng.uniform(0, 0.1), psi1=rng.uniform(0.55, 0.95)
    )


def _check_draw(params: MarketParams, regime: str, res: float) -> tuple[float, float, float]:
    """(price gap in grid steps, follower gain, leader gain) at the closed-form point."""
    closed = duopoly.solve(params, regime)
    g = duopoly.numeric_equilibrium(params, regime, res)
    gap = max(abs(closed.p1 - g.p1), abs(closed.p2 - g.p2)) / res
    follower = max(duopoly.profits(params, closed.p1, p2, regime)[1] for p2 in g.grid)
    leader = float(g.leader_profit.max())
    return gap, follower - closed.profit2, leader - closed.profit1


def test_criterion_6_closed_forms_match_grid_oracle():
    res = 1e-4
    rng = np.random.default_rng(6)
    lines, ok = [], True
    for regime in ("none", "weighted", "equal"):
        worst_gap = worst_f = worst_l = -math.inf
        kept = rejected = 0
        while kept < 100:
            params = _random_market(rng, regime)
            if duopoly.solve(params, regime).corner:
                rejected += 1
                continue
            kept += 1
            gap, df, dl = _check_draw(params, regime, res)
            worst_gap, worst_f, worst_l = max(worst_gap, gap), max(worst_f, df), max(worst_l, dl)
        # leader replies are refined to 1e-8, so leader profits carry ~1e-8 error;
        # the equal-sharing closed form undercuts by epsilon, worth at most epsilon
        tol_l = 1e-7 + (params.epsilon * params.consumer_mass if regime == "equal" else 0.0)
        good = worst_gap <= 2 and worst_f <= 1e-12 and worst_l <= tol_l
        ok &= good
        lines.append(
            f"{regime}: gap {worst_gap:.2f} steps, follower gain {worst_f:.1e}, leader gain {worst_l:.1e} "
            f"({rejected} corner draws redrawn)"
        )
    record(6, ok, "; ".join(lines))


def test_criterion_7_zero_cost_exact_values():
    ns = duopoly.solve(MarketParams(n1=0.6, n2=0.4), "none")
    ns_err = max(abs(ns.profit1 - 0.075) / 0.075, abs(ns.profit2 - 0.01875) / 0.01875)

    ws = duopoly.solve(MarketParams(n1=0.6, n2=0.4, psi1=0.63), "weighted")
    ref = duopoly.zero_cost_profits(0.6, 0.4, 0.63, regime="weighted")
    ws_err = max(abs(ws.profit1 - ref[0]) / ref[0], abs(ws.profit2 - ref[1]) / ref[1])
    near = abs(ws.profit1 - 0.09202) < 5e-6 and abs(ws.profit2 - 0.01913) < 5e-6
    beats = ws.profit1 > ns.profit1 and ws.profit2 > ns.profit2

    ok = ns_err <= 1e-12 and ws_err <= 1e-6 and near and beats
    record(
        7,
        ok,
        f"NS ({ns.profit1:.6g}, {ns.profit2:.6g}) rel err {ns_err:.1e}; "
        f"WS ({ws.profit1:.6g}, {ws.profit2:.6g}) vs formula rel err {ws_err:.1e}; WS > NS for both: {beats}",
    )


def _ns_profits(n1: float, n2: float) -> tuple[float, float]:
    try:
        o = duopoly.solve(MarketParams(n1=n1, n2=n2), "none")
        return o.profit1, o.profit2
    except DegenerateMarketError:
        # identical products: price competition drives both profits to zero
        return 0.0, 0.0


def _ws_profits(n1: float, n2: float, psi1: float) -> tuple[float, float]:
    if abs(psi1 - 0.5) < 1e-15:
        o = duopoly.solve(MarketParams(n1=n1, n2=n2, psi1=psi1), "equal")
    else:
        o = duopoly.solve(MarketParams(n1=n1, n2=n2, psi1=psi1), "weighted")
    return o.profit1, o.profit2


def test_criterion_8_psi_interval():
    details, ok = [], True
    expected = {(0.5, 0.5): (0.5, 1.0), (0.6, 0.4): (0.6, 0.6576)}
    for (n1, n2), (lo_exp, hi_exp) in expected.items():
        b = duopoly.psi_bounds(n1, n2)
        base = _ns_profits(n1, n2)
        if hi_exp == 1.0:
            hi_ok = b.psi_max == 1.0
        else:
            # quoted to four decimals; the exact root is recomputed by bisection
            root = optimize.brentq(lambda x: _ws_profits(n1, n2, x)[1] - base[1], 0.62, 0.7, xtol=1e-14)
            hi_ok = abs(b.psi_max - root) <= 1e-10 and abs(b.psi_max - hi_exp) <= 1e-4
        bounds_ok = abs(b.psi_min - lo_exp) <= 1e-12 and hi_ok
        wrong = []
        for psi in np.round(np.arange(0.5, 1.0 + 1e-12, 1e-3), 12):
            if min(abs(psi - b.psi_min), abs(psi - b.psi_max)) < 1e-9:
                continue  # boundary points are covered by the identity check below
            p = _ws_profits(n1, n2, psi)
            improves = p[0] > base[0] and p[1] > base[1]
            inside = b.psi_min < psi < b.psi_max
            if improves != inside:
                wrong.append(float(psi))
        ok &= bounds_ok and not wrong
        details.append(
            f"({n1}, {n2}) -> ({b.psi_min:.6g}, {b.psi_max:.8g}), grid disagreements {wrong or 'none'}"
        )

    worst = 0.0
    rng = np.random.default_rng(8)
    pairs = [(0.6, 0.4)] + [(a, rng.uniform(0.05, min(a, 1 - a)) * 0.999) for a in rng.uniform(0.2, 0.9, 20)]
    for n1, n2 in pairs:
        ns = _ns_profits(n1, n2)[0]
        ws = _ws_profits(n1, n2, n1 / (n1 + n2))[0]
        worst = max(worst, abs(ws - ns) / abs(ns))
    ok &= worst <= 1e-12
    details.append(f"pi1 WS = pi1 NS at psi1 = n1/(n1+n2): max rel err {worst:.1e} over {len(pairs)} markets")
    record(8, ok, "; ".join(details))


def test_criterion_9_equal_sharing_bertrand():
    rng = np.random.default_rng(9)
    equal_ok = undercut_ok = True
    for _ in range(200):
        n1 = rng.uniform(0.1, 0.9)
        n2 = rng.uniform(0.05, min(n1, 1 - n1))
        c = rng.uniform(0, 0.2)
        o = duopoly.solve(MarketParams(n1=n1, n2=n2, c1=c, c2=c), "equal")
        equal_ok &= o.p1 == c and o.p2 == c and o.profit1 == 0.0 and o.profit2 == 0.0

        c1 = rng.uniform(0, 0.15)
        c2 = c1 + rng.uniform(1e-3, 0.1)
        o = duopoly.solve(MarketParams(n1=n1, n2=n2, c1=c1, c2=c2), "equal")
        undercut_ok &= o.subscribers1 > 0 and o.subscribers2 == 0.0 and o.profit1 > 0
    record(
        9,
        equal_ok and undercut_ok,
        f"c1=c2: prices (c, c) with zero profits in all draws: {equal_ok}; "
        f"c1<c2: NSP 1 serves whole served market in all draws: {undercut_ok}",
    )


# --- 10: determinism --------------------------------------------------------------


def test_criterion_10_replay_is_byte_identical(tmp_path):
    runs = {
        "simulate": ["simulate", "--drops", "2", "--slots", "200", "--seed", "7"],
        "sweep": ["sweep", "--drops", "2", "--slots", "100"],
        "game": ["game", "--regime", "weighted", "--verify"],
        "region": ["region", "--resolution", "0.05"],
    }
    mismatched = []
    for name, argv in runs.items():
        first = tmp_path / f"{name}.out"
        assert cli.main([*argv, "--out", str(first)]) == 0
        again = tmp_path / f"{name}.replay"
        assert cli.main(["replay", str(cli.manifest_path(first)), "--out", str(again)]) == 0
        if first.read_bytes() != again.read_bytes():
            mismatched.append(name)
    record(10, not mismatched, f"replayed {sorted(runs)}; mismatches: {mismatched or 'none'}")
