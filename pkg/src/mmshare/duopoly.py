"""Sequential-pricing duopoly with and without base-station sharing.

NSP 1 sets its price, NSP 2 replies, then consumers with taste ``w ~ U[0, w_hat]``
subscribe to whichever option maximises ``w * quality - price`` (or to nothing).
Quality is ``mu * n_i`` without sharing, ``mu * (n1 + n2)`` with equal sharing and
``mu * psi_i * (n1 + n2)`` with weighted sharing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from mmshare.errors import DegenerateMarketError, InvalidParameterError
from mmshare.scheduler import Regime

_TOL = 1e-12


@dataclass(frozen=True)
class MarketParams:
    n1: float = 0.6
    n2: float = 0.4
    c1: float = 0.0
    c2: float = 0.0
    mu: float = 1.0
    omega_hat: float = 1.0
    psi1: float = 0.63
    consumer_mass: float = 1.0
    epsilon: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.n2 <= self.n1:
            raise InvalidParameterError(f"need 0 < n2 <= n1, got n1={self.n1}, n2={self.n2}")
        if self.n1 + self.n2 > 1.0 + _TOL:
            raise InvalidParameterError(f"need n1 + n2 <= 1, got {self.n1 + self.n2}")
        if self.mu <= 0 or self.omega_hat <= 0:
            raise InvalidParameterError("mu and omega_hat must be > 0")
        if not 0.0 <= self.psi1 <= 1.0:
            raise InvalidParameterError(f"psi1 must lie in [0, 1], got {self.psi1}")
        if self.consumer_mass <= 0:
            raise InvalidParameterError("consumer_mass must be > 0")
        if self.c1 < 0 or self.c2 < 0:
            raise InvalidParameterError("marginal costs must be >= 0")
        if self.epsilon <= 0:
            raise InvalidParameterError("epsilon must be > 0")

    @property
    def psi2(self) -> float:
        return 1.0 - self.psi1

    @property
    def total_size(self) -> float:
        return self.n1 + self.n2


def qualities(params: MarketParams, regime) -> tuple[float, float]:
    """Utility per unit of taste offered by each NSP."""
    regime = Regime.parse(regime)
    mu, s = params.mu, params.total_size
    if regime is Regime.NO_SHARING:
        return mu * params.n1, mu * params.n2
    if regime is Regime.EQUAL_SHARING:
        return mu * s, mu * s
    return mu * params.psi1 * s, mu * params.psi2 * s


def _check_ordering(params: MarketParams, regime: Regime) -> None:
    if regime is Regime.NO_SHARING and params.n1 == params.n2:
        raise DegenerateMarketError("no-sharing market with n1 == n2 has no indifferent consumer")
    if regime is Regime.WEIGHTED_SHARING:
        if params.psi1 == params.psi2:
            raise DegenerateMarketError("weighted sharing with psi1 == psi2 is pure price competition")
        if params.psi1 < params.psi2:
            raise InvalidParameterError("weighted sharing requires psi1 >= psi2 (NSP 1 is the larger NSP)")


@njit(cache=True)
def _choice(q1, q2, p1, p2, w_hat):
    """Exact consumer stage: returns ``(lower, upper)`` in ``[0, w_hat]``.

    NSP 2 serves tastes in ``[lower, upper)``, NSP 1 those in ``[upper, w_hat]``.
    Requires ``q1 >= q2 >= 0`` and ``q1 > 0``.
    """
    if q1 == q2:
        lo = min(p1, p2) / q1
        lo = min(max(lo, 0.0), w_hat)
        if p1 < p2:
            return lo, lo
        if p2 < p1:
            return lo, w_hat
        return lo, 0.5 * (lo + w_hat)
    if q2 > 0.0:
        lo2 = p2 / q2
    elif p2 <= 0.0:
        lo2 = 0.0
    else:
        lo2 = math.inf
    hi = (p1 - p2) / (q1 - q2)
    if lo2 < hi:
        lower = min(max(lo2, 0.0), w_hat)
        upper = min(max(hi, 0.0), w_hat)
        return lower, upper
    lo1 = min(max(p1 / q1, 0.0), w_hat)
    return lo1, lo1


@dataclass(frozen=True)
class MarginalConsumers:
    """``lower``: indifferent between NSP 2 and nothing; ``upper``: between NSP 1 and NSP 2.

    ``*_raw`` are the unclamped indifference points; ``lower``/``upper`` are the
    effective boundaries after clamping to ``[0, w_hat]`` and resolving the case
    where NSP 2 attracts nobody.
    """

    lower_raw: float
    upper_raw: float
    lower: float
    upper: float


def _div(a: float, b: float) -> float:
    if b == 0.0:
        return math.copysign(math.inf, a) if a != 0.0 else math.nan
    return a / b


def marginal_consumers(params: MarketParams, p1: float, p2: float, regime) -> MarginalConsumers:
    regime = Regime.parse(regime)
    _check_ordering(params, regime)
    q1, q2 = qualities(params, regime)
    if regime is Regime.EQUAL_SHARING:
        lower_raw = min(p1, p2) / q1
        if p1 < p2:
            upper_raw = lower_raw
        elif p2 < p1:
            upper_raw = params.omega_hat
        else:
            upper_raw = 0.5 * (lower_raw + params.omega_hat)
    else:
        lower_raw = _div(p2, q2)
        upper_raw = _div(p1 - p2, q1 - q2)
    lower, upper = _choice(q1, q2, float(p1), float(p2), params.omega_hat)
    return MarginalConsumers(float(lower_raw), float(upper_raw), float(lower), float(upper))


def demand(params: MarketParams, p1: float, p2: float, regime) -> tuple[float, float]:
    """Subscriber counts ``(N1, N2)``."""
    mc = marginal_consumers(params, p1, p2, regime)
    scale = params.consumer_mass / params.omega_hat
    return scale * max(params.omega_hat - mc.upper, 0.0), scale * max(mc.upper - mc.lower, 0.0)


def profits(params: MarketParams, p1: float, p2: float, regime) -> tuple[float, float]:
    n1, n2 = demand(params, p1, p2, regime)
    return (p1 - params.c1) * n1, (p2 - params.c2) * n2


def best_response_prices(params: MarketParams, regime) -> tuple[float, float]:
    """Closed-form subgame-perfect prices (NSP 1 leads, NSP 2 follows)."""
    regime = Regime.parse(regime)
    _check_ordering(params, regime)
    c1, c2 = params.c1, params.c2
    mw = params.mu * params.omega_hat
    if regime is Regime.NO_SHARING:
        n1, n2 = params.n1, params.n2
        p1 = ((2 * c1 + c2) * n1 - c1 * n2 + 2 * mw * n1 * (n1 - n2)) / (2 * (2 * n1 - n2))
        p2 = (4 * c2 * n1**2 + (2 * c1 - c2 + 2 * mw * (n1 - n2)) * n1 * n2 - c1 * n2**2) / (
            4 * n1 * (2 * n1 - n2)
        )
        return p1, p2
    if regime is Regime.WEIGHTED_SHARING:
        a, b, s = params.psi1, params.psi2, params.total_size
        p1 = (2 * mw * a * (a - b) * s + (2 * c1 + c2) * a - c1 * b) / (2 * (2 * a - b))
        p2 = (a * b * (2 * mw * s * (a - b) + 2 * c1 - c2) + 4 * c2 * a**2 - c1 * b**2) / (
            4 * a * (2 * a - b)
        )
        return p1, p2
    # equal sharing: Bertrand competition on price alone
    if c1 == c2:
        return c1, c2
    q = params.mu * params.total_size
    if c1 < c2:
        monopoly = (q * params.omega_hat + c1) / 2.0
        return min(c2 - params.epsilon, monopoly), c2
    monopoly = (q * params.omega_hat + c2) / 2.0
    return c1, min(c1 - params.epsilon, monopoly)


@dataclass(frozen=True)
class MarketOutcome:
    regime: str
    p1: float
    p2: float
    lower_raw: float
    upper_raw: float
    lower: float
    upper: float
    share1: float
    share2: float
    subscribers1: float
    subscribers2: float
    profit1: float
    profit2: float
    corner: bool

    def to_dict(self) -> dict:
        return asdict(self)


def outcome(params: MarketParams, p1: float, p2: float, regime) -> MarketOutcome:
    """Evaluate the consumer stage and profits at given prices."""
    regime = Regime.parse(regime)
    mc = marginal_consumers(params, p1, p2, regime)
    w = params.omega_hat
    share1 = max(w - mc.upper, 0.0) / w
    share2 = max(mc.upper - mc.lower, 0.0) / w
    n1, n2 = share1 * params.consumer_mass, share2 * params.consumer_mass
    if regime is Regime.EQUAL_SHARING:
        corner = False
    else:
        corner = not (
            -_TOL <= mc.lower_raw <= mc.upper_raw + _TOL and mc.upper_raw <= w * (1 + _TOL) + _TOL
        )
    return MarketOutcome(
        regime=regime.value,
        p1=float(p1),
        p2=float(p2),
        lower_raw=mc.lower_raw,
        upper_raw=mc.upper_raw,
        lower=mc.lower,
        upper=mc.upper,
        share1=share1,
        share2=share2,
        subscribers1=n1,
        subscribers2=n2,
        profit1=(p1 - params.c1) * n1,
        profit2=(p2 - params.c2) * n2,
        corner=corner,
    )


def solve(params: MarketParams, regime) -> MarketOutcome:
    """Closed-form equilibrium; ``corner`` flags prices outside the interior region
    where the closed forms were derived."""
    p1, p2 = best_response_prices(params, regime)
    return outcome(params, p1, p2, regime)


# --- brute-force oracle -----------------------------------------------------------


@njit(cache=True)
def _follower_profit(q1, q2, w_hat, scale, c2, p1, p2):
    lower, upper = _choice(q1, q2, p1, p2, w_hat)
    return (p2 - c2) * scale * max(upper - lower, 0.0)


@njit(cache=True)
def _grid_backward_induction(grid, q1, q2, w_hat, mass, c1, c2, refine, reply, leader_profit):
    n = grid.shape[0]
    scale = mass / w_hat
    for i in range(n):
        p1 = grid[i]
        best_p2 = grid[0]
        best = -math.inf
        for j in range(n):
            pi2 = _follower_profit(q1, q2, w_hat, scale, c2, p1, grid[j])
            if pi2 > best or (pi2 == best and abs(grid[j] - c2) < abs(best_p2 - c2)):
                best = pi2
                best_p2 = grid[j]
        # nested local grids around the incumbent, each 100x finer
        step = grid[1] - grid[0] if n > 1 else 0.0
        for _ in range(refine):
            fine = step / 100.0
            centre = best_p2
            for k in range(-100, 101):
                p2 = centre + k * fine
                if p2 < 0.0:
                    continue
                pi2 = _follower_profit(q1, q2, w_hat, scale, c2, p1, p2)
                if pi2 > best or (pi2 == best and abs(p2 - c2) < abs(best_p2 - c2)):
                    best = pi2
                    best_p2 = p2
            step = fine
        reply[i] = best_p2
        lower, upper = _choice(q1, q2, p1, best_p2, w_hat)
        leader_profit[i] = (p1 - c1) * scale * max(w_hat - upper, 0.0)


@dataclass
class GridEquilibrium:
    p1: float
    p2: float
    step: float
    grid: np.ndarray
    reply: np.ndarray  # NSP 2's best reply to each leader grid price
    leader_profit: np.ndarray


def default_price_max(params: MarketParams) -> float:
    hi = params.mu * params.omega_hat * max(params.n1, params.psi1 * params.total_size, params.total_size)
    return max(hi, params.c1, params.c2)


def numeric_equilibrium(
    params: MarketParams,
    regime,
    resolution: float = 1e-4,
    price_max: float | None = None,
    refine: int = 2,
) -> GridEquilibrium:
    """Exhaustive backward induction on the price grid ``{0, r, 2r, ...}``.

    For each leader grid price, NSP 2's reply is the profit-maximising grid price
    (exact ties go to the price nearest its marginal cost), then refined
    ``refine`` times on a local grid 100x finer. Without refinement the reply's
    rounding error shifts NSP 1's profit by O(r) near its flat optimum, which
    moves the leader's argmax by O(sqrt(r)).
    NSP 1 then picks the grid price maximising its profit given that reply; among
    exact ties it takes the price nearest its own marginal cost (then the lower).
    The same rule for both players means a firm that cannot earn anything prices
    at cost instead of at an arbitrary point of its flat profit region.
    """
    if resolution <= 0:
        raise InvalidParameterError("grid resolution must be > 0")
    regime = Regime.parse(regime)
    _check_ordering(params, regime)
    q1, q2 = qualities(params, regime)
    hi = default_price_max(params) if price_max is None else price_max
    n = int(math.ceil(hi / resolution - 1e-9)) + 1
    grid = np.arange(n) * resolution
    reply = np.empty(n)
    leader = np.empty(n)
    _grid_backward_induction(
        grid, q1, q2, params.omega_hat, params.consumer_mass, params.c1, params.c2, refine, reply, leader
    )
    ties = np.flatnonzero(leader == leader.max())
    i = int(ties[np.argmin(np.abs(grid[ties] - params.c1))])
    return GridEquilibrium(float(grid[i]), float(reply[i]), resolution, grid, reply, leader)


# --- zero marginal cost analysis --------------------------------------------------


def zero_cost_profits(n1: float, n2: float, psi1: float, mu_omega_hat: float = 1.0, regime="none"):
    """Equilibrium profits ``(pi1, pi2)`` when both marginal costs are zero."""
    regime = Regime.parse(regime)
    if regime is Regime.NO_SHARING:
        if n1 == n2:
            raise DegenerateMarketError("no-sharing market with n1 == n2 has no indifferent consumer")
        d = 2 * n1 - n2
        return (
            mu_omega_hat * n1 * (n1 - n2) / (2 * d),
            mu_omega_hat * n1 * n2 * (n1 - n2) / (4 * d**2),
        )
    if regime is Regime.WEIGHTED_SHARING:
        a, b, s = psi1, 1.0 - psi1, n1 + n2
        if a == b:
            raise DegenerateMarketError("weighted sharing with psi1 == psi2 is pure price competition")
        if a < b:
            raise InvalidParameterError("weighted sharing requires psi1 >= psi2")
        d = 2 * a - b
        return (
            mu_omega_hat * a * (a - b) * s / (2 * d),
            mu_omega_hat * a * b * (a - b) * s / (4 * d**2),
        )
    raise InvalidParameterError("zero_cost_profits covers the no-sharing and weighted regimes only")


@dataclass(frozen=True)
class PsiBounds:
    """Open interval of NSP-1 weights for which weighted sharing beats no sharing for both."""

    n1: float
    n2: float
    psi_min: float
    psi_max: float  # capped at 1
    psi_max_raw: float
    delta: float
    beneficial: bool


def psi_bounds(n1: float, n2: float) -> PsiBounds:
    if not 0.0 < n2 <= n1:
        raise InvalidParameterError(f"need 0 < n2 <= n1, got n1={n1}, n2={n2}")
    if n1 + n2 > 1.0 + _TOL:
        raise InvalidParameterError(f"need n1 + n2 <= 1, got {n1 + n2}")
    delta = 16 * n1**4 - 8 * n1**3 * n2 - 15 * n1**2 * n2**2 + 10 * n1 * n2**3 + n2**4
    psi_min = n1 / (n1 + n2)
    if delta < 0:
        return PsiBounds(n1, n2, psi_min, math.nan, math.nan, delta, False)
    raw = (4 * n1**2 - 5 * n1 * n2 + 3 * n2**2 + math.sqrt(delta)) / (4 * (2 * n1 - n2) ** 2)
    psi_max = min(raw, 1.0)
    return PsiBounds(n1, n2, psi_min, psi_max, raw, delta, psi_min < psi_max)


def mutual_benefit_region(resolution: float = 0.01) -> list[PsiBounds]:
    """``psi_bounds`` over the grid ``n2 <= n1``, ``n1 + n2 <= 1`` (multiples of ``resolution``)."""
    if resolution <= 0:
        raise InvalidParameterError("grid resolution must be > 0")
    k_max = int(math.floor(1.0 / resolution + 1e-9))
    rows = []
    for i in range(1, k_max + 1):
        n1 = round(i * resolution, 12)
        for j in range(1, i + 1):
            n2 = round(j * resolution, 12)
            if n1 + n2 > 1.0 + 1e-9:
                break
            rows.append(psi_bounds(n1, min(n2, 1.0 - n1) if n1 + n2 > 1.0 else n2))
    return rows
