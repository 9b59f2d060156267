"""Monte Carlo drops of a two-NSP mmWave downlink under the three sharing regimes."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from mmshare import geometry
from mmshare._kernels import simulate_chunk
from mmshare.channel import (
    BS_PATTERN,
    UE_PATTERN,
    AntennaPattern,
    ChannelParams,
    LinkClass,
    RateConfig,
    antenna_gain,
    draw_link_classes,
    path_loss_db,
    shadowing_sigma_db,
)
from mmshare.errors import InvalidParameterError
from mmshare.scheduler import EQUAL_SHARING, NO_SHARING, Regime, WeightRegime, compute_weights

INTERFERENCE_MODES = ("full", "noise_limited")
DEFAULT_PSI_GRID = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
MIN_DISTANCE_M = 1.0
CHUNK_SLOTS = 500

# named per-drop random streams
_STREAMS = {"deployment": 0, "links": 1, "fading": 2, "interference_fading": 3}


@dataclass(frozen=True)
class SimConfig:
    rate: RateConfig = field(default_factory=RateConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    bs_pattern: AntennaPattern = BS_PATTERN
    ue_pattern: AntennaPattern = UE_PATTERN
    bs_density_per_km2: float = 100.0
    user_density_per_km2: float = 500.0
    area_width_m: float = 1000.0
    area_height_m: float = 1000.0
    n1: float = 0.6
    gamma: float = 0.01
    rate_unit_bps: float = 1e9
    regimes: tuple[str, ...] = ("none", "equal", "weighted")
    psi1: float = 0.6
    psi_grid: tuple[float, ...] = DEFAULT_PSI_GRID
    slots_per_drop: int = 10_000
    num_drops: int = 50
    base_seed: int = 0
    interference_mode: str = "full"
    workers: int = 1

    def __post_init__(self):
        if self.slots_per_drop < 1:
            raise InvalidParameterError("slots_per_drop must be >= 1")
        if self.num_drops < 1:
            raise InvalidParameterError("num_drops must be >= 1")
        if not self.psi_grid or any(not 0.0 <= p <= 1.0 for p in self.psi_grid):
            raise InvalidParameterError("psi_grid must be non-empty with values in [0, 1]")
        if not 0.0 <= self.psi1 <= 1.0:
            raise InvalidParameterError("psi1 must lie in [0, 1]")
        if not 0.0 <= self.n1 <= 1.0:
            raise InvalidParameterError("n1 must lie in [0, 1]")
        if self.bs_density_per_km2 < 0 or self.user_density_per_km2 < 0:
            raise InvalidParameterError("densities must be >= 0")
        if self.area_width_m <= 0 or self.area_height_m <= 0:
            raise InvalidParameterError("area dimensions must be > 0")
        if self.gamma < 0:
            raise InvalidParameterError("gamma must be >= 0")
        if self.rate_unit_bps <= 0:
            raise InvalidParameterError("rate_unit_bps must be > 0")
        if self.interference_mode not in INTERFERENCE_MODES:
            raise InvalidParameterError(
                f"interference_mode must be one of {INTERFERENCE_MODES}, got {self.interference_mode!r}"
            )
        for r in self.regimes:
            Regime.parse(r)
        if self.workers < 1:
            raise InvalidParameterError("workers must be >= 1")

    @property
    def area(self) -> tuple[float, float]:
        return (self.area_width_m, self.area_height_m)

    @property
    def noise_limited(self) -> bool:
        return self.interference_mode == "noise_limited"

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class DropMetrics:
    user_tput: np.ndarray  # per NSP, bit/s
    cell_tput: np.ndarray  # per NSP, bit/s
    total_cell_tput: float
    num_users: np.ndarray  # associated users per NSP
    num_cells: int
    unassociated: int
    outage_users: int

    def as_row(self) -> np.ndarray:
        return np.r_[self.user_tput, self.cell_tput, self.total_cell_tput]


def _stream(seed: np.random.SeedSequence, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (_STREAMS[name],))
    )


def drop_seed(base_seed: int, drop_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(drop_index,))


def _bearing(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = dst - src
    return np.degrees(np.arctan2(d[..., 1], d[..., 0]))


@dataclass
class _Links:
    dist: np.ndarray
    gain: np.ndarray  # large-scale power gain, 0 in outage


def _draw_links(dep: geometry.Deployment, params: ChannelParams, rng: np.random.Generator) -> _Links:
    dist = np.maximum(geometry.distances(dep), MIN_DISTANCE_M)
    cls = draw_link_classes(dist, params, rng)
    shadow = rng.standard_normal(dist.shape) * shadowing_sigma_db(cls, params)
    with np.errstate(invalid="ignore"):
        loss = path_loss_db(dist, cls, params) + shadow
    gain = np.where(cls == LinkClass.OUTAGE, 0.0, np.power(10.0, -np.nan_to_num(loss) / 10.0))
    return _Links(dist, gain)


@dataclass
class _Drop:
    """Regime-independent realization of one drop."""

    dep: geometry.Deployment
    links: _Links
    pairs: np.ndarray  # (P, 2) user/BS index of every non-outage link


def _realize(config: SimConfig, seed: np.random.SeedSequence) -> _Drop:
    dep = geometry.split_deployment(
        config.bs_density_per_km2,
        config.user_density_per_km2,
        config.n1,
        config.area,
        _stream(seed, "deployment"),
    )
    links = _draw_links(dep, config.channel, _stream(seed, "links"))
    if config.noise_limited:
        pairs = np.zeros((0, 2), dtype=np.int64)
    else:
        pairs = np.argwhere(links.gain > 0.0)
    return _Drop(dep, links, pairs)


def _unit(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = (dst - src).reshape(-1, 2)
    norm = np.hypot(d[:, 0], d[:, 1])
    norm[norm == 0.0] = 1.0
    return d / norm[:, None]


class _RegimeRun:
    """Cell layout and scheduler state of one regime within a drop."""

    def __init__(self, config: SimConfig, drop: _Drop, regime: WeightRegime):
        dep, links = drop.dep, drop.links
        U = dep.num_users
        coalition = {1, 2} if regime.shares_bs else {1}
        assoc = geometry.associate(dep, coalition, dist=links.dist)
        serving = assoc.serving_bs
        associated = serving != geometry.UNASSOCIATED
        serving_gain = np.zeros(U)
        serving_gain[associated] = links.gain[np.flatnonzero(associated), serving[associated]]
        schedulable = serving_gain > 0.0

        # members ordered by serving BS, then user index
        users = np.flatnonzero(schedulable)
        users = users[np.lexsort((users, serving[users]))]
        cell_bs, member_cell = np.unique(serving[users], return_inverse=True)
        C = len(cell_bs)
        cell_ptr = np.searchsorted(member_cell, np.arange(C + 1)).astype(np.int64)
        member_nsp = dep.ue_nsp[users]
        weights = np.empty(len(users))
        for c in range(C):
            sl = slice(cell_ptr[c], cell_ptr[c + 1])
            weights[sl] = compute_weights(member_nsp[sl], regime)

        rate = config.rate
        self.signal_mw = (
            rate.loss_factor
            * rate.tx_power_mw
            * config.bs_pattern.main_lobe
            * config.ue_pattern.main_lobe
            * serving_gain[users]
        )
        self.member_dir = _unit(dep.bs_xy[serving[users]], dep.ue_xy[users])
        bs_cell = np.full(dep.num_bs, -1, dtype=np.int64)
        bs_cell[cell_bs] = np.arange(C)
        # before the first slot each beam points at the cell's first member
        self.beam = self.member_dir[cell_ptr[:-1]].copy()

        ptr, pbs, pcol = _member_pairs(users, serving, drop.pairs)
        pu = users[np.repeat(np.arange(len(users)), np.diff(ptr))]
        self.pair_ptr, self.pair_bs, self.pair_col = ptr, pbs, pcol
        self.pair_power = rate.tx_power_mw * links.gain[pu, pbs]
        self.pair_dir = _unit(dep.bs_xy[pbs], dep.ue_xy[pu])
        ue_off = _bearing(dep.ue_xy[pu], dep.bs_xy[pbs]) - _bearing(dep.ue_xy[pu], dep.bs_xy[serving[pu]])
        self.pair_ue_gain = np.asarray(antenna_gain(config.ue_pattern, ue_off), dtype=float).reshape(-1)

        self.config = config
        self.dep = dep
        self.serving = serving
        self.associated = associated
        self.schedulable = schedulable
        self.users = users
        self.member_cell = member_cell.astype(np.int64)
        self.member_nsp = member_nsp
        self.weights = weights
        self.cell_ptr = cell_ptr
        self.bs_cell = bs_cell
        self.credits = np.zeros(len(users))
        self.served = np.zeros(len(users))
        self.cell_nsp_sum = np.zeros((C, 2))

    def advance(self, fade: np.ndarray, ifade: np.ndarray) -> None:
        cfg = self.config
        rate = cfg.rate
        simulate_chunk(
            fade,
            ifade,
            self.users,
            self.member_cell,
            self.member_nsp,
            self.member_dir,
            self.signal_mw,
            self.weights,
            self.credits,
            self.cell_ptr,
            self.bs_cell,
            self.beam,
            self.pair_ptr,
            self.pair_bs,
            self.pair_col,
            self.pair_power,
            self.pair_dir,
            self.pair_ue_gain,
            math.cos(math.radians(cfg.bs_pattern.beamwidth_deg / 2.0)),
            cfg.bs_pattern.main_lobe,
            cfg.bs_pattern.back_lobe,
            rate.noise_mw,
            (1.0 - rate.overhead) * rate.bandwidth_hz,
            cfg.rate_unit_bps,
            cfg.gamma,
            self.served,
            self.cell_nsp_sum,
        )

    def metrics(self) -> DropMetrics:
        slots = self.config.slots_per_drop
        dep = self.dep
        user_tput = np.zeros(dep.num_users)
        user_tput[self.users] = self.served / slots
        user_avg = np.zeros(2)
        n_users = np.zeros(2, dtype=int)
        for k, nsp in enumerate((1, 2)):
            mine = self.associated & (dep.ue_nsp == nsp)
            n_users[k] = np.count_nonzero(mine)
            if n_users[k]:
                user_avg[k] = user_tput[mine].mean()
        # every cell with an associated user counts, even if all its users are in outage
        n_cells = len(np.unique(self.serving[self.associated]))
        cell_avg = self.cell_nsp_sum.sum(axis=0) / slots / n_cells if n_cells else np.zeros(2)
        return DropMetrics(
            user_avg,
            cell_avg,
            float(cell_avg.sum()),
            n_users,
            n_cells,
            int(np.count_nonzero(~self.associated)),
            int(np.count_nonzero(self.associated & ~self.schedulable)),
        )


def run_drop_regimes(config: SimConfig, regimes, seed) -> list[DropMetrics]:
    """Simulate one drop under several regimes sharing every random draw."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    drop = _realize(config, seed)
    U = drop.dep.num_users
    if U == 0 or drop.dep.num_bs == 0:
        empty = DropMetrics(np.zeros(2), np.zeros(2), 0.0, np.zeros(2, dtype=int), 0, U, 0)
        return [replace(empty, user_tput=np.zeros(2), cell_tput=np.zeros(2)) for _ in regimes]
    runs = [_RegimeRun(config, drop, r) for r in regimes]
    fade_rng = _stream(seed, "fading")
    ifade_rng = _stream(seed, "interference_fading")
    done = 0
    while done < config.slots_per_drop:
        T = min(CHUNK_SLOTS, config.slots_per_drop - done)
        fade = fade_rng.standard_exponential((T, U))
        ifade = ifade_rng.standard_exponential((T, len(drop.pairs)))
        for run in runs:
            run.advance(fade, ifade)
        done += T
    return [run.metrics() for run in runs]


def run_drop(config: SimConfig, regime: WeightRegime, seed) -> DropMetrics:
    """Simulate one deployment for ``config.slots_per_drop`` slots under ``regime``.

    Deployment, link classes, shadowing and fading come from named streams of
    ``seed``, so every regime sees the same random realization.
    """
    return run_drop_regimes(config, [regime], seed)[0]


def _member_pairs(users, serving, all_pairs):
    """CSR layout of interferer links per scheduled member, excluding the serving link.

    Returns ``(ptr, bs, col)`` where ``col`` indexes rows of ``all_pairs``.
    """
    empty = np.zeros(0, dtype=np.int64)
    if len(all_pairs) == 0 or len(users) == 0:
        return np.zeros(len(users) + 1, dtype=np.int64), empty, empty
    pos = np.full(len(serving), -1, dtype=np.int64)
    pos[users] = np.arange(len(users))
    member = pos[all_pairs[:, 0]]
    keep = (member >= 0) & (all_pairs[:, 1] != serving[all_pairs[:, 0]])
    cols = np.flatnonzero(keep)
    cols = cols[np.argsort(member[cols], kind="stable")]
    counts = np.bincount(member[cols], minlength=len(users))
    ptr = np.r_[0, np.cumsum(counts)].astype(np.int64)
    return ptr, all_pairs[cols, 1].astype(np.int64), cols.astype(np.int64)


@dataclass
class SimMetrics:
    """Campaign aggregate; ``samples`` holds one row per drop
    ``(user_1, user_2, cell_1, cell_2, total)``."""

    regime: str
    psi1: float | None
    user_tput: np.ndarray
    cell_tput: np.ndarray
    total_cell_tput: float
    ci_user: np.ndarray
    ci_cell: np.ndarray
    ci_total: float
    unassociated: int
    num_drops: int
    slots_per_drop: int
    samples: np.ndarray = field(repr=False)

    @property
    def ci_available(self) -> bool:
        return self.num_drops >= 2


def ci_half_width(samples: np.ndarray, level: float = 0.95) -> np.ndarray:
    """Student-t half-width of the mean along axis 0; nan with fewer than two samples."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < 2:
        return np.full(x.shape[1:], np.nan)
    t = stats.t.ppf(0.5 + level / 2.0, n - 1)
    return t * x.std(axis=0, ddof=1) / math.sqrt(n)


def aggregate(drops: list[DropMetrics], regime: WeightRegime, slots: int) -> SimMetrics:
    rows = np.array([d.as_row() for d in drops])
    mean = rows.mean(axis=0)
    ci = ci_half_width(rows)
    return SimMetrics(
        regime=regime.label,
        psi1=regime.psi[0] if regime.psi is not None else None,
        user_tput=mean[0:2],
        cell_tput=mean[2:4],
        total_cell_tput=float(mean[2:4].sum()),
        ci_user=ci[0:2],
        ci_cell=ci[2:4],
        ci_total=float(ci[4]),
        unassociated=sum(d.unassociated for d in drops),
        num_drops=len(drops),
        slots_per_drop=slots,
        samples=rows,
    )


def _run_drop_indexed(args):
    config, regimes, index = args
    return run_drop_regimes(config, regimes, drop_seed(config.base_seed, index))


def run_drops(config: SimConfig, regimes) -> list[list[DropMetrics]]:
    """Per-regime lists of drop metrics, in drop order."""
    regimes = list(regimes)
    jobs = [(config, regimes, i) for i in range(config.num_drops)]
    if config.workers > 1 and config.num_drops > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            per_drop = list(pool.map(_run_drop_indexed, jobs))
    else:
        per_drop = [_run_drop_indexed(j) for j in jobs]
    return [[d[k] for d in per_drop] for k in range(len(regimes))]


def run_campaigns(config: SimConfig, regimes) -> list[SimMetrics]:
    regimes = list(regimes)
    return [
        aggregate(drops, r, config.slots_per_drop)
        for drops, r in zip(run_drops(config, regimes), regimes)
    ]


def run_campaign(config: SimConfig, regime: WeightRegime) -> SimMetrics:
    """Average ``num_drops`` independent drops with 95% confidence half-widths.

    Drop ``i`` always uses seed ``(base_seed, i)``; results are reduced in drop order.
    """
    return run_campaigns(config, [regime])[0]


def regime_from_label(label: str, psi1: float) -> WeightRegime:
    r = Regime.parse(label)
    if r is Regime.WEIGHTED_SHARING:
        return WeightRegime.weighted(psi1)
    return NO_SHARING if r is Regime.NO_SHARING else EQUAL_SHARING


@dataclass
class PsiSweep:
    no_sharing: SimMetrics
    equal_sharing: SimMetrics
    weighted: list[SimMetrics]

    @property
    def psi_values(self) -> np.ndarray:
        return np.array([m.psi1 for m in self.weighted])

    def all_metrics(self) -> list[SimMetrics]:
        return [self.no_sharing, self.equal_sharing, *self.weighted]


def sweep_psi(config: SimConfig) -> PsiSweep:
    """Weighted-sharing campaigns over ``config.psi_grid`` plus the two flat baselines.

    All campaigns share drop seeds (common random numbers); each drop is realized
    once and replayed under every regime.
    """
    regimes = [NO_SHARING, EQUAL_SHARING, *(WeightRegime.weighted(p) for p in config.psi_grid)]
    ms = run_campaigns(config, regimes)
    return PsiSweep(ms[0], ms[1], ms[2:])
