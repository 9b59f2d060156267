"""Weighted temporal-fair opportunistic scheduler.

Each slot the cell serves ``argmax_j (R_j + gamma * b_j)`` and every credit moves
by ``b_j += a_j - [j selected]``. Over time user ``j`` receives a fraction
``a_j`` of the slots while still favouring users whose channel is currently good.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from mmshare._kernels import schedule_cells
from mmshare.errors import InvalidParameterError


class Regime(enum.Enum):
    NO_SHARING = "none"
    EQUAL_SHARING = "equal"
    WEIGHTED_SHARING = "weighted"

    @classmethod
    def parse(cls, value) -> "Regime":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise InvalidParameterError(
                f"unknown regime {value!r}; expected one of none, equal, weighted"
            ) from None


@dataclass(frozen=True)
class WeightRegime:
    regime: Regime
    psi: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime.parse(self.regime))
        if self.regime is Regime.WEIGHTED_SHARING:
            if self.psi is None:
                raise InvalidParameterError("weighted sharing needs per-NSP weights psi")
            psi = tuple(float(p) for p in self.psi)
            if any(p < 0 for p in psi) or abs(sum(psi) - 1.0) > 1e-9:
                raise InvalidParameterError(f"psi must be nonnegative and sum to 1, got {psi}")
            object.__setattr__(self, "psi", psi)

    @classmethod
    def weighted(cls, psi1: float) -> "WeightRegime":
        if not 0.0 <= psi1 <= 1.0:
            raise InvalidParameterError(f"psi1 must lie in [0, 1], got {psi1}")
        return cls(Regime.WEIGHTED_SHARING, (psi1, 1.0 - psi1))

    @property
    def shares_bs(self) -> bool:
        return self.regime is not Regime.NO_SHARING

    @property
    def label(self) -> str:
        return self.regime.value


NO_SHARING = WeightRegime(Regime.NO_SHARING)
EQUAL_SHARING = WeightRegime(Regime.EQUAL_SHARING)


def compute_weights(cell_nsps, regime: WeightRegime) -> np.ndarray:
    """Per-user airtime targets for one cell, given each member's NSP id.

    Weighted sharing assigns ``psi_i / N_i`` with ``N_i`` counted inside the
    cell, then rescales so the weights sum to one when an NSP is absent.
    """
    nsps = np.asarray(cell_nsps, dtype=np.int64).reshape(-1)
    n = len(nsps)
    if n == 0:
        return np.zeros(0)
    if regime.regime is not Regime.WEIGHTED_SHARING:
        return np.full(n, 1.0 / n)
    w = np.zeros(n)
    for i, psi in zip((1, 2), regime.psi):
        mine = nsps == i
        count = np.count_nonzero(mine)
        if count:
            w[mine] = psi / count
    total = w.sum()
    if total <= 0.0:
        # every present NSP has psi = 0; fall back to uniform so airtime is not idled
        return np.full(n, 1.0 / n)
    return w / total


@dataclass
class SchedulerState:
    credits: np.ndarray
    weights: np.ndarray
    gamma: float = 0.01

    def __post_init__(self):
        self.credits = np.asarray(self.credits, dtype=float).copy()
        self.weights = np.asarray(self.weights, dtype=float).copy()
        if self.gamma < 0:
            raise InvalidParameterError(f"gamma must be >= 0, got {self.gamma}")
        if self.credits.shape != self.weights.shape:
            raise InvalidParameterError("credits and weights must have equal length")

    @classmethod
    def initial(cls, weights, gamma: float = 0.01) -> "SchedulerState":
        w = np.asarray(weights, dtype=float)
        return cls(np.zeros_like(w), w, gamma)


def select(rates, state: SchedulerState) -> tuple[int, SchedulerState]:
    """Pick the user to serve this slot and return it with the updated state."""
    r = np.asarray(rates, dtype=float).reshape(-1)
    if len(r) == 0:
        raise InvalidParameterError("cannot schedule an empty cell")
    if len(r) != len(state.credits):
        raise InvalidParameterError(
            f"rate vector has length {len(r)} but scheduler state has {len(state.credits)}"
        )
    j = int(np.argmax(r + state.gamma * state.credits))
    credits = state.credits + state.weights
    credits[j] -= 1.0
    return j, SchedulerState(credits, state.weights, state.gamma)


def temporal_shares(selection_history, num_users: int | None = None) -> np.ndarray:
    """Fraction of slots in which each user was selected."""
    h = np.asarray(selection_history, dtype=np.int64).reshape(-1)
    if len(h) == 0:
        raise InvalidParameterError("selection history is empty")
    n = int(h.max()) + 1 if num_users is None else num_users
    return np.bincount(h, minlength=n) / len(h)


@dataclass
class SlotRun:
    selections: np.ndarray
    state: SchedulerState
    served: np.ndarray = field(repr=False)

    @property
    def shares(self) -> np.ndarray:
        return temporal_shares(self.selections, len(self.state.weights))

    @property
    def throughput(self) -> float:
        return float(self.served.sum() / len(self.selections))


def run_slots(rate_trace, state: SchedulerState) -> SlotRun:
    """Run one cell over a ``(T, n)`` rate trace with the compiled loop.

    Produces the same selections as calling :func:`select` slot by slot.
    """
    rates = np.ascontiguousarray(rate_trace, dtype=float)
    if rates.ndim != 2 or rates.shape[1] != len(state.weights):
        raise InvalidParameterError("rate trace must have shape (slots, users)")
    if rates.shape[1] == 0:
        raise InvalidParameterError("cannot schedule an empty cell")
    credits = state.credits.copy()
    sel = np.empty((rates.shape[0], 1), dtype=np.int64)
    schedule_cells(rates, state.weights, float(state.gamma), np.array([0, rates.shape[1]]), credits, sel)
    sel = sel[:, 0]
    served = np.bincount(sel, weights=rates[np.arange(len(sel)), sel], minlength=rates.shape[1])
    return SlotRun(sel, SchedulerState(credits, state.weights, state.gamma), served)
