"""Random deployments of base stations and users, and nearest-BS association."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from mmshare.errors import InvalidParameterError

NSP_IDS = (1, 2)
UNASSOCIATED = -1


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_hppp(intensity_per_km2: float, area: tuple[float, float], seed) -> np.ndarray:
    """Sample a homogeneous Poisson point process on ``[0, w] x [0, h]`` (meters).

    ``seed`` may be an integer, a ``SeedSequence`` or a ``Generator``. Returns an
    ``(n, 2)`` array of positions in meters.
    """
    width, height = area
    if intensity_per_km2 < 0:
        raise InvalidParameterError(f"intensity must be >= 0, got {intensity_per_km2}")
    if width <= 0 or height <= 0:
        raise InvalidParameterError(f"area must have positive dimensions, got {area}")
    rng = _as_generator(seed)
    mean = intensity_per_km2 * width * height / 1e6
    n = rng.poisson(mean)
    xy = rng.uniform(0.0, 1.0, size=(n, 2))
    xy *= (width, height)
    return xy


@dataclass
class Deployment:
    area_width_m: float
    area_height_m: float
    bs_xy: np.ndarray
    bs_nsp: np.ndarray
    ue_xy: np.ndarray
    ue_nsp: np.ndarray

    def __post_init__(self):
        self.bs_xy = np.asarray(self.bs_xy, dtype=float).reshape(-1, 2)
        self.ue_xy = np.asarray(self.ue_xy, dtype=float).reshape(-1, 2)
        self.bs_nsp = np.asarray(self.bs_nsp, dtype=np.int64).reshape(-1)
        self.ue_nsp = np.asarray(self.ue_nsp, dtype=np.int64).reshape(-1)
        if len(self.bs_nsp) != len(self.bs_xy) or len(self.ue_nsp) != len(self.ue_xy):
            raise InvalidParameterError("every BS and user needs exactly one owning NSP")

    @property
    def num_bs(self) -> int:
        return len(self.bs_xy)

    @property
    def num_users(self) -> int:
        return len(self.ue_xy)

    def to_dict(self) -> dict:
        return {
            "area_width_m": self.area_width_m,
            "area_height_m": self.area_height_m,
            "base_stations": [
                {"x": float(x), "y": float(y), "nsp": int(k)}
                for (x, y), k in zip(self.bs_xy, self.bs_nsp)
            ],
            "users": [
                {"x": float(x), "y": float(y), "nsp": int(k)}
                for (x, y), k in zip(self.ue_xy, self.ue_nsp)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Deployment":
        bs = d["base_stations"]
        ue = d["users"]
        return cls(
            d["area_width_m"],
            d["area_height_m"],
            [(b["x"], b["y"]) for b in bs],
            [b["nsp"] for b in bs],
            [(u["x"], u["y"]) for u in ue],
            [u["nsp"] for u in ue],
        )


def split_deployment(
    total_bs_density: float,
    total_user_density: float,
    n1: float,
    area: tuple[float, float],
    seed,
) -> Deployment:
    """Draw independent hPPPs for both NSPs, NSP 1 taking fraction ``n1`` of each density.

    Base stations and users of NSP 1 come first in the index order.
    """
    if not 0.0 <= n1 <= 1.0:
        raise InvalidParameterError(f"n1 must lie in [0, 1], got {n1}")
    rng = _as_generator(seed)
    bs1 = sample_hppp(n1 * total_bs_density, area, rng)
    bs2 = sample_hppp((1.0 - n1) * total_bs_density, area, rng)
    ue1 = sample_hppp(n1 * total_user_density, area, rng)
    ue2 = sample_hppp((1.0 - n1) * total_user_density, area, rng)
    return Deployment(
        area[0],
        area[1],
        np.vstack([bs1, bs2]),
        np.r_[np.full(len(bs1), 1), np.full(len(bs2), 2)],
        np.vstack([ue1, ue2]),
        np.r_[np.full(len(ue1), 1), np.full(len(ue2), 2)],
    )


@dataclass
class Association:
    serving_bs: np.ndarray  # UNASSOCIATED (-1) when no eligible BS exists
    serving_distance: np.ndarray
    cell_members: dict[int, list[int]] = field(default_factory=dict)

    @property
    def num_unassociated(self) -> int:
        return int(np.count_nonzero(self.serving_bs == UNASSOCIATED))


def distances(deployment: Deployment) -> np.ndarray:
    """User-by-BS Euclidean distance matrix in meters."""
    diff = deployment.ue_xy[:, None, :] - deployment.bs_xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def eligibility(deployment: Deployment, coalition) -> np.ndarray:
    """Boolean user-by-BS mask of BSs allowed to serve each user.

    A singleton coalition means no sharing: everyone is restricted to its own
    NSP. With two or more members, a member's subscriber may use any member BS.
    """
    coalition = frozenset(int(c) for c in coalition)
    if not coalition or not coalition <= set(NSP_IDS):
        raise InvalidParameterError(f"coalition must be a non-empty subset of {NSP_IDS}")
    own = deployment.ue_nsp[:, None] == deployment.bs_nsp[None, :]
    if len(coalition) < 2:
        return own
    members = np.array(sorted(coalition))
    ue_in = np.isin(deployment.ue_nsp, members)
    bs_in = np.isin(deployment.bs_nsp, members)
    return own | (ue_in[:, None] & bs_in[None, :])


def associate(deployment: Deployment, coalition, dist: np.ndarray | None = None) -> Association:
    """Attach each user to its nearest eligible BS (ties go to the lowest BS index)."""
    if dist is None:
        dist = distances(deployment)
    mask = eligibility(deployment, coalition)
    masked = np.where(mask, dist, np.inf)
    n_users = deployment.num_users
    if deployment.num_bs == 0:
        serving = np.full(n_users, UNASSOCIATED, dtype=np.int64)
        return Association(serving, np.full(n_users, np.inf), {})
    serving = np.argmin(masked, axis=1).astype(np.int64)
    serving_dist = masked[np.arange(n_users), serving]
    serving[~np.isfinite(serving_dist)] = UNASSOCIATED
    members: dict[int, list[int]] = {}
    for u, b in enumerate(serving.tolist()):
        if b != UNASSOCIATED:
            members.setdefault(b, []).append(u)
    return Association(serving, serving_dist, members)
