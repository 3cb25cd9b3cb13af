"""Formation geometries and grid-sweep trajectory datasets.

The sufferer sits fixed at the origin (emulating a load-stand vehicle); a
rigid formation of K neighbours flies straight E-aligned legs over a square
lateral area at a set of relative altitudes, and each sampled instant is
paired with a ground-truth wrench from one of the aggregation oracles plus
a noisy measurement.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .core import FormationSnapshot, VehicleState, Wrench6
from .dataset import Dataset, Record
from .field import DownwashParams, MergeParams, NoiseParams, add_noise, make_oracle


class FormationKind(enum.Enum):
    SIDE_BY_SIDE = "side_by_side"      # abreast, perpendicular to travel
    LEADER_FOLLOWER = "leader_follower"  # in trail, along travel
    STACK = "stack"                    # distinct altitude planes
    HYBRID3 = "hybrid3"                # equilateral triangle, one plane


@dataclass(frozen=True)
class Formation:
    """A formation kind with its member count and spacing."""

    kind: FormationKind
    k: int
    spacing: float = 0.5

    def offsets(self) -> np.ndarray:
        return formation_offsets(self.kind, self.k, self.spacing)

    def label(self) -> str:
        return f"{self.kind.value}_k{self.k}"


@dataclass(frozen=True)
class SweepConfig:
    """Grid-sweep exploration settings.

    Defaults mirror a 2 m square lateral area explored 1.4 m above the
    sufferer at 0.5 m/s in 36 straight legs per altitude.
    """

    lateral_extent: float = 2.0
    vertical_extent: float = 1.4
    speed: float = 0.5
    legs: int = 36
    samples_per_leg: int = 200
    spacing: float = 0.5
    altitudes: tuple = (0.3, 0.8, 1.3)

    def __post_init__(self):
        object.__setattr__(self, "altitudes", tuple(float(a) for a in self.altitudes))
        if min(self.lateral_extent, self.vertical_extent, self.speed, self.spacing) <= 0:
            raise ValueError("extents, speed and spacing must be > 0")
        if self.legs < 1 or self.samples_per_leg < 1:
            raise ValueError("legs and samples_per_leg must be >= 1")
        if not self.altitudes or any(a <= 0 or a > self.vertical_extent for a in self.altitudes):
            raise ValueError("altitudes must lie in (0, vertical_extent]")


def formation_offsets(kind: FormationKind, k: int, spacing: float) -> np.ndarray:
    """Member offsets (k, 3) relative to the formation centroid, zero lateral mean.

    Side-by-side spreads along N (perpendicular to the E-aligned travel),
    leader-follower along E, the stack along D with lateral steps of
    spacing/2 so each lower member sits at the edge of the column above it,
    and hybrid3 is an equilateral triangle of side ``spacing`` in one plane.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if spacing <= 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    centred = np.arange(k) - (k - 1) / 2.0
    offsets = np.zeros((k, 3))
    if kind is FormationKind.SIDE_BY_SIDE:
        offsets[:, 0] = centred * spacing
    elif kind is FormationKind.LEADER_FOLLOWER:
        offsets[:, 1] = centred * spacing
    elif kind is FormationKind.STACK:
        offsets[:, 0] = centred * (spacing / 2.0)
        offsets[:, 2] = centred * spacing
    elif kind is FormationKind.HYBRID3:
        if k != 3:
            raise ValueError(f"hybrid3 requires k=3, got k={k}")
        rho = spacing / math.sqrt(3.0)
        offsets[0] = (rho, 0.0, 0.0)
        offsets[1] = (-rho / 2.0, spacing / 2.0, 0.0)
        offsets[2] = (-rho / 2.0, -spacing / 2.0, 0.0)
    else:
        raise ValueError(f"unknown formation kind {kind!r}")
    return offsets


def snapshot_at(
    formation: Formation,
    centroid_n: float,
    centroid_e: float,
    altitude: float,
    speed: float = 0.5,
) -> FormationSnapshot:
    """Snapshot with the formation centroid at (n, e, -altitude) moving along +E.

    The sufferer is fixed at the origin with zero velocity.
    """
    sufferer = VehicleState(position=np.zeros(3), velocity=np.zeros(3))
    centroid = np.array([centroid_n, centroid_e, -altitude])
    vel = np.array([0.0, speed, 0.0])
    neighbours = tuple(
        VehicleState(position=centroid + off, velocity=vel) for off in formation.offsets()
    )
    return FormationSnapshot(sufferer, neighbours)


def _leg_positions(extent: float, legs: int) -> np.ndarray:
    # Midpoint grid: legs=1 flies straight over the centre.
    return -extent / 2.0 + (np.arange(legs) + 0.5) * (extent / legs)


def generate_sweep(
    formation: Formation,
    cfg: SweepConfig,
    oracle_kind: str,
    params: DownwashParams,
    merge: MergeParams | None = None,
    noise: NoiseParams | None = None,
) -> Dataset:
    """Fly the sweep and return the sampled dataset.

    For each altitude and each leg the formation centroid crosses the
    lateral extent along +E at ``cfg.speed``; legs sit on a uniform N grid.
    Ground truth comes from the chosen oracle; the noisy measurement adds
    seeded Gaussian noise, with one noise stream index per sample so legs
    (or samples) may be generated in parallel without changing the result.
    Record order is canonical: altitude, then leg, then sample.
    """
    noise = noise if noise is not None else NoiseParams()
    oracle = make_oracle(oracle_kind, params, merge)
    half = cfg.lateral_extent / 2.0
    duration = cfg.lateral_extent / cfg.speed
    if cfg.samples_per_leg > 1:
        times = np.arange(cfg.samples_per_leg) * (duration / (cfg.samples_per_leg - 1))
    else:
        times = np.zeros(1)
    leg_ns = _leg_positions(cfg.lateral_extent, cfg.legs)

    records = []
    sample_index = 0
    for altitude in cfg.altitudes:
        for leg_n in leg_ns:
            for t in times:
                snap = snapshot_at(
                    formation, float(leg_n), -half + cfg.speed * float(t), altitude, cfg.speed
                )
                truth = oracle(snap)
                measured = add_noise(truth, noise, sample_index)
                records.append(Record(float(t), snap, truth, measured))
                sample_index += 1

    metadata = {
        "kind": formation.kind.value,
        "k": formation.k,
        "spacing": formation.spacing,
        "oracle": oracle_kind,
        "field_params": vars(params).copy(),
        "merge_params": vars(merge).copy() if merge is not None else None,
        "noise_params": {"sigma_force": noise.sigma_force, "sigma_torque": noise.sigma_torque},
        "seed": noise.seed,
        "sweep": {
            "lateral_extent": cfg.lateral_extent,
            "vertical_extent": cfg.vertical_extent,
            "speed": cfg.speed,
            "legs": cfg.legs,
            "samples_per_leg": cfg.samples_per_leg,
            "spacing": cfg.spacing,
            "altitudes": list(cfg.altitudes),
        },
    }
    return Dataset(records=records, metadata=metadata)


def grid_slice(
    formation: Formation,
    altitude: float,
    extent: float,
    resolution: int,
    oracle_kind: str,
    params: DownwashParams,
    merge: MergeParams | None = None,
    speed: float = 0.5,
) -> list:
    """Noiseless oracle evaluation on a uniform lateral grid of centroid positions.

    Returns [(centroid (n, e), Wrench6), ...] in n-major order; the grid
    includes the extent corners (``resolution`` points per axis, >= 2).
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    oracle = make_oracle(oracle_kind, params, merge)
    axis = np.linspace(-extent / 2.0, extent / 2.0, resolution)
    out = []
    for n in axis:
        for e in axis:
            snap = snapshot_at(formation, float(n), float(e), altitude, speed)
            out.append(((float(n), float(e)), oracle(snap)))
    return out
