"""Synthetic ground-truth downwash wrench fields.

A parametric single-vehicle field (a narrow Gaussian column that decays
with vertical separation and barely expands laterally), two K-vehicle
aggregation rules — plain componentwise addition, and a "merging" rule in
which nearby columns contract toward their common centroid and drift along
the formation's direction of travel — plus seeded measurement-noise
injection.  This stands in for load-stand measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FormationSnapshot, RelativeState, Wrench6, relative_state
from .rng import stream


@dataclass(frozen=True)
class DownwashParams:
    """Shape parameters of the single-vehicle downwash column.

    peak_force: D-axis force (N) directly beneath the vehicle as dz -> 0.
    core_radius: lateral 1/e radius of the column (m); kept within the
        sub-0.15 m body radius of a small multirotor.
    expansion_rate: column radius growth per metre of vertical separation.
    vertical_decay_length: e-folding length (m) of the vertical decay.
    torque_gain: lever-arm efficiency mapping off-centre D-force to
        pitch/roll torque (N*m per N per m of lateral offset).
    lateral_gain: fraction of the D-force appearing as a radially outward
        push near the column edge.
    """

    peak_force: float = 4.0
    core_radius: float = 0.12
    expansion_rate: float = 0.05
    vertical_decay_length: float = 3.0
    torque_gain: float = 0.2
    lateral_gain: float = 0.1

    def __post_init__(self):
        if not (self.peak_force > 0 and self.core_radius > 0 and self.vertical_decay_length > 0):
            raise ValueError("peak_force, core_radius and vertical_decay_length must be > 0")
        if self.expansion_rate < 0:
            raise ValueError("expansion_rate must be >= 0")


@dataclass(frozen=True)
class MergeParams:
    """Controls the nonlinear merging of proximal downwash columns.

    merge_radius: lateral distance (m) below which two columns link into a
        cluster.  contraction_rate: how fast cluster members are pulled
        toward the cluster centroid per metre of merged vertical travel.
    advect_gain: forward displacement of a merged column per metre of
        merged vertical travel, along the cluster's direction of travel.

    Merged travel is the vertical separation beyond the near-field core
    regime (2*core_radius), so formations barely above the sufferer stay
    effectively additive and the nonlinearity grows with altitude.
    """

    merge_radius: float = 0.6
    contraction_rate: float = 0.8
    advect_gain: float = 0.15

    def __post_init__(self):
        if self.merge_radius <= 0:
            raise ValueError("merge_radius must be > 0")
        if self.contraction_rate < 0 or self.advect_gain < 0:
            raise ValueError("contraction_rate and advect_gain must be >= 0")


@dataclass(frozen=True)
class NoiseParams:
    """Zero-mean Gaussian measurement noise, ~2 sigma inside +/-0.05 N."""

    sigma_force: float = 0.025
    sigma_torque: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.sigma_force < 0 or self.sigma_torque < 0:
            raise ValueError("noise sigmas must be >= 0")


def single_vehicle_wrench(rel: RelativeState, p: DownwashParams) -> Wrench6:
    """Wrench exerted on the sufferer by one neighbour at relative state ``rel``.

    Zero unless the neighbour is strictly above (negative relative D).  The
    D-force is a Gaussian column of radius R(dz) = core_radius*(1 +
    expansion_rate*dz) whose peak drops as exp(-dz/decay) * (R(0)/R(dz))^2,
    keeping the column's momentum flux consistent as it widens.  Pitch/roll
    torques come from the D-force acting at the lateral offset; the lateral
    push points radially outward from the column axis.  Yaw torque is zero
    (noise-dominated in practice, so modelled as pure noise).
    """
    dn, de, dd = rel.dpos
    dz = -dd
    if dz <= 0.0:
        return Wrench6.zero()
    r2 = dn * dn + de * de
    radius = p.core_radius * (1.0 + p.expansion_rate * dz)
    gauss = math.exp(-r2 / (radius * radius))
    f_d = (
        p.peak_force
        * gauss
        * math.exp(-dz / p.vertical_decay_length)
        * (p.core_radius / radius) ** 2
    )
    # Torque of the off-centre D-force about the sufferer centre: tau = offset x F.
    t_roll = p.torque_gain * f_d * de
    t_pitch = -p.torque_gain * f_d * dn
    # Radially outward push, (r/R)*exp(-(r/R)^2) profile; the 1/r of the unit
    # vector cancels the r of the profile, so there is no 0/0 on axis.
    f_n = -p.lateral_gain * f_d * gauss * dn / radius
    f_e = -p.lateral_gain * f_d * gauss * de / radius
    return Wrench6(np.array([f_n, f_e, f_d, t_pitch, t_roll, 0.0]))


def _canonical_order(rels: list) -> list:
    """Sort relative states by (dD, dN, dE, dvel) so summation order never
    depends on input order."""
    return sorted(
        rels,
        key=lambda rel: (
            rel.dpos[2],
            rel.dpos[0],
            rel.dpos[1],
            rel.dvel[0],
            rel.dvel[1],
            rel.dvel[2],
        ),
    )


def aggregate_additive(snap: FormationSnapshot, p: DownwashParams) -> Wrench6:
    """Componentwise sum of per-neighbour wrenches (the linear ground truth)."""
    total = np.zeros(6)
    for rel in _canonical_order(snap.relative_states()):
        total = total + single_vehicle_wrench(rel, p).vec
    return Wrench6(total)


def _merge_clusters(rels: list, p: DownwashParams, m: MergeParams) -> list:
    """Single-linkage clusters over lateral distance among merge-eligible sources.

    A source is eligible once it is clear of the near-field core regime
    (dz > 2*core_radius).  Input must already be canonically ordered; the
    returned clusters are lists of indices into it.
    """
    n = len(rels)
    eligible = [(-rel.dpos[2]) > 2.0 * p.core_radius for rel in rels]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        if not eligible[i]:
            continue
        for j in range(i + 1, n):
            if not eligible[j]:
                continue
            lat = math.hypot(rels[i].dpos[0] - rels[j].dpos[0], rels[i].dpos[1] - rels[j].dpos[1])
            if lat < m.merge_radius:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    return [clusters[r] for r in sorted(clusters)]


def aggregate_merging(snap: FormationSnapshot, p: DownwashParams, m: MergeParams) -> Wrench6:
    """Nonlinear ground truth: columns of a virtually merged cluster are pulled
    toward the cluster centroid, advected along the cluster's mean travel
    direction and narrowed so the total cross-section contracts with vertical
    separation; the transformed sources are then summed like the additive rule.

    Singleton clusters pass through untouched, so K=1 (and any well-separated
    formation) reproduces ``aggregate_additive`` exactly.
    """
    rels = _canonical_order(snap.relative_states())
    total = np.zeros(6)
    for members in _merge_clusters(rels, p, m):
        if len(members) == 1:
            total = total + single_vehicle_wrench(rels[members[0]], p).vec
            continue
        c = len(members)
        centroid_n = sum(rels[i].dpos[0] for i in members) / c
        centroid_e = sum(rels[i].dpos[1] for i in members) / c
        mean_vn = sum(rels[i].dvel[0] for i in members) / c
        mean_ve = sum(rels[i].dvel[1] for i in members) / c
        speed = math.hypot(mean_vn, mean_ve)
        if speed > 0.0:
            vhat_n, vhat_e = mean_vn / speed, mean_ve / speed
        else:
            vhat_n = vhat_e = 0.0
        sqrt_c = math.sqrt(c)
        for i in members:
            rel = rels[i]
            dz = -rel.dpos[2]
            # vertical travel spent merging: only the part beyond the core regime
            merged = max(0.0, dz - 2.0 * p.core_radius)
            pull = min(1.0, m.contraction_rate * merged)
            vn = rel.dpos[0] + pull * (centroid_n - rel.dpos[0]) + m.advect_gain * merged * vhat_n
            ve = rel.dpos[1] + pull * (centroid_e - rel.dpos[1]) + m.advect_gain * merged * vhat_e
            shrink = (1.0 / sqrt_c) * (
                1.0 + (sqrt_c - 1.0) * math.exp(-merged / p.vertical_decay_length)
            )
            virtual_params = DownwashParams(
                peak_force=p.peak_force,
                core_radius=p.core_radius * shrink,
                expansion_rate=p.expansion_rate,
                vertical_decay_length=p.vertical_decay_length,
                torque_gain=p.torque_gain,
                lateral_gain=p.lateral_gain,
            )
            virtual_rel = RelativeState(
                dpos=np.array([vn, ve, rel.dpos[2]]), dvel=np.array(rel.dvel)
            )
            total = total + single_vehicle_wrench(virtual_rel, virtual_params).vec
    return Wrench6(total)


def add_noise(w: Wrench6, n: NoiseParams, stream_index: int) -> Wrench6:
    """Add zero-mean Gaussian measurement noise, deterministic per
    (seed, stream_index)."""
    rng = stream(n.seed, stream_index)
    z = rng.standard_normal(6)
    scale = np.array([n.sigma_force] * 3 + [n.sigma_torque] * 3)
    return Wrench6(w.vec + scale * z)


class AdditiveOracle:
    """Callable snapshot -> wrench wrapper around ``aggregate_additive``."""

    def __init__(self, params: DownwashParams):
        self.params = params

    def __call__(self, snap: FormationSnapshot) -> Wrench6:
        return aggregate_additive(snap, self.params)


class MergingOracle:
    """Callable snapshot -> wrench wrapper around ``aggregate_merging``."""

    def __init__(self, params: DownwashParams, merge: MergeParams):
        self.params = params
        self.merge = merge

    def __call__(self, snap: FormationSnapshot) -> Wrench6:
        return aggregate_merging(snap, self.params, self.merge)


def make_oracle(kind: str, params: DownwashParams, merge: MergeParams | None = None):
    """Oracle factory used by dataset generation and the CLI."""
    if kind == "additive":
        return AdditiveOracle(params)
    if kind == "merging":
        return MergingOracle(params, merge if merge is not None else MergeParams())
    raise ValueError(f"unknown oracle kind {kind!r} (expected 'additive' or 'merging')")
