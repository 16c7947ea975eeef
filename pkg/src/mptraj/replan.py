"""Segment-wise replanning with refreshed boundary conditions.

At every switch time the executed state (position, velocity) becomes the
boundary condition of the next segment, so consecutive segments join without
jumps no matter how the per-segment weight distributions differ.

Bank time vs global time: a segment evaluated with bank_anchor=0 runs on local
time (its switch instant maps to bank time 0), which lets one precomputed bank
serve arbitrarily long replanning chains.  Anchoring at the global switch time
instead (anchor="follow" in run_chain) keeps the phase and forcing where the
unsegmented trajectory would have them, which is the mode where replanning
with unchanged parameters continues the original path; it requires the chain
to fit inside the bank horizon.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisBank
from .distribution import (DEFAULT_NOISE_VAR, TrajectoryDistribution,
                           WeightsDistribution, trajectory_distribution)
from .errors import DimensionError, ValidationError
from .trajectory import (BoundaryCondition, evaluate_position, evaluate_velocity)


@dataclass(frozen=True)
class ReplanSegment:
    """One planned segment: global times, mean trace, and the trajectory
    distribution (index set in global time)."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    distribution: TrajectoryDistribution

    def __post_init__(self):
        if (self.positions.shape != self.velocities.shape
                or self.positions.shape[1] != self.times.shape[0]):
            raise DimensionError("segment trace arrays do not align")


@dataclass(frozen=True)
class SegmentPlan:
    """Executed chain: concatenated trace (duplicate switch samples dropped),
    per-sample segment ids, and the jumps measured at each interior switch
    before deduplication."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    segment_ids: np.ndarray
    switch_times: tuple
    pos_jumps: np.ndarray
    vel_jumps: np.ndarray

    def __post_init__(self):
        t_count = self.times.shape[0]
        if (self.positions.shape[1] != t_count or self.velocities.shape[1] != t_count
                or self.segment_ids.shape[0] != t_count):
            raise DimensionError("plan trace arrays do not align")
        if np.any(np.diff(np.asarray(self.switch_times)) <= 0.0):
            raise ValidationError("switch times must be strictly increasing")


def _segment_offsets(horizon: float, rate: float) -> np.ndarray:
    if not horizon > 0.0:
        raise ValidationError(f"horizon must be > 0, got {horizon}")
    if not rate > 0.0:
        raise ValidationError(f"rate must be > 0, got {rate}")
    steps = int(round(horizon * rate))
    if steps < 1 or abs(steps / rate - horizon) > 1e-9 * max(1.0, horizon):
        raise ValidationError(
            f"horizon {horizon} is not a positive multiple of the sample period "
            f"1/{rate}")
    offsets = np.arange(steps + 1) / rate
    offsets[-1] = horizon
    return offsets


def replan_segment(current: BoundaryCondition, wdist: WeightsDistribution,
                   horizon: float, bank: BasisBank, rate: float,
                   noise_var: float = DEFAULT_NOISE_VAR,
                   bank_anchor: float = 0.0) -> ReplanSegment:
    """Distribution and mean trace over [t_b, t_b + horizon], starting exactly
    at the current state.  bank_anchor maps the switch instant into bank time."""
    offsets = _segment_offsets(horizon, rate)
    if bank_anchor < 0.0 or bank_anchor + horizon > bank.duration * (1.0 + 1e-12):
        raise ValidationError(
            f"segment [{bank_anchor:.6g}, {bank_anchor + horizon:.6g}] exceeds the "
            f"bank horizon {bank.duration:.6g}; shorten the horizon or precompute "
            f"a longer bank")
    local_times = np.minimum(bank_anchor + offsets, bank.duration)
    local_bc = BoundaryCondition(t_b=bank_anchor, y_b=current.y_b, dy_b=current.dy_b)

    dist = trajectory_distribution(wdist, local_bc, local_times, bank, noise_var)
    global_times = current.t_b + offsets
    index_set = tuple((float(t), d) for d in range(current.dofs)
                      for t in global_times)
    dist = TrajectoryDistribution(index_set=index_set, mean=dist.mean, cov=dist.cov,
                                  noise_var=dist.noise_var)
    positions = evaluate_position(wdist.mean, local_bc, local_times, bank)
    velocities = evaluate_velocity(wdist.mean, local_bc, local_times, bank)
    return ReplanSegment(times=global_times, positions=positions,
                         velocities=velocities, distribution=dist)


def run_chain(initial: BoundaryCondition, segments, bank: BasisBank, rate: float,
              anchor: str = "local", mode: str = "mean", seed=None,
              noise_var: float = DEFAULT_NOISE_VAR,
              stale_bc: bool = False) -> SegmentPlan:
    """Execute a chain of (wdist, horizon) segments.

    mode "mean" follows each segment's mean; mode "sample" draws one weight
    vector per segment.  stale_bc=True is the negative control: every segment
    reuses the initial boundary condition instead of the executed state, which
    reproduces the discontinuities of replanning without boundary handling.
    """
    segments = list(segments)
    if not segments:
        raise ValidationError("chain needs at least one segment")
    if anchor not in ("local", "follow"):
        raise ValidationError(f"anchor must be 'local' or 'follow', got '{anchor}'")
    if mode not in ("mean", "sample"):
        raise ValidationError(f"mode must be 'mean' or 'sample', got '{mode}'")
    rng = np.random.default_rng(seed)

    state = initial
    switch_times = []
    chunks_t, chunks_p, chunks_v, chunks_id = [], [], [], []
    pos_jumps, vel_jumps = [], []
    prev_end_pos = prev_end_vel = None

    for k, (wdist, horizon) in enumerate(segments):
        bc = initial if stale_bc else state
        bc = BoundaryCondition(t_b=state.t_b, y_b=bc.y_b, dy_b=bc.dy_b)
        bank_anchor = 0.0 if anchor == "local" else state.t_b
        if mode == "sample":
            w = wdist.mean + wdist.chol @ rng.standard_normal(wdist.dim)
            wdist = WeightsDistribution(mean=w, chol=np.zeros_like(wdist.chol),
                                        allow_semidefinite=True)
        segment = replan_segment(bc, wdist, horizon, bank, rate,
                                 noise_var=noise_var, bank_anchor=bank_anchor)
        switch_times.append(state.t_b)

        if k > 0:
            pos_jumps.append(float(np.max(np.abs(segment.positions[:, 0]
                                                 - prev_end_pos))))
            vel_jumps.append(float(np.max(np.abs(segment.velocities[:, 0]
                                                 - prev_end_vel))))
        prev_end_pos = segment.positions[:, -1]
        prev_end_vel = segment.velocities[:, -1]

        drop = 1 if k > 0 else 0
        chunks_t.append(segment.times[drop:])
        chunks_p.append(segment.positions[:, drop:])
        chunks_v.append(segment.velocities[:, drop:])
        chunks_id.append(np.full(segment.times.shape[0] - drop, k, dtype=int))

        state = BoundaryCondition(t_b=float(segment.times[-1]),
                                  y_b=prev_end_pos, dy_b=prev_end_vel)

    return SegmentPlan(
        times=np.concatenate(chunks_t),
        positions=np.concatenate(chunks_p, axis=1),
        velocities=np.concatenate(chunks_v, axis=1),
        segment_ids=np.concatenate(chunks_id),
        switch_times=tuple(switch_times),
        pos_jumps=np.asarray(pos_jumps),
        vel_jumps=np.asarray(vel_jumps))


def smoothness_metric(positions, dt: float) -> float:
    """Average squared acceleration of a uniformly sampled trace: mean over
    DoFs and samples of the squared second difference divided by dt**4."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.shape[1] < 3:
        raise ValidationError("smoothness metric needs at least 3 samples")
    if not dt > 0.0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    second = positions[:, 2:] - 2.0 * positions[:, 1:-1] + positions[:, :-2]
    return float(np.mean((second / dt ** 2) ** 2))
