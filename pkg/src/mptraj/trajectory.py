"""Boundary-condition-exact trajectory evaluation.

A trajectory with parameters w_g (per DoF: N weights plus the goal) and a
boundary state (y_b, dy_b) at time t_b is

    y(t)  = xi1 y_b + xi2 dy_b + (Phi(t) - xi1 Phi_b - xi2 dPhi_b)^T w_g
    yd(t) = dxi1 y_b + dxi2 dy_b + (dPhi(t) - dxi1 Phi_b - dxi2 dPhi_b)^T w_g

with xi1 = (1 + k dt) e^{-k dt}, xi2 = dt e^{-k dt}, dt = t - t_b and
k = alpha / (2 tau).  These are the stable simplifications of the
complementary-function ratios (the third and fourth ratio are identically
the negated first and second, for every t_b, not just t_b = 0).  Adherence at
t_b is exact to the bit because the folded basis row vanishes there.

Querying t < t_b is permitted; the formulas stay valid but the intended use
is t >= t_b (the exponential in xi then grows with t_b - t).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisBank, DmpConfig
from .errors import DimensionError, ValidationError
from .fileio import atomic_write_text


@dataclass(frozen=True)
class BoundaryCondition:
    """Robot state (positions, velocities) at time t_b, one entry per DoF."""

    t_b: float
    y_b: np.ndarray
    dy_b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t_b", float(self.t_b))
        if self.t_b < 0.0:
            raise ValidationError(f"boundary time must be >= 0, got {self.t_b}")
        y_b = np.atleast_1d(np.array(self.y_b, dtype=float))
        dy_b = np.atleast_1d(np.array(self.dy_b, dtype=float))
        if y_b.ndim != 1 or y_b.shape != dy_b.shape:
            raise DimensionError(
                f"y_b {y_b.shape} and dy_b {dy_b.shape} must be equal-length vectors")
        y_b.flags.writeable = False
        dy_b.flags.writeable = False
        object.__setattr__(self, "y_b", y_b)
        object.__setattr__(self, "dy_b", dy_b)

    @property
    def dofs(self) -> int:
        return self.y_b.shape[0]


@dataclass(frozen=True)
class XiTerms:
    t: float
    xi1: float
    xi2: float
    xi3: float
    xi4: float


def xi_terms(t: float, t_b: float, config: DmpConfig) -> XiTerms:
    """The four boundary-coupling coefficients at time t for a boundary at t_b."""
    if t < 0.0 or t_b < 0.0:
        raise ValidationError("xi_terms require t >= 0 and t_b >= 0")
    xi1, xi2 = _xi_arrays(np.asarray(float(t)), float(t_b), config.decay_rate)
    return XiTerms(t=float(t), xi1=float(xi1), xi2=float(xi2),
                   xi3=-float(xi1), xi4=-float(xi2))


def _xi_arrays(times: np.ndarray, t_b: float, k: float):
    rel = times - t_b
    env = np.exp(-k * rel)
    return (1.0 + k * rel) * env, rel * env


def _dxi_arrays(times: np.ndarray, t_b: float, k: float):
    rel = times - t_b
    env = np.exp(-k * rel)
    return -k * k * rel * env, (1.0 - k * rel) * env


def weight_blocks(w_g, dofs: int, weight_dim: int) -> np.ndarray:
    """Validate a stacked weights-and-goal vector and view it as (D, N+1)."""
    w_g = np.asarray(w_g, dtype=float)
    if w_g.ndim != 1 or w_g.shape[0] != dofs * weight_dim:
        raise DimensionError(
            f"weights vector has {w_g.shape} entries, expected "
            f"{dofs}*{weight_dim} = {dofs * weight_dim}")
    return w_g.reshape(dofs, weight_dim)


@dataclass(frozen=True)
class FoldedBasis:
    """Boundary fold of the bank at fixed (bc, times); shared by the
    deterministic, distribution, and sampling paths."""

    times: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray
    dxi1: np.ndarray
    dxi2: np.ndarray
    h_pos: np.ndarray
    h_vel: np.ndarray


def folded_basis(bc: BoundaryCondition, times, bank: BasisBank) -> FoldedBasis:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phi_b = bank.pos_rows(bc.t_b)[0]
    dphi_b = bank.vel_rows(bc.t_b)[0]
    phi = bank.pos_rows(times)
    dphi = bank.vel_rows(times)
    k = bank.config.decay_rate
    xi1, xi2 = _xi_arrays(times, bc.t_b, k)
    dxi1, dxi2 = _dxi_arrays(times, bc.t_b, k)
    h_pos = phi - xi1[:, None] * phi_b - xi2[:, None] * dphi_b
    h_vel = dphi - dxi1[:, None] * phi_b - dxi2[:, None] * dphi_b
    return FoldedBasis(times=times, xi1=xi1, xi2=xi2, dxi1=dxi1, dxi2=dxi2,
                       h_pos=h_pos, h_vel=h_vel)


def solve_coefficients(bc: BoundaryCondition, w_g, bank: BasisBank):
    """Per-DoF constants (c1, c2) of the complementary-function form.

    Solved from the boundary state and the basis values at t_b.  Note the
    1/Wronskian factor grows like e^{2 k t_b}; the folded xi route used by
    evaluate_position avoids this, which is why it is the production path.
    """
    blocks = weight_blocks(w_g, bc.dofs, bank.weight_dim)
    phi_b = bank.pos_rows(bc.t_b)[0]
    dphi_b = bank.vel_rows(bc.t_b)[0]
    k = bank.config.decay_rate
    env = np.exp(-k * bc.t_b)
    y1b, y2b = env, bc.t_b * env
    dy1b, dy2b = -k * env, (1.0 - k * bc.t_b) * env
    wronskian = y1b * dy2b - y2b * dy1b
    c1 = (dy2b * bc.y_b - y2b * bc.dy_b + blocks @ (y2b * dphi_b - dy2b * phi_b)) / wronskian
    c2 = (y1b * bc.dy_b - dy1b * bc.y_b + blocks @ (dy1b * phi_b - y1b * dphi_b)) / wronskian
    return c1, c2


def position_from_coefficients(c1, c2, w_g, times, bank: BasisBank) -> np.ndarray:
    """Direct evaluation y = c1 y1 + c2 y2 + Phi^T w_g (cross-check route)."""
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    c2 = np.atleast_1d(np.asarray(c2, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    blocks = weight_blocks(w_g, c1.shape[0], bank.weight_dim)
    k = bank.config.decay_rate
    env = np.exp(-k * times)
    return (c1[:, None] * env + c2[:, None] * (times * env)
            + blocks @ bank.pos_rows(times).T)


def velocity_from_coefficients(c1, c2, w_g, times, bank: BasisBank) -> np.ndarray:
    c1 = np.atleast_1d(np.asarray(c1, dtype=float))
    c2 = np.atleast_1d(np.asarray(c2, dtype=float))
    times = np.atleast_1d(np.asarray(times, dtype=float))
    blocks = weight_blocks(w_g, c1.shape[0], bank.weight_dim)
    k = bank.config.decay_rate
    env = np.exp(-k * times)
    return (c1[:, None] * (-k * env) + c2[:, None] * ((1.0 - k * times) * env)
            + blocks @ bank.vel_rows(times).T)


def evaluate_position(w_g, bc: BoundaryCondition, times, bank: BasisBank) -> np.ndarray:
    """Positions, shape (D, len(times)); exact boundary adherence at t_b."""
    return TrajectoryGenerator(bc, times, bank).positions(w_g)


def evaluate_velocity(w_g, bc: BoundaryCondition, times, bank: BasisBank) -> np.ndarray:
    """Velocities, shape (D, len(times)); equals dy_b exactly at t_b."""
    return TrajectoryGenerator(bc, times, bank).velocities(w_g)


class TrajectoryGenerator:
    """Boundary fold precomputed once for fixed (bc, times).

    positions()/velocities() then cost one (D, N+1) x (N+1, T) product each,
    which is the online generation path worth benchmarking.
    """

    def __init__(self, bc: BoundaryCondition, times, bank: BasisBank):
        fold = folded_basis(bc, times, bank)
        self.bc = bc
        self.bank = bank
        self.times = fold.times
        self._pos_offset = fold.xi1 * bc.y_b[:, None] + fold.xi2 * bc.dy_b[:, None]
        self._vel_offset = fold.dxi1 * bc.y_b[:, None] + fold.dxi2 * bc.dy_b[:, None]
        self._h_pos_t = fold.h_pos.T.copy()
        self._h_vel_t = fold.h_vel.T.copy()

    def positions(self, w_g) -> np.ndarray:
        blocks = weight_blocks(w_g, self.bc.dofs, self.bank.weight_dim)
        return self._pos_offset + blocks @ self._h_pos_t

    def velocities(self, w_g) -> np.ndarray:
        blocks = weight_blocks(w_g, self.bc.dofs, self.bank.weight_dim)
        return self._vel_offset + blocks @ self._h_vel_t


def write_trajectory_csv(path: str, times, positions, velocities,
                         segment_ids=None) -> None:
    """Schema: t, dof0_pos, dof0_vel, ..., one row per time, 17 significant
    digits (lossless double round-trip).  segment_ids adds a trailing column."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if velocities is not None:
        velocities = np.atleast_2d(np.asarray(velocities, dtype=float))
        if positions.shape != velocities.shape:
            raise DimensionError(
                f"positions {positions.shape} and velocities {velocities.shape} "
                f"do not align")
    if positions.shape[1] != times.shape[0]:
        raise DimensionError(
            f"positions {positions.shape} and times {times.shape} do not align")
    dofs = positions.shape[0]
    header = ["t"]
    for d in range(dofs):
        header.append(f"dof{d}_pos")
        if velocities is not None:
            header.append(f"dof{d}_vel")
    if segment_ids is not None:
        segment_ids = np.asarray(segment_ids)
        if segment_ids.shape[0] != times.shape[0]:
            raise DimensionError("segment_ids must align with times")
        header.append("segment_id")
    lines = [",".join(header)]
    for j, t in enumerate(times):
        row = [f"{t:.17g}"]
        for d in range(dofs):
            row.append(f"{positions[d, j]:.17g}")
            if velocities is not None:
                row.append(f"{velocities[d, j]:.17g}")
        if segment_ids is not None:
            row.append(str(int(segment_ids[j])))
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trajectory_csv(path: str):
    """Inverse of write_trajectory_csv; returns (times, positions, velocities).

    Velocity columns are optional (demonstrations may carry positions only);
    absent velocities come back as None.
    """
    from .fileio import read_text
    text = read_text(path).strip()
    if not text:
        raise ValidationError(f"empty trajectory file: {path}")
    lines = text.splitlines()
    header = [c.strip() for c in lines[0].split(",")]
    if header[0] != "t":
        raise ValidationError(f"trajectory CSV must start with a 't' column: {path}")
    pos_cols, vel_cols = {}, {}
    for idx, name in enumerate(header[1:], start=1):
        if name == "segment_id":
            continue
        kind = name.rsplit("_", 1)
        if len(kind) != 2 or kind[1] not in ("pos", "vel") or not kind[0].startswith("dof"):
            raise ValidationError(f"unrecognized trajectory column {name!r} in {path}")
        dof = int(kind[0][3:])
        (pos_cols if kind[1] == "pos" else vel_cols)[dof] = idx
    if sorted(pos_cols) != list(range(len(pos_cols))) or not pos_cols:
        raise ValidationError(f"missing position columns in {path}")
    data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    times = data[:, 0]
    positions = data[:, [pos_cols[d] for d in range(len(pos_cols))]].T
    velocities = None
    if vel_cols:
        if sorted(vel_cols) != sorted(pos_cols):
            raise ValidationError(f"velocity columns do not match position columns in {path}")
        velocities = data[:, [vel_cols[d] for d in range(len(vel_cols))]].T
    return times, positions, velocities
