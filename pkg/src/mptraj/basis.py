"""Phase variable, RBF forcing basis, complementary functions, and the
offline position/velocity basis bank.

The trajectory model is the critically damped spring-damper ODE

    tau^2 ydd = alpha * (beta * (g - y) - tau * yd) + x(t) * phi(x)^T w

solved in closed form.  With k = alpha / (2 tau) the homogeneous solutions are
y1 = exp(-k t) and y2 = t exp(-k t), and the particular solution reduces to a
linear model in the stacked weights-and-goal vector w_g.  Everything the
online path needs per grid time is one (N+1)-row for positions and one for
velocities; this module computes those rows offline.

Numerical stability: the variation-of-constants integrals contain the growing
factor exp(k t'), which must never be materialized.  The bank is built from
the decayed integrals

    A(t) = (1/tau^2) * int_0^t exp(-k (t - s)) x(s) phi_n(s) ds
    B(t) = (1/tau^2) * int_0^t exp(-k (t - s)) s x(s) phi_n(s) ds

advanced by the exact decay recurrence
A(t+dt) = exp(-k dt) A(t) + (dt/2) (exp(-k dt) f(t) + f(t+dt)), so every
evaluated exponent is <= 0.  The weight columns are then t*A - B (position)
and (1 - k t)*A + k*B (velocity); the goal columns have exact closed forms
1 - (1 + k t) exp(-k t) and k^2 t exp(-k t).
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import zipfile
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError, ValidationError
from .fileio import atomic_write_bytes

# exp() overflow guard for the raw q-terms (double range with margin)
MAX_EXP_ARG = 700.0

_CONFIG_FIELDS = ("alpha", "beta", "tau", "alpha_x", "num_basis", "duration",
                  "grid_dt", "basis_overlap")


@dataclass(frozen=True)
class DmpConfig:
    """ODE and basis hyperparameters.

    beta is fixed to alpha/4 (critical damping); passing any other value is an
    error.  grid_dt defaults to duration/3000.
    """

    alpha: float
    tau: float
    alpha_x: float
    num_basis: int
    duration: float
    grid_dt: float | None = None
    basis_overlap: float = 0.3
    beta: float | None = None

    def __post_init__(self):
        for name in ("alpha", "tau", "alpha_x", "duration"):
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            if not np.isfinite(value) or value <= 0.0:
                raise ValidationError(f"{name} must be strictly positive, got {value}")
        object.__setattr__(self, "num_basis", int(self.num_basis))
        if self.num_basis < 1:
            raise ValidationError(f"num_basis must be positive, got {self.num_basis}")

        grid_dt = self.duration / 3000.0 if self.grid_dt is None else float(self.grid_dt)
        if not np.isfinite(grid_dt) or grid_dt <= 0.0:
            raise ValidationError(f"grid_dt must be strictly positive, got {grid_dt}")
        object.__setattr__(self, "grid_dt", grid_dt)

        overlap = float(self.basis_overlap)
        if not 0.0 < overlap < 1.0:
            raise ValidationError(f"basis_overlap must lie in (0, 1), got {overlap}")
        object.__setattr__(self, "basis_overlap", overlap)

        beta = self.alpha / 4.0 if self.beta is None else float(self.beta)
        if beta != self.alpha / 4.0:
            raise ValidationError(
                f"beta must equal alpha/4 = {self.alpha / 4.0} (critical damping), got {beta}")
        object.__setattr__(self, "beta", beta)

        if self.grid_points < 4 * self.num_basis:
            raise ValidationError(
                f"grid too coarse: duration/grid_dt yields {self.grid_points} points, "
                f"need at least 4*num_basis = {4 * self.num_basis}")

    @property
    def decay_rate(self) -> float:
        """Repeated characteristic root k = alpha / (2 tau)."""
        return self.alpha / (2.0 * self.tau)

    @property
    def grid_intervals(self) -> int:
        return int(round(self.duration / self.grid_dt))

    @property
    def grid_points(self) -> int:
        return self.grid_intervals + 1

    @property
    def weight_dim(self) -> int:
        """Per-DoF parameter count: N weights plus the goal."""
        return self.num_basis + 1

    def canonical_json(self) -> str:
        return json.dumps({name: getattr(self, name) for name in _CONFIG_FIELDS},
                          sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "DmpConfig":
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        missing = {"alpha", "tau", "alpha_x", "num_basis", "duration"} - set(data)
        if missing:
            raise ValidationError(f"missing config keys: {sorted(missing)}")
        return cls(**data)


@dataclass(frozen=True)
class PhaseValue:
    t: float
    x: float


def phase(t, config: DmpConfig) -> PhaseValue:
    """Exponentially decaying phase x = exp(-alpha_x t / tau); accepts arrays."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValidationError("phase is undefined for negative time")
    x = np.exp(-config.alpha_x * t / config.tau)
    if t.ndim == 0:
        return PhaseValue(float(t), float(x))
    return PhaseValue(t, x)


@dataclass(frozen=True)
class ForcingBasis:
    """Gaussian RBFs over the phase domain."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        for name in ("centers", "widths"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def num_basis(self) -> int:
        return self.centers.shape[0]

    def raw(self, x) -> np.ndarray:
        """Unnormalized activations, shape (..., N)."""
        x = np.asarray(x, dtype=float)
        return np.exp(-self.widths * (x[..., None] - self.centers) ** 2)

    def normalized_scaled(self, x) -> np.ndarray:
        """Forcing feature rows x * phi_i(x) / sum_j phi_j(x); rows sum to x."""
        x = np.asarray(x, dtype=float)
        raw = self.raw(x)
        return x[..., None] * raw / raw.sum(axis=-1, keepdims=True)


def make_forcing_basis(config: DmpConfig) -> ForcingBasis:
    """RBFs centered at the phase images of N time-uniform points on [0, duration].

    Width h_i = -ln(overlap) / (c_{i+1} - c_i)^2, so each basis evaluates to
    basis_overlap at its next neighbor's center; the last basis reuses its
    neighbor's width.
    """
    n = config.num_basis
    if n < 2:
        raise ValidationError("num_basis must be at least 2 (width rule needs neighbors)")
    t_centers = np.linspace(0.0, config.duration, n)
    centers = np.exp(-config.alpha_x * t_centers / config.tau)
    gaps = np.diff(centers)
    widths = -np.log(config.basis_overlap) / gaps**2
    widths = np.append(widths, widths[-1])
    return ForcingBasis(centers, widths)


@dataclass(frozen=True)
class ComplementarySample:
    t: float
    y1: float
    y2: float
    dy1: float
    dy2: float

    @property
    def wronskian(self) -> float:
        return self.y1 * self.dy2 - self.dy1 * self.y2


def complementary(t: float, config: DmpConfig) -> ComplementarySample:
    """Homogeneous solutions y1 = e^{-kt}, y2 = t e^{-kt} and their derivatives."""
    t = float(t)
    if t < 0.0:
        raise ValidationError("complementary functions are evaluated for t >= 0 only")
    k = config.decay_rate
    e = np.exp(-k * t)
    return ComplementarySample(t=t, y1=e, y2=t * e, dy1=-k * e, dy2=(1.0 - k * t) * e)


def q_terms(t: float, config: DmpConfig) -> tuple[float, float]:
    """Closed-form goal integrals q1 = (kt - 1) e^{kt} + 1, q2 = k (e^{kt} - 1).

    These grow like e^{kt}; arguments beyond the overflow guard raise instead
    of silently producing infinities.  The bank never uses this growing route.
    """
    t = float(t)
    if t < 0.0:
        raise ValidationError("q_terms are evaluated for t >= 0 only")
    k = config.decay_rate
    arg = k * t
    if arg > MAX_EXP_ARG:
        raise NumericalError(
            f"q_terms overflow: exponent argument {arg:.6g} exceeds {MAX_EXP_ARG:.0f}")
    grow = np.exp(arg)
    return (arg - 1.0) * grow + 1.0, k * (grow - 1.0)


@dataclass(frozen=True)
class BasisBank:
    """Immutable offline artifact: per grid time, the (N+1) position basis row
    (N weight columns plus the goal column), the velocity analog, and the
    complementary-function values (columns y1, y2, dy1, dy2)."""

    config: DmpConfig
    times: np.ndarray
    pos_basis: np.ndarray
    vel_basis: np.ndarray
    complementary: np.ndarray

    def __post_init__(self):
        n_pts = self.times.shape[0]
        dim = self.config.weight_dim
        if self.pos_basis.shape != (n_pts, dim) or self.vel_basis.shape != (n_pts, dim):
            raise DimensionError(
                f"basis arrays {self.pos_basis.shape} do not match grid/config {(n_pts, dim)}")
        if self.complementary.shape != (n_pts, 4):
            raise DimensionError(
                f"complementary array {self.complementary.shape} must be {(n_pts, 4)}")
        for arr in (self.times, self.pos_basis, self.vel_basis, self.complementary):
            arr.flags.writeable = False

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def num_basis(self) -> int:
        return self.config.num_basis

    @property
    def weight_dim(self) -> int:
        return self.config.weight_dim

    @property
    def grid_step(self) -> float:
        return self.config.duration / (self.times.shape[0] - 1)

    def _interp(self, values: np.ndarray, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if t.size == 0:
            return np.empty((0, values.shape[1]))
        if t.min() < self.times[0] or t.max() > self.times[-1]:
            raise ValidationError(
                f"query time outside bank range [0, {self.duration}]: "
                f"[{t.min()}, {t.max()}]")
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, self.times.shape[0] - 2)
        frac = (t - self.times[idx]) / (self.times[idx + 1] - self.times[idx])
        # endpoint-exact lerp: frac 0 or 1 returns the stored row bitwise
        return (1.0 - frac)[:, None] * values[idx] + frac[:, None] * values[idx + 1]

    def pos_rows(self, t) -> np.ndarray:
        """Position basis rows at query times (linear interpolation off-grid)."""
        return self._interp(self.pos_basis, t)

    def vel_rows(self, t) -> np.ndarray:
        return self._interp(self.vel_basis, t)

    def content_checksum(self) -> str:
        digest = hashlib.sha256(self.config.canonical_json().encode("utf-8"))
        for arr in (self.times, self.pos_basis, self.vel_basis, self.complementary):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def save(self, path: str) -> None:
        """Lossless binary container: arrays bit-exact plus a config echo."""
        buffer = io.BytesIO()
        config_raw = np.frombuffer(self.config.canonical_json().encode("utf-8"),
                                   dtype=np.uint8)
        checksum_raw = np.frombuffer(self.content_checksum().encode("ascii"),
                                     dtype=np.uint8)
        np.savez(buffer, times=self.times, pos_basis=self.pos_basis,
                 vel_basis=self.vel_basis, complementary=self.complementary,
                 config_json=config_raw, checksum=checksum_raw)
        atomic_write_bytes(path, buffer.getvalue())

    @classmethod
    def load(cls, path: str) -> "BasisBank":
        from .errors import IoError
        try:
            with np.load(path, allow_pickle=False) as data:
                config = DmpConfig.from_dict(
                    json.loads(data["config_json"].tobytes().decode("utf-8")))
                bank = cls(config=config,
                           times=data["times"].copy(),
                           pos_basis=data["pos_basis"].copy(),
                           vel_basis=data["vel_basis"].copy(),
                           complementary=data["complementary"].copy())
                stored = data["checksum"].tobytes().decode("ascii")
        except OSError as exc:
            raise IoError(f"cannot read bank {path}: {exc}") from exc
        except (KeyError, ValueError, zipfile.BadZipFile) as exc:
            raise ValidationError(f"not a bank file: {path}: {exc}") from exc
        if bank.content_checksum() != stored:
            raise ValidationError(f"bank file {path} failed its checksum")
        return bank


def precompute_basis(config: DmpConfig) -> BasisBank:
    """Assemble the basis bank on the uniform grid (the offline step).

    The p-integrals have no closed form and are computed by trapezoidal
    quadrature through the decay recurrence described in the module docstring;
    no evaluated exponent is ever positive.  A finite-difference
    self-consistency check (d/dt position rows == velocity rows) guards
    against a grid too coarse for the configured dynamics.
    """
    forcing = make_forcing_basis(config)
    m = config.grid_intervals
    dt = config.duration / m
    times = np.linspace(0.0, config.duration, m + 1)
    k = config.decay_rate

    x = np.exp(-config.alpha_x * times / config.tau)
    f = forcing.normalized_scaled(x) / config.tau**2      # (M+1, N) integrand
    g = times[:, None] * f
    decay = np.exp(-k * dt)

    n = config.num_basis
    big_a = np.empty((m + 1, n))
    big_b = np.empty((m + 1, n))
    big_a[0] = 0.0
    big_b[0] = 0.0
    acc_a = np.zeros(n)
    acc_b = np.zeros(n)
    half = 0.5 * dt
    for j in range(1, m + 1):
        acc_a = decay * acc_a + half * (decay * f[j - 1] + f[j])
        acc_b = decay * acc_b + half * (decay * g[j - 1] + g[j])
        big_a[j] = acc_a
        big_b[j] = acc_b

    kt = k * times
    env = np.exp(-kt)
    pos_basis = np.empty((m + 1, n + 1))
    vel_basis = np.empty((m + 1, n + 1))
    pos_basis[:, :n] = times[:, None] * big_a - big_b
    vel_basis[:, :n] = (1.0 - kt)[:, None] * big_a + k * big_b
    pos_basis[:, n] = 1.0 - (1.0 + kt) * env
    vel_basis[:, n] = k * k * times * env

    comp = np.column_stack([env, times * env, -k * env, (1.0 - kt) * env])

    fd = (pos_basis[2:] - pos_basis[:-2]) / (2.0 * dt)
    deviation = float(np.max(np.abs(fd - vel_basis[1:-1])))
    tol = 10.0 * dt
    if not math.isfinite(deviation) or deviation > tol:
        raise NumericalError(
            f"precomputation self-check failed: finite-difference derivative of the "
            f"position basis deviates from the velocity basis by {deviation:.3e} "
            f"(allowed {tol:.3e}); the grid step {dt:.3e} is too coarse for "
            f"alpha={config.alpha}, tau={config.tau}, num_basis={config.num_basis}")

    return BasisBank(config=config, times=times, pos_basis=pos_basis,
                     vel_basis=vel_basis, complementary=comp)
