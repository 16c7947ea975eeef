"""Fitting weights from demonstrations, and Bayesian aggregation of
factorized Gaussian observations.

fit_weights inverts the linear trajectory model per DoF: with the boundary
offset subtracted from the demonstrated positions, the weights solve a ridge
least-squares problem against the folded basis rows.  The default ridge is
scale-free (1e-9 * trace(H^T H) / dim) so near-singular Gram matrices stay
factorizable without visibly biasing well-posed fits.

bayesian_aggregate fuses elementwise-independent Gaussians by precision
addition.  Observations are canonically sorted (lexicographically on the raw
bytes of mean, then variance) before the left-to-right summation, which makes
the result bit-exactly invariant to the order observations arrive in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisBank
from .distribution import WeightsDistribution
from .errors import DimensionError, NumericalError, ValidationError
from .trajectory import BoundaryCondition, folded_basis

DEFAULT_COV_FLOOR = 1e-8
# scale-free ridge factor: lam = RIDGE_SCALE * trace(H^T H) / dim
RIDGE_SCALE = 1e-9


@dataclass(frozen=True)
class Demonstration:
    """One demonstrated trajectory.  The boundary condition defaults to the
    first sample; velocities fall back to a first difference when absent."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None = None

    def __post_init__(self):
        times = np.atleast_1d(np.array(self.times, dtype=float))
        positions = np.atleast_2d(np.array(self.positions, dtype=float))
        if times.ndim != 1 or times.shape[0] < 2:
            raise ValidationError("a demonstration needs at least 2 time samples")
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError("demonstration times must be strictly increasing")
        if positions.shape[1] != times.shape[0]:
            raise DimensionError(
                f"positions must have shape (D, {times.shape[0]}), got {positions.shape}")
        times.flags.writeable = False
        positions.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)
        if self.velocities is not None:
            velocities = np.atleast_2d(np.array(self.velocities, dtype=float))
            if velocities.shape != positions.shape:
                raise DimensionError(
                    f"velocities shape {velocities.shape} does not match "
                    f"positions {positions.shape}")
            velocities.flags.writeable = False
            object.__setattr__(self, "velocities", velocities)

    @property
    def dofs(self) -> int:
        return self.positions.shape[0]

    def boundary_condition(self) -> BoundaryCondition:
        if self.velocities is not None:
            dy_b = self.velocities[:, 0]
        else:
            dy_b = ((self.positions[:, 1] - self.positions[:, 0])
                    / (self.times[1] - self.times[0]))
        return BoundaryCondition(t_b=float(self.times[0]),
                                 y_b=self.positions[:, 0], dy_b=dy_b)


def _ridge_lstsq(design: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    # augmented least squares keeps the conditioning of the design matrix
    # itself; forming the normal equations would square it
    dim = design.shape[1]
    if ridge > 0.0:
        design = np.vstack([design, np.sqrt(ridge) * np.eye(dim)])
        target = np.vstack([target, np.zeros((dim, target.shape[1]))])
    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < dim:
        raise NumericalError(
            f"design matrix is rank deficient ({rank} < {dim}); supply ridge > 0")
    return solution


def fit_weights(demo: Demonstration, bank: BasisBank,
                ridge: float | None = None,
                bc: BoundaryCondition | None = None) -> np.ndarray:
    """Least-squares weights-and-goal vector (flat, DoF blocks) for one demo."""
    if demo.times.shape[0] < bank.weight_dim:
        raise ValidationError(
            f"demonstration has {demo.times.shape[0]} samples but the basis has "
            f"{bank.weight_dim} parameters per DoF; the fit would be underdetermined")
    if bc is None:
        bc = demo.boundary_condition()
    elif bc.dofs != demo.dofs:
        raise DimensionError(
            f"boundary condition has {bc.dofs} DoFs, demonstration has {demo.dofs}")
    if ridge is not None and ridge < 0.0:
        raise ValidationError(f"ridge must be >= 0, got {ridge}")

    fold = folded_basis(bc, demo.times, bank)
    target = (demo.positions - fold.xi1 * bc.y_b[:, None]
              - fold.xi2 * bc.dy_b[:, None])
    if ridge is None:
        ridge = (RIDGE_SCALE * float(np.einsum("ij,ij->", fold.h_pos, fold.h_pos))
                 / bank.weight_dim)
    solution = _ridge_lstsq(fold.h_pos, target.T, ridge)
    return solution.T.ravel()


def fit_distribution(demos, bank: BasisBank, ridge: float | None = None,
                     cov_floor: float = DEFAULT_COV_FLOOR) -> WeightsDistribution:
    """Empirical Gaussian over per-demonstration fits: mean of the fits,
    unbiased covariance plus cov_floor on the diagonal."""
    demos = list(demos)
    if len(demos) < 2:
        raise ValidationError(
            f"distribution fitting needs >= 2 demonstrations, got {len(demos)}")
    if cov_floor < 0.0:
        raise ValidationError(f"cov_floor must be >= 0, got {cov_floor}")
    dofs = demos[0].dofs
    for i, demo in enumerate(demos[1:], start=1):
        if demo.dofs != dofs:
            raise DimensionError(
                f"demonstration {i} has {demo.dofs} DoFs, expected {dofs}")
    fits = np.stack([fit_weights(demo, bank, ridge) for demo in demos])
    mean = fits.mean(axis=0)
    centered = fits - mean
    cov = (centered.T @ centered) / (len(demos) - 1)
    cov[np.diag_indices_from(cov)] += cov_floor
    return WeightsDistribution.from_covariance(mean, cov)


@dataclass(frozen=True)
class LatentGaussian:
    """Factorized Gaussian: elementwise mean and strictly positive variance."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        var = np.atleast_1d(np.array(self.var, dtype=float))
        if mean.shape != var.shape or mean.ndim != 1:
            raise DimensionError(
                f"mean {mean.shape} and var {var.shape} must be equal-length vectors")
        if np.any(var <= 0.0):
            raise ValidationError("variances must be strictly positive")
        mean.flags.writeable = False
        var.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def bayesian_aggregate(prior: LatentGaussian, observations) -> LatentGaussian:
    """Posterior from elementwise precision addition over the observations.

    var  = 1 / (1/var_prior + sum_m 1/var_m)
    mean = mean_prior + var * sum_m (mean_m - mean_prior) / var_m
    """
    observations = list(observations)
    if not observations:
        return prior
    for i, obs in enumerate(observations):
        if obs.dim != prior.dim:
            raise DimensionError(
                f"observation {i} has dimension {obs.dim}, prior has {prior.dim}")
    # canonical order makes the float sums independent of arrival order
    observations.sort(key=lambda obs: (obs.mean.tobytes(), obs.var.tobytes()))
    prec_sum = np.zeros(prior.dim)
    shift_sum = np.zeros(prior.dim)
    for obs in observations:
        prec_sum = prec_sum + 1.0 / obs.var
        shift_sum = shift_sum + (obs.mean - prior.mean) / obs.var
    var = 1.0 / (1.0 / prior.var + prec_sum)
    mean = prior.mean + var * shift_sum
    return LatentGaussian(mean=mean, var=var)
