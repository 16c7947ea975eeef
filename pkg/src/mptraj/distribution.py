"""Gaussian trajectory distributions induced by a Gaussian over weights.

A weights distribution N(mu_wg, L L^T) maps through the boundary-folded basis
H to a joint Gaussian over any selected (time, DoF) indices:

    mu  = xi1 y_b + xi2 dy_b + H^T mu_wg
    cov = H^T (L L^T) H + noise_var I

The joint covariance is materialized only over caller-selected times (probe
points, random pairs); full-horizon materialization is deliberately not the
default path.  Index layout is DoF-major: all times of DoF 0, then DoF 1, ...

Covariances are carried as Cholesky factors end-to-end; sampling happens in
weight space (w = mu + L z), so every sample satisfies the boundary condition
exactly, bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import BasisBank
from .errors import DimensionError, NumericalError, ValidationError
from .fileio import atomic_write_json, atomic_write_text
from .trajectory import BoundaryCondition, folded_basis

# the observation white-noise default keeps pair covariances invertible
DEFAULT_NOISE_VAR = 1e-6


@dataclass(frozen=True)
class WeightsDistribution:
    """Gaussian over the stacked weights-and-goal vector, as mean + lower
    Cholesky factor.  allow_semidefinite permits a zero diagonal (degenerate
    covariance), used as a deterministic-limit test hook."""

    mean: np.ndarray
    chol: np.ndarray
    allow_semidefinite: bool = False

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        chol = np.array(self.chol, dtype=float)
        if mean.ndim != 1:
            raise DimensionError("weights mean must be a vector")
        if chol.shape != (mean.shape[0], mean.shape[0]):
            raise DimensionError(
                f"Cholesky factor {chol.shape} does not match mean length {mean.shape[0]}")
        if np.any(np.triu(chol, k=1) != 0.0):
            raise ValidationError("Cholesky factor must be lower-triangular")
        diag = np.diag(chol)
        if self.allow_semidefinite:
            if np.any(diag < 0.0):
                raise ValidationError("Cholesky diagonal must be non-negative")
        elif np.any(diag <= 0.0):
            raise ValidationError(
                "Cholesky diagonal must be strictly positive (use from_covariance, "
                "or allow_semidefinite for the degenerate test hook)")
        mean.flags.writeable = False
        chol.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def covariance(self) -> np.ndarray:
        return self.chol @ self.chol.T

    @classmethod
    def from_covariance(cls, mean, cov) -> "WeightsDistribution":
        cov = np.asarray(cov, dtype=float)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            eigs = np.linalg.eigvalsh(0.5 * (cov + cov.T))
            raise NumericalError(
                f"weights covariance is not positive definite "
                f"(minimum eigenvalue {eigs.min():.3e})") from exc
        return cls(mean=mean, chol=chol)


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Joint Gaussian over an ordered list of (time, dof) indices."""

    index_set: tuple
    mean: np.ndarray
    cov: np.ndarray
    noise_var: float

    def __post_init__(self):
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        cov = np.array(self.cov, dtype=float)
        if cov.shape != (mean.shape[0], mean.shape[0]) or len(self.index_set) != mean.shape[0]:
            raise DimensionError(
                f"index set ({len(self.index_set)}), mean ({mean.shape}) and "
                f"cov ({cov.shape}) do not align")
        if not np.array_equal(cov, cov.T):
            raise ValidationError("trajectory covariance must be symmetric")
        if self.noise_var < 0.0:
            raise ValidationError("noise_var must be >= 0")
        mean.flags.writeable = False
        cov.flags.writeable = False
        object.__setattr__(self, "index_set", tuple(self.index_set))
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_weights_dim(wdist: WeightsDistribution, bc: BoundaryCondition,
                       bank: BasisBank) -> int:
    dofs = bc.dofs
    if wdist.dim != dofs * bank.weight_dim:
        raise DimensionError(
            f"weights distribution dimension {wdist.dim} does not match "
            f"{dofs} DoFs x {bank.weight_dim} parameters")
    return dofs


def trajectory_distribution(wdist: WeightsDistribution, bc: BoundaryCondition,
                            times, bank: BasisBank,
                            noise_var: float = DEFAULT_NOISE_VAR) -> TrajectoryDistribution:
    """Joint Gaussian over all (requested time, DoF) pairs, DoF-major."""
    if noise_var < 0.0:
        raise ValidationError("noise_var must be >= 0")
    dofs = _check_weights_dim(wdist, bc, bank)
    fold = folded_basis(bc, times, bank)
    t_count = fold.times.shape[0]
    wd = bank.weight_dim

    mu_blocks = wdist.mean.reshape(dofs, wd)
    mean = (fold.xi1 * bc.y_b[:, None] + fold.xi2 * bc.dy_b[:, None]
            + mu_blocks @ fold.h_pos.T).ravel()

    h_full = np.zeros((wdist.dim, dofs * t_count))
    for d in range(dofs):
        h_full[d * wd:(d + 1) * wd, d * t_count:(d + 1) * t_count] = fold.h_pos.T
    gmat = wdist.chol.T @ h_full
    cov = gmat.T @ gmat
    cov = 0.5 * (cov + cov.T)
    cov[np.diag_indices_from(cov)] += noise_var

    index_set = tuple((float(t), d) for d in range(dofs) for t in fold.times)
    return TrajectoryDistribution(index_set=index_set, mean=mean, cov=cov,
                                  noise_var=noise_var)


def per_time_marginals(wdist: WeightsDistribution, bc: BoundaryCondition, times,
                       bank: BasisBank, noise_var: float = DEFAULT_NOISE_VAR):
    """Per-time D x D Gaussians (means (T, D), covs (T, D, D)) computed
    blockwise, without materializing the joint covariance."""
    if noise_var < 0.0:
        raise ValidationError("noise_var must be >= 0")
    dofs = _check_weights_dim(wdist, bc, bank)
    fold = folded_basis(bc, times, bank)
    t_count = fold.times.shape[0]
    wd = bank.weight_dim

    mu_blocks = wdist.mean.reshape(dofs, wd)
    means = (fold.xi1 * bc.y_b[:, None] + fold.xi2 * bc.dy_b[:, None]
             + mu_blocks @ fold.h_pos.T).T

    h_t = np.zeros((t_count, wdist.dim, dofs))
    for d in range(dofs):
        h_t[:, d * wd:(d + 1) * wd, d] = fold.h_pos
    gmat = np.einsum("qp,tqd->tpd", wdist.chol, h_t)
    covs = np.einsum("tpd,tpe->tde", gmat, gmat)
    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    covs[:, np.arange(dofs), np.arange(dofs)] += noise_var
    return fold.times.copy(), means, covs


def marginal(dist: TrajectoryDistribution, subset) -> TrajectoryDistribution:
    """Sub-vector and sub-matrix at integer positions into the index set."""
    subset = np.atleast_1d(np.asarray(subset, dtype=int))
    if subset.ndim != 1 or subset.size == 0:
        raise ValidationError("subset must be a non-empty index list")
    if subset.min() < 0 or subset.max() >= dist.dim:
        raise ValidationError(
            f"marginal index out of range: {subset.min()}..{subset.max()} "
            f"for dimension {dist.dim}")
    return TrajectoryDistribution(
        index_set=tuple(dist.index_set[i] for i in subset),
        mean=dist.mean[subset],
        cov=dist.cov[np.ix_(subset, subset)],
        noise_var=dist.noise_var)


def gaussian_nll(dist: TrajectoryDistribution, values) -> float:
    """Negative log density of `values` under the distribution."""
    values = np.asarray(values, dtype=float).ravel()
    if values.shape[0] != dist.dim:
        raise DimensionError(
            f"observation length {values.shape[0]} does not match dimension {dist.dim}")
    try:
        chol = np.linalg.cholesky(dist.cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "singular trajectory covariance; supply noise_var > 0 or a jitter") from exc
    white = np.linalg.solve(chol, values - dist.mean)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return 0.5 * (dist.dim * math.log(2.0 * math.pi) + log_det + float(white @ white))


def sample_trajectories(wdist: WeightsDistribution, bc: BoundaryCondition, times,
                        bank: BasisBank, count: int, seed,
                        with_velocities: bool = False):
    """count x D x len(times) positions from weight-space draws w = mu + L z,
    optionally paired with the matching velocities.

    Every sample adheres to the boundary condition exactly.  `seed` is an int
    seed or a numpy Generator; identical seeds give bit-identical output.
    """
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    dofs = _check_weights_dim(wdist, bc, bank)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((count, wdist.dim))
    draws = wdist.mean + z @ wdist.chol.T

    fold = folded_basis(bc, times, bank)
    base = fold.xi1 * bc.y_b[:, None] + fold.xi2 * bc.dy_b[:, None]
    blocks = draws.reshape(count, dofs, bank.weight_dim)
    positions = base[None, :, :] + np.einsum("cdn,tn->cdt", blocks, fold.h_pos)
    if not with_velocities:
        return positions
    vel_base = fold.dxi1 * bc.y_b[:, None] + fold.dxi2 * bc.dy_b[:, None]
    velocities = vel_base[None, :, :] + np.einsum("cdn,tn->cdt", blocks, fold.h_vel)
    return positions, velocities


@dataclass(frozen=True)
class TimePairBatch:
    """J time pairs, optionally with per-pair truth vectors (2D entries,
    DoF-major: dof0@t, dof0@t', dof1@t, ...)."""

    times: np.ndarray
    values: np.ndarray | None = None
    allow_equal: bool = False

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 2 or times.shape[1] != 2 or times.shape[0] < 1:
            raise DimensionError(f"pair times must have shape (J, 2), got {times.shape}")
        if not self.allow_equal and np.any(times[:, 0] == times[:, 1]):
            raise ValidationError(
                "pairs with t == t' are forbidden (their covariance is singular at "
                "zero noise); pass allow_equal=True to override")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        if self.values is not None:
            values = np.array(self.values, dtype=float)
            if values.ndim != 2 or values.shape[0] != times.shape[0] or values.shape[1] % 2:
                raise DimensionError(
                    f"truth values must have shape (J, 2*D), got {values.shape}")
            values.flags.writeable = False
            object.__setattr__(self, "values", values)

    @property
    def count(self) -> int:
        return self.times.shape[0]

    def with_values(self, values) -> "TimePairBatch":
        return TimePairBatch(times=self.times, values=values,
                             allow_equal=self.allow_equal)


def sample_time_pairs(times, count: int, seed) -> TimePairBatch:
    """Uniformly random unordered pairs of distinct grid times (no truth values)."""
    times = np.unique(np.asarray(times, dtype=float))
    if times.size < 2:
        raise ValidationError("pair sampling needs at least 2 distinct times")
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = times.size
    first = rng.integers(0, n, size=count)
    second = rng.integers(0, n - 1, size=count)
    second = second + (second >= first)
    low = np.minimum(first, second)
    high = np.maximum(first, second)
    return TimePairBatch(times=np.stack([times[low], times[high]], axis=1))


def pair_nll(batch: TimePairBatch, wdist: WeightsDistribution, bc: BoundaryCondition,
             bank: BasisBank, noise_var: float = DEFAULT_NOISE_VAR) -> float:
    """Mean negative log-likelihood over the batch's 2D-dimensional pair Gaussians."""
    if batch.values is None:
        raise ValidationError("pair batch carries no truth values")
    if batch.values.shape[1] != 2 * bc.dofs:
        raise DimensionError(
            f"truth vectors have {batch.values.shape[1]} entries, expected 2*{bc.dofs}")
    total = 0.0
    for j in range(batch.count):
        dist = trajectory_distribution(wdist, bc, batch.times[j], bank, noise_var)
        total += gaussian_nll(dist, batch.values[j])
    return total / batch.count


def _pack_lower(mat: np.ndarray) -> list:
    return mat[np.tril_indices(mat.shape[0])].tolist()


def _unpack_lower(values, dim: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (dim * (dim + 1) // 2,):
        raise DimensionError(
            f"packed lower triangle has {values.shape[0]} entries, "
            f"expected {dim * (dim + 1) // 2} for dimension {dim}")
    mat = np.zeros((dim, dim))
    mat[np.tril_indices(dim)] = values
    return mat


def trajectory_distribution_json_dict(dist: TrajectoryDistribution) -> dict:
    return {
        "index_set": [[t, d] for (t, d) in dist.index_set],
        "mean": dist.mean.tolist(),
        "cov_lower": _pack_lower(dist.cov),
        "noise_var": dist.noise_var,
    }


def write_trajectory_distribution_json(path: str, dist: TrajectoryDistribution) -> None:
    atomic_write_json(path, trajectory_distribution_json_dict(dist))


def weights_distribution_json_dict(wdist: WeightsDistribution, dofs: int,
                                   num_basis: int) -> dict:
    return {
        "dofs": int(dofs),
        "num_basis": int(num_basis),
        "mean": wdist.mean.tolist(),
        "chol_lower": _pack_lower(wdist.chol),
    }


def write_weights_distribution_json(path: str, wdist: WeightsDistribution,
                                    dofs: int, num_basis: int) -> None:
    atomic_write_json(path, weights_distribution_json_dict(wdist, dofs, num_basis))


def weights_distribution_from_dict(data: dict):
    """Returns (WeightsDistribution, dofs, num_basis)."""
    try:
        dofs = int(data["dofs"])
        num_basis = int(data["num_basis"])
        mean = np.asarray(data["mean"], dtype=float)
        chol = _unpack_lower(data["chol_lower"], mean.shape[0])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed weights-distribution record: {exc}") from exc
    if mean.shape[0] != dofs * (num_basis + 1):
        raise DimensionError(
            f"mean length {mean.shape[0]} does not match dofs*(num_basis+1) = "
            f"{dofs * (num_basis + 1)}")
    return WeightsDistribution(mean=mean, chol=chol), dofs, num_basis


def write_samples_csv(path: str, times, samples: np.ndarray) -> None:
    """Long-format sample dump: sample_id, t, dof0_pos, ... dof{D-1}_pos."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[2] != times.shape[0]:
        raise DimensionError(
            f"samples must have shape (count, D, {times.shape[0]}), got {samples.shape}")
    count, dofs, _ = samples.shape
    header = ["sample_id", "t"] + [f"dof{d}_pos" for d in range(dofs)]
    lines = [",".join(header)]
    for c in range(count):
        for j, t in enumerate(times):
            row = [str(c), f"{t:.17g}"]
            row += [f"{samples[c, d, j]:.17g}" for d in range(dofs)]
            lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")
