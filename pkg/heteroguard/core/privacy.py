"""
Privacy Mechanisms (privacy.py) | The differential privacy arithmetic shared by both learning stages.

Contains the Gaussian calibration, per-node feature sensitivity, gradient clipping and perturbation, sequential composition of the two budgets and the per-iteration accountant. An empirical audit of the privacy loss is also provided for checking a mechanism against its claimed budget.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from dataclasses import dataclass, field
from logging import Logger, getLogger
from math import floor, inf, isfinite, log, nextafter, sqrt
from typing import Any, Callable, Sequence

import numpy as np

from blueprint.schemas import AccountantSnapshot, AuditHistogram, PrivacySpec
from core.constants import (
    BUDGET_NUDGE_LIMIT,
    DEFAULT_AUDIT_BINS,
    DEFAULT_AUDIT_MIN_BIN_COUNT,
    GAUSSIAN_CALIBRATION_CONSTANT,
    LOGGER_NAME,
    SIMPLEX_TOLERANCE,
    FloatMatrix,
    FloatVector,
    SensitivityReduction,
)
from utils.exceptions import (
    InvalidArgumentError,
    NumericDivergenceError,
    PrivacyBudgetExceeded,
    PrivacyRangeError,
    PrivacySpecError,
)
from utils.processors import derive_generator

logger: Logger = getLogger(LOGGER_NAME)

# * Accountant searches stop adjusting once the iteration count is past exact float resolution.
_ACCOUNTANT_ADJUSTMENT_LIMIT: int = 64

# # Budget Arithmetic — START


def compose(epsilon_f: float, epsilon_s: float, delta: float | None = None) -> float:
    """
    Sequential composition of the feature and the topology mechanisms. The failure probability `delta` is shared by both and passes through unchanged.
    """
    return epsilon_f + epsilon_s


def split_budget(
    epsilon: float,
    fraction: float | None = None,
    *,
    epsilon_f: float | None = None,
    epsilon_s: float | None = None,
) -> tuple[float, float]:
    """
    Splits the global budget into (epsilon_f, epsilon_s) so that `compose` returns `epsilon` exactly, not approximately.

    Exactly one of `fraction` (of epsilon spent on features), `epsilon_f` or `epsilon_s` is given. The other share is derived by subtraction and then moved by single units in the last place until the sum is exact.

    Raises:
        PrivacySpecError: When a share is not strictly positive or exact conservation is unreachable.
    """
    given: list[Any] = [each for each in (fraction, epsilon_f, epsilon_s) if each is not None]

    if len(given) != 1:
        raise PrivacySpecError(
            "Exactly one of the feature fraction, the feature share or the topology share must be given."
        )

    if fraction is not None:
        if not 0.0 < fraction < 1.0:
            raise PrivacySpecError(
                f"The feature fraction must lie in (0, 1), got {fraction}."
            )
        fixed, derived = fraction * epsilon, epsilon - fraction * epsilon
        fixed_is_feature = True
    elif epsilon_f is not None:
        fixed, derived = epsilon_f, epsilon - epsilon_f
        fixed_is_feature = True
    else:
        assert epsilon_s is not None
        fixed, derived = epsilon_s, epsilon - epsilon_s
        fixed_is_feature = False

    for _ in range(BUDGET_NUDGE_LIMIT):
        total: float = fixed + derived

        if total == epsilon:
            break

        derived = nextafter(derived, inf if total < epsilon else -inf)
    else:
        raise PrivacySpecError(
            f"Unable to split {epsilon!r} into shares that sum to it exactly.",
            f"Last attempt: {fixed!r} + {derived!r}.",
        )

    if fixed <= 0.0 or derived <= 0.0:
        raise PrivacySpecError(
            f"Both budget shares must be positive, got ({fixed!r}, {derived!r}) out of {epsilon!r}."
        )

    return (fixed, derived) if fixed_is_feature else (derived, fixed)


# # Budget Arithmetic — END

# # Gaussian Mechanism — START


def gaussian_sigma(
    epsilon: float,
    delta: float,
    sensitivity: float,
    *,
    allow_large_epsilon: bool = False,
) -> float:
    """
    The classical calibration of the Gaussian mechanism, `sqrt(2 ln(1.25 / delta)) * sensitivity / epsilon`.

    Args:
        epsilon (float): The budget of the mechanism. The calibration is only valid for 0 < epsilon < 1.
        delta (float): The failure probability, in (0, 1).
        sensitivity (float): The L2 sensitivity of the query.
        allow_large_epsilon (bool, optional): Keeps the same formula for epsilon >= 1 with a warning. Defaults to False.

    Raises:
        PrivacyRangeError: When any argument is outside of the validity range.

    Returns:
        float: The standard deviation per unit of noise.
    """
    if not 0.0 < delta < 1.0:
        raise PrivacyRangeError(f"The failure probability must lie in (0, 1), got {delta}.")

    if sensitivity < 0.0:
        raise PrivacyRangeError(f"The sensitivity cannot be negative, got {sensitivity}.")

    if epsilon <= 0.0:
        raise PrivacyRangeError(f"The budget must be positive, got {epsilon}.")

    if epsilon >= 1.0:
        if not allow_large_epsilon:
            raise PrivacyRangeError(
                f"The Gaussian calibration only holds for 0 < epsilon < 1, got {epsilon}.",
                "Set `privacy.allow_large_epsilon = true` to keep the same formula beyond this range.",
            )

        logger.warning(
            f"Calibrating the Gaussian mechanism at epsilon = {epsilon}, outside of the range where its guarantee was proven."
        )

    return sqrt(2.0 * log(GAUSSIAN_CALIBRATION_CONSTANT / delta)) * sensitivity / epsilon


def gaussian_mechanism(
    value: FloatVector | FloatMatrix | Sequence[float],
    sensitivity: float,
    sigma: float,
    rng: np.random.Generator,
) -> FloatVector | FloatMatrix:
    """
    Adds i.i.d. zero-mean Gaussian noise with standard deviation `sensitivity * sigma` to every coordinate.
    """
    resolved_value = np.asarray(value, dtype=np.float64)

    if not np.all(np.isfinite(resolved_value)):
        raise NumericDivergenceError(
            "The Gaussian mechanism received a non-finite value."
        )

    if sensitivity < 0.0 or sigma < 0.0:
        raise PrivacyRangeError(
            f"The sensitivity and the multiplier cannot be negative, got ({sensitivity}, {sigma})."
        )

    scale: float = sensitivity * sigma

    if scale == 0.0:
        return resolved_value.copy()

    return resolved_value + rng.normal(0.0, scale, size=resolved_value.shape)


def feature_sensitivity(
    alpha: FloatMatrix,
    beta: FloatVector,
    embedding_clip: float,
    *,
    reduction: SensitivityReduction = SensitivityReduction.SUM,
) -> FloatVector:
    """
    The per-node sensitivity of the fused embedding.

    `alpha` holds one row per meta-path (M x n) and `beta` the semantic weights (M,). The `SUM` reduction weights the node influence by `beta` the same way the embeddings are fused, while `MAX` takes the largest influence of a node over the meta-paths, which upper-bounds the weighted sum.
    """
    resolved_alpha = np.atleast_2d(np.asarray(alpha, dtype=np.float64))
    resolved_beta = np.asarray(beta, dtype=np.float64)

    if embedding_clip <= 0.0:
        raise InvalidArgumentError(
            f"The embedding clip must be positive, got {embedding_clip}."
        )

    if resolved_beta.ndim != 1 or resolved_alpha.shape[0] != resolved_beta.shape[0]:
        raise InvalidArgumentError(
            "The influence coefficients do not line up with the semantic coefficients.",
            f"alpha: {resolved_alpha.shape}, beta: {resolved_beta.shape}.",
        )

    if (
        np.any(resolved_beta < 0.0)
        or abs(float(resolved_beta.sum()) - 1.0) > SIMPLEX_TOLERANCE
    ):
        raise InvalidArgumentError(
            "The semantic coefficients are not on the simplex.",
            f"beta = {resolved_beta.tolist()}.",
        )

    if np.any(resolved_alpha < 0.0) or np.any(resolved_alpha > 1.0):
        raise InvalidArgumentError("The influence coefficients must lie in [0, 1].")

    if reduction is SensitivityReduction.MAX:
        return embedding_clip * resolved_alpha.max(axis=0)

    return embedding_clip * (resolved_beta @ resolved_alpha)


# # Gaussian Mechanism — END

# # Gradient Perturbation — START


def clip_gradient(gradient: FloatVector | Sequence[float], bound: float) -> FloatVector:
    """
    Scales the gradient down to the norm `bound` when it is longer. The returned norm never exceeds `bound`.
    """
    if bound <= 0.0:
        raise InvalidArgumentError(f"The clip bound must be positive, got {bound}.")

    resolved_gradient = np.asarray(gradient, dtype=np.float64)
    norm: float = float(np.linalg.norm(resolved_gradient))

    if norm <= bound:
        return resolved_gradient.copy()

    scale: float = bound / norm
    clipped = resolved_gradient * scale

    # * Rounding can leave the product a few units above the bound.
    while float(np.linalg.norm(clipped)) > bound:
        scale = nextafter(scale, 0.0)
        clipped = resolved_gradient * scale

    return clipped


def clip_batch(
    per_example_gradients: FloatMatrix | Sequence[FloatVector], bound: float
) -> FloatMatrix:
    """
    Clips every row of the batch to `bound`, measuring rows with the same row-wise norm that `perturb_gradients` checks them with.
    """
    if bound <= 0.0:
        raise InvalidArgumentError(f"The clip bound must be positive, got {bound}.")

    if len(per_example_gradients) == 0:
        raise InvalidArgumentError("Cannot clip an empty batch of gradients.")

    dimensions: set[int] = {np.asarray(each).shape[-1] for each in per_example_gradients}

    if len(dimensions) != 1:
        raise InvalidArgumentError(
            f"The per-example gradients differ in dimension: {sorted(dimensions)}."
        )

    stacked: FloatMatrix = np.asarray(per_example_gradients, dtype=np.float64).reshape(
        len(per_example_gradients), -1
    )
    norms: FloatVector = np.linalg.norm(stacked, axis=1)
    scales: FloatVector = np.ones_like(norms)
    longer = norms > bound
    scales[longer] = bound / norms[longer]
    clipped: FloatMatrix = stacked * scales[:, None]

    # * Rounding can leave a row a few units above the bound.
    over = np.linalg.norm(clipped, axis=1) > bound

    while np.any(over):
        scales[over] = np.nextafter(scales[over], 0.0)
        clipped[over] = stacked[over] * scales[over][:, None]
        over = np.linalg.norm(clipped, axis=1) > bound

    return clipped


def perturb_gradients(
    per_example_gradients: FloatMatrix | Sequence[FloatVector],
    bound: float,
    noise_multiplier: float,
    rng: np.random.Generator,
) -> FloatVector:
    """
    Clips every per-example gradient to `bound`, adds Gaussian noise with standard deviation `noise_multiplier * bound` to their sum and divides by the batch size.

    Raises:
        InvalidArgumentError: On an empty or ragged batch, or when noise is requested without a finite bound.
    """
    clipped: FloatMatrix = clip_batch(per_example_gradients, bound)

    if float(np.linalg.norm(clipped, axis=1).max()) > bound:
        raise NumericDivergenceError("A clipped gradient exceeded the clip bound.")

    summed: FloatVector = clipped.sum(axis=0)

    if noise_multiplier > 0.0:
        if not isfinite(bound):
            raise InvalidArgumentError(
                "Gradient noise requires a finite clip bound."
            )
        summed = summed + rng.normal(0.0, noise_multiplier * bound, size=summed.shape)

    return summed / clipped.shape[0]


# # Gradient Perturbation — END

# # Accountant — START


def _accountant_holds(
    *,
    noise_multiplier: float,
    epsilon_s: float,
    delta: float,
    sampling_probability: float,
    iterations: int,
    constant: float,
) -> bool:
    return noise_multiplier * epsilon_s >= constant * sampling_probability * sqrt(
        iterations * log(1.0 / delta)
    )


def max_feasible_iterations(
    *,
    noise_multiplier: float,
    epsilon_s: float,
    delta: float,
    sampling_probability: float,
    constant: float,
) -> int:
    """
    The largest iteration count T for which `noise_multiplier * epsilon_s >= constant * sampling_probability * sqrt(T ln(1 / delta))` holds.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(
            f"The failure probability must lie in (0, 1), got {delta}."
        )

    if sampling_probability <= 0.0 or constant <= 0.0 or epsilon_s <= 0.0:
        raise InvalidArgumentError(
            "The sampling probability, the accountant constant and the topology budget must be positive."
        )

    inequality_args: dict[str, float] = {
        "noise_multiplier": noise_multiplier,
        "epsilon_s": epsilon_s,
        "delta": delta,
        "sampling_probability": sampling_probability,
        "constant": constant,
    }

    estimate: int = floor(
        (noise_multiplier * epsilon_s / (constant * sampling_probability)) ** 2
        / log(1.0 / delta)
    )

    # - Settle the closed form against the inequality itself so that T passes and T + 1 fails.
    for _ in range(_ACCOUNTANT_ADJUSTMENT_LIMIT):
        if estimate <= 0 or _accountant_holds(iterations=estimate, **inequality_args):
            break
        estimate -= 1

    for _ in range(_ACCOUNTANT_ADJUSTMENT_LIMIT):
        if not _accountant_holds(iterations=estimate + 1, **inequality_args):
            break
        estimate += 1

    return max(estimate, 0)


def accountant_feasible(
    spec: PrivacySpec, *, sampling_probability: float | None = None
) -> tuple[bool, int]:
    """
    Checks the configured iteration count against the accountant inequality.

    Returns:
        tuple[bool, int]: The verdict for `spec.iterations` and the largest feasible iteration count.
    """
    resolved_probability: float | None = (
        sampling_probability
        if sampling_probability is not None
        else spec.sampling_probability
    )

    if spec.noise_multiplier is None or resolved_probability is None:
        raise InvalidArgumentError(
            "The accountant requires a resolved noise multiplier and sampling probability."
        )

    max_iterations: int = max_feasible_iterations(
        noise_multiplier=spec.noise_multiplier,
        epsilon_s=spec.topology_budget,
        delta=spec.delta,
        sampling_probability=resolved_probability,
        constant=spec.accountant_constant,
    )
    verdict: bool = spec.iterations <= max_iterations

    logger.info(
        f"Accountant verdict: {'within' if verdict else 'beyond'} budget for T = {spec.iterations} (max T = {max_iterations}, sigma = {spec.noise_multiplier:.6g}, P = {resolved_probability:.6g})."
    )
    return verdict, max_iterations


def calibrate_noise_multiplier(
    *,
    epsilon_s: float,
    delta: float,
    sampling_probability: float,
    iterations: int,
    constant: float,
) -> float:
    """
    The smallest noise multiplier that keeps `iterations` within the accountant inequality.
    """
    if iterations == 0:
        return 0.0

    inequality_args: dict[str, Any] = {
        "epsilon_s": epsilon_s,
        "delta": delta,
        "sampling_probability": sampling_probability,
        "iterations": iterations,
        "constant": constant,
    }
    noise_multiplier: float = (
        constant * sampling_probability * sqrt(iterations * log(1.0 / delta)) / epsilon_s
    )

    while not _accountant_holds(noise_multiplier=noise_multiplier, **inequality_args):
        noise_multiplier = nextafter(noise_multiplier, inf)

    return noise_multiplier


@dataclass
class AccountantLedger:
    """
    Single-writer record of the gradient steps taken by the topology training loop.
    """

    verdict: bool
    max_iterations: int | None  # * None when the accountant is not enforced.
    iterations_consumed: int = 0
    records: list[tuple[float, float]] = field(default_factory=list)

    def record(self, *, noise_multiplier: float, sampling_probability: float) -> None:
        if (
            self.max_iterations is not None
            and self.iterations_consumed >= self.max_iterations
        ):
            raise PrivacyBudgetExceeded(
                f"The accountant allows {self.max_iterations} iteration(s), all of which have been consumed."
            )

        self.records.append((noise_multiplier, sampling_probability))
        self.iterations_consumed += 1

    def snapshot(self) -> AccountantSnapshot:
        return AccountantSnapshot(
            iterations_consumed=self.iterations_consumed,
            records=list(self.records),
            verdict=self.verdict,
            max_iterations=self.max_iterations,
        )


# # Accountant — END

# # Empirical Audit — START


AuditMechanism = Callable[[Any, int, np.random.Generator], np.ndarray]


def empirical_privacy_audit(
    mechanism: AuditMechanism,
    reference: Any,
    neighbour: Any,
    *,
    samples: int,
    epsilon: float,
    seed: int,
    bins: int = DEFAULT_AUDIT_BINS,
    min_bin_count: int = DEFAULT_AUDIT_MIN_BIN_COUNT,
) -> AuditHistogram:
    """
    Estimates the privacy loss ln(Pr[M(D) = o] / Pr[M(D') = o]) over discretised outputs.

    `mechanism(data, size, rng)` returns `size` scalar outputs. Both inputs are fed from the same random stream, so identical inputs produce identical outputs and a loss of exactly zero. Bins are equal-mass quantiles of the reference outputs. Bins with fewer than `min_bin_count` samples on either side are flagged as undersampled, and bins observed only under the reference count as infinite loss.
    """
    if samples <= 0 or bins <= 0:
        raise InvalidArgumentError("The audit requires a positive sample and bin count.")

    reference_outputs = np.asarray(
        mechanism(reference, samples, derive_generator(seed, module="privacy", purpose="audit")),
        dtype=np.float64,
    )
    neighbour_outputs = np.asarray(
        mechanism(neighbour, samples, derive_generator(seed, module="privacy", purpose="audit")),
        dtype=np.float64,
    )

    if reference_outputs.shape != (samples,) or neighbour_outputs.shape != (samples,):
        raise InvalidArgumentError(
            f"The audited mechanism must return {samples} scalar outputs per input."
        )

    inner_edges = np.unique(
        np.quantile(reference_outputs, np.linspace(0.0, 1.0, bins + 1)[1:-1])
    )
    reference_counts = np.bincount(
        np.searchsorted(inner_edges, reference_outputs, side="right"),
        minlength=inner_edges.size + 1,
    )
    neighbour_counts = np.bincount(
        np.searchsorted(inner_edges, neighbour_outputs, side="right"),
        minlength=inner_edges.size + 1,
    )

    privacy_loss: list[float | None] = []
    exceeding_mass: int = 0

    for each_reference, each_neighbour in zip(reference_counts, neighbour_counts):
        if each_reference and each_neighbour:
            loss: float = log(each_reference / each_neighbour)
            privacy_loss.append(loss)

            if loss > epsilon:
                exceeding_mass += int(each_reference)
        else:
            privacy_loss.append(None)

            if each_reference:
                exceeding_mass += int(each_reference)

    histogram = AuditHistogram(
        epsilon=epsilon,
        samples=samples,
        bin_edges=[-inf, *inner_edges.tolist(), inf],
        reference_counts=reference_counts.tolist(),
        neighbour_counts=neighbour_counts.tolist(),
        privacy_loss=privacy_loss,
        undersampled=(np.minimum(reference_counts, neighbour_counts) < min_bin_count).tolist(),
        exceedance=exceeding_mass / samples,
    )

    logger.info(
        f"Privacy audit over {samples} samples and {len(privacy_loss)} bins: exceedance at epsilon = {epsilon} is {histogram.exceedance:.3g}, {sum(histogram.undersampled)} bin(s) undersampled."
    )
    return histogram


# # Empirical Audit — END
