"""
Topology Autoencoder (vgae.py) | A relational variational graph autoencoder trained with clipped and perturbed per-example gradients.

Every relation contributes two message channels (as declared and reversed) and every layer adds a self-connection channel. Channel adjacencies are row-normalised so each node averages over its neighbours in that channel. The encoder is one shared layer followed by linear mean and log-deviation heads, the decoder is the logistic of an inner product.

One training record is a positive edge of the target relation together with its sampled negatives. Per-example gradients are computed with `torch.func`, clipped, summed, noised and averaged in `core.privacy.perturb_gradients`, then applied with plain gradient descent.

This file is part of HeteroGuard.

HeteroGuard is free software: you can redistribute it and/or modify it under the terms of the GNU General Public License as published by the Free Software Foundation, either version 3 of the License, or (at your option) any later version.
HeteroGuard is distributed in the hope that it will be useful, but WITHOUT ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU General Public License for more details.
You should have received a copy of the GNU General Public License along with HeteroGuard. If not, see <https://www.gnu.org/licenses/>.
"""

from dataclasses import dataclass, field
from logging import Logger, getLogger
from math import inf, sqrt
from pathlib import Path
from time import perf_counter
from typing import Any, Callable, Mapping

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor
from torch.func import grad, vmap

from blueprint.schemas import (
    PrivacySpec,
    TopologySection,
    TrainEpochRecord,
    TrainReport,
)
from core.constants import (
    LOGGER_NAME,
    SCHEMA_VERSION,
    EdgeArray,
    FloatMatrix,
    LossSign,
    NodeId,
    NodeTypeName,
    RelationName,
)
from core.evaluation import link_prediction_auc
from core.graph import EdgeSplit, HeteroGraph, RelationSignature
from core.privacy import (
    AccountantLedger,
    accountant_feasible,
    calibrate_noise_multiplier,
    perturb_gradients,
)
from utils.exceptions import (
    ConfigurationError,
    DatasetIngestionError,
    EncoderShapeError,
    InvalidArgumentError,
    NegativeSamplingError,
    NumericDivergenceError,
    PrivacyBudgetExceeded,
)
from utils.processors import as_plain_data, derive_generator, derive_torch_generator

logger: Logger = getLogger(LOGGER_NAME)

SELF_CHANNEL: str = "self"
INVERSE_SUFFIX: str = "~inverse"
ENCODER_LAYERS: tuple[str, ...] = ("shared", "mu", "logsigma")

# * Caps the log-deviation so the variance stays finite under large noisy weights.
MAX_LOGSIGMA: float = 10.0

# # Model Context — START


@dataclass(frozen=True, eq=False)
class TopologyContext:
    """
    Everything the encoder needs besides its weights: node offsets into one global index, the channel adjacencies and the input features.
    """

    offsets: dict[NodeTypeName, int]
    num_nodes: int
    adjacency: dict[str, Tensor]
    features: Tensor
    relation: RelationName
    signature: RelationSignature

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(self.adjacency)


def _row_normalised(rows: np.ndarray, columns: np.ndarray, num_nodes: int) -> Tensor:
    matrix = torch.zeros(num_nodes, num_nodes, dtype=torch.float64)

    if rows.size:
        matrix[torch.as_tensor(rows), torch.as_tensor(columns)] = 1.0

    degree = matrix.sum(dim=1, keepdim=True)
    return torch.where(degree > 0, matrix / degree.clamp(min=1.0), matrix)


def build_context(
    graph: HeteroGraph,
    split: EdgeSplit,
    features: Mapping[NodeTypeName, FloatMatrix],
) -> TopologyContext:
    """
    Builds the message-passing graph. Validation and test edges of the split relation are left out of it.

    Input rows are scaled to unit L2 norm.
    """
    offsets: dict[NodeTypeName, int] = {}
    cursor: int = 0

    for each_type in graph.schema.node_types:
        offsets[each_type] = cursor
        cursor += graph.node_count(each_type)

    widths: set[int] = {int(np.asarray(features[each]).shape[1]) for each in graph.schema.node_types}

    if len(widths) != 1:
        raise EncoderShapeError(
            expected="one feature width across node types", has=sorted(widths)
        )

    adjacency: dict[str, Tensor] = {}

    for each_relation, signature in graph.schema.relations.items():
        local: EdgeArray = (
            split.train if each_relation == split.relation else graph.edge_index(each_relation)
        )
        sources = local[:, 0] + offsets[signature.source]
        targets = local[:, 1] + offsets[signature.target]

        # * A target row aggregates its sources, and the reverse channel the other way round.
        adjacency[each_relation] = _row_normalised(targets, sources, cursor)
        adjacency[f"{each_relation}{INVERSE_SUFFIX}"] = _row_normalised(sources, targets, cursor)

    adjacency[SELF_CHANNEL] = torch.eye(cursor, dtype=torch.float64)

    return TopologyContext(
        offsets=offsets,
        num_nodes=cursor,
        adjacency=adjacency,
        features=F.normalize(
            torch.as_tensor(
                np.concatenate([np.asarray(features[each]) for each in graph.schema.node_types]),
                dtype=torch.float64,
            ),
            p=2.0,
            dim=1,
        ),
        relation=split.relation,
        signature=graph.schema.relations[split.relation],
    )


def to_global(context: TopologyContext, pairs: EdgeArray) -> EdgeArray:
    return np.stack(
        [
            pairs[:, 0] + context.offsets[context.signature.source],
            pairs[:, 1] + context.offsets[context.signature.target],
        ],
        axis=1,
    ).astype(np.int64).reshape(-1, 2)


# # Model Context — END

# # Parameters — START


@dataclass(eq=False)
class VgaeParams:
    """
    Weights keyed `<layer>/<channel>`, with layers `shared`, `mu` and `logsigma`.
    """

    tensors: dict[str, Tensor]
    input_dim: int
    hidden: int
    latent: int

    def layer(self, name: str) -> dict[str, Tensor]:
        return _layer(self.tensors, name)

    def clone(self) -> "VgaeParams":
        return VgaeParams(
            tensors={key: value.detach().clone() for key, value in self.tensors.items()},
            input_dim=self.input_dim,
            hidden=self.hidden,
            latent=self.latent,
        )


def _layer(tensors: Mapping[str, Tensor], name: str) -> dict[str, Tensor]:
    prefix: str = f"{name}/"
    return {key[len(prefix) :]: value for key, value in tensors.items() if key.startswith(prefix)}


def init_params(
    channels: tuple[str, ...], *, input_dim: int, hidden: int, latent: int, seed: int
) -> VgaeParams:
    """
    Uniform weights in [-1, 1] / sqrt(fan_in). One draw per layer is shared by every channel, so the untrained encoder treats all relations alike.
    """
    generator = derive_torch_generator(seed, module="vgae", purpose="init")
    shapes: dict[str, tuple[int, int]] = {
        "shared": (input_dim, hidden),
        "mu": (hidden, latent),
        "logsigma": (hidden, latent),
    }
    tensors: dict[str, Tensor] = {}

    for each_layer in ENCODER_LAYERS:
        fan_in, fan_out = shapes[each_layer]
        drawn = (
            torch.rand(fan_in, fan_out, generator=generator, dtype=torch.float64) * 2.0 - 1.0
        ) / sqrt(fan_in)

        for each_channel in channels:
            tensors[f"{each_layer}/{each_channel}"] = drawn.clone()

    return VgaeParams(tensors=tensors, input_dim=input_dim, hidden=hidden, latent=latent)


# # Parameters — END

# # Encoder and Decoder — START


@dataclass(frozen=True, eq=False)
class LatentState:
    mu: Tensor
    logvar: Tensor
    z: Tensor | None = None
    seed: int | None = None


def hetegcn_layer(
    adjacency: Mapping[str, Tensor],
    h: Tensor,
    weights: Mapping[str, Tensor],
    activation: Callable[[Tensor], Tensor] | None = None,
) -> Tensor:
    """
    Sums over channels the activated, neighbour-averaged and weighted messages, sum_c act(A_c h W_c).
    """
    missing: list[str] = [each for each in adjacency if each not in weights]

    if missing:
        raise ConfigurationError(f"No layer weights for channel(s) {missing}.")

    output: Tensor | None = None

    for each_channel, each_adjacency in adjacency.items():
        message = each_adjacency @ (h @ weights[each_channel])

        if activation is not None:
            message = activation(message)

        output = message if output is None else output + message

    if output is None:
        raise ConfigurationError("The layer has no channel to aggregate over.")

    return output


def _encode(tensors: Mapping[str, Tensor], context: TopologyContext) -> tuple[Tensor, Tensor]:
    hidden = hetegcn_layer(context.adjacency, context.features, _layer(tensors, "shared"), F.relu)
    mu = hetegcn_layer(context.adjacency, hidden, _layer(tensors, "mu"))
    logsigma = hetegcn_layer(context.adjacency, hidden, _layer(tensors, "logsigma"))

    return mu, 2.0 * logsigma.clamp(max=MAX_LOGSIGMA)


def encode(context: TopologyContext, params: VgaeParams) -> LatentState:
    mu, logvar = _encode(params.tensors, context)
    return LatentState(mu=mu, logvar=logvar)


def reparameterize(latent: LatentState, seed: int, *, iteration: int = 0) -> LatentState:
    noise = torch.randn(
        latent.mu.shape,
        generator=derive_torch_generator(seed, module="vgae", purpose="reparameterize", iteration=iteration),
        dtype=latent.mu.dtype,
    )
    return LatentState(
        mu=latent.mu,
        logvar=latent.logvar,
        z=latent.mu + torch.exp(0.5 * latent.logvar) * noise,
        seed=seed,
    )


def decode(z_u: Tensor, z_v: Tensor) -> Tensor:
    return torch.sigmoid((z_u * z_v).sum(dim=-1))


def score_pairs(embeddings: Tensor, pairs: EdgeArray) -> np.ndarray:
    """
    Link probabilities of global (u, v) pairs.
    """
    index = torch.as_tensor(pairs, dtype=torch.long).reshape(-1, 2)

    with torch.no_grad():
        return decode(embeddings[index[:, 0]], embeddings[index[:, 1]]).numpy()


# # Encoder and Decoder — END

# # Objective — START


def negative_sample(
    graph: HeteroGraph,
    relation: RelationName,
    positives: EdgeArray,
    k: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Draws `k` uniform non-neighbour targets of the source of every positive edge.

    Returns:
        np.ndarray: (len(positives), k) local target positions.

    Raises:
        NegativeSamplingError: When a source is linked to every candidate target.
    """
    if k < 1:
        raise InvalidArgumentError(f"The negative count must be at least 1, got {k}.")

    signature: RelationSignature = graph.schema.relations[relation]
    num_targets: int = graph.node_count(signature.target)
    neighbours: dict[int, set[int]] = {}

    for source, target in graph.edge_index(relation).tolist():
        neighbours.setdefault(source, set()).add(target)

    candidates: dict[int, np.ndarray] = {}
    draws = np.empty((positives.shape[0], k), dtype=np.int64)

    for row, source in enumerate(positives[:, 0].tolist()):
        if source not in candidates:
            excluded: set[int] = neighbours.get(source, set())

            if signature.source == signature.target:
                excluded = excluded | {source}

            candidates[source] = np.array(
                [each for each in range(num_targets) if each not in excluded], dtype=np.int64
            )

        if candidates[source].size == 0:
            raise NegativeSamplingError(
                f"Source {graph.node_ids[signature.source][source]} of `{relation}` links to every target.",
                "Lower the negative count or use a sparser relation.",
            )

        draws[row] = candidates[source][rng.integers(0, candidates[source].size, size=k)]

    return draws


def recon_terms(positive_scores: Tensor, negative_scores: Tensor) -> Tensor:
    """
    -log s(q) - k * mean_j log s(-p_j) per positive, with `negative_scores` shaped (..., k).
    """
    k: int = negative_scores.shape[-1]
    return -F.logsigmoid(positive_scores) - k * F.logsigmoid(-negative_scores).mean(dim=-1)


def recon_loss(positive_scores: Tensor, negative_scores: Tensor, k: int | None = None) -> Tensor:
    resolved_negatives = negative_scores.reshape(positive_scores.shape[0], k or -1)
    return recon_terms(positive_scores, resolved_negatives).mean()


def kl_loss(latent: LatentState) -> Tensor:
    return 0.5 * (latent.mu**2 + torch.exp(latent.logvar) - 1.0 - latent.logvar).sum()


def _kl_sign(config: TopologySection) -> float:
    return (-1.0 if config.loss_sign is LossSign.LITERAL else 1.0) * config.kl_weight


def example_loss(
    tensors: dict[str, Tensor],
    positive: Tensor,
    negative_targets: Tensor,
    noise: Tensor,
    context: TopologyContext,
    kl_factor: float,
) -> Tensor:
    """
    The loss of one record: a positive global pair (2,) and its global negative targets (k,). The KL term is shared evenly across the nodes.
    """
    mu, logvar = _encode(tensors, context)
    z = mu + torch.exp(0.5 * logvar) * noise
    endpoints = z.index_select(0, positive)
    negatives = z.index_select(0, negative_targets)
    positive_score = (endpoints[0] * endpoints[1]).sum()
    negative_scores = (negatives * endpoints[0]).sum(dim=-1)
    kl = 0.5 * (mu**2 + torch.exp(logvar) - 1.0 - logvar).sum()

    return recon_terms(positive_score, negative_scores) + kl_factor * kl / context.num_nodes


def objective(
    tensors: dict[str, Tensor],
    positives: Tensor,
    negative_targets: Tensor,
    noise: Tensor,
    context: TopologyContext,
    kl_factor: float,
) -> tuple[Tensor, Tensor, Tensor]:
    """
    The batch objective: (reconstruction, KL, total), with total the mean of the per-record losses.
    """
    mu, logvar = _encode(tensors, context)
    z = mu + torch.exp(0.5 * logvar) * noise
    positive_scores = (z[positives[:, 0]] * z[positives[:, 1]]).sum(dim=-1)
    negative_scores = (z[positives[:, 0]].unsqueeze(1) * z[negative_targets]).sum(dim=-1)
    reconstruction = recon_terms(positive_scores, negative_scores).mean()
    kl = kl_loss(LatentState(mu=mu, logvar=logvar))

    return reconstruction, kl, reconstruction + kl_factor * kl / context.num_nodes


# # Objective — END

# # Training — START


@dataclass
class TrainResult:
    params: VgaeParams
    report: TrainReport
    ledger: AccountantLedger
    noise_multiplier: float
    sampling_probability: float
    spec: PrivacySpec
    initial_params: VgaeParams = field(repr=False)


def resolve_topology_privacy(
    spec: PrivacySpec, *, train_size: int, batch_size: int
) -> tuple[PrivacySpec, float, float]:
    """
    Fills in the sampling probability and the noise multiplier. Returns the resolved spec with the effective (noise multiplier, clip bound).
    """
    sampling_probability: float = (
        spec.sampling_probability
        if spec.sampling_probability is not None
        else min(1.0, batch_size / max(train_size, 1))
    )

    if not spec.perturb_topology:
        return spec.copy(update={"sampling_probability": sampling_probability}), 0.0, inf

    noise_multiplier: float = (
        spec.noise_multiplier
        if spec.noise_multiplier is not None
        else calibrate_noise_multiplier(
            epsilon_s=spec.topology_budget,
            delta=spec.delta,
            sampling_probability=sampling_probability,
            iterations=spec.iterations,
            constant=spec.accountant_constant,
        )
    )
    resolved = spec.copy(
        update={
            "sampling_probability": sampling_probability,
            "noise_multiplier": noise_multiplier,
        }
    )
    return resolved, noise_multiplier, spec.clip_bound


def _flatten(per_example: Mapping[str, Tensor], keys: list[str]) -> np.ndarray:
    batch: int = per_example[keys[0]].shape[0]
    return torch.cat([per_example[each].reshape(batch, -1) for each in keys], dim=1).numpy()


def _unflatten(vector: np.ndarray, like: Mapping[str, Tensor], keys: list[str]) -> dict[str, Tensor]:
    unpacked: dict[str, Tensor] = {}
    cursor: int = 0

    for each in keys:
        size: int = like[each].numel()
        unpacked[each] = torch.as_tensor(vector[cursor : cursor + size]).reshape(like[each].shape)
        cursor += size

    return unpacked


def validation_auc(context: TopologyContext, params: VgaeParams, split: EdgeSplit) -> float | None:
    if not split.val.shape[0] or not split.val_neg.shape[0]:
        return None

    with torch.no_grad():
        mu = encode(context, params).mu

    return link_prediction_auc(
        score_pairs(mu, to_global(context, split.val)).tolist(),
        score_pairs(mu, to_global(context, split.val_neg)).tolist(),
    )


def train(
    graph: HeteroGraph,
    split: EdgeSplit,
    features: Mapping[NodeTypeName, FloatMatrix],
    config: TopologySection,
    spec: PrivacySpec,
    seed: int,
) -> TrainResult:
    """
    Runs `spec.iterations` epochs. Each epoch is one clipped and perturbed gradient step over a uniformly drawn batch of training edges with fresh negatives. The parameters with the best validation AUC are returned.

    Raises:
        PrivacyBudgetExceeded: When the accountant rejects the configured iteration count.
        NumericDivergenceError: When the loss or the update stops being finite.
    """
    context: TopologyContext = build_context(graph, split, features)
    train_edges: EdgeArray = split.train
    train_size: int = train_edges.shape[0]
    batch_size: int = min(config.batch_size, train_size)
    resolved_spec, noise_multiplier, clip_bound = resolve_topology_privacy(
        spec, train_size=train_size, batch_size=config.batch_size
    )
    assert resolved_spec.sampling_probability is not None

    if resolved_spec.perturb_topology:
        verdict, max_iterations = accountant_feasible(resolved_spec)

        if not verdict:
            raise PrivacyBudgetExceeded(
                f"{spec.iterations} iteration(s) exceed the accountant bound of {max_iterations}.",
                f"sigma = {noise_multiplier}, epsilon_s = {spec.epsilon_s}, P = {resolved_spec.sampling_probability}.",
            )
        ledger = AccountantLedger(verdict=verdict, max_iterations=max_iterations)
    else:
        ledger = AccountantLedger(verdict=True, max_iterations=None)

    params: VgaeParams = init_params(
        context.channels,
        input_dim=int(context.features.shape[1]),
        hidden=config.hidden,
        latent=config.latent,
        seed=seed,
    )
    initial_params: VgaeParams = params.clone()
    best_params: VgaeParams | None = None
    best_epoch: int | None = None
    best_auc: float | None = None
    records: list[TrainEpochRecord] = []

    if spec.iterations and train_size == 0:
        raise InvalidArgumentError(f"`{split.relation}` has no training edge to learn from.")

    keys: list[str] = sorted(params.tensors)
    kl_factor: float = _kl_sign(config)
    per_example_gradient = vmap(
        grad(example_loss), in_dims=(None, 0, 0, None, None, None)
    )
    target_offset: int = context.offsets[context.signature.target]

    for epoch in range(spec.iterations):
        started: float = perf_counter()
        chosen = derive_generator(seed, module="vgae", purpose="batch", iteration=epoch).choice(
            train_size, size=batch_size, replace=False
        )
        positives_local: EdgeArray = train_edges[np.sort(chosen)]
        negatives_local = negative_sample(
            graph,
            split.relation,
            positives_local,
            config.negatives,
            derive_generator(seed, module="vgae", purpose="negatives", iteration=epoch),
        )
        positives = torch.as_tensor(to_global(context, positives_local), dtype=torch.long)
        negative_targets = torch.as_tensor(negatives_local + target_offset, dtype=torch.long)
        noise = torch.randn(
            context.num_nodes,
            config.latent,
            generator=derive_torch_generator(seed, module="vgae", purpose="reparameterize", iteration=epoch),
            dtype=torch.float64,
        )

        with torch.no_grad():
            reconstruction, kl, total = objective(
                params.tensors, positives, negative_targets, noise, context, kl_factor
            )

        if not all(bool(torch.isfinite(each)) for each in (reconstruction, kl, total)):
            raise NumericDivergenceError(
                f"The topology loss diverged at epoch {epoch + 1}.",
                f"reconstruction = {float(reconstruction)}, KL = {float(kl)}.",
            )

        flattened = _flatten(
            per_example_gradient(params.tensors, positives, negative_targets, noise, context, kl_factor),
            keys,
        )
        raw_norms = np.linalg.norm(flattened, axis=1)
        noised = perturb_gradients(
            flattened,
            clip_bound,
            noise_multiplier,
            derive_generator(seed, module="vgae", purpose="gradient-noise", iteration=epoch),
        )

        if not np.all(np.isfinite(noised)):
            raise NumericDivergenceError(f"The gradient update diverged at epoch {epoch + 1}.")

        ledger.record(
            noise_multiplier=noise_multiplier,
            sampling_probability=resolved_spec.sampling_probability,
        )
        update = _unflatten(noised, params.tensors, keys)
        params = VgaeParams(
            tensors={
                each: params.tensors[each] - config.learning_rate * update[each] for each in keys
            },
            input_dim=params.input_dim,
            hidden=params.hidden,
            latent=params.latent,
        )
        val_auc: float | None = validation_auc(context, params, split)

        if val_auc is not None and (best_auc is None or val_auc > best_auc):
            best_auc, best_epoch, best_params = val_auc, epoch + 1, params.clone()

        records.append(
            TrainEpochRecord(
                epoch=epoch + 1,
                reconstruction=float(reconstruction),
                kl=float(kl),
                total=float(total),
                val_auc=val_auc,
                max_clipped_norm=float(min(raw_norms.max(), clip_bound)),
                wall_clock=perf_counter() - started,
            )
        )
        logger.debug(
            f"Topology epoch {epoch + 1}/{spec.iterations}: loss {float(total):.6f}, val AUC {val_auc}."
        )

    if best_epoch is not None:
        logger.info(f"Best validation AUC {best_auc:.4f} at epoch {best_epoch}.")

    report = TrainReport(
        epochs=records,
        accountant=ledger.snapshot(),
        best_epoch=best_epoch,
        best_val_auc=best_auc,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        hidden=config.hidden,
        latent=config.latent,
        noise_multiplier=noise_multiplier,
        sampling_probability=resolved_spec.sampling_probability,
    )
    return TrainResult(
        params=best_params or params,
        report=report,
        ledger=ledger,
        noise_multiplier=noise_multiplier,
        sampling_probability=resolved_spec.sampling_probability,
        spec=resolved_spec,
        initial_params=initial_params,
    )


# # Training — END

# # Reconstruction and Checkpoints — START


def reconstruct_relation(
    graph: HeteroGraph,
    context: TopologyContext,
    params: VgaeParams,
    count: int | None = None,
) -> list[tuple[NodeId, NodeId]]:
    """
    The `count` highest scoring type-correct pairs of the split relation, as a reconstructed edge list. Defaults to the edge count of the relation.
    """
    signature: RelationSignature = context.signature
    num_sources: int = graph.node_count(signature.source)
    num_targets: int = graph.node_count(signature.target)
    resolved_count: int = graph.edge_count(context.relation) if count is None else count

    with torch.no_grad():
        mu = encode(context, params).mu

    sources = mu[context.offsets[signature.source] : context.offsets[signature.source] + num_sources]
    targets = mu[context.offsets[signature.target] : context.offsets[signature.target] + num_targets]
    scores = (sources @ targets.T).numpy()

    if signature.source == signature.target:
        np.fill_diagonal(scores, -inf)

    # * Stable order on ties, by flat position.
    ranked = np.argsort(-scores, axis=None, kind="stable")[:resolved_count]
    rows, columns = np.unravel_index(ranked, scores.shape)

    return [
        (graph.node_ids[signature.source][row], graph.node_ids[signature.target][column])
        for row, column in zip(rows.tolist(), columns.tolist())
    ]


def save_checkpoint(
    path: Path,
    *,
    params: VgaeParams,
    spec: PrivacySpec,
    seed: int,
    ledger: AccountantLedger,
    features: Mapping[NodeTypeName, FloatMatrix],
    config: Mapping[str, Any],
) -> None:
    torch.save(
        {
            "schema_version": SCHEMA_VERSION,
            "params": {key: value.detach().clone() for key, value in params.tensors.items()},
            "dims": {"input": params.input_dim, "hidden": params.hidden, "latent": params.latent},
            "privacy": as_plain_data(spec),
            "seed": seed,
            "ledger": as_plain_data(ledger.snapshot()),
            "features": {
                each: torch.as_tensor(np.asarray(matrix)) for each, matrix in features.items()
            },
            "config": as_plain_data(dict(config)),
        },
        path,
    )
    logger.info(f"Checkpoint written to `{path}`.")


@dataclass(frozen=True, eq=False)
class Checkpoint:
    params: VgaeParams
    spec: PrivacySpec
    seed: int
    ledger: dict[str, Any]
    features: dict[NodeTypeName, FloatMatrix]
    config: dict[str, Any]


def load_checkpoint(path: Path) -> Checkpoint:
    if not path.is_file():
        raise DatasetIngestionError(str(path), "the checkpoint does not exist.")

    try:
        payload: dict[str, Any] = torch.load(path, weights_only=True)
    except Exception as e:  # ! torch raises a wide range of errors on corrupt files.
        raise DatasetIngestionError(str(path), f"the checkpoint is unreadable: {e}") from e

    if payload.get("schema_version") != SCHEMA_VERSION:
        raise DatasetIngestionError(
            str(path),
            f"schema version {payload.get('schema_version')} is not {SCHEMA_VERSION}.",
        )

    return Checkpoint(
        params=VgaeParams(
            tensors=dict(payload["params"]),
            input_dim=payload["dims"]["input"],
            hidden=payload["dims"]["hidden"],
            latent=payload["dims"]["latent"],
        ),
        spec=PrivacySpec.parse_obj(payload["privacy"]),
        seed=payload["seed"],
        ledger=payload["ledger"],
        features={
            NodeTypeName(each): matrix.numpy() for each, matrix in payload["features"].items()
        },
        config=payload["config"],
    )


# # Reconstruction and Checkpoints — END
