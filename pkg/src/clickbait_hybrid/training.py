"""Loss, parameter initialization, the adadelta optimizer, dataset split,
and the mini-batch training loop.

Everything here is deterministic given the config seed: initialization draws
come from one generator in a fixed order, and each epoch's shuffle uses a
generator derived from (seed, epoch).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from . import model as model_mod
from . import tensor as tc
from .embeddings import CharCnnParams
from .metrics import compute_metrics
from .model import (
    AttentionParams,
    FeatureTables,
    FusionParams,
    LstmCellParams,
    ModelConfig,
    ModelParams,
    SiameseParams,
)
from .tensor import DimensionError, Tensor

if TYPE_CHECKING:  # pragma: no cover
    from .data_io import PostRecord

PROB_EPS = 1e-7


def bce_loss(p: Tensor, label: int) -> Tensor:
    """Binary cross-entropy of one probability against a hard label.

    ``p`` is clamped to [PROB_EPS, 1 - PROB_EPS] before the log so the loss
    stays finite at saturated predictions.
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    clamped = tc.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    if label == 1:
        return -tc.log(clamped)
    return -tc.log(1.0 - clamped)


def glorot_uniform(fanin: int, fanout: int, rng, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Uniform samples strictly inside +/- sqrt(6 / (fanin + fanout)).

    ``rng`` is an int seed or a numpy Generator. ``shape`` defaults to
    (fanout, fanin), i.e. rows index outputs.
    """
    if fanin < 1 or fanout < 1:
        raise ValueError(f"fans must be positive, got ({fanin}, {fanout})")
    rng = np.random.default_rng(rng)
    bound = math.sqrt(6.0 / (fanin + fanout))
    if shape is None:
        shape = (fanout, fanin)
    out = rng.uniform(-bound, bound, size=shape)
    # uniform() can return its low endpoint; redraw the measure-zero hits
    while True:
        edge = np.abs(out) >= bound
        if not edge.any():
            return out
        out[edge] = rng.uniform(-bound, bound, size=int(edge.sum()))


@dataclass
class AdadeltaState:
    """Running second-moment accumulators, one pair per named parameter."""

    rho: float = 0.95
    epsilon: float = 1e-6
    sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    sq_update: dict[str, np.ndarray] = field(default_factory=dict)


def adadelta_step(
    params: dict[str, Tensor], grads: dict[str, np.ndarray | None], state: AdadeltaState
) -> None:
    """One adadelta update, in place.

    Per parameter: decay-accumulate the squared gradient, scale the step by
    sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps), apply it, then decay-accumulate
    the squared step. A missing gradient counts as zero (accumulators still
    decay, the parameter is unchanged).
    """
    rho, eps = state.rho, state.epsilon
    for name, p in params.items():
        g = grads.get(name)
        if g is not None and g.shape != p.data.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, expected {p.data.shape}")
        sq_g = state.sq_grad.get(name)
        if sq_g is None:
            sq_g = state.sq_grad[name] = np.zeros_like(p.data)
            state.sq_update[name] = np.zeros_like(p.data)
        sq_dx = state.sq_update[name]
        sq_g *= rho
        if g is None:
            sq_dx *= rho
            continue
        sq_g += (1.0 - rho) * g * g
        delta = -np.sqrt(sq_dx + eps) / np.sqrt(sq_g + eps) * g
        p.data = p.data + delta
        sq_dx *= rho
        sq_dx += (1.0 - rho) * delta * delta


def split_train_val(
    records: Sequence, ratio: tuple[int, int] = (4, 1), seed: int = 0
) -> tuple[list, list]:
    """Deterministic shuffled split; the training side gets ceil(n * a/(a+b))."""
    a, b = ratio
    if a < 1 or b < 1:
        raise ValueError(f"split ratio parts must be positive, got {ratio}")
    n = len(records)
    if n < 5:
        raise ValueError(f"need at least 5 records to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = math.ceil(n * a / (a + b))
    train = [records[i] for i in order[:n_train]]
    val = [records[i] for i in order[n_train:]]
    return train, val


def init_char_cnn(chars: Iterable[str], config: ModelConfig, rng: np.random.Generator) -> CharCnnParams:
    """Character table (rows 0/1 reserved for pad/unk) plus the conv stack."""
    vocab = sorted(set(chars))
    char_index = {ch: i + 2 for i, ch in enumerate(vocab)}
    n_rows = len(vocab) + 2
    table = Tensor(
        glorot_uniform(n_rows, config.char_dim, rng, shape=(n_rows, config.char_dim)),
        requires_grad=True,
    )
    convs = []
    c_in = config.char_dim
    for c_out in config.char_channels:
        w = config.conv_width
        kernels = Tensor(
            glorot_uniform(w * c_in, w * c_out, rng, shape=(w, c_in, c_out)), requires_grad=True
        )
        bias = Tensor(np.zeros(c_out), requires_grad=True)
        convs.append((kernels, bias))
        c_in = c_out
    return CharCnnParams(char_index=char_index, table=table, convs=convs, width=config.conv_width)


def init_model_params(
    config: ModelConfig, chars: Iterable[str], title_cap: int, seed: int
) -> ModelParams:
    """Fresh trainable parameters: Glorot-uniform weights, zero biases."""
    if title_cap < 1:
        raise ValueError(f"title cap must be positive, got {title_cap}")
    rng = np.random.default_rng(seed)
    char_cnn = init_char_cnn(chars, config, rng)
    h = config.hidden_size
    d = config.title_input_dim

    def weight(fanin: int, fanout: int, shape: tuple[int, ...] | None = None) -> Tensor:
        return Tensor(glorot_uniform(fanin, fanout, rng, shape), requires_grad=True)

    def bias(n: int) -> Tensor:
        return Tensor(np.zeros(n), requires_grad=True)

    def lstm() -> LstmCellParams:
        return LstmCellParams(
            gate_weights=weight(h + d, 3 * h),
            gate_bias=bias(3 * h),
            candidate_weights=weight(h + d, h),
            candidate_bias=bias(h),
        )

    def siamese(with_projection: bool) -> SiameseParams:
        project_w = project_b = None
        if with_projection:
            project_w = weight(config.image_dim, config.doc_dim)
            project_b = bias(config.doc_dim)
        return SiameseParams(
            layer1_w=weight(config.doc_dim, config.siamese_hidden),
            layer1_b=bias(config.siamese_hidden),
            layer2_w=weight(config.siamese_hidden, config.siamese_out),
            layer2_b=bias(config.siamese_out),
            project_w=project_w,
            project_b=project_b,
        )

    return ModelParams(
        config=config,
        title_cap=title_cap,
        char_cnn=char_cnn,
        lstm_fwd=lstm(),
        lstm_bwd=lstm(),
        attention=AttentionParams(
            score_weights=weight(2 * h, config.attention_size),
            score_vector=weight(config.attention_size, 1, shape=(config.attention_size,)),
        ),
        text_siamese=siamese(with_projection=False),
        visual_siamese=siamese(with_projection=True),
        fusion=FusionParams(
            weights=weight(config.fusion_input_dim, 1, shape=(config.fusion_input_dim,)),
            bias=Tensor(np.zeros(()), requires_grad=True),
        ),
    )


@dataclass
class TrainConfig:
    batch_size: int = 256
    seed: int = 0
    max_epochs: int = 50
    split_ratio: tuple[int, int] = (4, 1)
    threshold: float = 0.5
    rho: float = 0.95
    epsilon: float = 1e-6
    patience: int = 10
    title_cap: int | None = None  # overrides the max training-title length
    stop_at_train_accuracy: float | None = None
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch size must be positive, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max epochs must be positive, got {self.max_epochs}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_f1: float
    val_accuracy: float


@dataclass
class TrainResult:
    best_params: ModelParams  # highest validation F1
    final_params: ModelParams  # as of the last epoch run
    trace: list[EpochStats]
    best_epoch: int
    title_cap: int


def _predict_all(params: ModelParams, records: Sequence, tables: FeatureTables) -> list[float]:
    with tc.no_grad():
        return [model_mod.forward(params, r, tables).item() for r in records]


def train(config: TrainConfig, records: Sequence["PostRecord"], tables: FeatureTables) -> TrainResult:
    """Mini-batch adadelta on mean BCE with a deterministic 4:1 split.

    Keeps the highest-validation-F1 parameters, stops early after
    ``config.patience`` epochs without improvement, and optionally once
    training accuracy reaches ``config.stop_at_train_accuracy``.
    """
    train_recs, val_recs = split_train_val(records, config.split_ratio, config.seed)
    title_cap = config.title_cap or max(
        [len(r.post_title_tokens) for r in train_recs] + [1]
    )
    chars = {ch for r in train_recs for token in r.post_title_tokens for ch in token}
    params = init_model_params(config.model, chars, title_cap, config.seed)
    named = params.named_tensors()
    state = AdadeltaState(rho=config.rho, epsilon=config.epsilon)

    trace: list[EpochStats] = []
    best_f1 = -1.0
    best_epoch = -1
    best_params = params.clone()
    epochs_since_best = 0

    for epoch in range(config.max_epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_recs))
        loss_total = 0.0
        correct = 0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            for t in named.values():
                t.grad = None
            batch_loss = None
            for i in batch:
                record = train_recs[i]
                p = model_mod.forward(params, record, tables)
                correct += (p.item() >= config.threshold) == (record.label == 1)
                loss = bce_loss(p, record.label)
                batch_loss = loss if batch_loss is None else batch_loss + loss
            batch_loss = batch_loss * (1.0 / len(batch))
            tc.backward(batch_loss)
            adadelta_step(named, {k: t.grad for k, t in named.items()}, state)
            loss_total += batch_loss.item() * len(batch)

        val_preds = _predict_all(params, val_recs, tables)
        val_report = compute_metrics(val_preds, [r.label for r in val_recs], config.threshold)
        stats = EpochStats(
            epoch=epoch,
            train_loss=loss_total / len(train_recs),
            train_accuracy=correct / len(train_recs),
            val_f1=val_report.f1,
            val_accuracy=val_report.accuracy,
        )
        trace.append(stats)

        if stats.val_f1 > best_f1:
            best_f1 = stats.val_f1
            best_epoch = epoch
            best_params = params.clone()
            epochs_since_best = 0
        else:
            epochs_since_best += 1

        if (
            config.stop_at_train_accuracy is not None
            and stats.train_accuracy >= config.stop_at_train_accuracy
        ):
            break
        if epochs_since_best >= config.patience:
            break

    return TrainResult(
        best_params=best_params,
        final_params=params,
        trace=trace,
        best_epoch=best_epoch,
        title_cap=title_cap,
    )
