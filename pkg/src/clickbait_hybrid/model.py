"""The hybrid scorer.

A shared-weight-free composition of three signals per post: a BiLSTM with
additive attention over the embedded title, a Siamese branch comparing the
title's document vector with the target description's, and a second Siamese
branch comparing the attached image (projected to document space) with the
target description. The three outputs are concatenated and squashed to one
clickbait probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import tensor as tc
from .embeddings import (
    CharCnnParams,
    EmbeddingTable,
    description_doc_id,
    embed_title,
    lookup_doc,
    title_doc_id,
    tokenize,
)
from .tensor import DimensionError, Tensor

if TYPE_CHECKING:  # pragma: no cover
    from .data_io import FeatureBank, PostRecord


@dataclass
class ModelConfig:
    """Architecture widths. Defaults match the reference configuration."""

    hidden_size: int = 64  # per-direction LSTM width
    attention_size: int = 64
    char_dim: int = 16
    char_channels: tuple[int, int, int] = (32, 32, 32)
    conv_width: int = 3
    siamese_hidden: int = 128
    siamese_out: int = 64
    word_dim: int = 300
    doc_dim: int = 300
    image_dim: int = 4096

    @property
    def title_input_dim(self) -> int:
        return self.word_dim + self.char_channels[-1]

    @property
    def fusion_input_dim(self) -> int:
        return 2 * self.hidden_size + 2 * self.siamese_out


@dataclass
class LstmCellParams:
    """One direction's recurrent weights.

    ``gate_weights`` stacks the forget/update/output gate rows (3H of them);
    ``candidate_weights`` produces the tanh cell candidate. Both act on the
    concatenation [previous hidden, current input]. Biases are shared across
    time steps.
    """

    gate_weights: Tensor  # (3H, H + input_dim)
    gate_bias: Tensor  # (3H,)
    candidate_weights: Tensor  # (H, H + input_dim)
    candidate_bias: Tensor  # (H,)

    @property
    def hidden_size(self) -> int:
        return self.candidate_bias.shape[0]


@dataclass
class LstmState:
    hidden: Tensor
    cell: Tensor


def initial_state(hidden_size: int) -> LstmState:
    return LstmState(hidden=tc.zeros(hidden_size), cell=tc.zeros(hidden_size))


def lstm_cell(params: LstmCellParams, x_t: Tensor, state: LstmState) -> LstmState:
    """One LSTM step: gates from sigmoid, candidate from tanh, and the usual
    forget/update mix; the new hidden state is the output gate times tanh(cell)."""
    h = params.hidden_size
    joint = tc.concat([state.hidden, x_t], axis=0)
    gates = tc.sigmoid(tc.matmul(params.gate_weights, joint) + params.gate_bias)
    forget = tc.narrow(gates, 0, 0, h)
    update = tc.narrow(gates, 0, h, h)
    output = tc.narrow(gates, 0, 2 * h, h)
    candidate = tc.tanh(tc.matmul(params.candidate_weights, joint) + params.candidate_bias)
    cell = forget * state.cell + update * candidate
    hidden = output * tc.tanh(cell)
    return LstmState(hidden=hidden, cell=cell)


def _check_prefix_mask(mask: np.ndarray, rows: int, where: str) -> int:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (rows,):
        raise DimensionError(f"{where}: mask of shape {mask.shape} does not match {rows} rows")
    n = int(mask.sum())
    if not np.array_equal(mask, np.arange(rows) < n):
        raise ValueError(f"{where}: mask must be a contiguous prefix (padding only at the end)")
    return n


def bilstm(
    params_fwd: LstmCellParams, params_bwd: LstmCellParams, title: Tensor, mask: np.ndarray
) -> Tensor:
    """Per-step annotations (K, 2H): forward hidden states concatenated with
    backward hidden states. Masked rows stay exactly zero."""
    if title.ndim != 2:
        raise DimensionError(f"bilstm needs a 2-D title tensor, got shape {title.shape}")
    steps = title.shape[0]
    n = _check_prefix_mask(mask, steps, "bilstm")
    h = params_fwd.hidden_size
    if params_bwd.hidden_size != h:
        raise DimensionError("bilstm: directions disagree on hidden size")
    inputs = [tc.reshape(tc.narrow(title, 0, t, 1), (title.shape[1],)) for t in range(n)]

    forward_states = []
    state = initial_state(h)
    for x_t in inputs:
        state = lstm_cell(params_fwd, x_t, state)
        forward_states.append(state.hidden)

    backward_states: list[Tensor] = [None] * n  # type: ignore[list-item]
    state = initial_state(h)
    for t in range(n - 1, -1, -1):
        state = lstm_cell(params_bwd, inputs[t], state)
        backward_states[t] = state.hidden

    rows = [
        tc.reshape(tc.concat([forward_states[t], backward_states[t]], axis=0), (1, 2 * h))
        for t in range(n)
    ]
    if n < steps:
        rows.append(tc.zeros((steps - n, 2 * h)))
    return tc.concat(rows, axis=0)


@dataclass
class AttentionParams:
    """Additive attention: score_j = score_vector . tanh(score_weights . h_j)."""

    score_weights: Tensor  # (A, 2H)
    score_vector: Tensor  # (A,)


def attention(params: AttentionParams, annotations: Tensor, mask: np.ndarray) -> tuple[Tensor, Tensor]:
    """Return (context, weights): the softmax-weighted sum of unmasked
    annotation rows, and the weight vector over all rows (zeros on masked)."""
    if annotations.ndim != 2:
        raise DimensionError(f"attention needs 2-D annotations, got shape {annotations.shape}")
    steps = annotations.shape[0]
    n = _check_prefix_mask(mask, steps, "attention")
    if n == 0:
        raise ValueError("attention: all positions are masked")
    row_width = annotations.shape[1]
    rows = [tc.reshape(tc.narrow(annotations, 0, j, 1), (row_width,)) for j in range(n)]
    scores = [
        tc.reshape(tc.matmul(params.score_vector, tc.tanh(tc.matmul(params.score_weights, row))), (1,))
        for row in rows
    ]
    weights = tc.softmax(tc.concat(scores, axis=0))
    context = None
    for j, row in enumerate(rows):
        term = tc.reshape(tc.narrow(weights, 0, j, 1), ()) * row
        context = term if context is None else context + term
    if n < steps:
        weights = tc.concat([weights, tc.zeros(steps - n)], axis=0)
    return context, weights


@dataclass
class SiameseParams:
    """Two dense layers with ReLU, applied with shared weights to both inputs.

    The visual variant carries an extra affine projection that maps image
    features into document space before the shared branch.
    """

    layer1_w: Tensor
    layer1_b: Tensor
    layer2_w: Tensor
    layer2_b: Tensor
    project_w: Tensor | None = None
    project_b: Tensor | None = None

    @property
    def out_dim(self) -> int:
        return self.layer2_b.shape[0]


def _dense(w: Tensor, b: Tensor, x: Tensor) -> Tensor:
    return tc.matmul(w, x) + b


def _siamese_branch(params: SiameseParams, x: Tensor) -> Tensor:
    hidden = tc.relu(_dense(params.layer1_w, params.layer1_b, x))
    return tc.relu(_dense(params.layer2_w, params.layer2_b, hidden))


def siamese_text(params: SiameseParams, left: Tensor, right: Tensor) -> Tensor:
    """Elementwise |branch(left) - branch(right)| with shared branch weights."""
    return tc.absolute(_siamese_branch(params, left) - _siamese_branch(params, right))


def siamese_visual(params: SiameseParams, image_features: Tensor | None, doc_vec: Tensor) -> Tensor:
    """Visual similarity head. A missing image (None) yields an exact zero
    output and therefore no gradient into the projection."""
    if image_features is None:
        return tc.zeros(params.out_dim)
    if params.project_w is None or params.project_b is None:
        raise ValueError("visual siamese params are missing the image projection")
    projected = _dense(params.project_w, params.project_b, image_features)
    return tc.absolute(_siamese_branch(params, projected) - _siamese_branch(params, doc_vec))


@dataclass
class FusionParams:
    """Final affine layer onto one logit."""

    weights: Tensor  # (2H + 2 * siamese_out,)
    bias: Tensor  # ()


@dataclass
class ModelParams:
    """Every learnable weight of the model, grouped by component."""

    config: ModelConfig
    title_cap: int  # K: title rows per record, fixed at training time
    char_cnn: CharCnnParams
    lstm_fwd: LstmCellParams
    lstm_bwd: LstmCellParams
    attention: AttentionParams
    text_siamese: SiameseParams
    visual_siamese: SiameseParams
    fusion: FusionParams

    def named_tensors(self) -> dict[str, Tensor]:
        """All trainable tensors in a fixed, checkpoint-stable order."""
        named: dict[str, Tensor] = {"char_cnn.table": self.char_cnn.table}
        for i, (kernels, bias) in enumerate(self.char_cnn.convs):
            named[f"char_cnn.conv{i}.kernels"] = kernels
            named[f"char_cnn.conv{i}.bias"] = bias
        for tag, cell in (("lstm_fwd", self.lstm_fwd), ("lstm_bwd", self.lstm_bwd)):
            named[f"{tag}.gate_weights"] = cell.gate_weights
            named[f"{tag}.gate_bias"] = cell.gate_bias
            named[f"{tag}.candidate_weights"] = cell.candidate_weights
            named[f"{tag}.candidate_bias"] = cell.candidate_bias
        named["attention.score_weights"] = self.attention.score_weights
        named["attention.score_vector"] = self.attention.score_vector
        for tag, siamese in (("text_siamese", self.text_siamese), ("visual_siamese", self.visual_siamese)):
            if siamese.project_w is not None:
                named[f"{tag}.project_w"] = siamese.project_w
                named[f"{tag}.project_b"] = siamese.project_b
            named[f"{tag}.layer1_w"] = siamese.layer1_w
            named[f"{tag}.layer1_b"] = siamese.layer1_b
            named[f"{tag}.layer2_w"] = siamese.layer2_w
            named[f"{tag}.layer2_b"] = siamese.layer2_b
        named["fusion.weights"] = self.fusion.weights
        named["fusion.bias"] = self.fusion.bias
        return named

    def clone(self) -> "ModelParams":
        """Deep copy of all tensors (data only; grads are not carried over)."""

        def copy_tensor(t: Tensor | None) -> Tensor | None:
            return None if t is None else Tensor(t.data.copy(), requires_grad=True)

        def copy_siamese(s: SiameseParams) -> SiameseParams:
            return SiameseParams(
                layer1_w=copy_tensor(s.layer1_w),
                layer1_b=copy_tensor(s.layer1_b),
                layer2_w=copy_tensor(s.layer2_w),
                layer2_b=copy_tensor(s.layer2_b),
                project_w=copy_tensor(s.project_w),
                project_b=copy_tensor(s.project_b),
            )

        def copy_lstm(c: LstmCellParams) -> LstmCellParams:
            return LstmCellParams(
                gate_weights=copy_tensor(c.gate_weights),
                gate_bias=copy_tensor(c.gate_bias),
                candidate_weights=copy_tensor(c.candidate_weights),
                candidate_bias=copy_tensor(c.candidate_bias),
            )

        return ModelParams(
            config=self.config,
            title_cap=self.title_cap,
            char_cnn=CharCnnParams(
                char_index=dict(self.char_cnn.char_index),
                table=copy_tensor(self.char_cnn.table),
                convs=[(copy_tensor(k), copy_tensor(b)) for k, b in self.char_cnn.convs],
                width=self.char_cnn.width,
            ),
            lstm_fwd=copy_lstm(self.lstm_fwd),
            lstm_bwd=copy_lstm(self.lstm_bwd),
            attention=AttentionParams(
                score_weights=copy_tensor(self.attention.score_weights),
                score_vector=copy_tensor(self.attention.score_vector),
            ),
            text_siamese=copy_siamese(self.text_siamese),
            visual_siamese=copy_siamese(self.visual_siamese),
            fusion=FusionParams(
                weights=copy_tensor(self.fusion.weights), bias=copy_tensor(self.fusion.bias)
            ),
        )


@dataclass
class FeatureTables:
    """The pretrained lookups a forward pass needs."""

    word: EmbeddingTable
    doc: EmbeddingTable
    images: "FeatureBank | None" = None


def forward(params: ModelParams, record: "PostRecord", tables: FeatureTables) -> Tensor:
    """Clickbait probability for one record, as a scalar tensor in (0, 1)."""
    embedded = embed_title(tables.word, params.char_cnn, record.post_title_tokens, params.title_cap)
    annotations = bilstm(params.lstm_fwd, params.lstm_bwd, embedded.rows, embedded.mask)
    context, _ = attention(params.attention, annotations, embedded.mask)

    title_vec, _ = lookup_doc(
        tables.doc, title_doc_id(record.id), record.post_title_tokens, tables.word
    )
    desc_tokens = tokenize(record.target_description)
    desc_vec, _ = lookup_doc(
        tables.doc, description_doc_id(record.id), desc_tokens, tables.word
    )
    desc_tensor = Tensor(desc_vec)
    text_out = siamese_text(params.text_siamese, Tensor(title_vec), desc_tensor)

    image_tensor = None
    if record.image_id is not None and tables.images is not None:
        raw = tables.images.entries.get(record.image_id)
        if raw is not None:
            image_tensor = Tensor(raw)
    visual_out = siamese_visual(params.visual_siamese, image_tensor, desc_tensor)

    fused = tc.concat([context, text_out, visual_out], axis=0)
    logit = tc.matmul(params.fusion.weights, fused) + params.fusion.bias
    return tc.sigmoid(logit)
