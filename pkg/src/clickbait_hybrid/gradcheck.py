"""Finite-difference verification of every differentiable operation.

Each check runs several random instances: compute gradients with backward(),
then compare against central finite differences of the forward value. The
comparison is max relative error with a floored denominator so near-zero
gradients don't amplify finite-difference noise. Instances are seeded, so a
passing suite is deterministic.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import embeddings as emb
from . import model as model_mod
from . import tensor as tc
from . import training
from .data_io import FeatureBank, PostRecord
from .embeddings import CharCnnParams, EmbeddingTable
from .model import FeatureTables, ModelConfig
from .tensor import Tensor

STEP = 1e-5
OP_TOL = 1e-4
MODEL_TOL = 1e-3
_FLOOR = 1e-3
_INSTANCES = 10


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


@dataclass
class GradcheckReport:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = []
        for c in self.checks:
            status = "ok" if c.passed else "FAIL"
            lines.append(f"{c.name:<18} max_rel_err={c.max_rel_err:.3e} tol={c.tolerance:.0e} {status}")
        return "\n".join(lines)


def numeric_grad(value: Callable[[], float], x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central finite differences of ``value()`` with respect to every entry
    of ``x``, perturbing ``x`` in place and restoring it."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        hi = value()
        flat[i] = original - step
        lo = value()
        flat[i] = original
        grad_flat[i] = (hi - lo) / (2.0 * step)
    return grad


def numeric_grad_at(value: Callable[[], float], x: np.ndarray, index: int, step: float = STEP) -> float:
    flat = x.reshape(-1)
    original = flat[index]
    flat[index] = original + step
    hi = value()
    flat[index] = original - step
    lo = value()
    flat[index] = original
    return (hi - lo) / (2.0 * step)


def rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = _FLOOR) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / denom).max())


def _run_case(leaves: dict[str, Tensor], build: Callable[[], Tensor]) -> float:
    """Max relative error over all leaves for one instance."""
    loss = build()
    tc.backward(loss)
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in leaves.items()
    }
    for t in leaves.values():
        t.grad = None

    def value() -> float:
        with tc.no_grad():
            return build().item()

    worst = 0.0
    for name, t in leaves.items():
        worst = max(worst, rel_err(analytic[name], numeric_grad(value, t.data)))
    return worst


def _leaf(rng: np.random.Generator, shape, scale: float = 1.0) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


def _away_from(rng: np.random.Generator, shape, margin: float = 0.05, scale: float = 1.0) -> Tensor:
    """Random values with |x| >= margin (keeps finite differences off kinks)."""
    magnitude = rng.uniform(margin, 2.0 * scale, size=shape)
    sign = np.where(rng.random(size=shape) < 0.5, -1.0, 1.0)
    return Tensor(magnitude * sign, requires_grad=True)


def _weighted_sum(out: Tensor, u: np.ndarray) -> Tensor:
    return (out * Tensor(u)).sum()


def _check(name: str, tolerance: float, case: Callable[[np.random.Generator], float], seed: int,
           instances: int = _INSTANCES) -> CheckResult:
    worst = 0.0
    for i in range(instances):
        rng = np.random.default_rng([seed, zlib.crc32(name.encode()), i])
        worst = max(worst, case(rng))
    return CheckResult(name=name, max_rel_err=worst, tolerance=tolerance)


# ---------------------------------------------------------------------------
# per-op cases


def _case_matmul(rng: np.random.Generator) -> float:
    m, k, n = rng.integers(1, 5, size=3)
    variant = rng.integers(0, 4)
    if variant == 0:
        a, b = _leaf(rng, (m, k)), _leaf(rng, (k, n))
    elif variant == 1:
        a, b = _leaf(rng, (m, k)), _leaf(rng, (k,))
    elif variant == 2:
        a, b = _leaf(rng, (k,)), _leaf(rng, (k, n))
    else:
        a, b = _leaf(rng, (k,)), _leaf(rng, (k,))
    u = rng.normal(size=np.matmul(a.data, b.data).shape)
    return _run_case({"a": a, "b": b}, lambda: _weighted_sum(tc.matmul(a, b), u))


def _binary_case(op) -> Callable[[np.random.Generator], float]:
    def case(rng: np.random.Generator) -> float:
        shape = tuple(rng.integers(1, 5, size=int(rng.integers(1, 3))))
        a = _leaf(rng, shape)
        b = _leaf(rng, ()) if rng.random() < 0.3 else _leaf(rng, shape)  # scalar broadcast
        u = rng.normal(size=shape)
        return _run_case({"a": a, "b": b}, lambda: _weighted_sum(op(a, b), u))

    return case


def _unary_case(op, sampler) -> Callable[[np.random.Generator], float]:
    def case(rng: np.random.Generator) -> float:
        shape = tuple(rng.integers(1, 5, size=int(rng.integers(1, 3))))
        x = sampler(rng, shape)
        u = rng.normal(size=shape)
        return _run_case({"x": x}, lambda: _weighted_sum(op(x), u))

    return case


def _case_clamp(rng: np.random.Generator) -> float:
    shape = (int(rng.integers(2, 6)),)
    values = rng.uniform(-2.0, 2.0, size=shape)
    # keep every entry a safe distance from the clamp boundaries
    for bound in (-0.8, 0.8):
        close = np.abs(values - bound) < 0.05
        values[close] = bound + 0.1
    x = Tensor(values, requires_grad=True)
    u = rng.normal(size=shape)
    return _run_case({"x": x}, lambda: _weighted_sum(tc.clamp(x, -0.8, 0.8), u))


def _case_concat(rng: np.random.Generator) -> float:
    axis = int(rng.integers(0, 2))
    base = [int(rng.integers(1, 4)), int(rng.integers(1, 4))]
    pieces = []
    for _ in range(int(rng.integers(2, 4))):
        shape = list(base)
        shape[axis] = int(rng.integers(1, 4))
        pieces.append(_leaf(rng, tuple(shape)))
    out_shape = np.concatenate([p.data for p in pieces], axis=axis).shape
    u = rng.normal(size=out_shape)
    leaves = {f"p{i}": p for i, p in enumerate(pieces)}
    return _run_case(leaves, lambda: _weighted_sum(tc.concat(pieces, axis=axis), u))


def _case_narrow(rng: np.random.Generator) -> float:
    rows = int(rng.integers(3, 7))
    cols = int(rng.integers(1, 4))
    x = _leaf(rng, (rows, cols))
    start = int(rng.integers(0, rows - 1))
    length = int(rng.integers(1, rows - start + 1))
    u = rng.normal(size=(length, cols))
    return _run_case({"x": x}, lambda: _weighted_sum(tc.narrow(x, 0, start, length), u))


def _case_reshape(rng: np.random.Generator) -> float:
    x = _leaf(rng, (2, 6))
    u = rng.normal(size=(3, 4))
    return _run_case({"x": x}, lambda: _weighted_sum(tc.reshape(x, (3, 4)), u))


def _case_sum(rng: np.random.Generator) -> float:
    x = _leaf(rng, tuple(rng.integers(1, 5, size=2)))
    return _run_case({"x": x}, lambda: x.sum())


def _case_gather_rows(rng: np.random.Generator) -> float:
    rows = int(rng.integers(3, 7))
    table = _leaf(rng, (rows, int(rng.integers(1, 4))))
    idx = rng.integers(0, rows, size=int(rng.integers(2, 7)))  # repeats are likely
    u = rng.normal(size=(idx.size, table.shape[1]))
    return _run_case({"table": table}, lambda: _weighted_sum(tc.gather_rows(table, idx), u))


def _case_conv1d(rng: np.random.Generator) -> float:
    steps = int(rng.integers(6, 9))
    c_in = int(rng.integers(1, 4))
    c_out = int(rng.integers(1, 4))
    width = int(rng.integers(2, 4))
    x = _leaf(rng, (steps, c_in))
    kernels = _leaf(rng, (width, c_in, c_out))
    bias = _leaf(rng, (c_out,))
    u = rng.normal(size=(steps - width + 1, c_out))
    return _run_case(
        {"x": x, "kernels": kernels, "bias": bias},
        lambda: _weighted_sum(tc.conv1d(x, kernels, bias), u),
    )


def _case_maxpool(rng: np.random.Generator) -> float:
    steps = int(rng.integers(3, 7))
    channels = int(rng.integers(1, 4))
    values = rng.normal(0.0, 1.0, size=(steps, channels))
    # widen each column's winning margin so finite differences can't flip it
    winners = np.argmax(values, axis=0)
    values[winners, np.arange(channels)] += 0.5
    x = Tensor(values, requires_grad=True)
    u = rng.normal(size=(channels,))
    return _run_case({"x": x}, lambda: _weighted_sum(tc.maxpool_over_time(x), u))


def _case_softmax(rng: np.random.Generator) -> float:
    x = _leaf(rng, (int(rng.integers(2, 7)),), scale=2.0)
    u = rng.normal(size=x.shape)
    return _run_case({"x": x}, lambda: _weighted_sum(tc.softmax(x), u))


def _case_bce(rng: np.random.Generator) -> float:
    p = Tensor(rng.uniform(0.05, 0.95, size=()), requires_grad=True)
    label = int(rng.integers(0, 2))
    return _run_case({"p": p}, lambda: training.bce_loss(p, label))


def _case_lstm_cell(rng: np.random.Generator) -> float:
    h, d = 3, 4
    params = model_mod.LstmCellParams(
        gate_weights=_leaf(rng, (3 * h, h + d), scale=0.5),
        gate_bias=_leaf(rng, (3 * h,), scale=0.3),
        candidate_weights=_leaf(rng, (h, h + d), scale=0.5),
        candidate_bias=_leaf(rng, (h,), scale=0.3),
    )
    x_t = _leaf(rng, (d,))
    h0 = _leaf(rng, (h,), scale=0.5)
    c0 = _leaf(rng, (h,), scale=0.5)
    u_h = rng.normal(size=(h,))
    u_c = rng.normal(size=(h,))
    leaves = {
        "gate_weights": params.gate_weights,
        "gate_bias": params.gate_bias,
        "candidate_weights": params.candidate_weights,
        "candidate_bias": params.candidate_bias,
        "x_t": x_t,
        "h0": h0,
        "c0": c0,
    }

    def build() -> Tensor:
        state = model_mod.lstm_cell(params, x_t, model_mod.LstmState(hidden=h0, cell=c0))
        return _weighted_sum(state.hidden, u_h) + _weighted_sum(state.cell, u_c)

    return _run_case(leaves, build)


def _small_char_cnn(rng: np.random.Generator) -> CharCnnParams:
    chars = ["a", "b", "c", "d"]
    return CharCnnParams(
        char_index={ch: i + 2 for i, ch in enumerate(chars)},
        table=_leaf(rng, (len(chars) + 2, 4), scale=0.5),
        convs=[
            (_leaf(rng, (2, 4, 5), scale=0.5), _leaf(rng, (5,), scale=0.2)),
            (_leaf(rng, (2, 5, 6), scale=0.5), _leaf(rng, (6,), scale=0.2)),
        ],
        width=2,
    )


def _case_char_cnn(rng: np.random.Generator) -> float:
    params = _small_char_cnn(rng)
    token = "".join(rng.choice(["a", "b", "c", "d", "z"], size=int(rng.integers(1, 6))))
    leaves = {"table": params.table}
    for i, (kernels, bias) in enumerate(params.convs):
        leaves[f"kernels{i}"] = kernels
        leaves[f"bias{i}"] = bias
    u = rng.normal(size=(params.out_dim,))
    return _run_case(leaves, lambda: _weighted_sum(emb.embed_word_chars(params, token), u))


def _case_attention(rng: np.random.Generator) -> float:
    steps, width, att = 5, 6, 4
    n = int(rng.integers(1, steps + 1))
    annotations = _leaf(rng, (steps, width))
    params = model_mod.AttentionParams(
        score_weights=_leaf(rng, (att, width), scale=0.5),
        score_vector=_leaf(rng, (att,), scale=0.5),
    )
    mask = np.arange(steps) < n
    u = rng.normal(size=(width,))
    leaves = {
        "annotations": annotations,
        "score_weights": params.score_weights,
        "score_vector": params.score_vector,
    }

    def build() -> Tensor:
        context, _ = model_mod.attention(params, annotations, mask)
        return _weighted_sum(context, u)

    return _run_case(leaves, build)


def _siamese_params(rng: np.random.Generator, in_dim: int, with_projection: bool) -> model_mod.SiameseParams:
    hidden, out = 5, 4
    return model_mod.SiameseParams(
        layer1_w=_leaf(rng, (hidden, in_dim), scale=0.5),
        layer1_b=_away_from(rng, (hidden,), margin=0.2, scale=0.3),
        layer2_w=_leaf(rng, (out, hidden), scale=0.5),
        layer2_b=_away_from(rng, (out,), margin=0.2, scale=0.3),
        project_w=_leaf(rng, (in_dim, 7), scale=0.4) if with_projection else None,
        project_b=_leaf(rng, (in_dim,), scale=0.2) if with_projection else None,
    )


def _case_siamese_text(rng: np.random.Generator) -> float:
    in_dim = 6
    params = _siamese_params(rng, in_dim, with_projection=False)
    left = _leaf(rng, (in_dim,))
    right = _leaf(rng, (in_dim,))
    u = rng.normal(size=(params.out_dim,))
    leaves = {
        "layer1_w": params.layer1_w,
        "layer1_b": params.layer1_b,
        "layer2_w": params.layer2_w,
        "layer2_b": params.layer2_b,
        "left": left,
        "right": right,
    }
    return _run_case(leaves, lambda: _weighted_sum(model_mod.siamese_text(params, left, right), u))


def _case_siamese_visual(rng: np.random.Generator) -> float:
    in_dim = 6
    params = _siamese_params(rng, in_dim, with_projection=True)
    image = _leaf(rng, (7,))
    doc = _leaf(rng, (in_dim,))
    u = rng.normal(size=(params.out_dim,))
    leaves = {
        "project_w": params.project_w,
        "project_b": params.project_b,
        "layer1_w": params.layer1_w,
        "layer2_w": params.layer2_w,
        "image": image,
        "doc": doc,
    }
    return _run_case(leaves, lambda: _weighted_sum(model_mod.siamese_visual(params, image, doc), u))


# ---------------------------------------------------------------------------
# end-to-end model check


def _model_fixture(seed: int):
    rng = np.random.default_rng([seed, 4242])
    tokens = ["breaking", "secret", "#story", "unreal"]
    desc_tokens = ["quiet", "report", "details"]
    words = {t: rng.normal(0.0, 0.2, emb.WORD_DIM) for t in tokens + desc_tokens}
    word_table = EmbeddingTable(dim=emb.WORD_DIM, entries=words)
    record = PostRecord(
        id="r1",
        post_title_tokens=tokens,
        target_title="quiet report",
        target_description="quiet report details",
        target_keywords=[],
        image_id="img1",
        label=1,
    )
    # title doc vector present; description falls back to mean word vectors
    doc_table = EmbeddingTable(
        dim=emb.DOC_DIM, entries={emb.title_doc_id("r1"): rng.normal(0.0, 0.2, emb.DOC_DIM)}
    )
    bank = FeatureBank(dim=4096, entries={"img1": rng.normal(0.0, 0.05, 4096)})
    chars = sorted({ch for t in tokens for ch in t})
    params = training.init_model_params(ModelConfig(), chars, len(tokens), seed)
    tables = FeatureTables(word=word_table, doc=doc_table, images=bank)
    return params, record, tables


def check_full_model(seed: int = 0, n_coords: int = 20, tolerance: float = MODEL_TOL) -> CheckResult:
    """Loss gradient on one synthetic record vs central differences at
    ``n_coords`` randomly sampled parameter coordinates."""
    params, record, tables = _model_fixture(seed)
    named = params.named_tensors()

    def build() -> Tensor:
        return training.bce_loss(model_mod.forward(params, record, tables), record.label)

    loss = build()
    tc.backward(loss)
    analytic = {k: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data)) for k, t in named.items()}
    for t in named.values():
        t.grad = None

    def value() -> float:
        with tc.no_grad():
            return build().item()

    rng = np.random.default_rng([seed, 77])
    names = list(named)
    worst = 0.0
    for _ in range(n_coords):
        name = names[int(rng.integers(0, len(names)))]
        tensor = named[name]
        index = int(rng.integers(0, tensor.data.size))
        numeric = numeric_grad_at(value, tensor.data, index)
        worst = max(worst, rel_err(analytic[name].reshape(-1)[index], numeric))
    return CheckResult(name="full_model", max_rel_err=worst, tolerance=tolerance)


def run_full_suite(seed: int = 0) -> GradcheckReport:
    """Every differentiable op plus the end-to-end model gradient."""
    checks = [
        _check("matmul", OP_TOL, _case_matmul, seed),
        _check("add", OP_TOL, _binary_case(tc.add), seed),
        _check("sub", OP_TOL, _binary_case(tc.sub), seed),
        _check("mul", OP_TOL, _binary_case(tc.mul), seed),
        _check("sigmoid", OP_TOL, _unary_case(tc.sigmoid, _leaf), seed),
        _check("tanh", OP_TOL, _unary_case(tc.tanh, _leaf), seed),
        _check("relu", OP_TOL, _unary_case(tc.relu, _away_from), seed),
        _check("absolute", OP_TOL, _unary_case(tc.absolute, _away_from), seed),
        _check("log", OP_TOL, _unary_case(tc.log, lambda r, s: Tensor(r.uniform(0.2, 3.0, s), requires_grad=True)), seed),
        _check("clamp", OP_TOL, _case_clamp, seed),
        _check("concat", OP_TOL, _case_concat, seed),
        _check("narrow", OP_TOL, _case_narrow, seed),
        _check("reshape", OP_TOL, _case_reshape, seed),
        _check("sum", OP_TOL, _case_sum, seed),
        _check("gather_rows", OP_TOL, _case_gather_rows, seed),
        _check("conv1d", OP_TOL, _case_conv1d, seed),
        _check("maxpool_over_time", OP_TOL, _case_maxpool, seed),
        _check("softmax", OP_TOL, _case_softmax, seed),
        _check("bce_loss", OP_TOL, _case_bce, seed),
        _check("lstm_cell", OP_TOL, _case_lstm_cell, seed),
        _check("char_cnn", OP_TOL, _case_char_cnn, seed),
        _check("attention", OP_TOL, _case_attention, seed),
        _check("siamese_text", OP_TOL, _case_siamese_text, seed),
        _check("siamese_visual", OP_TOL, _case_siamese_visual, seed),
        check_full_model(seed),
    ]
    return GradcheckReport(checks=checks)
