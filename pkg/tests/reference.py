"""Hand-rolled reference implementations used as test oracles.

Everything here is written with plain Python loops and math so it shares no
code path with the package under test.
"""

from __future__ import annotations

import math
from typing import Sequence


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def lstm_cell_reference(
    gate_w: Sequence[Sequence[float]],
    gate_b: Sequence[float],
    cand_w: Sequence[Sequence[float]],
    cand_b: Sequence[float],
    x: Sequence[float],
    h_prev: Sequence[float],
    c_prev: Sequence[float],
) -> tuple[list[float], list[float]]:
    """Scalar transcription of one LSTM step (forget/update/output gate order)."""
    h_size = len(c_prev)
    joint = list(h_prev) + list(x)

    def row_dot(matrix, row, bias):
        total = 0.0
        for j, value in enumerate(joint):
            total += matrix[row][j] * value
        return total + bias[row]

    h_new = []
    c_new = []
    for r in range(h_size):
        f = sigmoid(row_dot(gate_w, r, gate_b))
        i = sigmoid(row_dot(gate_w, h_size + r, gate_b))
        o = sigmoid(row_dot(gate_w, 2 * h_size + r, gate_b))
        cand = math.tanh(row_dot(cand_w, r, cand_b))
        c = f * c_prev[r] + i * cand
        c_new.append(c)
        h_new.append(o * math.tanh(c))
    return h_new, c_new


def confusion_reference(
    probabilities: Sequence[float], labels: Sequence[int], threshold: float
) -> dict[str, int]:
    """Brute-force confusion counting."""
    counts = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
    for p, y in zip(probabilities, labels):
        predicted_positive = p >= threshold
        if predicted_positive:
            counts["tp" if y == 1 else "fp"] += 1
        else:
            counts["fn" if y == 1 else "tn"] += 1
    return counts


def conv1d_reference(x, kernels, bias):
    """Triple-loop valid cross-correlation; x (T, Cin), kernels (w, Cin, Cout)."""
    steps = len(x)
    width = len(kernels)
    c_in = len(x[0])
    c_out = len(bias)
    out = []
    for t in range(steps - width + 1):
        row = []
        for o in range(c_out):
            total = bias[o]
            for k in range(width):
                for c in range(c_in):
                    total += x[t + k][c] * kernels[k][c][o]
            row.append(total)
        out.append(row)
    return out
