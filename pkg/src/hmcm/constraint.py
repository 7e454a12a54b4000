"""Max-constraint transform, its loss, and the path prediction rule.

For a label ``A`` with inclusive descendant set ``D_A``:

* MCM output: ``max_{B in D_A} h_B``
* loss term: ``-y_A ln(max_{B in D_A} y_B h_B) - (1 - y_A) ln(1 - MCM_A)``

Every function accepts a single vector of length ``n`` or a ``(batch, n)``
array and returns arrays of the same rank. Gradients are subgradients with
respect to the raw probabilities, routed to the maximizing descendant (the
smallest canonical index among ties).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InconsistentTarget, LengthMismatch
from .hierarchy import LabelHierarchy, LabelSet

EPS = 1e-7


@dataclass(frozen=True)
class LossValue:
    total: float
    per_label: np.ndarray


def _as_2d(x, n: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise LengthMismatch(f"{what} has shape {np.shape(x)}, expected (..., {n})")
    return arr, single


def _targets(y, hier: LabelHierarchy) -> tuple[np.ndarray, bool]:
    y2, single = _as_2d(y, hier.label_count, "target")
    if not np.all((y2 == 0) | (y2 == 1)):
        raise InconsistentTarget("targets must be binary")
    yb = y2.astype(bool)
    if not hier.consistent_masks(yb).all():
        raise InconsistentTarget("target set is not upward-closed")
    return yb, single


def clamp(h: np.ndarray) -> np.ndarray:
    return np.clip(h, EPS, 1.0 - EPS)


def mcm_forward(h, hier: LabelHierarchy) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(mcm_output, argmax_trace)``."""
    h2, single = _as_2d(h, hier.label_count, "probability vector")
    out, trace = kernels.mcm_forward(h2, hier)
    if single:
        return out[0], trace[0]
    return out, trace


def mcm_backward(trace, grad_out) -> np.ndarray:
    """Route each output gradient to the input that attained the max."""
    g = np.asarray(grad_out, dtype=np.float64)
    t = np.asarray(trace, dtype=np.int64)
    if g.shape != t.shape:
        raise LengthMismatch(f"gradient shape {g.shape} does not match trace shape {t.shape}")
    single = g.ndim == 1
    res = kernels.mcm_backward(np.atleast_2d(t), np.atleast_2d(g))
    return res[0] if single else res


def mcloss(h, y, hier: LabelHierarchy) -> tuple[LossValue, np.ndarray]:
    """Max-constraint loss and its gradient with respect to ``h``.

    ``h`` is clamped to ``[EPS, 1 - EPS]`` before use; the gradient is zero
    for entries the clamp touched. For a batch, ``total`` sums over samples
    and labels.
    """
    h2, single = _as_2d(h, hier.label_count, "probability vector")
    yb, _ = _targets(y, hier)
    if yb.shape != h2.shape:
        raise LengthMismatch(f"targets {yb.shape} vs probabilities {h2.shape}")
    yf = yb.astype(np.float64)

    hc = clamp(h2)
    live = (h2 >= EPS) & (h2 <= 1.0 - EPS)

    pos_max, pos_trace = kernels.mcm_forward(yf * hc, hier)
    neg_max, neg_trace = kernels.mcm_forward(hc, hier)

    pos_arg = np.clip(pos_max, EPS, 1.0)
    neg_arg = np.clip(1.0 - neg_max, EPS, 1.0)
    per = np.where(yb, -np.log(pos_arg), 0.0) + np.where(yb, 0.0, -np.log(neg_arg))

    g_pos = np.where(yb & (pos_max >= EPS), -1.0 / pos_arg, 0.0)
    g_neg = np.where(~yb & (1.0 - neg_max >= EPS), 1.0 / neg_arg, 0.0)
    grad = yf * kernels.mcm_backward(pos_trace, g_pos) + kernels.mcm_backward(neg_trace, g_neg)
    grad = np.where(live, grad, 0.0)

    if single:
        per, grad = per[0], grad[0]
    return LossValue(float(per.sum()), per), grad


def bce(h, y, hier: LabelHierarchy) -> tuple[LossValue, np.ndarray]:
    """Plain per-label binary cross-entropy, same conventions as :func:`mcloss`."""
    h2, single = _as_2d(h, hier.label_count, "probability vector")
    yb, _ = _targets(y, hier)
    hc = clamp(h2)
    live = (h2 >= EPS) & (h2 <= 1.0 - EPS)
    per = np.where(yb, -np.log(hc), -np.log(1.0 - hc))
    grad = np.where(yb, -1.0 / hc, 1.0 / (1.0 - hc))
    grad = np.where(live, grad, 0.0)
    if single:
        per, grad = per[0], grad[0]
    return LossValue(float(per.sum()), per), grad


def predict_masks(mcm_out, hier: LabelHierarchy) -> np.ndarray:
    """Boolean ``(batch, n)`` predictions: best leaf plus its ancestors."""
    m2, _ = _as_2d(mcm_out, hier.label_count, "MCM output")
    leaves = np.asarray(hier.leaves(), dtype=np.int64)
    # first maximizer among ascending leaf indices = smallest canonical index
    best = leaves[np.argmax(m2[:, leaves], axis=1)]
    return hier.closure[:, best].T.copy()


def predict_labels(mcm_out, hier: LabelHierarchy) -> LabelSet | list[LabelSet]:
    masks = predict_masks(mcm_out, hier)
    sets = [hier.from_mask(m) for m in masks]
    return sets[0] if np.ndim(mcm_out) == 1 else sets
