"""NumPy fallback for the MCM kernels.

Uses the descendant-closure matrix directly: each label's output is a masked
max over its closure row. Row chunking bounds the ``(rows, n, n)`` temporary.
"""
import numpy as np

_CHUNK = 256


def mcm_forward(h: np.ndarray, closure: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows, n = h.shape
    out = np.empty((rows, n), dtype=np.float64)
    trace = np.empty((rows, n), dtype=np.int64)
    for lo in range(0, rows, _CHUNK):
        block = h[lo:lo + _CHUNK]
        masked = np.where(closure[None, :, :], block[:, None, :], -np.inf)
        # argmax returns the first maximizer, i.e. the smallest canonical index
        idx = masked.argmax(axis=2)
        trace[lo:lo + _CHUNK] = idx
        out[lo:lo + _CHUNK] = np.take_along_axis(block, idx, axis=1)
    return out, trace


def mcm_backward(trace: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    rows, n = grad_out.shape
    grad = np.zeros((rows, n), dtype=np.float64)
    r = np.broadcast_to(np.arange(rows)[:, None], (rows, n))
    np.add.at(grad, (r, trace), grad_out)
    return grad
