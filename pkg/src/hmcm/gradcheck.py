"""Finite-difference checks for the loss and full-model gradients."""
from __future__ import annotations

import numpy as np

from . import constraint
from .hierarchy import LabelHierarchy, build_from_edges
from .network import NetworkConfig, backward, init_model, _forward_cache

STEP = 1e-6
GAP = 1e-4


def random_tree(rng: np.random.Generator, n_labels: int) -> LabelHierarchy:
    """Random forest of ``n_labels`` nodes; names are shuffled so canonical
    order is unrelated to depth."""
    names = [f"n{k:04d}" for k in rng.permutation(n_labels)]
    pairs, roots = [], []
    for i in range(n_labels):
        # roughly one root in ten beyond the first
        if i == 0 or rng.random() < 0.1:
            roots.append(names[i])
        else:
            pairs.append((names[i], names[int(rng.integers(0, i))]))
    linked = {lab for pr in pairs for lab in pr}
    return build_from_edges(pairs, [r for r in roots if r not in linked])


def random_target(rng: np.random.Generator, hier: LabelHierarchy) -> np.ndarray:
    seed_set = np.flatnonzero(rng.random(hier.label_count) < 0.3)
    return hier.to_mask(hier.close_upward(seed_set.tolist()))


def well_separated(values: np.ndarray, gap: float = GAP) -> bool:
    v = np.sort(np.ravel(values))
    return v.size < 2 or float(np.min(np.diff(v))) > gap


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.ravel(a), np.ravel(b)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if denom == 0 else float(np.linalg.norm(a - b) / denom)


def numeric_grad(f, x: np.ndarray, step: float = STEP) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x`` (``x`` is restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + step
        up = f()
        flat[i] = old - step
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * step)
    return g


def check_mcloss(rng: np.random.Generator, n_labels: int = 12) -> float:
    hier = random_tree(rng, n_labels)
    while True:
        h = rng.uniform(0.05, 0.95, hier.label_count)
        if well_separated(h):
            break
    y = random_target(rng, hier)
    _, grad = constraint.mcloss(h, y, hier)
    num = numeric_grad(lambda: constraint.mcloss(h, y, hier)[0].total, h)
    return relative_error(grad, num)


def check_model(rng: np.random.Generator, n_labels: int = 8, batch: int = 2) -> float:
    hier = random_tree(rng, n_labels)
    cfg = NetworkConfig(input_dim=4, label_count=hier.label_count, backbone_dims=(5, 4),
                        head_hidden=6, seed=int(rng.integers(2**32)))
    while True:
        model = init_model(cfg)
        for layer in model.layers:
            layer.bias[:] = rng.uniform(-0.3, 0.3, layer.bias.shape)
        x = rng.standard_normal((batch, cfg.input_dim))
        _, pre, s = _forward_cache(model, x)
        kinks_ok = all(np.min(np.abs(z)) > GAP for z in pre[:-1])
        if kinks_ok and all(well_separated(row) for row in s):
            break
        cfg = NetworkConfig(**{**cfg.to_dict(), "seed": int(rng.integers(2**32))})
    y = np.stack([random_target(rng, hier) for _ in range(batch)])

    _, grads = backward(model, x, y, hier)
    worst = 0.0
    for layer, (gw, gb) in zip(model.layers, grads):
        for p, g in ((layer.weight, gw), (layer.bias, gb)):
            num = numeric_grad(lambda: backward(model, x, y, hier)[0].total, p)
            worst = max(worst, relative_error(g, num))
    return worst


def run(instances: int = 20, seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    loss_errs = [check_mcloss(rng) for _ in range(instances)]
    model_errs = [check_model(rng) for _ in range(instances)]
    return {
        "instances": instances,
        "mcloss_max_rel_error": max(loss_errs),
        "model_max_rel_error": max(model_errs),
    }
