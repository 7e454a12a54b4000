"""Feed-forward classifier with a freezable backbone and a two-layer sigmoid head.

The backbone is a stack of affine+ReLU layers over precomputed feature
vectors. It stands in for a pretrained convolutional trunk: freezing it gives
the fixed-feature-extractor regime, leaving it trainable gives fine-tuning.
The head is ``Linear -> ReLU -> Linear -> sigmoid`` with one output per label.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from . import constraint, metrics
from .constraint import LossValue
from .errors import EmptyDataset, InvalidDimensions, ShapeMismatch
from .hierarchy import LabelHierarchy

log = logging.getLogger(__name__)

LOSS_MODES = ("mcloss", "bce")


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    label_count: int
    backbone_dims: tuple[int, ...] = ()
    head_hidden: int = 256
    freeze_backbone: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "backbone_dims", tuple(int(d) for d in self.backbone_dims))
        dims = (self.input_dim, self.label_count, self.head_hidden, *self.backbone_dims)
        if any(int(d) < 1 for d in dims):
            raise InvalidDimensions(f"all layer widths must be >= 1, got {dims}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone_dims"] = list(self.backbone_dims)
        return d


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray
    frozen: bool = False
    activation: str = "relu"  # "relu" or "none"; the last layer feeds the sigmoid


@dataclass
class ModelParams:
    config: NetworkConfig
    layers: list[Layer]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            [Layer(l.weight.copy(), l.bias.copy(), l.frozen, l.activation) for l in self.layers],
        )

    @property
    def backbone(self) -> list[Layer]:
        return self.layers[: len(self.config.backbone_dims)]


@dataclass
class OptimizerState:
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    step: int = 0
    m: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    v: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @classmethod
    def for_model(cls, model: ModelParams, **hyper) -> "OptimizerState":
        zeros = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers]
        return cls(m=zeros, v=[(a.copy(), b.copy()) for a, b in zeros], **hyper)


@dataclass
class TrainRecord:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_auprc: list[float] = field(default_factory=list)
    val_emr: list[float] = field(default_factory=list)
    val_hamming: list[float] = field(default_factory=list)

    COLUMNS = ("epoch", "train_loss", "val_loss", "val_auprc", "val_emr", "val_hamming")

    def __len__(self) -> int:
        return len(self.train_loss)

    def rows(self):
        for k in range(len(self)):
            yield (k + 1, self.train_loss[k], self.val_loss[k],
                   self.val_auprc[k], self.val_emr[k], self.val_hamming[k])

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for row in self.rows():
            lines.append(",".join([str(row[0])] + [repr(float(x)) for x in row[1:]]))
        return "\n".join(lines) + "\n"


def init_model(cfg: NetworkConfig) -> ModelParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    widths = [cfg.input_dim, *cfg.backbone_dims, cfg.head_hidden, cfg.label_count]
    n_backbone = len(cfg.backbone_dims)
    layers = []
    for k, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(Layer(
            weight=rng.uniform(-bound, bound, size=(fan_in, fan_out)),
            bias=np.zeros(fan_out),
            frozen=cfg.freeze_backbone and k < n_backbone,
            activation="none" if k == len(widths) - 2 else "relu",
        ))
    return ModelParams(cfg, layers)


def sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _features(model: ModelParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != model.config.input_dim:
        raise ShapeMismatch(f"features of shape {x.shape}, model expects (..., {model.config.input_dim})")
    return x, single


def _forward_cache(model: ModelParams, x: np.ndarray):
    acts = [x]  # inputs to each layer
    pre = []
    a = x
    for layer in model.layers:
        z = a @ layer.weight + layer.bias
        pre.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        acts.append(a)
    return acts, pre, sigmoid(pre[-1])


def forward(model: ModelParams, features) -> np.ndarray:
    """Per-label probabilities, clamped to ``[EPS, 1 - EPS]``."""
    x, single = _features(model, features)
    _, _, s = _forward_cache(model, x)
    h = constraint.clamp(s)
    return h[0] if single else h


def backward(
    model: ModelParams,
    features,
    y,
    hier: LabelHierarchy,
    loss_mode: str = "mcloss",
) -> tuple[LossValue, list[tuple[np.ndarray, np.ndarray]]]:
    """Batch-mean loss and per-layer ``(dW, db)``; frozen layers get zeros."""
    x, _ = _features(model, features)
    y = np.atleast_2d(np.asarray(y))
    if y.shape[0] != x.shape[0]:
        raise ShapeMismatch(f"{x.shape[0]} feature rows but {y.shape[0]} target rows")
    if hier.label_count != model.config.label_count:
        raise ShapeMismatch("hierarchy size does not match the model's output width")

    if loss_mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode {loss_mode!r}")
    loss_fn = constraint.mcloss if loss_mode == "mcloss" else constraint.bce
    acts, pre, s = _forward_cache(model, x)
    lv, dh = loss_fn(s, y, hier)
    batch = x.shape[0]
    loss = LossValue(lv.total / batch, lv.per_label.mean(axis=0))

    grads = [(np.zeros_like(l.weight), np.zeros_like(l.bias)) for l in model.layers]
    # nothing upstream of the deepest trainable layer needs a gradient
    trainable = [k for k, l in enumerate(model.layers) if not l.frozen]
    if not trainable:
        return loss, grads
    lowest = trainable[0]

    dz = (dh / batch) * s * (1.0 - s)
    for k in range(len(model.layers) - 1, lowest - 1, -1):
        layer = model.layers[k]
        if not layer.frozen:
            grads[k] = (acts[k].T @ dz, dz.sum(axis=0))
        if k == lowest:
            break
        da = dz @ layer.weight.T
        dz = da * (pre[k - 1] > 0.0)
    return loss, grads


def adam_update(param, grad, m, v, step, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """One Adam update in place; weight decay is added to the gradient (L2 form)."""
    g = grad + weight_decay * param if weight_decay else grad
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return param


def adam_step(model: ModelParams, grads, opt: OptimizerState) -> None:
    """Apply one optimizer step to every non-frozen layer, in place."""
    if len(grads) != len(model.layers):
        raise ShapeMismatch(f"{len(grads)} gradient pairs for {len(model.layers)} layers")
    opt.step += 1
    for layer, (gw, gb), (mw, mb), (vw, vb) in zip(model.layers, grads, opt.m, opt.v):
        if gw.shape != layer.weight.shape or gb.shape != layer.bias.shape:
            raise ShapeMismatch("gradient shape does not match parameter shape")
        if layer.frozen:
            continue
        for p, g, m, v in ((layer.weight, gw, mw, vw), (layer.bias, gb, mb, vb)):
            adam_update(p, g, m, v, opt.step, opt.learning_rate, opt.beta1, opt.beta2,
                        opt.eps_adam, opt.weight_decay)


def dataset_loss(model: ModelParams, ds, hier: LabelHierarchy, loss_mode: str = "mcloss") -> float:
    """Mean per-sample loss over a whole dataset."""
    h = forward(model, ds.features)
    fn = constraint.mcloss if loss_mode == "mcloss" else constraint.bce
    return fn(h, ds.targets, hier)[0].total / len(ds)


def evaluate_model(model: ModelParams, ds, hier: LabelHierarchy) -> dict:
    """MCM scores, path predictions, and the three metrics for one split."""
    h = forward(model, ds.features)
    scores, _ = constraint.mcm_forward(np.atleast_2d(h), hier)
    preds = constraint.predict_masks(scores, hier)
    batch = metrics.EvalBatch(scores=scores, truths=ds.targets, predictions=preds)
    return {
        "auprc": metrics.au_avg_prc(batch),
        "emr": metrics.emr(batch),
        "hamming": metrics.hamming_accuracy(batch),
        "sample_count": batch.sample_count,
        "scores": scores,
        "predictions": preds,
    }


def train(
    cfg: NetworkConfig,
    train_ds,
    val_ds,
    hier: LabelHierarchy,
    epochs: int,
    batch_size: int = 32,
    loss_mode: str = "mcloss",
    learning_rate: float = 1e-3,
    weight_decay: float = 0.0,
    model: ModelParams | None = None,
    on_step=None,
) -> tuple[ModelParams, TrainRecord]:
    """Mini-batch Adam training; one validation pass per epoch.

    The per-epoch permutation comes from a generator seeded by ``(cfg.seed, 1)``
    so it is independent of the initialization stream. The last short batch
    is kept.
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise EmptyDataset("training and validation splits must be non-empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if loss_mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode {loss_mode!r}")

    model = init_model(cfg) if model is None else model
    opt = OptimizerState.for_model(model, learning_rate=learning_rate, weight_decay=weight_decay)
    rng = np.random.default_rng((cfg.seed, 1))
    record = TrainRecord()
    n = len(train_ds)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            _, grads = backward(model, train_ds.features[idx], train_ds.targets[idx], hier, loss_mode)
            adam_step(model, grads, opt)
            if on_step is not None:
                on_step(model, opt)

        record.train_loss.append(dataset_loss(model, train_ds, hier, loss_mode))
        record.val_loss.append(dataset_loss(model, val_ds, hier, loss_mode))
        ev = evaluate_model(model, val_ds, hier)
        record.val_auprc.append(ev["auprc"])
        record.val_emr.append(ev["emr"])
        record.val_hamming.append(ev["hamming"])
        log.debug("epoch %d train_loss=%.6f val_loss=%.6f val_emr=%.4f",
                  epoch, record.train_loss[-1], record.val_loss[-1], record.val_emr[-1])
    return model, record
