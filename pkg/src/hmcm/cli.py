"""Command-line entry point: ``hmcm {train,evaluate,predict,gen-synth,grad-check}``.

Settings resolve as command-line flag > ``--config`` file entry > preset >
built-in default. The resolved settings are written to ``<out>/config.txt``
in the same ``key = value`` format, so ``--config <out>/config.txt`` reruns a
command exactly.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import constraint, data, gradcheck, metrics
from .checkpoint import load_checkpoint, save_checkpoint
from .data import LABEL_MODES
from .errors import HMCError
from .hierarchy import load_hierarchy, write_prefix_codes
from .network import NetworkConfig, evaluate_model, forward, train

log = logging.getLogger("hmcm")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

PRESETS = {
    "synthetic": {"lr": 1e-3, "weight_decay": 0.0, "batch": 32, "epochs": 20},
    "paper": {"lr": 5e-6, "weight_decay": 1e-6, "batch": 32, "epochs": 120},
}


class UsageError(Exception):
    pass


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise UsageError(f"expected true/false, got {v!r}")


def _ints(v) -> tuple[int, ...]:
    if isinstance(v, (tuple, list)):
        return tuple(int(x) for x in v)
    s = str(v).strip()
    return tuple(int(x) for x in s.split(",") if x.strip()) if s else ()


def _floats(v) -> tuple[float, ...]:
    if isinstance(v, (tuple, list)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).split(",") if x.strip())


def _opt_str(v) -> str:
    return "" if v is None else str(v)


@dataclass
class RunConfig:
    preset: str = "synthetic"
    hierarchy: str = ""
    hierarchy_mode: str = "prefix"
    data: str = ""
    label_mode: str = "code"
    out: str = "run"
    checkpoint: str = ""  # resolved to <out>/model.npz when unset
    seed: int = 0
    epochs: int = 20
    batch: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.0
    freeze_backbone: bool = False
    loss: str = "mcloss"
    backbone_dims: tuple[int, ...] = (64, 64)
    head_hidden: int = 256
    ratios: tuple[float, ...] = (0.7, 0.15, 0.15)
    split: str = "test"
    emit_probs: bool = False
    depth: int = 3
    branching: int = 3
    samples_per_leaf: int = 200
    feature_dim: int = 16
    noise_sigma: float = 0.3

    CHOICES = {
        "preset": tuple(PRESETS),
        "hierarchy_mode": ("edges", "prefix"),
        "label_mode": LABEL_MODES,
        "loss": ("mcloss", "bce"),
        "split": ("train", "val", "test", "all"),
    }

    @classmethod
    def _coerce(cls, key: str, value):
        ftype = {f.name: f.type for f in fields(cls)}[key]
        try:
            if ftype == "bool":
                out = _bool(value)
            elif ftype == "int":
                out = int(value)
            elif ftype == "float":
                out = float(value)
            elif ftype == "tuple[int, ...]":
                out = _ints(value)
            elif ftype == "tuple[float, ...]":
                out = _floats(value)
            else:
                out = _opt_str(value)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {exc}") from None
        if key in cls.CHOICES and out not in cls.CHOICES[key]:
            raise UsageError(f"{key} must be one of {cls.CHOICES[key]}, got {out!r}")
        return out

    @classmethod
    def resolve(cls, file_entries: dict, flag_entries: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        for key in (*file_entries, *flag_entries):
            if key not in names:
                raise UsageError(f"unknown setting {key!r}")
        preset = flag_entries.get("preset", file_entries.get("preset", cls.preset))
        preset = cls._coerce("preset", preset)
        merged = {**PRESETS[preset], **file_entries, **flag_entries, "preset": preset}
        cfg = cls(**{k: cls._coerce(k, v) for k, v in merged.items()})
        if not cfg.checkpoint:
            cfg.checkpoint = str(Path(cfg.out) / "model.npz")
        return cfg

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    @property
    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint)


def parse_config_file(path: str | Path) -> dict:
    entries = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        key, value = line.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    # defaults are None so that only explicitly given flags take precedence
    add("--config", help="key = value settings file")
    add("--preset", choices=tuple(PRESETS))
    add("--hierarchy", help="hierarchy file")
    add("--hierarchy-mode", choices=("edges", "prefix"))
    add("--data", help="dataset CSV")
    add("--label-mode", choices=LABEL_MODES)
    add("--out", help="output directory")
    add("--checkpoint", help="checkpoint path (default <out>/model.npz)")
    add("--seed", type=int)
    add("--epochs", type=int)
    add("--batch", type=int)
    add("--lr", type=float)
    add("--weight-decay", type=float)
    add("--freeze-backbone", choices=("true", "false"))
    add("--loss", choices=("mcloss", "bce"))
    add("--backbone-dims", help="comma-separated hidden widths, empty for none")
    add("--head-hidden", type=int)
    add("--ratios", help="train,val,test fractions")
    add("--split", choices=("train", "val", "test", "all"))
    add("--emit-probs", choices=("true", "false"))
    add("--depth", type=int)
    add("--branching", type=int)
    add("--samples-per-leaf", type=int)
    add("--feature-dim", type=int)
    add("--noise-sigma", type=float)
    add("-v", "--verbose", action="store_true")

    parser = _Parser(prog="hmcm", description="Hierarchical multi-label classification with a max-constraint output layer.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("train", "train a model and report test metrics"),
        ("evaluate", "evaluate a checkpoint on a dataset split"),
        ("predict", "write hierarchy-consistent label paths for feature rows"),
        ("gen-synth", "write a synthetic hierarchy and dataset"),
        ("grad-check", "compare analytic and finite-difference gradients"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def resolve_args(args: argparse.Namespace) -> RunConfig:
    file_entries = parse_config_file(args.config) if args.config else {}
    skip = {"config", "command", "verbose"}
    flags = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    return RunConfig.resolve(file_entries, flags)


# -- commands ---------------------------------------------------------------

def _require(path: str, what: str) -> Path:
    if not path:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _load_inputs(cfg: RunConfig):
    hier = load_hierarchy(_require(cfg.hierarchy, "hierarchy"), cfg.hierarchy_mode)
    ds = data.load_dataset(_require(cfg.data, "data"), hier, cfg.label_mode)
    return hier, ds


def _echo_config(cfg: RunConfig) -> None:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / "config.txt").write_text(cfg.to_text(), encoding="utf-8")


def cmd_train(cfg: RunConfig) -> int:
    hier, ds = _load_inputs(cfg)
    train_ds, val_ds, test_ds = data.split(ds, cfg.ratios, cfg.seed)
    net_cfg = NetworkConfig(
        input_dim=ds.feature_dim,
        label_count=hier.label_count,
        backbone_dims=cfg.backbone_dims,
        head_hidden=cfg.head_hidden,
        freeze_backbone=cfg.freeze_backbone,
        seed=cfg.seed,
    )
    _echo_config(cfg)
    model, record = train(net_cfg, train_ds, val_ds, hier, cfg.epochs, cfg.batch, cfg.loss,
                          learning_rate=cfg.lr, weight_decay=cfg.weight_decay)
    save_checkpoint(cfg.checkpoint_path, model, hier)
    (cfg.out_dir / "learning_curve.csv").write_text(record.to_csv(), encoding="utf-8")

    ev = evaluate_model(model, test_ds, hier)
    if not hier.consistent_masks(ev["predictions"]).all():
        raise HMCError("internal error: inconsistent prediction emitted")
    report = metrics.format_report(ev)
    (cfg.out_dir / "metrics.txt").write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return EXIT_OK


def _select_split(cfg: RunConfig, ds: data.Dataset) -> data.Dataset:
    if cfg.split == "all":
        return ds
    train_ds, val_ds, test_ds = data.split(ds, cfg.ratios, cfg.seed)
    return {"train": train_ds, "val": val_ds, "test": test_ds}[cfg.split]


def cmd_evaluate(cfg: RunConfig) -> int:
    hier, ds = _load_inputs(cfg)
    model, _ = load_checkpoint(_require(str(cfg.checkpoint_path), "checkpoint"), hier)
    part = _select_split(cfg, ds)
    ev = evaluate_model(model, part, hier)
    if not hier.consistent_masks(ev["predictions"]).all():
        raise HMCError("internal error: inconsistent prediction emitted")
    report = metrics.format_report(ev)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / f"eval_{cfg.split}.txt").write_text(report, encoding="utf-8")
    batch = metrics.EvalBatch(part.targets, ev["predictions"], ev["scores"])
    metrics.write_pr_csv(cfg.out_dir / f"pr_curve_{cfg.split}.csv", batch)
    sys.stdout.write(report)
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    hier = load_hierarchy(_require(cfg.hierarchy, "hierarchy"), cfg.hierarchy_mode)
    model, _ = load_checkpoint(_require(str(cfg.checkpoint_path), "checkpoint"), hier)
    x = data.load_features(_require(cfg.data, "data"), model.config.input_dim)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    dest = cfg.out_dir / "predictions.csv"
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["labels"] + ([f"p_{lab}" for lab in hier.labels] if cfg.emit_probs else []))
        if len(x):
            scores, _ = constraint.mcm_forward(forward(model, x), hier)
            scores = np.atleast_2d(scores)
            for row, mask in zip(scores, constraint.predict_masks(scores, hier)):
                members = np.flatnonzero(mask)
                members = members[np.argsort(hier.depth[members], kind="stable")]
                cells = [";".join(hier.labels[i] for i in members)]
                if cfg.emit_probs:
                    cells += [repr(float(v)) for v in row]
                w.writerow(cells)
    print(f"wrote {len(x)} predictions to {dest}")
    return EXIT_OK


def cmd_gen_synth(cfg: RunConfig) -> int:
    hier, ds = data.gen_synthetic(cfg.depth, cfg.branching, cfg.samples_per_leaf,
                                  cfg.feature_dim, cfg.noise_sigma, cfg.seed)
    codes, delimiter = data.synthetic_codes(cfg.depth, cfg.branching)
    _echo_config(cfg)
    write_prefix_codes(cfg.out_dir / "hierarchy.txt", codes, delimiter)
    data.write_dataset(cfg.out_dir / "data.csv", ds, hier, "code")
    print(f"wrote {hier.label_count} labels and {len(ds)} samples to {cfg.out_dir}")
    return EXIT_OK


def cmd_grad_check(cfg: RunConfig) -> int:
    res = gradcheck.run(instances=20, seed=cfg.seed)
    worst = max(res["mcloss_max_rel_error"], res["model_max_rel_error"])
    print(f"instances = {res['instances']}")
    print(f"mcloss_max_rel_error = {res['mcloss_max_rel_error']:.3e}")
    print(f"model_max_rel_error = {res['model_max_rel_error']:.3e}")
    print(f"max_rel_error = {worst:.3e}")
    return EXIT_OK if worst < 1e-5 else EXIT_DATA


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "gen-synth": cmd_gen_synth,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_args(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"hmcm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (HMCError, OSError) as exc:
        print(f"hmcm: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
