"""Feature/label datasets: CSV ingestion, seeded splits, synthetic generation.

CSV layout: a header ``f0,...,f{d-1},label`` (one code per row, expanded to
its upward closure) or ``f0,...,f{d-1},labels`` (semicolon-joined label ids
that must already be upward-closed). ``#`` lines are skipped.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptyDataset,
    InvalidShape,
    NotUpwardClosed,
    ParseError,
    RaggedRow,
    UnknownLabel,
)
from .hierarchy import LabelHierarchy, build_from_prefix_codes

LABEL_MODES = ("code", "set")
_LABEL_COLUMN = {"code": "label", "set": "labels"}


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float64
    targets: np.ndarray  # (N, n) bool, upward-closed rows
    codes: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.targets[idx], [self.codes[i] for i in idx])


def _rows(path: Path):
    """Yield ``(line_number, cells)`` for non-comment, non-blank CSV rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for cells in reader:
            if not cells or not "".join(cells).strip():
                continue
            if cells[0].lstrip().startswith("#"):
                continue
            yield reader.line_num, [c.strip() for c in cells]


def _parse_header(cells: list[str], path: Path, line: int, label_required: bool) -> tuple[int, str | None]:
    label_col = None
    if cells and cells[-1] in ("label", "labels"):
        label_col = cells[-1]
        cells = cells[:-1]
    elif label_required:
        raise ParseError("header must end with a 'label' or 'labels' column", line, str(path))
    expected = [f"f{k}" for k in range(len(cells))]
    if cells != expected or not cells:
        raise ParseError("feature columns must be named f0, f1, ...", line, str(path))
    return len(cells), label_col


def _floats(cells: list[str], path: Path, line: int) -> list[float]:
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise ParseError(f"bad number: {exc}", line, str(path)) from None


def load_dataset(path: str | Path, hierarchy: LabelHierarchy, label_mode: str = "code") -> Dataset:
    if label_mode not in LABEL_MODES:
        raise ValueError(f"unknown label mode {label_mode!r}")
    path = Path(path)
    rows = _rows(path)
    try:
        line, header = next(rows)
    except StopIteration:
        raise ParseError("missing header row", None, str(path)) from None
    dim, label_col = _parse_header(header, path, line, label_required=True)
    if label_col != _LABEL_COLUMN[label_mode]:
        raise ParseError(f"label column {label_col!r} does not match label mode {label_mode!r}", line, str(path))

    feats, targets, codes = [], [], []
    for line, cells in rows:
        if len(cells) != dim + 1:
            raise RaggedRow(f"{path}:{line}: expected {dim + 1} fields, got {len(cells)}")
        feats.append(_floats(cells[:dim], path, line))
        raw = cells[dim]
        mask = np.zeros(hierarchy.label_count, dtype=bool)
        if label_mode == "code":
            if raw not in hierarchy:
                raise UnknownLabel(f"{path}:{line}: label {raw!r} is not in the hierarchy")
            mask[hierarchy.path(hierarchy.index(raw))] = True
        else:
            for lab in filter(None, (t.strip() for t in raw.split(";"))):
                if lab not in hierarchy:
                    raise UnknownLabel(f"{path}:{line}: label {lab!r} is not in the hierarchy")
                mask[hierarchy.index(lab)] = True
            if not hierarchy.consistent_masks(mask)[0]:
                raise NotUpwardClosed(f"{path}:{line}: label set {raw!r} is missing ancestors")
        targets.append(mask)
        codes.append(raw)

    features = np.array(feats, dtype=np.float64).reshape(len(feats), dim)
    target_arr = np.array(targets, dtype=bool).reshape(len(targets), hierarchy.label_count)
    return Dataset(features, target_arr, codes)


def load_features(path: str | Path, input_dim: int | None = None) -> np.ndarray:
    """Feature matrix of a CSV whose label column, if any, is ignored."""
    path = Path(path)
    rows = _rows(path)
    try:
        line, header = next(rows)
    except StopIteration:
        return np.zeros((0, input_dim or 0))
    dim, label_col = _parse_header(header, path, line, label_required=False)
    if input_dim is not None and dim != input_dim:
        raise ParseError(f"file has {dim} feature columns, model expects {input_dim}", line, str(path))
    width = dim + (label_col is not None)
    feats = []
    for line, cells in rows:
        if len(cells) != width:
            raise RaggedRow(f"{path}:{line}: expected {width} fields, got {len(cells)}")
        feats.append(_floats(cells[:dim], path, line))
    return np.array(feats, dtype=np.float64).reshape(len(feats), dim)


def write_dataset(path: str | Path, ds: Dataset, hierarchy: LabelHierarchy, label_mode: str = "code") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{k}" for k in range(ds.feature_dim)] + [_LABEL_COLUMN[label_mode]])
        for x, t, code in zip(ds.features, ds.targets, ds.codes):
            if label_mode == "code":
                lab = code
            else:
                members = np.flatnonzero(t)
                members = members[np.argsort(hierarchy.depth[members], kind="stable")]
                lab = ";".join(hierarchy.labels[i] for i in members)
            w.writerow([repr(float(v)) for v in x] + [lab])


def split(ds: Dataset, ratios=(0.7, 0.15, 0.15), seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded permutation, then floor/floor/remainder contiguous slices."""
    if len(ds) == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(ds)
    # the small slack keeps e.g. 0.7 * 100 from flooring to 69
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_val = math.floor(n * ratios[1] + 1e-9)
    perm = np.random.default_rng(seed).permutation(n)
    return (
        ds.subset(perm[:n_train]),
        ds.subset(perm[n_train:n_train + n_val]),
        ds.subset(perm[n_train + n_val:]),
    )


def synthetic_codes(depth: int, branching: int) -> tuple[list[str], str | None]:
    """Leaf codes of a complete tree rooted at ``"1"``, plus the delimiter used."""
    if depth < 1 or branching < 1:
        raise InvalidShape("depth and branching must be >= 1")
    delimiter = None if branching <= 9 else "."
    join = "".join if delimiter is None else delimiter.join
    paths = [["1"]]
    for _ in range(depth - 1):
        paths = [p + [str(k)] for p in paths for k in range(1, branching + 1)]
    return [join(p) for p in paths], delimiter


def gen_synthetic(
    depth: int,
    branching: int,
    samples_per_leaf: int,
    feature_dim: int,
    noise_sigma: float,
    seed: int = 0,
) -> tuple[LabelHierarchy, Dataset]:
    """Gaussian blobs around random unit-norm centers, one blob per leaf.

    Noise is isotropic with per-coordinate standard deviation ``noise_sigma``.
    Samples are emitted leaf by leaf in canonical label order.
    """
    if feature_dim < 2 or samples_per_leaf < 1 or noise_sigma < 0:
        raise InvalidShape("need feature_dim >= 2, samples_per_leaf >= 1, noise_sigma >= 0")
    codes, delimiter = synthetic_codes(depth, branching)
    hier = build_from_prefix_codes(codes, delimiter)
    leaves = hier.leaves()

    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((len(leaves), feature_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    features = np.repeat(centers, samples_per_leaf, axis=0)
    if noise_sigma > 0:
        features = features + noise_sigma * rng.standard_normal(features.shape)

    leaf_rows = np.repeat(np.asarray(leaves), samples_per_leaf)
    targets = hier.closure[:, leaf_rows].T.copy()
    codes_out = [hier.labels[i] for i in leaf_rows]
    return hier, Dataset(features, targets, codes_out)
