"""Mono-hierarchical label trees (forests) with precomputed closures.

Labels are indexed in lexicographic order of their identifiers; that order is
the canonical tie-break everywhere else in the package. The descendant
closure is held as a dense boolean matrix ``closure[a, b] == (b in D_a)``
with every label counted as its own descendant.
"""
from __future__ import annotations

import hashlib
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateLabel,
    EmptyCode,
    InconsistentDelimiterUse,
    IndexOutOfRange,
    MultipleParents,
    ParseError,
)

LabelSet = frozenset  # frozenset[int] of canonical label indices


@dataclass(frozen=True, eq=False)
class LabelHierarchy:
    labels: tuple[str, ...]
    parent: tuple[int | None, ...]
    children: tuple[tuple[int, ...], ...]
    roots: tuple[int, ...]
    closure: np.ndarray = field(repr=False)
    depth: np.ndarray = field(repr=False)
    # children strictly before parents; consumed by the MCM kernels
    postorder: np.ndarray = field(repr=False)
    parent_array: np.ndarray = field(repr=False)
    _index: dict[str, int] = field(repr=False)

    @property
    def label_count(self) -> int:
        return len(self.labels)

    n = label_count

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self._index[label]

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def _check(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < len(self.labels):
            raise IndexOutOfRange(f"label index {i} outside [0, {len(self.labels)})")
        return i

    def ancestors(self, label: int) -> LabelSet:
        """Strict ancestors of ``label``; empty for roots."""
        i = self._check(label)
        out = []
        p = self.parent[i]
        while p is not None:
            out.append(p)
            p = self.parent[p]
        return frozenset(out)

    def descendants_inclusive(self, label: int) -> LabelSet:
        i = self._check(label)
        return frozenset(np.flatnonzero(self.closure[i]).tolist())

    def path(self, label: int) -> list[int]:
        """Root-to-``label`` chain of indices."""
        i = self._check(label)
        chain = [i]
        while self.parent[chain[-1]] is not None:
            chain.append(self.parent[chain[-1]])
        return chain[::-1]

    def close_upward(self, s: Iterable[int]) -> LabelSet:
        out = set()
        for i in s:
            i = self._check(i)
            while i is not None and i not in out:
                out.add(i)
                i = self.parent[i]
        return frozenset(out)

    def is_consistent(self, s: Iterable[int]) -> bool:
        s = frozenset(s)
        return s == self.close_upward(s)

    def leaves(self) -> list[int]:
        return [i for i, ch in enumerate(self.children) if not ch]

    @property
    def leaf_mask(self) -> np.ndarray:
        return np.array([not ch for ch in self.children], dtype=bool)

    # -- mask helpers used by the batch paths --------------------------------

    def to_mask(self, s: Iterable[int]) -> np.ndarray:
        m = np.zeros(self.label_count, dtype=bool)
        for i in s:
            m[self._check(i)] = True
        return m

    def from_mask(self, mask: np.ndarray) -> LabelSet:
        return frozenset(np.flatnonzero(mask).tolist())

    def close_upward_masks(self, masks: np.ndarray) -> np.ndarray:
        """Row-wise upward closure of a ``(batch, n)`` boolean array."""
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        # b is in close(s) iff some member a of s lies in D_b
        return (masks.astype(np.int32) @ self.closure.T.astype(np.int32)) > 0

    def consistent_masks(self, masks: np.ndarray) -> np.ndarray:
        masks = np.atleast_2d(np.asarray(masks, dtype=bool))
        return (self.close_upward_masks(masks) == masks).all(axis=1)

    def fingerprint(self) -> str:
        """SHA-256 over the canonical label list."""
        h = hashlib.sha256()
        for lab in self.labels:
            h.update(lab.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def _assemble(labels: Sequence[str], parent_of: dict[str, str]) -> LabelHierarchy:
    labels = tuple(sorted(labels))
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    parent: list[int | None] = [None] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for c, p in parent_of.items():
        ci, pi = index[c], index[p]
        parent[ci] = pi
        children[pi].append(ci)

    # cycle check: every parent chain must reach a root
    state = [0] * n  # 0 unvisited, 1 on current chain, 2 known acyclic
    for start in range(n):
        chain = []
        i: int | None = start
        while i is not None and state[i] == 0:
            state[i] = 1
            chain.append(i)
            i = parent[i]
        if i is not None and state[i] == 1:
            raise CycleDetected(f"label {labels[i]!r} is its own ancestor")
        for j in chain:
            state[j] = 2

    depth = np.zeros(n, dtype=np.int64)
    closure = np.zeros((n, n), dtype=bool)
    for i in range(n):
        closure[i, i] = True
        p = parent[i]
        d = 0
        while p is not None:
            closure[p, i] = True
            d += 1
            p = parent[p]
        depth[i] = d

    # stable sort keeps canonical order within a depth level
    postorder = np.argsort(-depth, kind="stable").astype(np.int64)
    parent_array = np.array([-1 if p is None else p for p in parent], dtype=np.int64)
    for arr in (closure, depth, postorder, parent_array):
        arr.setflags(write=False)

    return LabelHierarchy(
        labels=labels,
        parent=tuple(parent),
        children=tuple(tuple(sorted(ch)) for ch in children),
        roots=tuple(i for i in range(n) if parent[i] is None),
        closure=closure,
        depth=depth,
        postorder=postorder,
        parent_array=parent_array,
        _index=index,
    )


def build_from_edges(
    pairs: Iterable[tuple[str, str]], isolated: Iterable[str] = ()
) -> LabelHierarchy:
    """Build a hierarchy from ``(child, parent)`` pairs plus parentless labels.

    Repeating an identical pair is harmless; giving one child two different
    parents raises :class:`MultipleParents`.
    """
    parent_of: dict[str, str] = {}
    seen: set[str] = set()
    for child, par in pairs:
        for lab in (child, par):
            if not isinstance(lab, str) or not lab:
                raise ValueError(f"label identifiers must be non-empty strings, got {lab!r}")
        if child == par:
            raise CycleDetected(f"label {child!r} is its own parent")
        prev = parent_of.get(child)
        if prev is not None and prev != par:
            raise MultipleParents(f"label {child!r} has parents {prev!r} and {par!r}")
        parent_of[child] = par
        seen.update((child, par))

    iso_seen: set[str] = set()
    for lab in isolated:
        if not isinstance(lab, str) or not lab:
            raise ValueError(f"label identifiers must be non-empty strings, got {lab!r}")
        if lab in iso_seen or lab in seen:
            raise DuplicateLabel(f"label {lab!r} declared more than once")
        iso_seen.add(lab)

    return _assemble(list(seen | iso_seen), parent_of)


def split_code(code: str, delimiter: str | None = None) -> list[str]:
    """Return the chain of prefix labels for one code, shallowest first."""
    if not code or not code.strip():
        raise EmptyCode("empty classification code")
    if delimiter is None:
        return [code[: k + 1] for k in range(len(code))]
    if len(delimiter) != 1:
        raise InconsistentDelimiterUse(f"delimiter must be one character, got {delimiter!r}")
    tokens = code.split(delimiter)
    if any(not t for t in tokens):
        raise InconsistentDelimiterUse(f"empty level in code {code!r}")
    return [delimiter.join(tokens[: k + 1]) for k in range(len(tokens))]


def build_from_prefix_codes(
    codes: Iterable[str], delimiter: str | None = None
) -> LabelHierarchy:
    """Expand hierarchical codes into the tree of their prefixes.

    ``"112"`` contributes ``"1" -> "11" -> "112"``; with ``delimiter="-"``,
    ``"1-2"`` contributes ``"1" -> "1-2"``.
    """
    codes = list(codes)
    if not codes:
        raise EmptyCode("no codes given")
    parent_of: dict[str, str] = {}
    labels: set[str] = set()
    for code in codes:
        chain = split_code(code, delimiter)
        labels.update(chain)
        for par, child in zip(chain, chain[1:]):
            parent_of[child] = par
    return _assemble(list(labels), parent_of)


# -- file format --------------------------------------------------------------

def load_hierarchy(path: str | Path, mode: str = "edges") -> LabelHierarchy:
    """Read a hierarchy file.

    ``edges``: one ``child<TAB>parent`` per line; a line with a single field
    declares a parentless label. ``prefix``: one code per line, optionally
    preceded by a ``delimiter=<char>`` header. ``#`` lines are ignored in both.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = [
        (no, ln.rstrip("\r\n"))
        for no, ln in enumerate(text.splitlines(), start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if mode == "edges":
        pairs, isolated = [], []
        for no, ln in lines:
            parts = ln.split("\t")
            if len(parts) == 1:
                isolated.append(parts[0].strip())
            elif len(parts) == 2:
                pairs.append((parts[0].strip(), parts[1].strip()))
            else:
                raise ParseError("expected 'child<TAB>parent'", line=no, path=str(path))
        # labels only seen as isolated entries stay isolated; an isolated entry
        # that also appears in an edge is redundant rather than an error here
        in_edges = {lab for pr in pairs for lab in pr}
        isolated = list(dict.fromkeys(lab for lab in isolated if lab not in in_edges))
        return build_from_edges(pairs, isolated)
    if mode == "prefix":
        delimiter = None
        if lines and lines[0][1].startswith("delimiter="):
            delimiter = lines[0][1][len("delimiter="):]
            lines = lines[1:]
        return build_from_prefix_codes([ln.strip() for _, ln in lines], delimiter)
    raise ValueError(f"unknown hierarchy mode {mode!r}")


def write_prefix_codes(path: str | Path, codes: Iterable[str], delimiter: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if delimiter is not None:
            fh.write(f"delimiter={delimiter}\n")
        for code in codes:
            fh.write(code + "\n")


def write_edges(path: str | Path, hier: LabelHierarchy) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, lab in enumerate(hier.labels):
            p = hier.parent[i]
            fh.write(lab + "\n" if p is None else f"{lab}\t{hier.labels[p]}\n")
