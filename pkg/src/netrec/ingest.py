"""Rating-file parsing, rating threshold, and seeded link splits."""

from __future__ import annotations

import hashlib
import io
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from .graph import BipartiteGraph, build_graph

__all__ = [
    "RatingRecord",
    "ParseError",
    "Dataset",
    "SplitSet",
    "parse_ratings",
    "threshold_links",
    "load_dataset",
    "split_double",
    "split_triple",
    "file_checksum",
]

logger = logging.getLogger(__name__)


class ParseError(ValueError):
    """Malformed line in a rating file (raised in strict mode only)."""

    def __init__(self, lineno: int, line: str, reason: str):
        super().__init__(f"line {lineno}: {reason}: {line!r}")
        self.lineno = lineno
        self.line = line
        self.reason = reason


class RatingRecord(NamedTuple):
    user: str
    item: str
    rating: float
    timestamp: int | None = None


_DELIMS = {"tab": "\t", "comma": ",", "whitespace": None, "auto": "auto"}


def _split(line: str, delimiter) -> list[str]:
    if delimiter == "auto":
        if "\t" in line:
            return line.split("\t")
        if "," in line:
            return line.split(",")
        return line.split()
    if delimiter is None:
        return line.split()
    return line.split(delimiter)


def parse_ratings(
    stream: TextIO | Iterable[str] | str,
    delimiter: str = "auto",
    *,
    strict: bool = False,
    warnings: list | None = None,
) -> list[RatingRecord]:
    """Parse delimited ``user, item, rating[, timestamp]`` lines.

    ``delimiter`` is ``"auto"`` (tab, then comma, then whitespace, decided
    per line), one of ``"tab"``/``"comma"``/``"whitespace"``, or a literal
    separator. Malformed lines are skipped and their ``(lineno, reason)``
    appended to ``warnings``; with ``strict=True`` they raise
    :class:`ParseError` instead.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    delim = _DELIMS.get(delimiter, delimiter)
    records: list[RatingRecord] = []
    n_bad = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f.strip() for f in _split(line, delim)]
        reason = None
        if len(fields) < 3:
            reason = "too few fields"
        else:
            try:
                rating = float(fields[2])
            except ValueError:
                reason = "rating is not a number"
            else:
                if not math.isfinite(rating):
                    reason = "rating is not finite"
        ts = None
        if reason is None and len(fields) > 3 and fields[3]:
            try:
                ts = int(float(fields[3]))
            except ValueError:
                ts = None
        if reason is not None:
            if strict:
                raise ParseError(lineno, line, reason)
            n_bad += 1
            if warnings is not None:
                warnings.append((lineno, reason))
            continue
        records.append(RatingRecord(fields[0], fields[1], rating, ts))
    if n_bad:
        logger.warning("skipped %d malformed line(s)", n_bad)
    return records


@dataclass(frozen=True, eq=False)
class Dataset:
    """Thresholded links with dense ids and the mapping back to raw tokens."""

    links: np.ndarray  # (L, 2) int64
    n_users: int
    n_items: int
    user_ids: np.ndarray  # dense id -> raw token
    item_ids: np.ndarray

    @property
    def n_links(self) -> int:
        return int(self.links.shape[0])

    def graph(self) -> BipartiteGraph:
        return build_graph(
            self.links,
            self.n_users,
            self.n_items,
            user_labels=self.user_ids,
            item_labels=self.item_ids,
        )


def _natural_key(token: str):
    # numeric tokens sort numerically so dense ids follow raw-id order
    return (0, int(token), "") if re.fullmatch(r"-?\d+", token) else (1, 0, token)


def threshold_links(
    records: Iterable[RatingRecord], min_rating: float = 3.0, *, keep_all_ids: bool = True
) -> Dataset:
    """Keep ratings ``>= min_rating`` and re-index users/items densely.

    With ``keep_all_ids`` (the default) every user and item that appears in
    the input gets an id, so the item universe is the whole catalogue and
    items left without links simply have degree zero. Otherwise only
    users and items with a surviving link are indexed. Repeated
    (user, item) pairs collapse to one link.
    """
    if not math.isfinite(min_rating):
        raise ValueError("min_rating must be finite")
    records = list(records)
    kept = [(r.user, r.item) for r in records if r.rating >= min_rating]
    source = [(r.user, r.item) for r in records] if keep_all_ids else kept
    users = sorted({u for u, _ in source}, key=_natural_key)
    items = sorted({i for _, i in source}, key=_natural_key)
    uid = {u: n for n, u in enumerate(users)}
    iid = {i: n for n, i in enumerate(items)}
    arr = np.array([(uid[u], iid[i]) for u, i in kept], dtype=np.int64).reshape(-1, 2)
    if arr.shape[0]:
        arr = np.unique(arr, axis=0)
    return Dataset(arr, len(users), len(items), np.array(users, dtype=object), np.array(items, dtype=object))


def load_dataset(
    path: str | Path,
    min_rating: float = 3.0,
    delimiter: str = "auto",
    strict: bool = False,
    keep_all_ids: bool = True,
) -> Dataset:
    with open(path, encoding="utf-8", errors="replace") as fh:
        records = parse_ratings(fh, delimiter, strict=strict)
    return threshold_links(records, min_rating, keep_all_ids=keep_all_ids)


def file_checksum(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(eq=False)
class SplitSet:
    """Training / learning / probe partition of a link set.

    Each part is an ``(n, 2)`` int64 array of ``(user, item)``. Reads of
    :attr:`probe` are counted in :attr:`probe_reads` so that callers can
    verify the probe stays untouched until the final evaluation pass.
    """

    training: np.ndarray
    learning: np.ndarray
    _probe: np.ndarray = field(repr=False)
    seed: int
    n_users: int
    n_items: int
    probe_reads: int = 0

    @property
    def probe(self) -> np.ndarray:
        self.probe_reads += 1
        return self._probe

    @property
    def n_probe(self) -> int:
        return int(self._probe.shape[0])

    def training_graph(self) -> BipartiteGraph:
        return build_graph(self.training, self.n_users, self.n_items)

    def merged_graph(self) -> BipartiteGraph:
        """Graph on training plus learning links (the final scoring graph)."""
        return build_graph(np.vstack([self.training, self.learning]), self.n_users, self.n_items)


def _walk_split(links: np.ndarray, quotas: list[int], seed: int, n_items: int) -> list[np.ndarray]:
    """Assign shuffled links to held-out parts in order, never removing an item's last link."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(links.shape[0])
    remaining = np.bincount(links[:, 1], minlength=n_items)
    target = np.zeros(links.shape[0], dtype=np.int8)  # 0 = training, p+1 = held-out part p
    part = 0
    filled = 0
    for idx in order:
        while part < len(quotas) and filled >= quotas[part]:
            part += 1
            filled = 0
        if part == len(quotas):
            break
        item = links[idx, 1]
        if remaining[item] <= 1:
            continue
        remaining[item] -= 1
        target[idx] = part + 1
        filled += 1
    return [links[target == p] for p in range(len(quotas) + 1)]


def _as_links(links) -> np.ndarray:
    arr = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    return np.unique(arr, axis=0) if arr.shape[0] else arr


def split_triple(
    links,
    learning_fraction: float = 0.10,
    probe_fraction: float = 0.10,
    seed: int = 0,
    n_users: int | None = None,
    n_items: int | None = None,
) -> SplitSet:
    """Random training/learning/probe split (default 80/10/10).

    Quotas are ``floor(fraction * L)``. Links are visited in a seeded random
    order and handed to the learning set, then the probe, until each quota
    is met; a link is skipped (kept in training) whenever it is the last
    training link of its item, so no item loses all of its training links.
    """
    for name, frac in (("learning_fraction", learning_fraction), ("probe_fraction", probe_fraction)):
        if not 0.0 <= frac < 1.0:
            raise ValueError(f"{name} must be in [0, 1), got {frac}")
    if learning_fraction + probe_fraction >= 1.0:
        raise ValueError("learning_fraction + probe_fraction must be < 1")
    arr = _as_links(links)
    L = arr.shape[0]
    nu = n_users if n_users is not None else (int(arr[:, 0].max()) + 1 if L else 0)
    ni = n_items if n_items is not None else (int(arr[:, 1].max()) + 1 if L else 0)
    quotas = [int(math.floor(learning_fraction * L)), int(math.floor(probe_fraction * L))]
    training, learning, probe = _walk_split(arr, quotas, seed, ni)
    short = sum(quotas) - learning.shape[0] - probe.shape[0]
    if short:
        logger.warning("split quota short by %d link(s): items would lose their last link", short)
    return SplitSet(training, learning, probe, seed=seed, n_users=nu, n_items=ni)


def split_double(
    links,
    probe_fraction: float = 0.10,
    seed: int = 0,
    n_users: int | None = None,
    n_items: int | None = None,
) -> SplitSet:
    """Random training/probe split (default 90/10); the learning set is empty."""
    if not 0.0 < probe_fraction < 1.0:
        raise ValueError(f"probe_fraction must be in (0, 1), got {probe_fraction}")
    return split_triple(links, 0.0, probe_fraction, seed, n_users, n_items)
