"""Synthetic dataset generators and file ingestion.

File formats (comma-separated, winner indices 1-based like everywhere else):

* features: header line then one row per item. Columns: ``id`` first, then
  optional ``label`` and/or ``name``, then numeric feature columns.
* comparisons: no header. A 3-field line ``ref,winner,loser`` is a paired
  comparison; a line with 4+ fields ``ref,c1,...,cC,winner`` is an answered
  query whose last field is the 1-based winner position. Conflicting or
  duplicate lines are kept as-is: crowdsourced corpora contain
  inconsistencies and they are evidence too.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .types import NNQuery, PairedComparison, QueryPool


def standard_normal_items(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, dim))


def random_psd_metric(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim))
    return a @ a.T / dim


def gaussian_blobs(
    n: int, centers: np.ndarray, std: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """n points split evenly across the given centers; returns (X, labels)."""
    centers = np.asarray(centers, dtype=np.float64)
    k = len(centers)
    labels = np.arange(n) % k
    x = centers[labels] + std * rng.standard_normal((n, centers.shape[1]))
    return x, labels


def random_triples(n_items: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(reference, a, b) index triples with three distinct items each."""
    out = np.empty((count, 3), dtype=np.intp)
    for i in range(count):
        out[i] = rng.choice(n_items, size=3, replace=False)
    return out


class IngestError(ValueError):
    """A dataset file failed validation; the message names the line."""


@dataclass
class FeatureTable:
    ids: list[int]
    features: np.ndarray
    labels: list[int] | None = None
    names: list[str] | None = None

    @property
    def n_items(self) -> int:
        return len(self.ids)

    def row_of(self, item_id: int) -> int:
        return self._index()[item_id]

    def _index(self) -> dict[int, int]:
        if not hasattr(self, "_id_to_row"):
            self._id_to_row = {i: r for r, i in enumerate(self.ids)}
        return self._id_to_row


def ingest_features(path: str | Path) -> FeatureTable:
    """Parse a feature table; errors name the offending line."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise IngestError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "id":
        raise IngestError(f"{path}:1: header must start with 'id'")
    meta_cols = {}
    col = 1
    while col < len(header) and header[col] in ("label", "name"):
        if header[col] in meta_cols:
            raise IngestError(f"{path}:1: duplicate column {header[col]!r}")
        meta_cols[header[col]] = col
        col += 1
    n_features = len(header) - col
    if n_features < 1:
        raise IngestError(f"{path}:1: no feature columns")
    ids: list[int] = []
    labels: list[int] = []
    names: list[str] = []
    rows: list[list[float]] = []
    seen: set[int] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != len(header):
            raise IngestError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}"
            )
        try:
            item_id = int(fields[0])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: id {fields[0]!r} is not an integer")
        if item_id in seen:
            raise IngestError(f"{path}:{lineno}: duplicate id {item_id}")
        seen.add(item_id)
        ids.append(item_id)
        if "label" in meta_cols:
            try:
                labels.append(int(fields[meta_cols["label"]]))
            except ValueError:
                raise IngestError(f"{path}:{lineno}: label is not an integer")
        if "name" in meta_cols:
            names.append(fields[meta_cols["name"]])
        try:
            rows.append([float(f) for f in fields[col:]])
        except ValueError:
            raise IngestError(f"{path}:{lineno}: non-numeric feature value")
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return FeatureTable(
        ids=ids,
        features=np.array(rows, dtype=np.float64),
        labels=labels if "label" in meta_cols else None,
        names=names if "name" in meta_cols else None,
    )


def write_features(path: str | Path, table: FeatureTable) -> None:
    header = ["id"]
    if table.labels is not None:
        header.append("label")
    if table.names is not None:
        header.append("name")
    header += [f"f{j}" for j in range(table.features.shape[1])]
    lines = [",".join(header)]
    for r, item_id in enumerate(table.ids):
        fields = [str(item_id)]
        if table.labels is not None:
            fields.append(str(table.labels[r]))
        if table.names is not None:
            fields.append(table.names[r])
        fields += [repr(float(v)) for v in table.features[r]]
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def ingest_comparisons(
    path: str | Path, known_ids: set[int] | None = None
) -> tuple[list[PairedComparison], list[tuple[NNQuery, int]]]:
    """Parse a comparison corpus into triplets and answered queries."""
    comparisons: list[PairedComparison] = []
    responses: list[tuple[NNQuery, int]] = []
    lines = Path(path).read_text().splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            values = [int(f) for f in fields]
        except ValueError:
            raise IngestError(f"{path}:{lineno}: non-integer field")
        if len(values) < 3:
            raise IngestError(f"{path}:{lineno}: need at least 3 fields")
        if known_ids is not None:
            items = values[:-1] if len(values) > 3 else values
            unknown = [v for v in items if v not in known_ids]
            if unknown:
                raise IngestError(f"{path}:{lineno}: unknown item id {unknown[0]}")
        if len(values) == 3:
            ref, winner, loser = values
            try:
                comparisons.append(PairedComparison(ref, winner, loser))
            except ValueError as e:
                raise IngestError(f"{path}:{lineno}: {e}")
        else:
            ref, *cands, winner = values
            try:
                query = NNQuery(ref, tuple(cands))
            except ValueError as e:
                raise IngestError(f"{path}:{lineno}: {e}")
            if not 1 <= winner <= query.length:
                raise IngestError(
                    f"{path}:{lineno}: winner index {winner} outside 1..{query.length}"
                )
            responses.append((query, winner))
    return comparisons, responses


def pool_from_responses(responses: list[tuple[NNQuery, int]]) -> QueryPool:
    """The queries of an ingested corpus as a scoreable pool."""
    return QueryPool(tuple(q for q, _ in responses), origin="ingested")


def write_comparisons(
    path: str | Path,
    comparisons: list[PairedComparison] = (),
    responses: list[tuple[NNQuery, int]] = (),
) -> None:
    lines = [f"{c.reference},{c.winner},{c.loser}" for c in comparisons]
    for query, winner in responses:
        lines.append(
            ",".join([str(query.reference), *map(str, query.candidates), str(winner)])
        )
    Path(path).write_text("\n".join(lines) + "\n")
