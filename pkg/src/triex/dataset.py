"""Two-table entity-resolution datasets in the common benchmark CSV layout.

A dataset directory holds ``tableA.csv`` and ``tableB.csv`` (each with an
``id`` column followed by attribute columns) plus one or more labeled pair
splits (``train.csv``/``valid.csv``/``test.csv`` with ``ltable_id``,
``rtable_id``, ``label`` columns).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

SIDE_U = "U"
SIDE_V = "V"

TABLE_FILES = {SIDE_U: "tableA.csv", SIDE_V: "tableB.csv"}
SPLIT_FILES = ("train", "valid", "test")


class DatasetError(Exception):
    """Raised when a dataset directory cannot be loaded or is inconsistent."""


def tokenize(value: str) -> list[str]:
    """Split text on whitespace runs; empty text yields no tokens."""
    return value.split()


@dataclass(frozen=True)
class Schema:
    """Ordered attribute names of one table side."""

    side: str
    attributes: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.side not in (SIDE_U, SIDE_V):
            raise DatasetError(f"unknown side {self.side!r}")
        if len(self.attributes) < 2:
            raise DatasetError(
                f"side {self.side} has {len(self.attributes)} attribute(s); "
                "at least 2 are required"
            )
        if len(set(self.attributes)) != len(self.attributes):
            raise DatasetError(f"duplicate attribute names in side {self.side}")

    def __len__(self) -> int:
        return len(self.attributes)


@dataclass(frozen=True)
class Record:
    """One structured entity description.

    ``values`` maps attribute name to text (possibly empty) and preserves the
    schema's attribute order. Records are compared and cached by content, not
    by id, because the scoring oracle only ever sees attribute values.
    """

    id: str
    side: str
    values: dict[str, str]

    def __getitem__(self, attr: str) -> str:
        return self.values[attr]

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(self.values)

    @property
    def fingerprint(self) -> tuple:
        return (self.side, tuple(self.values.items()))

    def same_values(self, other: "Record") -> bool:
        return self.side == other.side and self.values == other.values


@dataclass(frozen=True)
class LabeledPair:
    id_u: str
    id_v: str
    label: bool


@dataclass
class Dataset:
    """Immutable after load; safe for concurrent read access."""

    schema_u: Schema
    schema_v: Schema
    table_u: dict[str, Record]
    table_v: dict[str, Record]
    splits: dict[str, list[LabeledPair]] = field(default_factory=dict)

    def schema(self, side: str) -> Schema:
        return self.schema_u if side == SIDE_U else self.schema_v

    def table(self, side: str) -> dict[str, Record]:
        return self.table_u if side == SIDE_U else self.table_v

    def pair_records(self, pair: LabeledPair) -> tuple[Record, Record]:
        return self.table_u[pair.id_u], self.table_v[pair.id_v]

    def summary(self) -> dict:
        """JSON-ready overview used by the CLI."""
        return {
            "schema": {
                SIDE_U: list(self.schema_u.attributes),
                SIDE_V: list(self.schema_v.attributes),
            },
            "records": {SIDE_U: len(self.table_u), SIDE_V: len(self.table_v)},
            "splits": {
                name: {
                    "pairs": len(pairs),
                    "matches": sum(1 for p in pairs if p.label),
                }
                for name, pairs in self.splits.items()
            },
        }


def _read_table(path: Path, side: str) -> tuple[Schema, dict[str, Record]]:
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path.name}: empty file, header row required") from None
        if "id" not in header:
            raise DatasetError(f"{path.name}: missing required 'id' column")
        id_col = header.index("id")
        attributes = tuple(name for i, name in enumerate(header) if i != id_col)
        schema = Schema(side=side, attributes=attributes)
        records: dict[str, Record] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            # short rows are padded so missing trailing cells become empty text
            row = row + [""] * (len(header) - len(row))
            rec_id = row[id_col]
            if rec_id in records:
                raise DatasetError(f"{path.name}:{line_no}: duplicate id {rec_id!r}")
            values = {
                name: row[i] for i, name in enumerate(header) if i != id_col
            }
            records[rec_id] = Record(id=rec_id, side=side, values=values)
    return schema, records


def _read_split(
    path: Path, table_u: dict[str, Record], table_v: dict[str, Record]
) -> list[LabeledPair]:
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"ltable_id", "rtable_id", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DatasetError(
                f"{path.name}: expected columns ltable_id, rtable_id, label"
            )
        pairs: list[LabeledPair] = []
        for line_no, row in enumerate(reader, start=2):
            id_u, id_v, raw = row["ltable_id"], row["rtable_id"], row["label"]
            if raw not in ("0", "1"):
                raise DatasetError(
                    f"{path.name}:{line_no}: non-binary label {raw!r} for pair "
                    f"({id_u}, {id_v})"
                )
            if id_u not in table_u:
                raise DatasetError(
                    f"{path.name}:{line_no}: pair ({id_u}, {id_v}) references "
                    f"unknown tableA id {id_u!r}"
                )
            if id_v not in table_v:
                raise DatasetError(
                    f"{path.name}:{line_no}: pair ({id_u}, {id_v}) references "
                    f"unknown tableB id {id_v!r}"
                )
            pairs.append(LabeledPair(id_u=id_u, id_v=id_v, label=raw == "1"))
    return pairs


def load_dataset(directory: str | Path) -> Dataset:
    """Load a benchmark-layout dataset directory.

    Labels are parsed 1 -> match, 0 -> non-match; missing attribute values are
    kept as empty text.
    """
    directory = Path(directory)
    for side in (SIDE_U, SIDE_V):
        if not (directory / TABLE_FILES[side]).is_file():
            raise DatasetError(f"missing file {TABLE_FILES[side]} in {directory}")
    schema_u, table_u = _read_table(directory / TABLE_FILES[SIDE_U], SIDE_U)
    schema_v, table_v = _read_table(directory / TABLE_FILES[SIDE_V], SIDE_V)

    splits: dict[str, list[LabeledPair]] = {}
    for name in SPLIT_FILES:
        path = directory / f"{name}.csv"
        if path.is_file():
            splits[name] = _read_split(path, table_u, table_v)
    if not splits:
        raise DatasetError(
            f"missing split file in {directory}: need at least one of "
            + ", ".join(f"{n}.csv" for n in SPLIT_FILES)
        )
    return Dataset(
        schema_u=schema_u,
        schema_v=schema_v,
        table_u=table_u,
        table_v=table_v,
        splits=splits,
    )


def save_dataset(dataset: Dataset, directory: str | Path) -> None:
    """Write a dataset back out in the same CSV layout (round-trip support)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for side in (SIDE_U, SIDE_V):
        schema = dataset.schema(side)
        with (directory / TABLE_FILES[side]).open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["id", *schema.attributes])
            for record in dataset.table(side).values():
                writer.writerow([record.id, *(record.values[a] for a in schema.attributes)])
    for name, pairs in dataset.splits.items():
        with (directory / f"{name}.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["ltable_id", "rtable_id", "label"])
            for pair in pairs:
                writer.writerow([pair.id_u, pair.id_v, int(pair.label)])
