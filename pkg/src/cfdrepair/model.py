"""Tabular data model: schema, tuples, datasets, CSV round-tripping.

Every cell value is a string. There is no type inference; CSV files are
read as-is and compared with exact, case-sensitive equality throughout.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

ID_COLUMN = "__id"
WEIGHT_COLUMN = "__weight"

__all__ = [
    "ID_COLUMN",
    "WEIGHT_COLUMN",
    "DataError",
    "Schema",
    "Tuple",
    "Dataset",
]


class DataError(ValueError):
    """Raised for malformed schemas, rows, or CSV input."""


@dataclass(frozen=True)
class Schema:
    """Ordered attribute list of a single relation."""

    attributes: tuple[str, ...]
    name: str = "R"

    def __post_init__(self) -> None:
        if not self.attributes:
            raise DataError("schema needs at least one attribute")
        seen = set()
        for attr in self.attributes:
            if not attr or attr.startswith("__"):
                raise DataError(f"bad attribute name: {attr!r}")
            if attr in seen:
                raise DataError(f"duplicate attribute: {attr!r}")
            seen.add(attr)

    def __contains__(self, attr: object) -> bool:
        return attr in self.attributes

    def index_of(self, attr: str) -> int:
        try:
            return self.attributes.index(attr)
        except ValueError:
            raise DataError(f"unknown attribute: {attr!r}") from None


@dataclass
class Tuple:
    """One row: an opaque id, a cell per schema attribute, and a weight.

    The weight scales the row's contribution to violation totals; it
    defaults to 1.0 so unweighted data behaves like plain counting.
    """

    id: str
    cells: dict[str, str]
    weight: float = 1.0

    def value(self, attr: str) -> str:
        return self.cells[attr]


class Dataset:
    """A schema plus an ordered list of tuples with unique ids."""

    def __init__(self, schema: Schema, tuples: list[Tuple]):
        self.schema = schema
        self.tuples = tuples
        self._by_id: dict[str, Tuple] = {}
        want = set(schema.attributes)
        for t in tuples:
            if t.id in self._by_id:
                raise DataError(f"duplicate tuple id: {t.id!r}")
            if set(t.cells) != want:
                raise DataError(f"tuple {t.id!r} cells do not match schema")
            if not (t.weight >= 0.0):
                raise DataError(f"tuple {t.id!r} has negative weight")
            self._by_id[t.id] = t

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)

    def __contains__(self, tid: object) -> bool:
        return tid in self._by_id

    def tuple(self, tid: str) -> Tuple:
        try:
            return self._by_id[tid]
        except KeyError:
            raise DataError(f"unknown tuple id: {tid!r}") from None

    def value(self, tid: str, attr: str) -> str:
        return self.tuple(tid).cells[attr]

    def set_value(self, tid: str, attr: str, value: str) -> None:
        if attr not in self.schema:
            raise DataError(f"unknown attribute: {attr!r}")
        self.tuple(tid).cells[attr] = value

    def column_values(self, attr: str) -> list[str]:
        """All values of one attribute, in row order (with repeats)."""
        if attr not in self.schema:
            raise DataError(f"unknown attribute: {attr!r}")
        return [t.cells[attr] for t in self.tuples]

    def copy(self) -> "Dataset":
        return Dataset(
            self.schema,
            [Tuple(t.id, dict(t.cells), t.weight) for t in self.tuples],
        )

    # -- CSV ---------------------------------------------------------------

    @classmethod
    def from_csv_text(cls, text: str, name: str = "R") -> "Dataset":
        """Parse CSV with a header row.

        An ``__id`` column supplies tuple ids (otherwise the 0-based row
        index is used) and an ``__weight`` column supplies weights.
        """
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV: missing header row") from None
        attrs = tuple(h for h in header if h not in (ID_COLUMN, WEIGHT_COLUMN))
        schema = Schema(attrs, name=name)
        id_pos = header.index(ID_COLUMN) if ID_COLUMN in header else None
        w_pos = header.index(WEIGHT_COLUMN) if WEIGHT_COLUMN in header else None
        tuples = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise DataError(f"row {i + 1}: expected {len(header)} fields, got {len(row)}")
            tid = row[id_pos] if id_pos is not None else str(i)
            if w_pos is not None:
                try:
                    weight = float(row[w_pos])
                except ValueError:
                    raise DataError(f"row {i + 1}: bad weight {row[w_pos]!r}") from None
            else:
                weight = 1.0
            cells = {h: v for h, v in zip(header, row) if h not in (ID_COLUMN, WEIGHT_COLUMN)}
            tuples.append(Tuple(tid, cells, weight))
        return cls(schema, tuples)

    @classmethod
    def from_csv(cls, path: str, name: str = "R") -> "Dataset":
        with open(path, newline="", encoding="utf-8") as fh:
            return cls.from_csv_text(fh.read(), name=name)

    def to_csv_text(self, include_id: bool = True) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        header = ([ID_COLUMN] if include_id else []) + list(self.schema.attributes)
        writer.writerow(header)
        for t in self.tuples:
            row = ([t.id] if include_id else []) + [t.cells[a] for a in self.schema.attributes]
            writer.writerow(row)
        return out.getvalue()

    def to_csv(self, path: str, include_id: bool = True) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv_text(include_id=include_id))
