"""Dataset records, CSV I/O and the cleaning pass."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .smiles import MoleculeGraph, ParseError, parse_smiles


class MalformedCsv(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class Record:
    smiles: str
    labels: tuple[str, ...]


@dataclass(frozen=True)
class Dropped:
    row: int
    record: Record
    reason: str
    detail: str = ""


@dataclass
class CleanResult:
    kept: list[Record] = field(default_factory=list)
    dropped: list[Dropped] = field(default_factory=list)
    graphs: list[MoleculeGraph] = field(default_factory=list)
    kept_rows: list[int] = field(default_factory=list)


def split_labels(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    seen: dict[str, None] = {}
    for part in text.split(";"):
        part = part.strip()
        if part:
            seen.setdefault(part, None)
    return tuple(seen)


def read_dataset(path) -> list[Record]:
    """Read a ``smiles,labels`` CSV. Labels are ``;``-separated."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty file, expected header 'smiles,labels'", 1) from None
        if [h.strip().lower() for h in header] != ["smiles", "labels"]:
            raise MalformedCsv(f"expected header 'smiles,labels', got {header!r}", 1)
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise MalformedCsv(f"expected 2 fields, got {len(row)}", reader.line_num)
            records.append(Record(row[0].strip(), split_labels(row[1])))
    return records


def write_dataset(records, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["smiles", "labels"])
        for r in records:
            w.writerow([r.smiles, ";".join(r.labels)])


def clean_dataset(rows) -> CleanResult:
    """Keep rows whose SMILES is present and parses and which carry a label.

    Never raises on bad rows; every rejected row lands in ``dropped`` with a
    reason of ``missing_smiles``, ``parse_error`` or ``no_labels``.
    """
    out = CleanResult()
    for i, rec in enumerate(rows):
        if not isinstance(rec, Record):
            rec = Record(rec["smiles"] or "", tuple(rec["labels"] or ()))
        if not rec.smiles or not rec.smiles.strip():
            out.dropped.append(Dropped(i, rec, "missing_smiles"))
            continue
        try:
            graph = parse_smiles(rec.smiles.strip())
        except ParseError as exc:
            out.dropped.append(Dropped(i, rec, "parse_error", f"{type(exc).__name__}: {exc}"))
            continue
        if not rec.labels:
            out.dropped.append(Dropped(i, rec, "no_labels"))
            continue
        out.kept.append(rec)
        out.graphs.append(graph)
        out.kept_rows.append(i)
    return out


def write_cleaning_report(result: CleanResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "reason"])
        for d in result.dropped:
            w.writerow([d.row, d.reason])


def label_vocabulary(records) -> list[str]:
    """Distinct labels sorted by descending frequency, then name."""
    counts: dict[str, int] = {}
    for r in records:
        for lab in r.labels:
            counts[lab] = counts.get(lab, 0) + 1
    return sorted(counts, key=lambda k: (-counts[k], k))


def label_matrix(records, labels) -> np.ndarray:
    index = {lab: j for j, lab in enumerate(labels)}
    Y = np.zeros((len(records), len(labels)))
    for i, r in enumerate(records):
        for lab in r.labels:
            Y[i, index[lab]] = 1.0
    return Y
