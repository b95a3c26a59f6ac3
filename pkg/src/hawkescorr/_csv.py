"""Fixed float formatting so CSV outputs are byte-identical across runs."""

from __future__ import annotations

import csv
from typing import Iterable, Sequence, TextIO


def fmt(x) -> str:
    if isinstance(x, (bool,)):
        return "1" if x else "0"
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_rows(fh: TextIO, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
