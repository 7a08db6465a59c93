"""Flat-file outputs: CSV rows, JSON reports and gnuplot two-column data.

CSV columns are fixed to (study, class, n, rep, statistic, value, seed);
floats serialize as their shortest round-trip decimals (``repr``)."""

from __future__ import annotations

import json
from typing import Sequence

CSV_COLUMNS = ("study", "class", "n", "rep", "statistic", "value", "seed")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[dict]) -> str:
    out = [",".join(CSV_COLUMNS)]
    for row in rows:
        out.append(",".join(_cell(row.get(col, "")) for col in CSV_COLUMNS))
    return "\n".join(out) + "\n"


def csv_to_rows(text: str) -> list:
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        row = dict(zip(header, cells))
        for key in ("n", "seed"):
            if row.get(key):
                row[key] = int(row[key])
        if row.get("value"):
            row["value"] = float(row["value"])
        rows.append(row)
    return rows


def rows_to_json(rows: Sequence[dict], spec_echo: str, constants_used: dict | None = None,
                 build_id: str = "ratioproc-0.1.0") -> str:
    return json.dumps(
        {
            "spec": spec_echo,
            "build_id": build_id,
            "constants_used": constants_used or {},
            "rows": list(rows),
        },
        indent=1,
        sort_keys=True,
        default=float,
    )


def write_gnuplot(path: str, xs: Sequence[float], ys: Sequence[float]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{_cell(float(x))} {_cell(float(y))}\n")
