from __future__ import annotations

import csv
import json
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from beautifultable import ALIGN_RIGHT, BeautifulTable

from .constants import DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV

log = logging.getLogger("echochamber")

__all__ = [
    "fmt_float",
    "fmt_cell",
    "render_table",
    "output_dir",
    "utc_stamp",
    "write_csv",
    "write_json",
    "dumps",
    "trajectory_rows",
]


def fmt_float(value: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(value))


def fmt_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def render_table(header: Sequence[str], rows: Iterable[Sequence[Any]], precision: int = 4) -> str:
    table = BeautifulTable(default_alignment=ALIGN_RIGHT, maxwidth=500, precision=precision)
    table.set_style(BeautifulTable.STYLE_RST)
    table.columns.header = list(header)
    for row in rows:
        table.rows.append(["-" if i is None else i for i in row])
    return str(table)


def output_dir(explicit: Optional[Union[str, Path]] = None) -> Path:
    """--output-dir, else $ECHOCHAMBER_OUTPUT_DIR, else ./output. Created if missing."""
    path = Path(explicit or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def utc_stamp(moment: Optional[datetime] = None) -> str:
    moment = moment or datetime.now(timezone.utc)
    return moment.strftime("%Y%m%dT%H%M%S")


def write_csv(path: Union[str, Path], fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    path = Path(path)
    count = 0
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: fmt_cell(v) for k, v in row.items()})
            count += 1
    log.info("Wrote %d rows to %s", count, path)
    return path


def write_json(path: Union[str, Path], data: Any) -> Path:
    path = Path(path)
    with path.open("w") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_jsonable)
        f.write("\n")
    return path


def dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)


def trajectory_rows(times: np.ndarray, states: np.ndarray, names: Optional[List[str]] = None):
    names = names or [f"x{i + 1}" for i in range(states.shape[1])]
    for t, state in zip(times.tolist(), states.tolist()):
        row = {"t": t}
        row.update(zip(names, state))
        yield row
