"""CSV persistence for telemetry datasets.

Layout: one 'timestamp' column (epoch seconds), then one reading column per
device followed by its '<device>__rating' column.  Floats are written in
shortest round-trip form, so write/read cycles are bit-exact.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np
import pandas as pd

from .tsa import DeviceSeries

RATING_SUFFIX = "__rating"


class DataError(ValueError):
    """Malformed dataset file; message carries a line number when known."""


def write_csv(path: str, data: dict[str, DeviceSeries]) -> None:
    if not data:
        raise DataError("nothing to write: dataset is empty")
    devices = sorted(data)
    first = data[devices[0]]
    n = len(first.readings)
    for name in devices:
        s = data[name]
        if len(s.readings) != n or s.t0 != first.t0 or s.dt != first.dt:
            raise DataError("devices disagree on length or time axis")
    columns: dict[str, np.ndarray] = {"timestamp": first.time_axis()}
    for name in devices:
        columns[name] = data[name].readings
        columns[name + RATING_SUFFIX] = data[name].ratings
    pd.DataFrame(columns).to_csv(path, index=False)


def _rescan_for_bad_line(path: str, expected_fields: int | None) -> str:
    """Locate the first malformed data row with the plain csv reader."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return "file is empty"
        want = expected_fields if expected_fields is not None else len(header)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != want:
                return f"line {lineno}: expected {want} fields, found {len(row)}"
            for cell in row:
                try:
                    float(cell)
                except ValueError:
                    return f"line {lineno}: {cell!r} is not a number"
    return "unreadable file"


def read_csv(path: str) -> dict[str, DeviceSeries]:
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.ParserError:
        raise DataError(_rescan_for_bad_line(path, None)) from None
    except pd.errors.EmptyDataError:
        raise DataError("file is empty") from None

    cols = list(frame.columns)
    if not cols or cols[0] != "timestamp":
        raise DataError("first column must be 'timestamp'")
    devices = [c for c in cols[1:] if not c.endswith(RATING_SUFFIX)]
    expected = ["timestamp"]
    for name in devices:
        expected += [name, name + RATING_SUFFIX]
    if cols != expected:
        raise DataError(
            "columns must interleave '<device>,<device>__rating' pairs"
        )
    if len(frame) < 2:
        raise DataError("need at least two rows to fix the sampling step")

    for col in cols:
        if not np.issubdtype(frame[col].dtype, np.number):
            raise DataError(_rescan_for_bad_line(path, len(cols)))
        if frame[col].isna().any():
            lineno = int(frame[col].isna().idxmax()) + 2
            raise DataError(f"line {lineno}: missing value in column {col!r}")

    ts = frame["timestamp"].to_numpy(dtype=float)
    steps = np.diff(ts)
    dt = float(steps[0])
    if dt <= 0 or not np.allclose(steps, dt, rtol=0.0, atol=1e-6 * max(dt, 1.0)):
        raise DataError("timestamps must increase by a constant step")

    data: dict[str, DeviceSeries] = {}
    for name in devices:
        try:
            data[name] = DeviceSeries(
                name,
                float(ts[0]),
                dt,
                frame[name].to_numpy(dtype=float),
                frame[name + RATING_SUFFIX].to_numpy(dtype=float),
            )
        except ValueError as exc:
            raise DataError(f"device {name!r}: {exc}") from None
    return data


def write_truth(path: str, truth: dict) -> None:
    with open(path, "w") as fh:
        json.dump(truth, fh, indent=2)
        fh.write("\n")


def truth_path_for(csv_path: str) -> str:
    stem, _ = os.path.splitext(csv_path)
    return stem + ".truth.json"
