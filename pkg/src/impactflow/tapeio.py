"""Tape, metaorder, and price CSV serialization.

Schemas (UTF-8, LF, decimal point, floats at 17 significant digits for
bit-exact round-trips):

* tape:        ``trade_idx,time,metaorder_id,sign,volume,price``
  (price empty unless attached; metaorder_id and price optional on read --
  a tape without metaorder ids is analysis-only)
* metaorders:  ``metaorder_id,start_time,duration,sign,child_volume,participation``
* price:       ``trade_idx,price``

Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import TapeFormatError
from .flow import MetaorderTable, TradeTape

TAPE_HEADER = "trade_idx,time,metaorder_id,sign,volume,price"
META_HEADER = "metaorder_id,start_time,duration,sign,child_volume,participation"
PRICE_HEADER = "trade_idx,price"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tape_csv(tape: TradeTape, path: str | Path, price: np.ndarray | None = None) -> None:
    """Write the trade tape; `price` (len N) fills the optional price column."""
    if price is not None and len(price) != tape.n_trades:
        raise TapeFormatError("price column length does not match tape")
    lines = [TAPE_HEADER]
    has_meta = tape.meta_ids is not None
    for i in range(tape.n_trades):
        mid = str(int(tape.meta_ids[i])) if has_meta and tape.meta_ids[i] >= 0 else ""
        pr = _fmt(price[i]) if price is not None else ""
        lines.append(
            f"{i},{_fmt(tape.times[i])},{mid},{int(tape.signs[i])},{_fmt(tape.volumes[i])},{pr}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_tape_csv(path: str | Path):
    """Read a tape CSV; returns (TradeTape, price array or None).

    Missing metaorder_id values yield an analysis-only tape (ids -1, no
    registry).  Malformed rows raise TapeFormatError with line numbers.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TapeFormatError(f"cannot read {path}: {exc}") from exc
    lines = raw.splitlines()
    if not lines or lines[0].strip() != TAPE_HEADER:
        raise TapeFormatError(f"{path}:1: expected header {TAPE_HEADER!r}")
    n = len(lines) - 1
    times = np.empty(n)
    metas = np.full(n, -1, dtype=np.int64)
    signs = np.empty(n, dtype=np.int8)
    vols = np.empty(n)
    price = np.full(n, np.nan)
    any_price = False
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise TapeFormatError(f"{path}:{ln}: expected 6 fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            times[idx] = float(parts[1])
            if parts[2] != "":
                metas[idx] = int(parts[2])
            s = int(parts[3])
            if s not in (-1, 1):
                raise ValueError(f"sign must be -1 or 1, got {s}")
            signs[idx] = s
            v = float(parts[4])
            if not v > 0:
                raise ValueError(f"volume must be > 0, got {v}")
            vols[idx] = v
            if parts[5] != "":
                price[idx] = float(parts[5])
                any_price = True
        except (ValueError, IndexError) as exc:
            raise TapeFormatError(f"{path}:{ln}: {exc}") from exc
    if np.any(np.diff(times) < 0):
        raise TapeFormatError(f"{path}: times are not non-decreasing")
    tape = TradeTape(
        times=times,
        meta_ids=metas,
        signs=signs,
        volumes=vols,
        metaorders=None,
        params=None,
    )
    return tape, (price if any_price else None)


def write_metaorders_csv(table: MetaorderTable, path: str | Path) -> None:
    lines = [META_HEADER]
    for i in range(len(table)):
        lines.append(
            f"{i},{_fmt(table.start_times[i])},{_fmt(table.durations[i])},"
            f"{int(table.signs[i])},{_fmt(table.child_volumes[i])},{_fmt(table.participation[i])}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_metaorders_csv(path: str | Path) -> MetaorderTable:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != META_HEADER:
        raise TapeFormatError(f"{path}:1: expected header {META_HEADER!r}")
    n = len(lines) - 1
    starts = np.empty(n)
    durs = np.empty(n)
    signs = np.empty(n, dtype=np.int8)
    qs = np.empty(n)
    part = np.empty(n)
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise TapeFormatError(f"{path}:{ln}: expected 6 fields, got {len(parts)}")
        try:
            i = int(parts[0])
            starts[i] = float(parts[1])
            durs[i] = float(parts[2])
            signs[i] = int(parts[3])
            qs[i] = float(parts[4])
            part[i] = float(parts[5])
        except (ValueError, IndexError) as exc:
            raise TapeFormatError(f"{path}:{ln}: {exc}") from exc
    return MetaorderTable(start_times=starts, durations=durs, signs=signs, child_volumes=qs, participation=part)


def write_price_csv(trade_idx: np.ndarray, price: np.ndarray, path: str | Path) -> None:
    lines = [PRICE_HEADER]
    for i, p in zip(trade_idx, price):
        lines.append(f"{int(i)},{_fmt(p)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_price_csv(path: str | Path):
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != PRICE_HEADER:
        raise TapeFormatError(f"{path}:1: expected header {PRICE_HEADER!r}")
    idx = np.empty(len(lines) - 1, dtype=np.int64)
    pr = np.empty(len(lines) - 1)
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 2:
            raise TapeFormatError(f"{path}:{ln}: expected 2 fields")
        try:
            idx[ln - 2] = int(parts[0])
            pr[ln - 2] = float(parts[1])
        except ValueError as exc:
            raise TapeFormatError(f"{path}:{ln}: {exc}") from exc
    return idx, pr


def tapes_equal(a: TradeTape, b: TradeTape) -> bool:
    return (
        a.n_trades == b.n_trades
        and np.array_equal(a.times, b.times)
        and np.array_equal(a.meta_ids, b.meta_ids)
        and np.array_equal(a.signs, b.signs)
        and np.array_equal(a.volumes, b.volumes)
    )
