"""Return panels: CSV ingestion, universe sampling and rolling windows.

Panels hold simple daily returns (0.01 == 1%) for a fixed set of tickers with
complete history. Dates are opaque strings compared lexicographically, so
ISO-8601 is the safe choice.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Sequence, Union

import numpy as np


class PanelFormatError(ValueError):
    """Malformed CSV input (bad header, wrong column count, unparseable number)."""


class PanelValidationError(ValueError):
    """Well-formed CSV that violates a panel invariant (duplicate date, missing cell)."""


@dataclass(frozen=True)
class ReturnPanel:
    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise PanelValidationError("panel values must be a 2-d matrix")
        if values.shape != (len(self.dates), len(self.tickers)):
            raise PanelValidationError(
                f"values shape {values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise PanelValidationError("panel needs at least one date and one ticker")
        if len(set(self.dates)) != len(self.dates):
            raise PanelValidationError("duplicate dates in panel")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise PanelValidationError("panel dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise PanelValidationError(
                f"non-finite value at date {self.dates[r]!r}, ticker {self.tickers[c]!r}"
            )
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def n_assets(self) -> int:
        return self.values.shape[1]

    def scaled(self, factor: float) -> "ReturnPanel":
        return ReturnPanel(self.dates, self.tickers, self.values * factor)

    def select(self, tickers: Sequence[str]) -> "ReturnPanel":
        idx = ticker_indices(self, tickers)
        return ReturnPanel(self.dates, [self.tickers[i] for i in idx], self.values[:, idx])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReturnPanel):
            return NotImplemented
        return (
            self.dates == other.dates
            and self.tickers == other.tickers
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class ReturnMatrix:
    """A T x N slice of a panel; ``window_start`` is the first panel row."""

    values: np.ndarray
    window_start: int = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        # N == 1 is allowed for single-asset backtests; spectral routines demand N >= 2
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"return matrix must be T x N with T, N >= 1; got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("return matrix contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


Source = Union[str, os.PathLike, IO[str], IO[bytes], bytes]


def _read_text(source: Source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def parse_panel(text: str, *, prices: bool = False) -> ReturnPanel:
    """Parse CSV text with a ``date,<ticker>,...`` header into a panel.

    Rows are sorted ascending by date. With ``prices=True`` the body holds
    price levels and is converted to simple returns (first row dropped).
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise PanelFormatError("empty CSV input") from None
    header = [h.strip() for h in header]
    if not header or header[0].lower() != "date":
        raise PanelFormatError("row 1: header must start with 'date'")
    tickers = header[1:]
    if not tickers:
        raise PanelFormatError("row 1: header has no ticker columns")
    if len(set(tickers)) != len(tickers):
        raise PanelFormatError("row 1: duplicate ticker names in header")

    dates: list[str] = []
    rows: list[list[float]] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise PanelFormatError(
                f"row {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        date = row[0].strip()
        if not date:
            raise PanelValidationError(f"row {lineno}: empty date")
        parsed = []
        for ticker, cell in zip(tickers, row[1:]):
            cell = cell.strip()
            if not cell:
                raise PanelValidationError(f"row {lineno}, ticker {ticker!r}: missing value")
            try:
                x = float(cell)
            except ValueError:
                raise PanelFormatError(
                    f"row {lineno}, ticker {ticker!r}: cannot parse {cell!r} as a number"
                ) from None
            if not math.isfinite(x):
                raise PanelValidationError(f"row {lineno}, ticker {ticker!r}: non-finite value {cell!r}")
            parsed.append(x)
        dates.append(date)
        rows.append(parsed)

    if not rows:
        raise PanelFormatError("CSV has a header but no data rows")
    seen: dict[str, int] = {}
    for i, d in enumerate(dates):
        if d in seen:
            raise PanelValidationError(f"duplicate date {d!r} (rows {seen[d] + 2} and {i + 2})")
        seen[d] = i

    order = sorted(range(len(dates)), key=dates.__getitem__)
    values = np.array(rows, dtype=float)[order]
    dates = [dates[i] for i in order]
    if prices:
        values, dates = prices_to_returns(values), dates[1:]
        if len(dates) == 0:
            raise PanelFormatError("need at least two price rows to form returns")
    return ReturnPanel(tuple(dates), tuple(tickers), values)


def load_panel(source: Source, *, prices: bool = False) -> ReturnPanel:
    """Load a panel from a path, bytes, or an open (text or binary) stream."""
    return parse_panel(_read_text(source), prices=prices)


def prices_to_returns(prices: np.ndarray) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    if np.any(prices[:-1] == 0):
        raise PanelValidationError("zero price cannot be converted to a return")
    return prices[1:] / prices[:-1] - 1.0


def panel_to_csv(panel: ReturnPanel) -> str:
    # repr() round-trips float64 exactly
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", *panel.tickers])
    for date, row in zip(panel.dates, panel.values):
        writer.writerow([date, *(repr(float(x)) for x in row)])
    return out.getvalue()


def ticker_indices(panel: ReturnPanel, tickers: Sequence[str]) -> list[int]:
    lookup = {t: i for i, t in enumerate(panel.tickers)}
    missing = [t for t in tickers if t not in lookup]
    if missing:
        raise KeyError(f"unknown tickers: {', '.join(missing)}")
    return [lookup[t] for t in tickers]


def sample_universe(panel: ReturnPanel, n: int, rng: np.random.Generator) -> list[int]:
    """Draw ``n`` distinct asset indices uniformly without replacement."""
    if n < 1 or n > panel.n_assets:
        raise ValueError(f"cannot sample {n} assets from a panel of {panel.n_assets}")
    return [int(i) for i in rng.choice(panel.n_assets, size=n, replace=False)]


def window(panel: ReturnPanel, universe: Sequence[int], t: int, w: int) -> ReturnMatrix:
    """Rows ``t-w .. t-1`` for the given columns: the data available before day ``t``."""
    if w < 1:
        raise ValueError("window length must be positive")
    if t < w or t > panel.n_days:
        raise ValueError(f"day {t} has no complete window of length {w} (panel has {panel.n_days} days)")
    idx = list(universe)
    if not idx or min(idx) < 0 or max(idx) >= panel.n_assets:
        raise ValueError("universe indices out of range")
    return ReturnMatrix(panel.values[t - w : t, idx], window_start=t - w)
