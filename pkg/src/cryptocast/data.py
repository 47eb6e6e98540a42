"""Data ingestion, sentiment-index composition, scaling, and windowing.

A SeriesFrame is an immutable-by-convention bundle of strictly increasing
calendar dates and a float64 value matrix with named columns. Everything
downstream (normalization stats, supervised windows) derives from it.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DegenerateScaleError,
    DomainError,
    OrderingError,
    ParseError,
    SchemaError,
    SizeError,
)
from .rng import Rng

FGI_BANDS = ("extreme_fear", "fear", "greed", "extreme_greed")
_FGI_THRESHOLDS = (25.0, 50.0, 75.0)


@dataclass
class SeriesFrame:
    """Date-indexed rows of named float columns, in original units."""

    dates: list[dt.date]
    columns: list[str]
    values: np.ndarray  # (n_rows, n_columns) float64

    @classmethod
    def build(cls, dates, columns, values) -> "SeriesFrame":
        dates = list(dates)
        columns = list(columns)
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2 or values.shape != (len(dates), len(columns)):
            raise DataError(
                f"value matrix shape {values.shape} does not match "
                f"{len(dates)} dates x {len(columns)} columns"
            )
        if len(set(columns)) != len(columns):
            raise SchemaError(f"duplicate column names in {columns}")
        for i in range(1, len(dates)):
            if dates[i] <= dates[i - 1]:
                raise OrderingError(
                    f"dates must be strictly increasing; row {i + 1} "
                    f"({dates[i]}) does not follow {dates[i - 1]}"
                )
        if not np.all(np.isfinite(values)):
            raise DataError("frame contains non-finite values")
        frame = cls(dates=dates, columns=columns, values=values)
        if "fgi" in columns:
            fgi = frame.column("fgi")
            if fgi.min() < 0.0 or fgi.max() > 100.0:
                raise DomainError("fgi column must lie within [0, 100]")
        return frame

    def __len__(self) -> int:
        return len(self.dates)

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}; have {self.columns}") from None
        return self.values[:, j]

    def select(self, columns) -> "SeriesFrame":
        """New frame restricted to the given columns, in the given order."""
        idx = [self.columns.index(c) if c in self.columns else -1 for c in columns]
        missing = [c for c, j in zip(columns, idx) if j < 0]
        if missing:
            raise SchemaError(f"unknown column(s) {missing}; have {self.columns}")
        return SeriesFrame(list(self.dates), list(columns), self.values[:, idx].copy())

    def slice_rows(self, start: int, stop: int) -> "SeriesFrame":
        return SeriesFrame(
            self.dates[start:stop], list(self.columns), self.values[start:stop].copy()
        )

    def with_column(self, name: str, values: np.ndarray) -> "SeriesFrame":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(self),):
            raise DataError(f"column {name!r} has {values.shape[0]} rows, expected {len(self)}")
        return SeriesFrame.build(
            self.dates, self.columns + [name], np.column_stack([self.values, values])
        )

    def to_json_dict(self) -> dict:
        return {
            "format": "series-frame/1",
            "columns": list(self.columns),
            "dates": [d.isoformat() for d in self.dates],
            "values": {c: self.column(c).tolist() for c in self.columns},
        }


def concat_frames(first: SeriesFrame, second: SeriesFrame) -> SeriesFrame:
    """Stack two frames in time order. Only structural invariants are
    checked: the parts may hold normalized values, where original-unit
    domain rules (like the fgi range) no longer apply."""
    if first.columns != second.columns:
        raise SchemaError(
            f"cannot concatenate frames with columns {first.columns} and {second.columns}"
        )
    if first.dates and second.dates and second.dates[0] <= first.dates[-1]:
        raise OrderingError(
            f"second frame starts {second.dates[0]}, not after {first.dates[-1]}"
        )
    return SeriesFrame(
        first.dates + second.dates,
        list(first.columns),
        np.vstack([first.values, second.values]),
    )


def load_series(path, schema: dict[str, str] | None = None) -> SeriesFrame:
    """Read a CSV of ISO-dated float columns into a SeriesFrame.

    The file must carry a header; the date column is `date` unless the
    schema mapping says otherwise. With no schema, every non-date header
    becomes a float column under its own name. With a schema, each
    (frame column -> csv header) entry is required to exist and only the
    mapped columns are ingested.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if schema is None:
            mapping = {"date": "date"}
            mapping.update({h: h for h in header if h != "date"})
        else:
            mapping = dict(schema)
            mapping.setdefault("date", "date")
        col_index: dict[str, int] = {}
        for name, csv_name in mapping.items():
            if csv_name not in header:
                raise SchemaError(f"column {csv_name!r} not found in {path} header {header}")
            col_index[name] = header.index(csv_name)

        feature_names = [n for n in mapping if n != "date"]
        if not feature_names:
            raise SchemaError(f"{path} declares no value columns")
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for row_number, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                date = dt.date.fromisoformat(row[col_index["date"]].strip())
            except (ValueError, IndexError):
                raise ParseError(
                    f"{path} row {row_number}: unparseable date "
                    f"{row[col_index['date']] if len(row) > col_index['date'] else '<missing>'!r}"
                ) from None
            parsed: list[float] = []
            for name in feature_names:
                j = col_index[name]
                try:
                    value = float(row[j])
                except (ValueError, IndexError):
                    raise ParseError(
                        f"{path} row {row_number}: non-numeric value for column {name!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path} row {row_number}: non-finite value for column {name!r}"
                    )
                parsed.append(value)
            dates.append(date)
            rows.append(parsed)
    if not rows:
        raise SizeError(f"{path} contains no data rows")
    return SeriesFrame.build(dates, feature_names, np.array(rows, dtype=np.float64))


def write_series_csv(frame: SeriesFrame, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + frame.columns)
        for i, date in enumerate(frame.dates):
            writer.writerow([date.isoformat()] + [repr(float(v)) for v in frame.values[i]])


def compose_fgi(sentiment, trends, w1: float = 0.5, w2: float = 0.5):
    """Blend a [-1, 1] sentiment score and a [0, 100] search-interest score
    into a 0-100 fear/greed value: w1 * ((sentiment+1)/2 * 100) + w2 * trends.
    """
    sentiment = np.asarray(sentiment, dtype=np.float64)
    trends = np.asarray(trends, dtype=np.float64)
    if w1 < 0.0 or w2 < 0.0 or abs(w1 + w2 - 1.0) > 1e-9:
        raise DomainError(f"weights must be nonnegative and sum to 1, got {w1}, {w2}")
    if np.any(sentiment < -1.0) or np.any(sentiment > 1.0):
        raise DomainError("sentiment scores must lie in [-1, 1]")
    if np.any(trends < 0.0) or np.any(trends > 100.0):
        raise DomainError("trend scores must lie in [0, 100]")
    out = w1 * ((sentiment + 1.0) / 2.0 * 100.0) + w2 * trends
    return float(out) if out.ndim == 0 else out


def classify_fgi(score: float) -> str:
    """Market-mood band for a 0-100 score.

    Bands: [0, 25) extreme_fear, [25, 50) fear, [50, 75) greed,
    [75, 100] extreme_greed.
    """
    if not math.isfinite(score) or score < 0.0 or score > 100.0:
        raise DomainError(f"fgi score {score} outside [0, 100]")
    for threshold, band in zip(_FGI_THRESHOLDS, FGI_BANDS):
        if score < threshold:
            return band
    return FGI_BANDS[-1]


def classify_fgi_array(scores: np.ndarray) -> list[str]:
    return [classify_fgi(float(s)) for s in np.asarray(scores, dtype=np.float64)]


def add_fgi_column(frame: SeriesFrame, sentiment_column: str = "sentiment",
                   trends_column: str = "trends", w1: float = 0.5,
                   w2: float = 0.5) -> SeriesFrame:
    fgi = compose_fgi(frame.column(sentiment_column), frame.column(trends_column), w1, w2)
    return frame.with_column("fgi", fgi)


@dataclass
class SplitSpec:
    """Chronological split: first floor(ratio * n) rows train, rest test."""

    ratio: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise DomainError(f"split ratio must lie in (0, 1), got {self.ratio}")


def chronological_split(frame: SeriesFrame, spec: SplitSpec | float = 0.8):
    if isinstance(spec, (int, float)):
        spec = SplitSpec(float(spec))
    n = len(frame)
    if n < 5:
        raise SizeError(f"need at least 5 rows to split, got {n}")
    n_train = int(math.floor(spec.ratio * n))
    if n_train < 1 or n_train >= n:
        raise SizeError(f"ratio {spec.ratio} leaves an empty train or test part for n={n}")
    return frame.slice_rows(0, n_train), frame.slice_rows(n_train, n)


@dataclass
class NormStats:
    """Per-column min/max fitted on training rows only."""

    columns: list[str]
    mins: np.ndarray
    maxs: np.ndarray

    def for_column(self, name: str) -> tuple[float, float]:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise SchemaError(f"no normalization stats for column {name!r}") from None
        return float(self.mins[j]), float(self.maxs[j])

    def to_json_dict(self) -> dict:
        return {c: [float(lo), float(hi)]
                for c, lo, hi in zip(self.columns, self.mins, self.maxs)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "NormStats":
        cols = list(d.keys())
        mins = np.array([d[c][0] for c in cols], dtype=np.float64)
        maxs = np.array([d[c][1] for c in cols], dtype=np.float64)
        return cls(cols, mins, maxs)


def fit_minmax(train: SeriesFrame) -> NormStats:
    """Column-wise (min, max) over the training rows; rejects constants."""
    mins = train.values.min(axis=0)
    maxs = train.values.max(axis=0)
    for name, lo, hi in zip(train.columns, mins, maxs):
        if hi <= lo:
            raise DegenerateScaleError(
                f"column {name!r} is constant ({lo}); min-max scale undefined"
            )
    return NormStats(list(train.columns), mins.copy(), maxs.copy())


def apply_minmax(frame: SeriesFrame, stats: NormStats) -> SeriesFrame:
    """(x - min) / (max - min) per column. Values outside the fitted range
    map outside [0, 1]; they are intentionally not clamped so that
    inversion stays exact.
    """
    idx = []
    for name in frame.columns:
        if name not in stats.columns:
            raise SchemaError(f"no normalization stats for column {name!r}")
        idx.append(stats.columns.index(name))
    mins = stats.mins[idx]
    maxs = stats.maxs[idx]
    scaled = (frame.values - mins) / (maxs - mins)
    return SeriesFrame(list(frame.dates), list(frame.columns), scaled)


def invert_minmax(value, column: str, stats: NormStats):
    lo, hi = stats.for_column(column)
    return np.asarray(value, dtype=np.float64) * (hi - lo) + lo


@dataclass
class WindowSet:
    """Supervised samples: inputs are T consecutive normalized feature rows,
    the target is the next row's target column."""

    X: np.ndarray  # (n_samples, T, k)
    y: np.ndarray  # (n_samples,)
    window: int
    target_dates: list[dt.date]
    feature_columns: list[str] = field(default_factory=list)
    target_column: str = ""

    def __len__(self) -> int:
        return self.X.shape[0]

    def flatten(self) -> np.ndarray:
        """(n_samples, T*k) view for feedforward models."""
        return self.X.reshape(self.X.shape[0], -1)

    def to_json_dict(self) -> dict:
        return {
            "format": "window-set/1",
            "window": self.window,
            "feature_columns": list(self.feature_columns),
            "target_column": self.target_column,
            "target_dates": [d.isoformat() for d in self.target_dates],
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }


def make_windows(frame: SeriesFrame, window: int, target_column: str) -> WindowSet:
    """Slide a length-`window` input block over the frame; sample j uses rows
    j..j+window-1 of every column and targets row j+window of the target."""
    if window < 1:
        raise SizeError(f"window length must be >= 1, got {window}")
    n = len(frame)
    if n <= window:
        raise SizeError(f"frame has {n} rows; need more than window={window}")
    target = frame.column(target_column)
    n_samples = n - window
    k = len(frame.columns)
    X = np.empty((n_samples, window, k), dtype=np.float64)
    for j in range(n_samples):
        X[j] = frame.values[j:j + window]
    y = target[window:].copy()
    return WindowSet(
        X=X, y=y, window=window,
        target_dates=list(frame.dates[window:]),
        feature_columns=list(frame.columns),
        target_column=target_column,
    )


def build_eval_windows(train_norm: SeriesFrame, test_norm: SeriesFrame,
                       window: int, target_column: str,
                       policy: str = "strict") -> WindowSet:
    """Windows whose targets are the test rows.

    policy='strict': inputs come from test rows only, so the first
    `window` test rows serve as inputs and are never predicted.
    policy='borrow': the last `window` training rows are prepended so
    every test row gets a prediction.
    """
    if policy == "strict":
        return make_windows(test_norm, window, target_column)
    if policy == "borrow":
        n_train = len(train_norm)
        if n_train < window:
            raise SizeError(
                f"borrow policy needs {window} trailing training rows, have {n_train}"
            )
        stitched = concat_frames(train_norm.slice_rows(n_train - window, n_train), test_norm)
        return make_windows(stitched, window, target_column)
    raise DomainError(f"unknown test window policy {policy!r}")


@dataclass
class Forecast:
    """Per-date point predictions on the original price scale, with
    optional interval bounds once a band has been attached."""

    dates: list[dt.date]
    predicted: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    level: float | None = None


@dataclass
class SynthParams:
    """Controls for the synthetic fixture generator."""

    start_price: float = 100.0
    drift: float = 0.0005
    volatility: float = 0.01
    cycle_period: float = 60.0
    cycle_amplitude: float = 40.0  # fgi units
    price_cycle: float = 0.0       # log-return amplitude of the cyclic component
    fgi_lead: float = 15.0         # days by which fgi leads the price cycle
    fgi_noise: float = 2.0
    volume_base: float = 1e6
    volume_cycle: float = 0.25
    volume_noise: float = 0.1


def synthesize_series(seed: int, n: int, params: SynthParams | None = None) -> SeriesFrame:
    """Deterministic geometric random walk with a sinusoidal sentiment cycle.

    Prices stay positive, fgi stays within [0, 100], and identical seeds
    reproduce the frame bit for bit. With volatility and price_cycle both
    zero the price path is exactly start_price * exp(drift * t).
    """
    if n < 10:
        raise SizeError(f"synthetic series needs n >= 10, got {n}")
    p = params or SynthParams()
    rng = Rng(seed)
    price_shocks = rng.normal(size=n)
    fgi_shocks = rng.normal(size=n)
    volume_shocks = rng.normal(size=n)

    t = np.arange(n, dtype=np.float64)
    phase = 2.0 * np.pi * t / p.cycle_period
    log_price = np.empty(n)
    log_price[0] = np.log(p.start_price)
    returns = p.drift + p.price_cycle * np.sin(phase) + p.volatility * price_shocks
    for i in range(1, n):
        log_price[i] = log_price[i - 1] + returns[i]
    price = np.exp(log_price)

    fgi_phase = 2.0 * np.pi * (t + p.fgi_lead) / p.cycle_period
    fgi = 50.0 + p.cycle_amplitude * np.sin(fgi_phase) + p.fgi_noise * fgi_shocks
    fgi = np.clip(fgi, 0.0, 100.0)

    # volume shares the market cycle, a third of a period out of phase
    volume = p.volume_base * np.exp(
        p.volume_cycle * np.sin(2.0 * np.pi * (t + p.cycle_period / 3.0) / p.cycle_period)
        + p.volume_noise * volume_shocks
    )

    start = dt.date(2020, 1, 1)
    dates = [start + dt.timedelta(days=int(i)) for i in range(n)]
    return SeriesFrame.build(
        dates, ["close", "volume", "fgi"], np.column_stack([price, volume, fgi])
    )
