"""Drifter-trace ingest: parse delimited text, filter, downsample, collapse time.

Positions are ``(lon, lat)`` used as planar coordinates; velocities are
``(u, v)`` in the file's units.  Nothing is projected or converted.
"""
from dataclasses import dataclass, field
from datetime import datetime, timezone
import csv
import io
import logging
import math
import os

import numpy as np

from .errors import CorruptInputError, EmptySelectionError, SchemaError
from .gp import VelocityDataset

log = logging.getLogger(__name__)

REQUIRED = ("id", "time", "lat", "lon", "u", "v")
REJECT_LIMIT = 0.5


@dataclass(frozen=True)
class DrifterSchema:
    """Column names for each logical field plus the delimiter."""
    id: str = "id"
    time: str = "time"
    lat: str = "lat"
    lon: str = "lon"
    u: str = "u"
    v: str = "v"
    delimiter: str = ","

    @classmethod
    def from_mapping(cls, mapping):
        known = set(REQUIRED) | {"delimiter"}
        extra = set(mapping) - known
        if extra:
            raise SchemaError(f"unknown schema keys: {sorted(extra)}")
        return cls(**mapping)

    def columns(self):
        return {k: getattr(self, k) for k in REQUIRED}


@dataclass(frozen=True)
class DrifterRecord:
    buoy_id: str
    timestamp: float
    position: tuple
    velocity: tuple


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str


@dataclass
class IngestResult:
    records: list
    rejects: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.records, self.rejects))


def parse_time(text):
    """Seconds since the epoch from a number or an ISO-8601 string (UTC if naive)."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.timestamp()


def _finite(text):
    x = float(text)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {text!r}")
    return x


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def read_drifters(source, schema=None):
    """Parse drifter records from a path, bytes or a text/binary stream.

    Returns an :class:`IngestResult` (unpackable as ``records, rejects``)
    with records sorted by ``(buoy_id, timestamp)``.  Rows that fail to parse
    are reported in ``rejects`` with their 1-based line number.

    Raises
    ------
    SchemaError
        A required column is missing from the header.
    CorruptInputError
        More than half of the data rows were rejected.
    """
    schema = schema or DrifterSchema()
    cols = schema.columns()
    fh = _open_text(source)
    try:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        header = next(reader, None)
        if header is None:
            raise SchemaError("input is empty (no header row)")
        header = [h.strip() for h in header]
        missing = [name for name in cols.values() if name not in header]
        if missing:
            raise SchemaError(f"missing required column(s): {', '.join(missing)}")
        pos = {k: header.index(name) for k, name in cols.items()}

        records, rejects = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) < len(header):
                    raise ValueError(f"expected {len(header)} fields, got {len(row)}")
                bid = row[pos["id"]].strip()
                if not bid:
                    raise ValueError("empty buoy id")
                rec = DrifterRecord(
                    bid, parse_time(row[pos["time"]]),
                    (_finite(row[pos["lon"]]), _finite(row[pos["lat"]])),
                    (_finite(row[pos["u"]]), _finite(row[pos["v"]])))
            except (ValueError, IndexError) as exc:
                rejects.append(Reject(lineno, str(exc)))
                continue
            records.append(rec)
    finally:
        if fh is not source:
            fh.close()

    total = len(records) + len(rejects)
    if total and len(rejects) > REJECT_LIMIT * total:
        raise CorruptInputError(f"{len(rejects)} of {total} rows rejected "
                                f"(first: line {rejects[0].line}: {rejects[0].reason})")
    if rejects:
        log.warning("rejected %d of %d rows", len(rejects), total)
    records.sort(key=lambda r: (r.buoy_id, r.timestamp))
    return IngestResult(records, rejects)


@dataclass(frozen=True)
class IngestFilter:
    """Selection and downsampling applied by :func:`apply_filter`.

    ``box`` is ``(lon_min, lon_max, lat_min, lat_max)`` and ``window`` is
    ``(t_start, t_end)``; both are inclusive.  ``stride`` keeps every n-th
    selected record of each buoy, starting from its first one.
    """
    box: tuple = None
    window: tuple = None
    stride: int = 1
    allow: frozenset = None

    def __post_init__(self):
        if int(self.stride) != self.stride or self.stride < 1:
            raise ValueError("stride must be an integer >= 1")
        if self.box is not None:
            b = tuple(float(v) for v in self.box)
            if len(b) != 4 or not (b[0] < b[1] and b[2] < b[3]):
                raise ValueError("box must be (lon_min, lon_max, lat_min, lat_max) with min < max")
            object.__setattr__(self, "box", b)
        if self.window is not None:
            w = tuple(float(v) for v in self.window)
            if len(w) != 2 or w[0] > w[1]:
                raise ValueError("window must be (start, end) with start <= end")
            object.__setattr__(self, "window", w)
        if self.allow is not None:
            object.__setattr__(self, "allow", frozenset(str(a) for a in self.allow))

    def keeps(self, r):
        if self.allow is not None and r.buoy_id not in self.allow:
            return False
        if self.window is not None and not (self.window[0] <= r.timestamp <= self.window[1]):
            return False
        if self.box is not None:
            x, y = r.position
            b = self.box
            if not (b[0] <= x <= b[1] and b[2] <= y <= b[3]):
                return False
        return True


def select_records(records, f):
    """Records passing the box, window and allowlist tests (order kept)."""
    return [r for r in records if f.keeps(r)]


def downsample(records, stride):
    """Every ``stride``-th record per buoy, anchored at each buoy's first record."""
    out, seen = [], {}
    for r in records:
        k = seen.get(r.buoy_id, 0)
        if k % stride == 0:
            out.append(r)
        seen[r.buoy_id] = k + 1
    return out


def apply_filter(records, f):
    """Select, downsample and collapse time into a :class:`VelocityDataset`.

    Buoy ids are kept as metadata; timestamps are dropped.
    """
    kept = downsample(select_records(records, f), f.stride)
    if not kept:
        raise EmptySelectionError("no drifter records survive the filter")
    return VelocityDataset(np.array([r.position for r in kept]),
                           np.array([r.velocity for r in kept]),
                           ids=[r.buoy_id for r in kept])
