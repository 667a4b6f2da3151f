"""Loading, validating, projecting and persisting incident records."""

import csv
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
REQUIRED_FIELDS = ("id", "narrative", "call_type", "lat", "lon")
OPTIONAL_FIELDS = ("timestamp",)


class IngestError(Exception):
    """Raised when an input file cannot be turned into any records."""


@dataclass(frozen=True)
class IncidentRecord:
    id: str
    narrative: str
    call_type: str
    lat: float
    lon: float
    timestamp: Optional[str] = None


@dataclass(frozen=True)
class Diagnostic:
    row: int
    reason: str


@dataclass(frozen=True)
class ProjectedPoint:
    x: float
    y: float


def _parse_timestamp(value):
    if value is None or value == "":
        return None
    text = str(value)
    # fromisoformat on 3.10 rejects the "Z" suffix
    probe = text[:-1] + "+00:00" if text.endswith("Z") else text
    datetime.fromisoformat(probe)
    return text


def _validate_row(raw, seen_ids):
    """Build a record from a raw mapping or return the rejection reason."""
    for field in REQUIRED_FIELDS:
        value = raw.get(field)
        if value is None or (isinstance(value, str) and value.strip() == "" and field != "narrative"):
            return None, f"missing {field}"
    rid = str(raw["id"])
    if rid in seen_ids:
        return None, f"duplicate id {rid}"
    try:
        lat = float(raw["lat"])
    except (TypeError, ValueError):
        return None, "lat not a number"
    try:
        lon = float(raw["lon"])
    except (TypeError, ValueError):
        return None, "lon not a number"
    if not math.isfinite(lat) or not -90.0 <= lat <= 90.0:
        return None, "lat out of range"
    if not math.isfinite(lon) or not -180.0 <= lon <= 180.0:
        return None, "lon out of range"
    try:
        ts = _parse_timestamp(raw.get("timestamp"))
    except (TypeError, ValueError):
        return None, "timestamp not ISO-8601"
    narrative = raw["narrative"]
    if not isinstance(narrative, str):
        return None, "narrative not text"
    return IncidentRecord(rid, narrative, str(raw["call_type"]), lat, lon, ts), None


def _iter_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [f for f in REQUIRED_FIELDS if f not in header]
        if missing:
            raise IngestError(f"{path}: missing required columns {missing}")
        # row numbers count the header as row 1
        for i, row in enumerate(reader, start=2):
            if None in row:
                yield i, None, "too many fields"
                continue
            yield i, row, None


def _iter_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        header_checked = False
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield i, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield i, None, "line is not an object"
                continue
            if not header_checked:
                missing = [f for f in REQUIRED_FIELDS if f not in obj]
                if missing:
                    raise IngestError(f"{path}: missing required fields {missing}")
                header_checked = True
            yield i, obj, None


def load_incidents(path, format="csv"):
    """Read incident records from ``path``.

    Returns ``(records, diagnostics)``. Malformed rows never abort the load;
    they are reported as :class:`Diagnostic` entries carrying the file row
    number. Raises :class:`IngestError` for an unreadable file, missing
    required columns, or when no row survives validation.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise ValueError(f"unknown format {format!r}")
    if not path.is_file():
        raise IngestError(f"{path}: file not found")
    rows = _iter_csv(path) if format == "csv" else _iter_jsonl(path)
    records, diagnostics, seen = [], [], set()
    try:
        for rownum, raw, problem in rows:
            if problem is None:
                record, problem = _validate_row(raw, seen)
            if problem is not None:
                diagnostics.append(Diagnostic(rownum, problem))
                continue
            seen.add(record.id)
            records.append(record)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"{path}: unreadable ({exc})") from exc
    if not records:
        raise IngestError(f"{path}: zero valid rows")
    return records, diagnostics


def save_incidents(records, path, format="csv"):
    """Write records so that :func:`load_incidents` reproduces them exactly."""
    path = Path(path)
    fields = REQUIRED_FIELDS + OPTIONAL_FIELDS
    if format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(fields)
            for r in records:
                writer.writerow([r.id, r.narrative, r.call_type, repr(r.lat), repr(r.lon),
                                 r.timestamp or ""])
    elif format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for r in records:
                obj = asdict(r)
                if obj["timestamp"] is None:
                    del obj["timestamp"]
                fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")


def write_diagnostics(diagnostics, path):
    with open(path, "w", encoding="utf-8") as fh:
        for d in diagnostics:
            fh.write(json.dumps({"row": d.row, "reason": d.reason}) + "\n")


def project(record, ref_lat, origin):
    """Equirectangular projection of ``record`` to meters east/north of ``origin``.

    ``origin`` is the ``(lat0, lon0)`` corner; ``ref_lat`` fixes the east-west
    scale factor.
    """
    lat0, lon0 = origin
    x = EARTH_RADIUS_M * math.radians(record.lon - lon0) * math.cos(math.radians(ref_lat))
    y = EARTH_RADIUS_M * math.radians(record.lat - lat0)
    return ProjectedPoint(x, y)


@dataclass(frozen=True)
class Projection:
    """Projection parameters fixed from a dataset: min corner and mean latitude."""

    lat0: float
    lon0: float
    ref_lat: float

    @classmethod
    def from_records(cls, records):
        lats = [r.lat for r in records]
        lons = [r.lon for r in records]
        return cls(min(lats), min(lons), math.fsum(lats) / len(lats))

    def __call__(self, record):
        return project(record, self.ref_lat, (self.lat0, self.lon0))

    def to_array(self, records):
        """(n, 2) array of projected coordinates, same formula as :func:`project`."""
        out = np.empty((len(records), 2))
        for i, r in enumerate(records):
            p = self(r)
            out[i] = (p.x, p.y)
        return out

    def inverse(self, x, y):
        """Map projected meters back to ``(lat, lon)`` degrees."""
        lat = self.lat0 + np.degrees(np.asarray(y) / EARTH_RADIUS_M)
        lon = self.lon0 + np.degrees(np.asarray(x) / (EARTH_RADIUS_M * math.cos(math.radians(self.ref_lat))))
        return lat, lon


def label_frequency(records):
    """Call-type counts, most frequent first; ties by code ascending."""
    counts = Counter(r.call_type for r in records)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
