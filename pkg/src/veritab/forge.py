"""Offline conversion of data tables into primary, feature and trend chunks.

Every chunk is 2-10 sentences of plain text plus canonical entity sets and
the multiset of numbers recoverable from the text. Generation is pure and
deterministic: the same table and templates always produce byte-identical
chunks, so partitions of a table can be forged in parallel.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from .errors import DegenerateSeries, DuplicateKey, MalformedRow
from .scoring import extract_numbers, split_sentences

logger = logging.getLogger(__name__)

KIND_PRIMARY = "primary"
KIND_FEATURE = "feature"
KIND_TREND = "trend"

MAX_SENTENCES = 10
MIN_SENTENCES = 2
# one header sentence per primary chunk leaves room for nine value sentences
_VALUES_PER_PRIMARY = MAX_SENTENCES - 1

DEFAULT_PRIMARY_TEMPLATE = "The {metric} for {geo} in {period} was {value}{unit}."
DEFAULT_SCHEMA = {
    "metric": "metric", "geo": "geo", "period": "period",
    "value": "value", "unit": "unit",
}

ANOMALY_THRESHOLD = 2.0
CORRELATION_THRESHOLD = 0.7

_PERIOD_KEY_RE = re.compile(r"^FY\s?-?(\d{2,4})(?:\s*-\s*Q([1-4]))?$", re.IGNORECASE)


@dataclass(frozen=True)
class TableRecord:
    """One table row: a metric value for a geography and fiscal period."""

    metric: str
    geo: str
    period: str
    value: float
    unit: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.metric, self.geo, self.period)


@dataclass(frozen=True)
class DataChunk:
    """A 2-10 sentence text unit with entity sets and its number multiset."""

    id: str
    kind: str
    text: str
    metrics: tuple[str, ...]
    geos: tuple[str, ...]
    periods: tuple[str, ...]
    numbers: tuple[float, ...]
    source: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "text": self.text,
            "metrics": list(self.metrics),
            "geos": list(self.geos),
            "periods": list(self.periods),
            "numbers": list(self.numbers),
            "source": list(self.source),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DataChunk":
        return cls(
            id=data["id"],
            kind=data["kind"],
            text=data["text"],
            metrics=tuple(data["metrics"]),
            geos=tuple(data["geos"]),
            periods=tuple(data["periods"]),
            numbers=tuple(float(v) for v in data["numbers"]),
            source=tuple(data["source"]),
        )


@dataclass(frozen=True)
class TrendReport:
    """Fitted slope/forecast plus anomalies and strong cross-metric correlations."""

    metric: str
    geo: str
    slope: float
    intercept: float
    forecast: float
    anomalies: tuple[tuple[str, float], ...]
    correlations: tuple[tuple[str, float], ...]


def fmt_number(value: float) -> str:
    """Render at 2 decimal places, ties rounded away from zero."""
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def fmt_unit(unit: str) -> str:
    if not unit:
        return ""
    if unit == "%":
        return "%"
    return f" {unit}"


def period_sort_key(period: str) -> tuple:
    """Sortable key: fiscal labels order by (year, quarter), rest lexicographically."""
    m = _PERIOD_KEY_RE.match(period.strip())
    if m:
        year = int(m.group(1))
        quarter = int(m.group(2)) if m.group(2) else 0
        return (0, year, quarter, period)
    return (1, 0, 0, period)


def _slug(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", value).strip("_").lower()


def _make_chunk(
    chunk_id: str,
    kind: str,
    sentences: list[str],
    metrics: set[str],
    geos: set[str],
    periods: set[str],
    source: set[str],
) -> DataChunk:
    if not MIN_SENTENCES <= len(sentences) <= MAX_SENTENCES:
        raise ValueError(f"chunk {chunk_id}: {len(sentences)} sentences")
    text = " ".join(sentences)
    assert len(split_sentences(text)) == len(sentences), chunk_id
    return DataChunk(
        id=chunk_id,
        kind=kind,
        text=text,
        metrics=tuple(sorted(metrics)),
        geos=tuple(sorted(geos)),
        periods=tuple(sorted(periods)),
        numbers=tuple(sorted(extract_numbers(text))),
        source=tuple(sorted(source)),
    )


# --- ingestion ---------------------------------------------------------------

def ingest_table(path: str | Path, schema: dict[str, str] | None = None) -> list[TableRecord]:
    """Parse a CSV (or JSON-Lines) table into records, rejecting duplicates.

    ``schema`` maps the logical fields metric/geo/period/value/unit to the
    file's column names; by default the columns carry the logical names.
    """
    path = Path(path)
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        rows = _read_jsonl_rows(path)
    else:
        rows = _read_csv_rows(path)

    records: list[TableRecord] = []
    seen: set[tuple[str, str, str]] = set()
    for line_no, row in rows:
        record = _row_to_record(line_no, row, schema)
        if record.key in seen:
            raise DuplicateKey(f"line {line_no}: duplicate key {record.key}")
        seen.add(record.key)
        records.append(record)
    return records


def _read_csv_rows(path: Path):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for i, row in enumerate(reader, start=2):
            yield i, row


def _read_jsonl_rows(path: Path):
    with path.open(encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(i, f"invalid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise MalformedRow(i, "row is not a JSON object")
            yield i, {k: str(v) for k, v in row.items()}


def _row_to_record(line_no: int, row: dict, schema: dict[str, str]) -> TableRecord:
    fields = {}
    for logical in ("metric", "geo", "period", "value", "unit"):
        column = schema[logical]
        if column not in row or row[column] is None:
            if logical == "unit":
                fields[logical] = ""
                continue
            raise MalformedRow(line_no, f"missing column '{column}'")
        fields[logical] = str(row[column]).strip()
    for logical in ("metric", "geo", "period"):
        if not fields[logical]:
            raise MalformedRow(line_no, f"empty {logical}")
    try:
        value = float(fields["value"])
    except ValueError as exc:
        raise MalformedRow(line_no, f"bad value '{fields['value']}'") from exc
    if not math.isfinite(value):
        raise MalformedRow(line_no, f"non-finite value '{fields['value']}'")
    return TableRecord(
        metric=fields["metric"], geo=fields["geo"], period=fields["period"],
        value=value, unit=fields["unit"],
    )


# --- primary chunks ----------------------------------------------------------

def generate_primary_chunks(
    records: list[TableRecord], template: str = DEFAULT_PRIMARY_TEMPLATE
) -> list[DataChunk]:
    """One value sentence per metric, grouped by (geo, period).

    Each chunk opens with a header sentence naming the geography and period,
    which also keeps single-metric groups at the 2-sentence minimum. Groups
    with more than nine metrics split into balanced parts.
    """
    groups: dict[tuple[str, str], list[TableRecord]] = {}
    for record in records:
        groups.setdefault((record.geo, record.period), []).append(record)

    chunks = []
    for (geo, period) in sorted(groups, key=lambda g: (g[0], period_sort_key(g[1]))):
        group = sorted(groups[(geo, period)], key=lambda r: r.metric)
        parts = _balanced_parts(group, _VALUES_PER_PRIMARY)
        for part_no, part in enumerate(parts, start=1):
            sentences = [f"The following figures are for {geo} in {period}."]
            sentences += [
                template.format(
                    metric=r.metric, geo=r.geo, period=r.period,
                    value=fmt_number(r.value), unit=fmt_unit(r.unit),
                )
                for r in part
            ]
            chunks.append(_make_chunk(
                chunk_id=f"primary:{_slug(geo)}:{_slug(period)}:{part_no}",
                kind=KIND_PRIMARY,
                sentences=sentences,
                metrics={r.metric for r in part},
                geos={geo},
                periods={period},
                source={"|".join(r.key) for r in part},
            ))
    return chunks


def _balanced_parts(items: list, max_size: int) -> list[list]:
    count = max(1, math.ceil(len(items) / max_size))
    base, extra = divmod(len(items), count)
    parts, start = [], 0
    for i in range(count):
        size = base + (1 if i < extra else 0)
        parts.append(items[start:start + size])
        start += size
    return parts


# --- feature chunks ----------------------------------------------------------

def generate_feature_chunks(records: list[TableRecord]) -> list[DataChunk]:
    """Per (metric, period): highest and lowest geography plus the average.

    Ties go to the lexicographically first geo and are called out in text.
    """
    groups: dict[tuple[str, str], list[TableRecord]] = {}
    for record in records:
        groups.setdefault((record.metric, record.period), []).append(record)

    chunks = []
    for (metric, period) in sorted(groups, key=lambda g: (g[0], period_sort_key(g[1]))):
        group = sorted(groups[(metric, period)], key=lambda r: r.geo)
        unit = group[0].unit
        high_value = max(r.value for r in group)
        low_value = min(r.value for r in group)
        high_geos = sorted(r.geo for r in group if r.value == high_value)
        low_geos = sorted(r.geo for r in group if r.value == low_value)
        average = sum(r.value for r in group) / len(group)

        sentences = [
            _extreme_sentence("highest", metric, period, high_value, unit, high_geos),
            _extreme_sentence("lowest", metric, period, low_value, unit, low_geos),
            f"The average {metric} across geographies in {period} "
            f"was {fmt_number(average)}{fmt_unit(unit)}.",
        ]
        named_geos = set(high_geos) | set(low_geos)
        chunks.append(_make_chunk(
            chunk_id=f"feature:{_slug(metric)}:{_slug(period)}",
            kind=KIND_FEATURE,
            sentences=sentences,
            metrics={metric},
            geos=named_geos,
            periods={period},
            source={"|".join(r.key) for r in group},
        ))
    return chunks


def _extreme_sentence(
    label: str, metric: str, period: str, value: float, unit: str, geos: list[str]
) -> str:
    lead = f"The {label} {metric} in {period} was {fmt_number(value)}{fmt_unit(unit)} in {geos[0]}"
    if len(geos) > 1:
        return f"{lead}, tied with {_join_names(geos[1:])}."
    return f"{lead}."


def _join_names(names: list[str]) -> str:
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


# --- trend analytics ---------------------------------------------------------

def analyze_trend(
    series: list[tuple[str, float]],
    metric: str = "",
    geo: str = "",
    companions: dict[str, list[tuple[str, float]]] | None = None,
    anomaly_threshold: float = ANOMALY_THRESHOLD,
    correlation_threshold: float = CORRELATION_THRESHOLD,
) -> TrendReport:
    """Ordinary-least-squares fit, z-score anomalies and Pearson correlations.

    ``series`` is an ordered (period, value) list with at least 3 points;
    anomalies are only flagged from 4 points up. ``companions`` maps other
    metric names to their series for the same geo; correlations are computed
    only against companions covering exactly the same periods.
    """
    if len(series) < 3:
        raise ValueError("need at least 3 points for slope and forecast")
    values = [v for _, v in series]
    if all(v == values[0] for v in values):
        raise DegenerateSeries(f"constant series for ({metric}, {geo})")

    n = len(values)
    xs = range(1, n + 1)
    sum_x = sum(xs)
    sum_y = sum(values)
    sum_xy = sum(x * y for x, y in zip(xs, values))
    sum_xx = sum(x * x for x in xs)
    slope = (n * sum_xy - sum_x * sum_y) / (n * sum_xx - sum_x * sum_x)
    intercept = (sum_y - slope * sum_x) / n
    forecast = intercept + slope * (n + 1)

    anomalies: list[tuple[str, float]] = []
    if n >= 4:
        mean = sum_y / n
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / n)
        if std > 0:
            for (period, value) in series:
                z = (value - mean) / std
                if abs(z) >= anomaly_threshold:
                    anomalies.append((period, z))

    correlations: list[tuple[str, float]] = []
    periods = [p for p, _ in series]
    for other, other_series in sorted((companions or {}).items()):
        if [p for p, _ in other_series] != periods:
            continue
        r = _pearson(values, [v for _, v in other_series])
        if r is not None and abs(r) >= correlation_threshold:
            correlations.append((other, r))

    return TrendReport(
        metric=metric, geo=geo, slope=slope, intercept=intercept,
        forecast=forecast, anomalies=tuple(anomalies), correlations=tuple(correlations),
    )


def _pearson(a: list[float], b: list[float]) -> float | None:
    n = len(a)
    mean_a = sum(a) / n
    mean_b = sum(b) / n
    cov = sum((x - mean_a) * (y - mean_b) for x, y in zip(a, b))
    var_a = sum((x - mean_a) ** 2 for x in a)
    var_b = sum((y - mean_b) ** 2 for y in b)
    if var_a == 0 or var_b == 0:
        return None
    return cov / math.sqrt(var_a * var_b)


# --- trend chunks ------------------------------------------------------------

def generate_trend_chunks(
    records: list[TableRecord],
    anomaly_threshold: float = ANOMALY_THRESHOLD,
    correlation_threshold: float = CORRELATION_THRESHOLD,
) -> list[DataChunk]:
    """One chunk per (metric, geo) series: direction, forecast, anomalies
    and correlations. Series shorter than 3 periods are skipped."""
    by_geo: dict[str, dict[str, list[TableRecord]]] = {}
    for record in records:
        by_geo.setdefault(record.geo, {}).setdefault(record.metric, []).append(record)

    chunks = []
    for geo in sorted(by_geo):
        metric_series = {
            metric: [
                (r.period, r.value)
                for r in sorted(rows, key=lambda r: period_sort_key(r.period))
            ]
            for metric, rows in by_geo[geo].items()
        }
        units = {metric: rows[0].unit for metric, rows in by_geo[geo].items()}
        for metric in sorted(metric_series):
            series = metric_series[metric]
            if len(series) < 3:
                logger.info("skipping trend for (%s, %s): %d < 3 periods", metric, geo, len(series))
                continue
            companions = {m: s for m, s in metric_series.items() if m != metric and len(s) >= 3}
            chunks.extend(_trend_chunks_for(
                metric, geo, series, companions, units[metric],
                anomaly_threshold, correlation_threshold,
            ))
    return chunks


def _trend_chunks_for(
    metric: str,
    geo: str,
    series: list[tuple[str, float]],
    companions: dict[str, list[tuple[str, float]]],
    unit: str,
    anomaly_threshold: float,
    correlation_threshold: float,
) -> list[DataChunk]:
    first, last = series[0][0], series[-1][0]
    # each sentence tracked with the entities it names
    tagged: list[tuple[str, set[str], set[str], set[str]]] = []

    try:
        report = analyze_trend(
            series, metric=metric, geo=geo, companions=companions,
            anomaly_threshold=anomaly_threshold,
            correlation_threshold=correlation_threshold,
        )
    except DegenerateSeries:
        level = fmt_number(series[0][1])
        tagged.append((
            f"The {metric} for {geo} remained unchanged between {first} and {last}.",
            {metric}, {geo}, {first, last},
        ))
        tagged.append((
            f"The level held constant at {level}{fmt_unit(unit)}.",
            set(), set(), set(),
        ))
        return _pack_trend_sentences(metric, geo, series, tagged)

    if report.slope > 0:
        direction = f"increasing at a rate of {fmt_number(abs(report.slope))} per period"
    elif report.slope < 0:
        direction = f"decreasing at a rate of {fmt_number(abs(report.slope))} per period"
    else:
        direction = "flat on average over the window"
    tagged.append((
        f"Between {first} and {last}, the {metric} for {geo} was {direction}.",
        {metric}, {geo}, {first, last},
    ))
    tagged.append((
        f"The next-period forecast for the {metric} in {geo} "
        f"is {fmt_number(report.forecast)}{fmt_unit(unit)}.",
        {metric}, {geo}, set(),
    ))
    for period, z in report.anomalies:
        tagged.append((
            f"In {period}, the {metric} for {geo} deviated with a z-score of {fmt_number(z)}.",
            {metric}, {geo}, {period},
        ))
    for other, r in report.correlations:
        tagged.append((
            f"The {metric} for {geo} has a correlation of {fmt_number(r)} with {other}.",
            {metric, other}, {geo}, set(),
        ))
    return _pack_trend_sentences(metric, geo, series, tagged)


def _pack_trend_sentences(
    metric: str,
    geo: str,
    series: list[tuple[str, float]],
    tagged: list[tuple[str, set[str], set[str], set[str]]],
) -> list[DataChunk]:
    parts: list[list[tuple[str, set[str], set[str], set[str]]]] = []
    if len(tagged) <= MAX_SENTENCES:
        parts.append(tagged)
    else:
        parts.append(tagged[:MAX_SENTENCES])
        rest = tagged[MAX_SENTENCES:]
        lead = (
            f"Additional trend details for the {metric} in {geo} follow.",
            {metric}, {geo}, set(),
        )
        for i in range(0, len(rest), MAX_SENTENCES - 1):
            parts.append([lead] + rest[i:i + MAX_SENTENCES - 1])

    source = {f"{metric}|{geo}|{period}" for period, _ in series}
    chunks = []
    for part_no, part in enumerate(parts, start=1):
        chunks.append(_make_chunk(
            chunk_id=f"trend:{_slug(metric)}:{_slug(geo)}:{part_no}",
            kind=KIND_TREND,
            sentences=[s for s, _, _, _ in part],
            metrics=set().union(*(m for _, m, _, _ in part)),
            geos=set().union(*(g for _, _, g, _ in part)),
            periods=set().union(*(p for _, _, _, p in part)),
            source=source,
        ))
    return chunks


def generate_all_chunks(
    records: list[TableRecord],
    template: str = DEFAULT_PRIMARY_TEMPLATE,
    anomaly_threshold: float = ANOMALY_THRESHOLD,
    correlation_threshold: float = CORRELATION_THRESHOLD,
) -> list[DataChunk]:
    """Primary + feature + trend chunks for a table, in that order."""
    return (
        generate_primary_chunks(records, template)
        + generate_feature_chunks(records)
        + generate_trend_chunks(records, anomaly_threshold, correlation_threshold)
    )


# --- JSON-Lines IO -----------------------------------------------------------

def write_chunks(path: str | Path, chunks: list[DataChunk]) -> None:
    Path(path).write_text(dumps_chunks(chunks), encoding="utf-8")


def dumps_chunks(chunks: list[DataChunk]) -> str:
    return "".join(
        json.dumps(c.to_dict(), sort_keys=True, ensure_ascii=False) + "\n" for c in chunks
    )


def read_chunks(path: str | Path) -> list[DataChunk]:
    chunks = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                chunks.append(DataChunk.from_dict(json.loads(line)))
    return chunks
