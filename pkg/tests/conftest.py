"""Shared fixtures: a small economics lexicon and a deterministic table."""

from __future__ import annotations

import json

import pytest

from veritab.forge import TableRecord, generate_all_chunks
from veritab.lexicon import KeywordDictionary
from veritab.prompting import default_templates
from veritab.ranking import build_store

LEXICON_DATA = {
    "metrics": [
        {
            "name": "GDP",
            "synonyms": ["gross domestic product"],
            "definition": "GDP measures the total value of goods and services produced in a geography over a period.",
        },
        {
            "name": "GDP growth",
            "synonyms": ["gdp growth rate"],
            "definition": "GDP growth is the period-over-period change of GDP, stated as a percentage.",
        },
        {
            "name": "CPI",
            "synonyms": ["consumer price index", "inflation"],
            "definition": "CPI tracks the price level of a fixed basket of consumer goods.",
        },
        {
            "name": "Revenue",
            "synonyms": ["sales", "turnover"],
            "definition": "Revenue is the income generated from normal business operations.",
        },
        {
            "name": "Operating Margin",
            "definition": "Operating Margin is operating income divided by revenue, stated as a percentage.",
        },
        {
            "name": "Profit Per Period",
            "synonyms": ["PPP"],
            "definition": "Profit Per Period is the net profit booked within a single fiscal period.",
        },
    ],
    "geo_tree": [
        {
            "name": "Europe",
            "children": [
                {"name": "Germany"},
                {"name": "France"},
                {"name": "UK", "synonyms": ["United Kingdom"]},
            ],
        },
        {
            "name": "North America",
            "children": [
                {"name": "USA", "synonyms": ["United States"]},
                {"name": "Canada"},
            ],
        },
        {
            "name": "Asia",
            "children": [{"name": "Japan"}, {"name": "India"}],
        },
    ],
    "period_tree": [
        {
            "name": f"FY{year}",
            "children": [{"name": f"FY{year}-Q{q}"} for q in range(1, 5)],
        }
        for year in (22, 23, 24)
    ],
}

GEOS = ["Germany", "France", "UK", "USA", "Canada", "Japan", "India"]
PERIODS = [f"FY{y}-Q{q}" for y in (22, 23) for q in range(1, 5)]
TABLE_METRICS = ["GDP", "CPI", "Revenue", "Operating Margin"]


def make_records() -> list[TableRecord]:
    """Deterministic 4-metric x 7-geo x 8-quarter table.

    GDP carries one engineered spike (Germany, FY23-Q4) so anomaly sentences
    exist; GDP and CPI are nearly linear in time, so within-geo correlations
    clear the 0.7 reporting threshold; Operating Margin starts negative for
    some geos so negative values flow through the whole pipeline.
    """
    records = []
    for gi, geo in enumerate(GEOS):
        for t, period in enumerate(PERIODS, start=1):
            wiggle = ((t * 7 + gi * 3) % 5) * 0.01
            gdp = 2.0 + 0.3 * t + 0.5 * gi + wiggle
            if geo == "Germany" and period == "FY23-Q4":
                gdp += 15.0
            records.append(TableRecord("GDP", geo, period, round(gdp, 2), "%"))
            cpi = 1.0 + 0.2 * t + 0.1 * (gi % 3) + wiggle
            records.append(TableRecord("CPI", geo, period, round(cpi, 2), "%"))
            revenue = 100.0 + 5.0 * t + 10.0 * gi + ((t + gi) % 4)
            records.append(TableRecord("Revenue", geo, period, round(revenue, 2), "$M"))
            margin = -2.0 + 0.5 * t - 0.2 * gi
            records.append(TableRecord("Operating Margin", geo, period, round(margin, 2), "%"))
    return records


@pytest.fixture(scope="session")
def lexicon() -> KeywordDictionary:
    return KeywordDictionary.from_data(LEXICON_DATA)


@pytest.fixture(scope="session")
def lexicon_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("lexicon") / "lexicon.json"
    path.write_text(json.dumps(LEXICON_DATA, indent=2), encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def records():
    return make_records()


@pytest.fixture(scope="session")
def table_csv(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("table") / "econ.csv"
    lines = ["metric,geo,period,value,unit"]
    for r in records:
        lines.append(f'"{r.metric}",{r.geo},{r.period},{r.value},{r.unit}')
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def chunks(records):
    return generate_all_chunks(records)


@pytest.fixture(scope="session")
def store(chunks):
    return build_store(chunks)


@pytest.fixture(scope="session")
def templates():
    return default_templates()
