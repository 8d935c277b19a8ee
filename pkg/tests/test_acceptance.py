"""Acceptance suite: one test per release criterion, one printed line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the pass lines.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from veritab.cli import main as cli_main
from veritab.embedding import HashedEmbedder
from veritab.errors import DefectImpossible
from veritab.forge import DataChunk, analyze_trend
from veritab.gateway import ADVERSARIAL_MODES, mock_adversarial, mock_faithful
from veritab.intent import INTENT_EXAMPLES, classify_llm, classify_rule, evaluate_classifier
from veritab.lexicon import expand_hierarchy, extract_entities, levenshtein
from veritab.prompting import PromptBundle, build_prompt
from veritab.ranking import build_store, rank_chunks, select
from veritab.scoring import (
    ResponseScores, confidence, extract_numbers, normalize_words, score_s3,
    score_response,
)
from veritab.service import Engine, ServiceConfig

from .conftest import GEOS, PERIODS, TABLE_METRICS
from .oracles import (
    confidence_oracle, levenshtein_oracle, ols_oracle, pearson_oracle, s3_oracle,
    zscores_oracle,
)

SUITE_SIZE = 220

_SHAPES = [
    lambda m, g, g2, p: f"What is the {m} in {g} in {p}?",
    lambda m, g, g2, p: f"Which geography had the highest {m} in {p}?",
    lambda m, g, g2, p: f"Is the {m} in {g} increasing?",
    lambda m, g, g2, p: f"Summarize the {m} figures for {g} in {p}.",
    lambda m, g, g2, p: f"How can the {m} in {g} be improved?",
    lambda m, g, g2, p: f"What are the top drivers for the {m} in {g} in {p}?",
    lambda m, g, g2, p: f"How is the {m} trend in {g} in {p}?",
    lambda m, g, g2, p: f"What are the outliers for the {m} in {g}?",
    lambda m, g, g2, p: f"How does the {m} in {g} impact {g2}?",
]


def build_query_suite(n: int = SUITE_SIZE, seed: int = 13) -> list[str]:
    rng = random.Random(seed)
    queries = []
    for i in range(n):
        m = rng.choice(TABLE_METRICS)
        g = rng.choice(GEOS)
        g2 = rng.choice([x for x in GEOS if x != g])
        p = rng.choice(PERIODS)
        queries.append(_SHAPES[i % len(_SHAPES)](m, g, g2, p))
    return queries


@dataclass
class QueryRun:
    query: str
    selection_size: int
    bundle: PromptBundle
    faithful: str
    scores: ResponseScores


@pytest.fixture(scope="module")
def suite_runs(store, lexicon, templates) -> list[QueryRun]:
    runs = []
    for query in build_query_suite():
        entities = expand_hierarchy(extract_entities(query, lexicon), lexicon)
        selection = select(store, query, entities, k=20)
        chunks = [store.chunks[cid] for cid in selection.ids]
        bundle = build_prompt(
            query, classify_rule(query), templates, lexicon, selection, chunks
        )
        faithful = mock_faithful(bundle, lexicon)
        scores = score_response(query, bundle, faithful, lexicon)
        runs.append(QueryRun(query, len(selection.items), bundle, faithful, scores))
    return runs


# --- criterion 1: confidence mapping, exhaustive --------------------------------

def test_criterion_1_confidence_mapping_exhaustive():
    start = time.perf_counter()
    for flags in itertools.product((0, 1), repeat=6):
        expected = confidence_oracle(flags)
        assert confidence(flags) == expected
        assert ResponseScores(*flags).confidence == expected
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\n[acceptance] criterion 1 PASS: 64/64 flag combinations map correctly "
          f"({elapsed * 1000:.0f} ms)")


# --- criterion 2: adversarial detection ------------------------------------------

TARGETS = {
    "fabricate_number": "s2",
    "entity_swap": "s6",
    "verbatim_copy": "s3",
    "wrong_sign": "s4",
    "off_topic": "s1",
}


def test_criterion_2_adversarial_modes_flip_targets(suite_runs, lexicon):
    start = time.perf_counter()
    stats = {mode: {"constructible": 0, "flipped": 0} for mode in ADVERSARIAL_MODES}
    for run in suite_runs:
        for mode in ADVERSARIAL_MODES:
            try:
                text = mock_adversarial(run.bundle, mode, lexicon)
            except DefectImpossible:
                continue
            stats[mode]["constructible"] += 1
            scores = score_response(run.query, run.bundle, text, lexicon)
            if getattr(scores, TARGETS[mode]) == 0:
                stats[mode]["flipped"] += 1
            else:
                pytest.fail(f"{mode} did not flip {TARGETS[mode]}: {run.query!r}\n{text}")
    elapsed = time.perf_counter() - start
    for mode, s in stats.items():
        assert s["constructible"] > 0, f"{mode}: no constructible cases in suite"
        assert s["flipped"] == s["constructible"]
    assert elapsed < 30.0, f"adversarial suite took {elapsed:.1f} s"
    detail = ", ".join(
        f"{mode}->{TARGETS[mode]} {s['flipped']}/{s['constructible']}"
        for mode, s in stats.items()
    )
    print(f"\n[acceptance] criterion 2 PASS: {detail} ({elapsed:.1f} s)")


# --- criterion 3: faithful pipeline quality ----------------------------------------

def test_criterion_3_faithful_quality(suite_runs):
    high = sum(1 for run in suite_runs if run.scores.confidence == "High")
    fraction = high / len(suite_runs)
    for run in suite_runs:
        if run.scores.confidence != "High":
            assert run.scores.diagnostics, (
                f"unexplained non-High response for {run.query!r}"
            )
    assert fraction >= 0.90, f"High fraction {fraction:.3f} < 0.90"
    print(f"\n[acceptance] criterion 3 PASS: {high}/{len(suite_runs)} High "
          f"({fraction:.1%}), all deviations carry diagnostics")


# --- criterion 4: retrieval guarantees ----------------------------------------------

def test_criterion_4_retrieval_guarantees(suite_runs):
    import numpy as np

    for run in suite_runs:
        assert 1 <= run.selection_size <= 20, run.query

    rng = random.Random(29)
    vocab = [f"tok{i}" for i in range(40)]
    embedder = HashedEmbedder(32)
    trials = 1000
    for trial in range(trials):
        n = rng.randint(2, 45)
        chunks = []
        for i in range(n):
            text = " ".join(rng.choice(vocab) for _ in range(rng.randint(3, 10))) + "."
            chunks.append(DataChunk(
                id=f"c{i:03d}", kind="primary", text=text,
                metrics=("M",), geos=("G",), periods=("P",),
                numbers=tuple(sorted(extract_numbers(text))), source=(),
            ))
        store = build_store(chunks, embedder)
        query = " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 5)))
        k = rng.choice([1, 5, 20])
        got = rank_chunks(store, query, list(store.ids), k=k)

        q = embedder.embed(query)
        ordered = sorted(store.ids)
        rows = np.array([store._row[cid] for cid in ordered])
        scores = store.matrix[rows] @ q
        brute = [cid for cid, _ in sorted(
            zip(ordered, scores), key=lambda item: (-item[1], item[0])
        )[:k]]
        assert got.ids == brute, f"trial {trial}"
    print(f"\n[acceptance] criterion 4 PASS: selection bounds on {len(suite_runs)} "
          f"queries, top-k == brute force on {trials} random stores")


# --- criterion 5: numeric oracles ---------------------------------------------------

def test_criterion_5_numeric_oracles():
    rng = random.Random(31)
    alphabet = "abcdefg"
    pairs = 1000
    for _ in range(pairs):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
        assert levenshtein(a, b) == levenshtein_oracle(a, b)

    series_count = 1000
    for _ in range(series_count):
        n = rng.randint(4, 16)
        values = [round(rng.uniform(-100, 100), 4) for _ in range(n)]
        if len(set(values)) == 1:
            values[0] += 1.0
        other = [round(rng.uniform(-100, 100), 4) for _ in range(n)]
        series = [(f"P{i}", v) for i, v in enumerate(values, start=1)]
        report = analyze_trend(
            series,
            companions={"other": [(f"P{i}", v) for i, v in enumerate(other, start=1)]},
            anomaly_threshold=0.0, correlation_threshold=0.0,
        )
        slope, intercept, forecast = ols_oracle(values)
        assert report.slope == pytest.approx(slope, abs=1e-9)
        assert report.intercept == pytest.approx(intercept, abs=1e-9)
        assert report.forecast == pytest.approx(forecast, abs=1e-9)
        expected_z = zscores_oracle(values)
        got_z = dict(report.anomalies)
        for i, (period, _) in enumerate(series):
            assert got_z[period] == pytest.approx(expected_z[i], abs=1e-9)
        if len(set(other)) > 1:
            assert dict(report.correlations)["other"] == pytest.approx(
                pearson_oracle(values, other), abs=1e-9
            )

    fixture = [(f"P{i}", v) for i, v in enumerate([10.0, 10.0, 10.0, 10.0, 22.0], 1)]
    report = analyze_trend(fixture)
    assert [(p, pytest.approx(2.0, abs=1e-12)) for p, _ in report.anomalies] == [
        ("P5", pytest.approx(2.0, abs=1e-12))
    ]
    assert report.anomalies[0][1] == pytest.approx(2.0, abs=1e-12)
    print(f"\n[acceptance] criterion 5 PASS: levenshtein exact on {pairs} pairs; "
          f"OLS/z/Pearson within 1e-9 on {series_count} series; spike fixture z=2.0")


# --- criterion 6: s3 oracle equivalence ----------------------------------------------

def test_criterion_6_s3_oracle_equivalence():
    rng = random.Random(37)
    vocab = [f"w{i}" for i in range(15)]
    pairs = 500
    for trial in range(pairs):
        prompt = [rng.choice(vocab) for _ in range(rng.randint(0, 80))]
        response = [rng.choice(vocab) for _ in range(rng.randint(0, 50))]
        if rng.random() < 0.4 and len(prompt) >= 14:
            start = rng.randint(0, len(prompt) - 14)
            cut = rng.randint(0, len(response))
            response = response[:cut] + prompt[start:start + rng.randint(9, 14)] + response[cut:]
        for delta in (10, 11, 12):
            got = score_s3(" ".join(prompt), " ".join(response), delta=delta)
            want = s3_oracle(prompt, response, delta)
            assert got == want, f"trial {trial} delta {delta}"
    print(f"\n[acceptance] criterion 6 PASS: windowed s3 == O(n*m) oracle on "
          f"{pairs} pairs at delta in {{10, 11, 12}}")


# --- criterion 7: latency at 100k chunks ----------------------------------------------

@pytest.mark.slow
def test_criterion_7_bench_100k_under_budget():
    runner = CliRunner()
    result = runner.invoke(cli_main, ["bench", "--chunks", "100000", "--queries", "40"])
    assert result.exit_code == 0, result.output
    p95_line = next(l for l in result.output.splitlines() if l.startswith("p95"))
    p95_ms = float(p95_line.split()[2])
    assert p95_ms < 3000.0
    print(f"\n[acceptance] criterion 7 PASS: bench 100000 chunks, {p95_line.strip()}")


# --- criterion 8: intent harness -------------------------------------------------------

def test_criterion_8_intent_harness():
    labeled = [("a1", 0), ("a2", 0), ("a3", 0), ("a4", 0), ("b1", 1)]
    predictions = {"a1": 0, "a2": 0, "a3": 0, "a4": 1, "b1": 0}
    report = evaluate_classifier(lambda q: predictions[q], labeled)
    assert report.precision[0] == 0.75
    assert report.recall[0] == 0.75
    assert report.precision[1] == 0.0 and report.recall[1] == 0.0

    gold = {q: code for code, q in INTENT_EXAMPLES.items()}

    def echo_gateway(prompt: str) -> str:
        for question, code in gold.items():
            if f'Question: "{question}"' in prompt:
                return str(code)
        return "unparseable"

    llm_report = evaluate_classifier(
        lambda q: classify_llm(q, echo_gateway)[0],
        [(q, code) for code, q in INTENT_EXAMPLES.items()],
    )
    assert llm_report.macro_precision == 1.0
    assert llm_report.macro_recall == 1.0
    print("\n[acceptance] criterion 8 PASS: hand-computed Pr/Re reproduced exactly; "
          "gold-echo LLM classifier macro Pr=Re=1.0 on the 9 reference queries")


# --- criterion 9: service contract ------------------------------------------------------

def test_criterion_9_service_contract(tmp_path, table_csv, lexicon_file):
    import threading

    from veritab.scoring import number_in

    # (a) ingest-swap atomicity: concurrent asks never see a mixed store
    def write_table(path, offset):
        lines = ["metric,geo,period,value,unit"]
        for geo in ("Germany", "France"):
            for q in range(1, 5):
                lines.append(f"GDP,{geo},FY23-Q{q},{1.0 + q + offset},%")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    table_a = write_table(tmp_path / "a.csv", 0.11)
    table_b = write_table(tmp_path / "b.csv", 0.67)
    engine = Engine(ServiceConfig())
    engine.ingest(table_a, lexicon_file)
    numbers = {}
    for name, table in (("a", table_a), ("b", table_b)):
        probe = Engine(ServiceConfig())
        probe.ingest(table, lexicon_file)
        numbers[name] = {n for c in probe._live.store.chunks.values() for n in c.numbers}

    answers, stop = [], threading.Event()

    def asker():
        while not stop.is_set():
            answers.append(engine.ask(None, "What is the GDP in Germany in FY23-Q2?"))

    worker = threading.Thread(target=asker)
    worker.start()
    for _ in range(4):
        engine.ingest(table_b, lexicon_file)
        engine.ingest(table_a, lexicon_file)
    stop.set()
    worker.join()
    assert answers
    for payload in answers:
        values = extract_numbers(payload["answer"])
        assert values
        assert (
            all(number_in(v, numbers["a"]) for v in values)
            or all(number_in(v, numbers["b"]) for v in values)
        ), f"mixed store: {payload['answer']}"

    # (b) restart round-trip restores threads and store byte-identically
    data_dir = tmp_path / "state"
    persisted = Engine(ServiceConfig(data_dir=str(data_dir)))
    persisted.ingest(table_csv, lexicon_file)
    first = persisted.ask(None, "What is the GDP in Germany in FY23-Q1?")
    persisted.ask(first["thread_id"], "And what about France?")
    chunks_bytes = (data_dir / "chunks.jsonl").read_bytes()
    threads_bytes = (data_dir / "threads.jsonl").read_bytes()

    restarted = Engine(ServiceConfig(data_dir=str(data_dir)))
    assert restarted.store_size() == persisted.store_size()
    restarted._persist_threads(data_dir)
    assert (data_dir / "threads.jsonl").read_bytes() == threads_bytes
    assert (data_dir / "chunks.jsonl").read_bytes() == chunks_bytes

    # (c) /v1/metrics averages match an independent recount
    api_engine = Engine(ServiceConfig())
    api_engine.ingest(table_csv, lexicon_file)
    client = TestClient(create_app_cached(api_engine))
    questions = [
        "What is the GDP in Germany in FY23-Q1?",
        "Which geography had the highest Revenue in FY22-Q2?",
        "Is the CPI in Japan increasing?",
        "Summarize the GDP figures for Europe in FY23.",
    ]
    flag_rows = []
    for q in questions:
        payload = client.post("/v1/ask", json={"question": q}).json()
        flag_rows.append([payload["scores"][f"s{i}"] for i in range(1, 7)])
    metrics = client.get("/v1/metrics").json()
    assert metrics["questions"] == len(questions)
    for i in range(1, 7):
        recount = sum(row[i - 1] for row in flag_rows) / len(flag_rows)
        assert metrics["averages"][f"s{i}"] == pytest.approx(recount, abs=1e-12)
    print("\n[acceptance] criterion 9 PASS: atomic swap, byte-identical restart, "
          "metrics equal independent recount")


def create_app_cached(engine):
    from veritab.api import create_app

    return create_app(engine)
