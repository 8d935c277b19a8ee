"""Batch evaluation and latency benchmarking for the end-to-end pipeline."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .embedding import HashedEmbedder
from .forge import DataChunk
from .intent import classify_rule, evaluate_classifier
from .lexicon import KeywordDictionary, expand_hierarchy, extract_entities, spell_correct
from .prompting import build_prompt, default_templates
from .ranking import build_store, filter_chunks, rank_chunks
from .scoring import extract_numbers
from .service import Engine


@dataclass
class EvalReport:
    """Fleet-level view of a query batch: score averages, confidence mix,
    optional per-intent precision/recall, and per-query rows."""

    queries: int
    metric_averages: dict[str, float | None]
    confidence_counts: dict[str, int]
    confidence_distribution: dict[str, float]
    rows: list[dict] = field(default_factory=list)
    intent_report: dict | None = None
    errors: int = 0

    def to_dict(self) -> dict:
        return {
            "queries": self.queries,
            "errors": self.errors,
            "metric_averages": self.metric_averages,
            "confidence_counts": self.confidence_counts,
            "confidence_distribution": self.confidence_distribution,
            "intent": self.intent_report,
            "rows": self.rows,
        }


def run_eval(engine: Engine, queries: list[dict]) -> EvalReport:
    """Run each query on a fresh thread and aggregate the score flags.

    Queries are {"question": ...} objects, optionally carrying an
    "intent_label" (0-8; "label" is accepted as an alias) to switch on the
    per-intent report.
    """
    rows: list[dict] = []
    errors = 0
    for item in queries:
        question = item["question"]
        label = item.get("intent_label", item.get("label"))
        try:
            payload = engine.ask(None, question)
        except Exception as exc:
            errors += 1
            rows.append({
                "question": question, "error": str(exc), "label": label,
            })
            continue
        scores = payload["scores"]
        rows.append({
            "question": question,
            **{f"s{i}": scores[f"s{i}"] for i in range(1, 7)},
            "sum": scores["sum"],
            "confidence": scores["confidence"],
            "diagnostics": scores["diagnostics"],
            "intent": payload["intent"]["code"],
            "relaxation_stage": payload["relaxation_stage"],
            "latency_s": payload["latency_s"],
            "label": label,
        })

    scored = [r for r in rows if "confidence" in r]
    n = len(scored)
    counts = {"High": 0, "Medium": 0, "Low": 0}
    for r in scored:
        counts[r["confidence"]] += 1

    report = EvalReport(
        queries=len(rows),
        errors=errors,
        metric_averages={
            f"s{i}": (sum(r[f"s{i}"] for r in scored) / n if n else None)
            for i in range(1, 7)
        },
        confidence_counts=counts,
        confidence_distribution={
            label: (counts[label] / n if n else 0.0) for label in counts
        },
        rows=rows,
    )

    labeled = [
        (r["question"], int(r["label"]))
        for r in scored
        if r.get("label") is not None
    ]
    if labeled:
        predictions = {r["question"]: r["intent"] for r in scored}
        report.intent_report = evaluate_classifier(
            lambda q: predictions[q], labeled
        ).to_dict()
    return report


# --- latency benchmark ---------------------------------------------------------

def synthetic_corpus(
    chunk_count: int, seed: int = 7
) -> tuple[list[DataChunk], KeywordDictionary]:
    """A store-shaped corpus of the requested size with a matching lexicon."""
    rng = random.Random(seed)
    n_geos = min(200, max(4, chunk_count // 50))
    periods = [f"FY{y}-Q{q}" for y in range(20, 24) for q in range(1, 5)]
    n_metrics = 30
    metrics = [f"metric{i:03d}" for i in range(n_metrics)]
    geos = [f"geo{i:03d}" for i in range(n_geos)]

    chunks = []
    for i in range(chunk_count):
        geo = geos[i % n_geos]
        period = periods[(i // n_geos) % len(periods)]
        picked = [metrics[(i + j) % n_metrics] for j in range(3)]
        sentences = [f"The following figures are for {geo} in {period}."] + [
            f"The {m} for {geo} in {period} was {rng.uniform(-50, 150):.2f}."
            for m in picked
        ]
        text = " ".join(sentences)
        chunks.append(DataChunk(
            id=f"synthetic:{i:07d}",
            kind="primary",
            text=text,
            metrics=tuple(sorted(picked)),
            geos=(geo,),
            periods=(period,),
            numbers=tuple(sorted(extract_numbers(text))),
            source=(f"synthetic|{i}",),
        ))

    lexicon = KeywordDictionary.from_data({
        "metrics": [{"name": m} for m in metrics],
        "geo_tree": [{"name": g} for g in geos],
        "period_tree": [
            {"name": f"FY{y}", "children": [{"name": f"FY{y}-Q{q}"} for q in range(1, 5)]}
            for y in range(20, 24)
        ],
    })
    return chunks, lexicon


_QUERY_SHAPES = [
    "What is the {m} for {g} in {p}?",
    "Which geography had the highest {m} in {p}?",
    "Summarize the {m} figures for {g}.",
    "Is the {m} for {g} in {p} on target?",
    "How did {g} perform on {m} across {p}?",
]


def bench(
    chunk_count: int,
    query_count: int,
    k: int = 20,
    dimension: int = 512,
    seed: int = 7,
) -> dict:
    """Measure retrieval + prompt-assembly latency over a synthetic store."""
    if chunk_count < 1 or query_count < 1:
        raise ValueError("chunk and query counts must be >= 1")
    rng = random.Random(seed + 1)
    chunks, lexicon = synthetic_corpus(chunk_count, seed=seed)
    templates = default_templates()

    t_build = time.perf_counter()
    store = build_store(chunks, HashedEmbedder(dimension))
    build_s = time.perf_counter() - t_build

    metrics = sorted({m for c in chunks for m in c.metrics})
    geos = sorted({g for c in chunks for g in c.geos})
    periods = sorted({p for c in chunks for p in c.periods})
    questions = []
    for i in range(query_count):
        if i % 10 == 9:
            # no extractable entities: worst case, full-store fallback scan
            questions.append("Anything remarkable lately?")
        else:
            questions.append(_QUERY_SHAPES[i % len(_QUERY_SHAPES)].format(
                m=rng.choice(metrics), g=rng.choice(geos), p=rng.choice(periods),
            ))

    latencies = []
    for question in questions:
        t0 = time.perf_counter()
        corrected = spell_correct(question, lexicon)
        entities = expand_hierarchy(extract_entities(corrected, lexicon), lexicon)
        intent = classify_rule(corrected)
        candidates, stage = filter_chunks(store, entities)
        selection = rank_chunks(store, corrected, candidates, k=k, stage=stage)
        selected = [store.chunks[cid] for cid in selection.ids]
        build_prompt(corrected, intent, templates, lexicon, selection, selected)
        latencies.append(time.perf_counter() - t0)

    latencies.sort()
    return {
        "chunks": chunk_count,
        "queries": query_count,
        "store_build_s": build_s,
        "p50_s": _percentile(latencies, 0.50),
        "p95_s": _percentile(latencies, 0.95),
        "max_s": latencies[-1],
    }


def _percentile(sorted_values: list[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    index = max(0, min(len(sorted_values) - 1, int(round(q * len(sorted_values) + 0.5)) - 1))
    return sorted_values[index]
