"""End-to-end orchestration: pool construction, scoring, selection, reports.

Stages communicate through on-disk artifacts (JSONL datasets, JSON score
tables, a selection manifest), so any stage can be re-run independently
and a selection can be replayed offline from its manifest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .corpus import Dataset, Sample, dedup, full_text, write_dataset
from .decontam import tokenize
from .diversity import EmbeddingProvider, SelectedSet, VectorCache, embed_pool, select
from .scoring import (ComplexityProvider, QualityConfig, ScoreRecord, TestGenProvider,
                      score_pool)


class PipelineError(Exception):
    pass


@dataclass
class SelectionConfig:
    q_budget: int = 40000
    tau: float = 0.945
    alpha: float = 0.5
    ngram_n: int = 10
    test_cases: int = 12
    distance_mode: str = "similarity"
    include_datasets: list[str] = field(default_factory=list)
    longest_count: int = 200000
    top_complexity_count: int = 200000
    timeout: float = 10.0
    workers: int = 1

    def __post_init__(self):
        for name in ("q_budget", "ngram_n", "test_cases"):
            if getattr(self, name) < 1:
                raise PipelineError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("longest_count", "top_complexity_count"):
            if getattr(self, name) < 0:
                raise PipelineError(f"{name} must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise PipelineError(f"alpha must be in [0,1], got {self.alpha}")

    def to_json(self) -> dict:
        return {
            "q_budget": self.q_budget, "tau": self.tau, "alpha": self.alpha,
            "ngram_n": self.ngram_n, "test_cases": self.test_cases,
            "distance_mode": self.distance_mode,
            "include_datasets": list(self.include_datasets),
            "longest_count": self.longest_count,
            "top_complexity_count": self.top_complexity_count,
            "timeout": self.timeout, "workers": self.workers,
            "tool_version": __version__,
        }


def _with_meta(s: Sample, key: str, value) -> Sample:
    meta = dict(s.meta)
    rules = list(meta.get(key, []))
    if value not in rules:
        rules.append(value)
    meta[key] = rules
    return Sample(id=s.id, source=s.source, messages=s.messages, meta=meta)


def build_pool(datasets: list[Dataset], cfg: SelectionConfig,
               complexity_of=None) -> Dataset:
    """Union of include-list datasets, longest remainder, and most complex
    remainder, then exact dedup. Admission rules are recorded in meta.

    `complexity_of(sample) -> float` is required when top_complexity_count
    is positive; the longest rule ranks by full-text token length.
    """
    by_name = {d.name: d for d in datasets}
    missing = [n for n in cfg.include_datasets if n not in by_name]
    if missing:
        raise PipelineError(f"included datasets not loaded: {missing}")

    admitted: dict[str, Sample] = {}
    for name in cfg.include_datasets:
        for s in by_name[name].samples:
            admitted[s.id] = _with_meta(s, "pool_rules", "included-dataset")

    # the length and complexity rules both draw from the non-included
    # remainder; a sample may qualify under both and carries both tags
    remainder = [s for d in datasets for s in d.samples if s.id not in admitted]

    if cfg.longest_count > 0:
        ranked = sorted(remainder,
                        key=lambda s: (-len(tokenize(full_text(s))), s.source, s.id))
        for s in ranked[:cfg.longest_count]:
            admitted[s.id] = _with_meta(admitted.get(s.id, s), "pool_rules", "longest")

    if cfg.top_complexity_count > 0:
        if complexity_of is None:
            raise PipelineError("top_complexity_count > 0 needs a complexity scorer")
        ranked = sorted(remainder, key=lambda s: (-complexity_of(s), s.source, s.id))
        for s in ranked[:cfg.top_complexity_count]:
            admitted[s.id] = _with_meta(admitted.get(s.id, s), "pool_rules", "top-complexity")

    ordered = []
    seen = set()
    for d in datasets:
        for s in d.samples:
            if s.id in admitted and s.id not in seen:
                ordered.append(admitted[s.id])
                seen.add(s.id)
    return dedup(Dataset(name="pool", samples=ordered))


@dataclass
class SelectOutputs:
    selected: Dataset
    records: list[ScoreRecord]
    chosen: SelectedSet
    manifest: dict


def run_select(cfg: SelectionConfig, pool: Dataset, *,
               complexity_provider: ComplexityProvider,
               testgen_provider: TestGenProvider,
               executor,
               embedding_provider: EmbeddingProvider,
               vector_cache: VectorCache | None = None,
               out_dir: str | Path | None = None) -> SelectOutputs:
    """Score, normalize, combine, sort, and diversity-select the pool.

    Writes selected.jsonl, scores.json, and manifest.json under out_dir
    when given. The manifest records the effective config, cache stats,
    and the admission log, enough to replay the selection offline.
    """
    qcfg = QualityConfig(k=cfg.test_cases, timeout=cfg.timeout, workers=cfg.workers)
    records = score_pool(pool.samples, complexity_provider, testgen_provider,
                         executor, qcfg, cfg.alpha)
    scored = [r for r in records if r.scored]
    vectors, embed_failed = embed_pool(
        [s for s in pool.samples if s.id in {r.sample_id for r in scored}],
        embedding_provider, cache=vector_cache)
    selectable = [r for r in scored if r.sample_id in vectors]
    if not selectable:
        raise PipelineError("no scorable+embeddable samples in pool")
    chosen = select(selectable, vectors, cfg.q_budget, cfg.tau, cfg.distance_mode)

    by_id = {s.id: s for s in pool.samples}
    selected = Dataset(name=f"{pool.name}-selected",
                       samples=[by_id[i] for i in chosen.ids])
    manifest = {
        "config": cfg.to_json(),
        "pool_size": len(pool.samples),
        "scored": len(scored),
        "unscored_ids": sorted(r.sample_id for r in records if not r.scored),
        "embed_failed_ids": sorted(embed_failed),
        "admission_log": list(chosen.ids),
        "cache_stats": {
            "vectors": {"hits": vector_cache.hits, "misses": vector_cache.misses}
            if vector_cache else None,
        },
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_dataset(selected, out_dir / "selected.jsonl")
        with open(out_dir / "scores.json", "w", encoding="utf-8") as f:
            json.dump([{"sample_id": r.sample_id, "c": r.c, "q": r.q,
                        "c_norm": r.c_norm, "q_norm": r.q_norm, "s": r.s,
                        "flags": r.flags} for r in records],
                      f, ensure_ascii=False, sort_keys=True, indent=1)
        with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(manifest, f, ensure_ascii=False, sort_keys=True, indent=1)
    return SelectOutputs(selected=selected, records=records, chosen=chosen,
                         manifest=manifest)


def replay_manifest(manifest: dict, pool: Dataset) -> Dataset:
    """Rebuild the selected dataset from a manifest, no provider calls."""
    by_id = {s.id: s for s in pool.samples}
    missing = [i for i in manifest["admission_log"] if i not in by_id]
    if missing:
        raise PipelineError(f"manifest ids absent from pool: {missing[:5]}")
    return Dataset(name=f"{pool.name}-selected",
                   samples=[by_id[i] for i in manifest["admission_log"]])


@dataclass
class CompositionReport:
    criterion: str
    counts: dict[str, int]
    fractions: dict[str, float]

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "counts": self.counts,
                "fractions": self.fractions, "tool_version": __version__}


def report_composition(samples: list[Sample], criterion: str) -> CompositionReport:
    """Per-source counts and fractions for a sample set."""
    if not samples:
        raise PipelineError("cannot report composition of an empty sample set")
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.source] = counts.get(s.source, 0) + 1
    total = len(samples)
    fractions = {k: v / total for k, v in counts.items()}
    return CompositionReport(criterion=criterion, counts=counts, fractions=fractions)


def write_composition(report: CompositionReport, json_path: str | Path,
                      csv_path: str | Path | None = None) -> None:
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(report.to_json(), f, ensure_ascii=False, sort_keys=True, indent=1)
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["source", "count", "fraction"])
            for src in sorted(report.counts):
                writer.writerow([src, report.counts[src], report.fractions[src]])
