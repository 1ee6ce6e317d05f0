"""Command-line entrypoints.

Subcommands: ingest, pool, score, select, decontam (tli|clean), bon,
report. Exit codes: 0 success, 1 usage error, 2 pipeline error. Every
output artifact embeds the effective config and tool version.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .cache import DiskCache
from .corpus import CorpusError, dedup, load_dataset, write_dataset
from . import decontam as dc
from .diversity import ExternalEmbedding, HashedBagOfWords, VectorCache
from .pipeline import (PipelineError, SelectionConfig, build_pool, report_composition,
                       run_select, write_composition)
from .sandbox import ExecLimits, SandboxError, best_of_n
from .scoring import (ConstantComplexity, ExternalComplexity, ExternalTestGen,
                      PerplexityComplexity, ScoringError, TokenLengthComplexity)

USAGE_ERROR = 1
PIPELINE_ERROR = 2


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, sort_keys=True, indent=1)


def _report_payload(body: dict, config: dict) -> dict:
    return {**body, "tool_version": __version__, "config": config}


def _complexity_provider(args, cache_dir):
    backend = getattr(args, "complexity_backend", "token-length")
    cache = DiskCache(cache_dir) if cache_dir else None
    token = os.environ.get("CODECURATE_API_TOKEN")
    if backend == "token-length":
        return TokenLengthComplexity()
    if backend == "constant":
        return ConstantComplexity()
    if backend == "perplexity":
        return PerplexityComplexity(args.complexity_endpoint, cache=cache, auth_token=token)
    if backend == "external-model":
        return ExternalComplexity(args.complexity_endpoint, cache=cache, auth_token=token)
    raise ScoringError(f"unknown complexity backend {backend!r}")


def cmd_ingest(args) -> int:
    ds, report = load_dataset(args.input, args.schema, name=args.name)
    if args.dedup:
        ds = dedup(ds)
    write_dataset(ds, args.out)
    _write_json(_report_payload(report.to_json(), {"schema": args.schema, "dedup": args.dedup}),
                str(args.out) + ".report.json")
    print(f"loaded {report.loaded} samples ({len(report.rejected)} rejected) -> {args.out}")
    return 0


def cmd_pool(args) -> int:
    cfg = SelectionConfig(**{**_load_config(args.config),
                             "include_datasets": args.include or [],
                             "longest_count": args.longest_count,
                             "top_complexity_count": args.top_complexity_count})
    datasets = []
    for path in args.inputs:
        ds, _ = load_dataset(path, "conversation")
        datasets.append(ds)
    provider = _complexity_provider(args, args.cache_dir)
    from .scoring import complexity
    pool = build_pool(datasets, cfg, complexity_of=lambda s: complexity(s, provider))
    write_dataset(pool, args.out)
    print(f"pool of {len(pool.samples)} samples -> {args.out}")
    return 0


def cmd_decontam_tli(args) -> int:
    train, _ = load_dataset(args.train, "conversation")
    test, _ = load_dataset(args.test, "conversation")
    index = dc.build_index(train, args.n, args.basis)
    report = dc.tli(index, test)
    _write_json(_report_payload(report.to_json(),
                                {"train": str(args.train), "test": str(args.test),
                                 "n": args.n, "basis": args.basis}),
                args.out)
    print(f"TLI = {report.tli:.4f} (n={args.n}, basis={args.basis}) -> {args.out}")
    return 0


def cmd_decontam_clean(args) -> int:
    train, _ = load_dataset(args.train, "conversation")
    test, _ = load_dataset(args.test, "conversation")
    cleaned, report, removed = dc.clean(train, test, args.n, args.target_tli, args.basis)
    write_dataset(cleaned, args.out)
    _write_json(_report_payload({**report.to_json(), "removed_ids": removed},
                                {"train": str(args.train), "test": str(args.test),
                                 "n": args.n, "basis": args.basis,
                                 "target_tli": args.target_tli}),
                args.report)
    print(f"removed {len(removed)} samples, TLI {report.tli:.4f} -> {args.out}")
    return 0


def cmd_score(args) -> int:
    from .sandbox import make_executor
    from .scoring import QualityConfig, score_pool
    ds, _ = load_dataset(args.input, "conversation")
    provider = _complexity_provider(args, args.cache_dir)
    gen = ExternalTestGen(args.testgen_endpoint,
                          cache=DiskCache(args.cache_dir) if args.cache_dir else None,
                          auth_token=os.environ.get("CODECURATE_API_TOKEN"))
    limits = ExecLimits(timeout=args.timeout, shim_path=args.shim)
    records = score_pool(ds.samples, provider, gen, make_executor(limits),
                         QualityConfig(k=args.k, timeout=args.timeout), args.alpha)
    _write_json(_report_payload(
        {"records": [{"sample_id": r.sample_id, "c": r.c, "q": r.q, "c_norm": r.c_norm,
                      "q_norm": r.q_norm, "s": r.s, "flags": r.flags} for r in records]},
        {"alpha": args.alpha, "k": args.k}),
        args.out)
    print(f"scored {len(records)} samples -> {args.out}")
    return 0


def cmd_select(args) -> int:
    cfg = SelectionConfig(**{**_load_config(args.config),
                             "q_budget": args.q, "tau": args.tau, "alpha": args.alpha,
                             "test_cases": args.k, "distance_mode": args.distance_mode})
    pool, _ = load_dataset(args.input, "conversation")
    provider = _complexity_provider(args, args.cache_dir)
    gen = ExternalTestGen(args.testgen_endpoint,
                          cache=DiskCache(args.cache_dir) if args.cache_dir else None,
                          auth_token=os.environ.get("CODECURATE_API_TOKEN"))
    if args.embedding_backend == "hashed-bag-of-words":
        embedder = HashedBagOfWords()
    else:
        embedder = ExternalEmbedding(args.embedding_endpoint, dim=args.embedding_dim,
                                     auth_token=os.environ.get("CODECURATE_API_TOKEN"))
    from .sandbox import make_executor
    limits = ExecLimits(timeout=cfg.timeout, shim_path=args.shim)
    vcache = VectorCache(Path(args.cache_dir) / "vectors") if args.cache_dir else None
    outputs = run_select(cfg, pool,
                         complexity_provider=provider, testgen_provider=gen,
                         executor=make_executor(limits), embedding_provider=embedder,
                         vector_cache=vcache, out_dir=args.out_dir)
    print(f"selected {len(outputs.selected.samples)} samples -> {args.out_dir}")
    return 0


def cmd_bon(args) -> int:
    candidates = [json.loads(line)["solution"]
                  for line in Path(args.candidates).read_text(encoding="utf-8").splitlines()
                  if line.strip()]
    gen = ExternalTestGen(args.testgen_endpoint,
                          cache=DiskCache(args.cache_dir) if args.cache_dir else None,
                          auth_token=os.environ.get("CODECURATE_API_TOKEN"))
    limits = ExecLimits(timeout=args.timeout, shim_path=args.shim)
    result = best_of_n(args.instruction, candidates, gen, limits, k=args.k)
    _write_json(_report_payload(
        {"ranked": result.ranked, "passed_counts": result.passed_counts,
         "chosen": result.chosen},
        {"k": args.k, "timeout": args.timeout}),
        args.out)
    print(f"chosen candidate {result.chosen} "
          f"({result.passed_counts[result.chosen]} cases passed) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    ds, _ = load_dataset(args.input, "conversation")
    report = report_composition(ds.samples, args.criterion)
    write_composition(report, args.out, csv_path=args.csv)
    print(f"composition over {len(ds.samples)} samples -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codecurate",
                                     description="Curation toolkit for code instruction-tuning corpora")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a JSONL dataset into canonical form")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", choices=["conversation", "instruction-response"], required=True)
    p.add_argument("--name", default=None)
    p.add_argument("--dedup", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pool", help="build the candidate data pool")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--include", nargs="*", default=[])
    p.add_argument("--longest-count", type=int, default=0)
    p.add_argument("--top-complexity-count", type=int, default=0)
    p.add_argument("--complexity-backend", default="token-length")
    p.add_argument("--complexity-endpoint", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("decontam", help="leakage measurement and cleaning")
    dsub = p.add_subparsers(dest="decontam_command", required=True)
    t = dsub.add_parser("tli", help="compute the leakage indicator")
    t.add_argument("--train", required=True)
    t.add_argument("--test", required=True)
    t.add_argument("--n", type=int, default=10)
    t.add_argument("--basis", choices=["instruction", "full"], default="instruction")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_decontam_tli)
    c = dsub.add_parser("clean", help="remove offenders until the target is met")
    c.add_argument("--train", required=True)
    c.add_argument("--test", required=True)
    c.add_argument("--n", type=int, default=10)
    c.add_argument("--basis", choices=["instruction", "full"], default="instruction")
    c.add_argument("--target-tli", type=float, default=0.05)
    c.add_argument("--out", required=True)
    c.add_argument("--report", required=True)
    c.set_defaults(func=cmd_decontam_clean)

    p = sub.add_parser("score", help="complexity + quality scores for a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--complexity-backend", default="token-length")
    p.add_argument("--complexity-endpoint", default=None)
    p.add_argument("--testgen-endpoint", default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--shim", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("select", help="score and diversity-select a pool")
    p.add_argument("--input", required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--tau", type=float, default=0.945)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--distance-mode", choices=["similarity", "metric"], default="similarity")
    p.add_argument("--complexity-backend", default="token-length")
    p.add_argument("--complexity-endpoint", default=None)
    p.add_argument("--testgen-endpoint", default=None)
    p.add_argument("--embedding-backend", default="hashed-bag-of-words")
    p.add_argument("--embedding-endpoint", default=None)
    p.add_argument("--embedding-dim", type=int, default=256)
    p.add_argument("--shim", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("bon", help="best-of-N candidate ranking by test passes")
    p.add_argument("--instruction", required=True)
    p.add_argument("--candidates", required=True, help="JSONL with a 'solution' field per line")
    p.add_argument("--testgen-endpoint", default=None)
    p.add_argument("--k", type=int, default=12)
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--shim", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bon)

    p = sub.add_parser("report", help="per-source composition of a sample set")
    p.add_argument("--input", required=True)
    p.add_argument("--criterion", default="selected")
    p.add_argument("--csv", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; remap to the documented code
        return 0 if e.code == 0 else USAGE_ERROR
    try:
        return args.func(args)
    except (CorpusError, ScoringError, SandboxError, PipelineError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return PIPELINE_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
