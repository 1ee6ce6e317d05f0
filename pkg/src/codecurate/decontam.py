"""Test-leakage measurement and pool cleaning.

The leakage indicator is the mean, over test samples, of the maximum
n-gram-overlap similarity against any training sample. Similarity is
asymmetric: shared n-grams divided by the test sample's n-gram count.
An inverted index over training n-grams restricts the exact similarity
computation to training samples that share at least one gram, which is
what makes 100K-pool runs tractable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from hashlib import blake2b

import numpy as np

from .corpus import Dataset, full_text, instruction_text

_TOKEN_RE = re.compile(r"[a-z0-9_]+")

# Odd multiplier for the rolling polynomial gram hash (FNV-1a prime).
_HASH_BASE = np.uint64(1099511628211)

_token_hash_memo: dict[str, int] = {}


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-word characters."""
    return _TOKEN_RE.findall(text.lower())


def _token_hash(tok: str) -> int:
    h = _token_hash_memo.get(tok)
    if h is None:
        h = int.from_bytes(blake2b(tok.encode("utf-8"), digest_size=8).digest(), "little")
        _token_hash_memo[tok] = h
    return h


@dataclass(frozen=True)
class NGramProfile:
    n: int
    grams: frozenset[int]
    token_count: int


def ngram_profile(tokens: list[str], n: int) -> NGramProfile:
    """Hash all contiguous token n-grams (set semantics).

    Texts shorter than n tokens contribute a single whole-sequence gram
    so short samples are still comparable; empty texts have no grams.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    count = len(tokens)
    if count == 0:
        return NGramProfile(n=n, grams=frozenset(), token_count=0)
    ids = np.fromiter((_token_hash(t) for t in tokens), dtype=np.uint64, count=count)
    if count < n:
        window = count
    else:
        window = n
    with np.errstate(over="ignore"):  # uint64 wraparound is the hash
        weights = np.empty(window, dtype=np.uint64)
        acc = np.uint64(1)
        for i in range(window - 1, -1, -1):
            weights[i] = acc
            acc = acc * _HASH_BASE
        views = np.lib.stride_tricks.sliding_window_view(ids, window)
        hashes = (views * weights).sum(axis=1, dtype=np.uint64)
    return NGramProfile(n=n, grams=frozenset(hashes.tolist()), token_count=count)


def profile_text(text: str, n: int) -> NGramProfile:
    return ngram_profile(tokenize(text), n)


def similarity(test: NGramProfile, train: NGramProfile) -> float:
    """Shared grams over the test profile's grams; asymmetric by design."""
    if test.n != train.n:
        raise ValueError(f"profile n mismatch: {test.n} vs {train.n}")
    if not test.grams:
        return 0.0
    return len(test.grams & train.grams) / len(test.grams)


BASES = ("instruction", "full")


def _basis_text(sample, basis: str) -> str:
    if basis == "instruction":
        return instruction_text(sample)
    if basis == "full":
        return full_text(sample)
    raise ValueError(f"unknown text basis {basis!r}, expected one of {BASES}")


@dataclass
class ContaminationIndex:
    n: int
    basis: str
    sample_ids: list[str]
    profiles: list[NGramProfile]
    postings: dict[int, list[int]]


def build_index(train: Dataset, n: int, basis: str = "instruction") -> ContaminationIndex:
    """Profile every training sample and invert gram -> sample ordinals."""
    profiles = []
    postings: dict[int, list[int]] = {}
    for ordinal, s in enumerate(train.samples):
        prof = profile_text(_basis_text(s, basis), n)
        profiles.append(prof)
        for g in prof.grams:
            postings.setdefault(g, []).append(ordinal)
    return ContaminationIndex(
        n=n, basis=basis,
        sample_ids=[s.id for s in train.samples],
        profiles=profiles, postings=postings,
    )


@dataclass
class TliReport:
    tli: float
    n: int
    basis: str
    train_size: int
    test_size: int
    per_test: list[dict] = field(default_factory=list)
    # per_test entries: {"test_id", "max_similarity", "argmax_train_id", "empty_profile"}

    def to_json(self) -> dict:
        return {"tli": self.tli, "n": self.n, "basis": self.basis,
                "train_size": self.train_size, "test_size": self.test_size,
                "per_test": self.per_test}


def _candidate_similarities(index: ContaminationIndex, prof: NGramProfile,
                            removed: set[int] | None = None) -> dict[int, float]:
    """Exact similarity for every training ordinal sharing >= 1 gram."""
    counts: dict[int, int] = {}
    postings = index.postings
    for g in prof.grams:
        for ordinal in postings.get(g, ()):
            counts[ordinal] = counts.get(ordinal, 0) + 1
    denom = len(prof.grams)
    if removed:
        return {o: c / denom for o, c in counts.items() if o not in removed}
    return {o: c / denom for o, c in counts.items()}


def _best(cands: dict[int, float]) -> tuple[float, int | None]:
    """Max similarity with lowest-ordinal tie-break."""
    best_s, best_o = 0.0, None
    for o, s in cands.items():
        if s > best_s or (s == best_s and best_o is not None and o < best_o):
            best_s, best_o = s, o
    return best_s, best_o


def tli(index: ContaminationIndex, test: Dataset) -> TliReport:
    """Mean over test samples of the max similarity to any training sample.

    Equals the quadratic brute force exactly: candidates gathered through
    the postings are the only training samples with nonzero similarity.
    """
    if not test.samples:
        raise ValueError("test dataset is empty")
    per_test = []
    maxima = []
    for s in test.samples:
        prof = profile_text(_basis_text(s, index.basis), index.n)
        if not prof.grams:
            per_test.append({"test_id": s.id, "max_similarity": 0.0,
                             "argmax_train_id": None, "empty_profile": True})
            maxima.append(0.0)
            continue
        best_s, best_o = _best(_candidate_similarities(index, prof))
        per_test.append({
            "test_id": s.id, "max_similarity": best_s,
            "argmax_train_id": index.sample_ids[best_o] if best_o is not None else None,
            "empty_profile": False,
        })
        maxima.append(best_s)
    return TliReport(
        tli=sum(maxima) / len(maxima), n=index.n, basis=index.basis,
        train_size=len(index.sample_ids), test_size=len(test.samples),
        per_test=per_test,
    )


def clean(train: Dataset, test: Dataset, n: int, target_tli: float,
          basis: str = "instruction") -> tuple[Dataset, TliReport, list[str]]:
    """Greedily remove worst offenders until the pool's leakage meets target.

    Each step removes the training sample that is the current arg-max for
    the test sample with the highest max similarity (ties: lowest test
    index, then lowest training ordinal), recomputing only the affected
    maxima. Deterministic; removal order is returned for replay.
    """
    if not 0.0 <= target_tli <= 1.0:
        raise ValueError(f"target_tli must be in [0,1], got {target_tli}")
    index = build_index(train, n, basis)
    test_profiles = [profile_text(_basis_text(s, basis), n) for s in test.samples]

    removed: set[int] = set()
    removal_order: list[str] = []
    ntest = len(test_profiles)
    if ntest == 0:
        raise ValueError("test dataset is empty")

    cands = [_candidate_similarities(index, p) for p in test_profiles]
    maxima = [_best(c) for c in cands]  # (similarity, ordinal|None)

    warning = False
    while True:
        current = sum(s for s, _ in maxima) / ntest
        if current <= target_tli:
            break
        # Test sample with the highest max; lowest test index on ties.
        worst_i = max(range(ntest), key=lambda i: (maxima[i][0], -i))
        offender = maxima[worst_i][1]
        if offender is None:
            break  # nothing left to remove can lower the mean
        removed.add(offender)
        removal_order.append(index.sample_ids[offender])
        for i in range(ntest):
            if maxima[i][1] == offender:
                cands[i] = {o: s for o, s in cands[i].items() if o not in removed}
                maxima[i] = _best(cands[i])
        if len(removed) == len(train.samples):
            warning = True
            break

    cleaned = Dataset(
        name=train.name,
        samples=[s for i, s in enumerate(train.samples) if i not in removed],
    )
    if cleaned.samples:
        report = tli(build_index(cleaned, n, basis), test)
    else:
        report = TliReport(tli=0.0, n=n, basis=basis, train_size=0,
                           test_size=ntest,
                           per_test=[{"test_id": s.id, "max_similarity": 0.0,
                                      "argmax_train_id": None,
                                      "empty_profile": not p.grams}
                                     for s, p in zip(test.samples, test_profiles)])
    if warning:
        report.per_test.append({"warning": "target unreachable; entire pool removed"})
    return cleaned, report, removal_order
