"""Per-sample complexity and quality scoring, normalization, and combination.

Complexity and quality come from pluggable providers so desk-scale runs
can use offline backends (token length, mocks) while production runs
point at model endpoints. All provider calls are disk-cached by content
hash, which makes large scoring runs resumable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import requests

from .cache import DiskCache, content_key
from .corpus import Sample
from .decontam import tokenize


class ScoringError(Exception):
    pass


class ProviderError(ScoringError):
    """A provider call failed after retries."""


@dataclass
class ScoreRecord:
    sample_id: str
    c: float | None = None          # raw complexity, provider scale
    q: int | None = None            # unit-test passes, 0..K
    c_norm: float | None = None
    q_norm: float | None = None
    s: float | None = None
    flags: list[str] = field(default_factory=list)  # "unscored", "untestable"

    @property
    def scored(self) -> bool:
        return self.c is not None and self.q is not None


# --------------------------------------------------------------------------
# Complexity providers

class ComplexityProvider:
    """Scores one instruction turn; subclasses define the backend."""

    backend = "abstract"

    def score_turn(self, text: str) -> float:
        raise NotImplementedError


class TokenLengthComplexity(ComplexityProvider):
    """Instruction length in tokens (the simple length baseline)."""

    backend = "token-length"

    def score_turn(self, text: str) -> float:
        return float(len(tokenize(text)))


class ConstantComplexity(ComplexityProvider):
    """Constant score; with a random tie-break this is the random baseline."""

    backend = "constant"

    def __init__(self, value: float = 1.0):
        self.value = value

    def score_turn(self, text: str) -> float:
        return self.value


class ExternalComplexity(ComplexityProvider):
    """HTTP endpoint: POST {"input": text} -> {"score": number}.

    Must be deployed with temperature-0 semantics; responses are cached
    so re-runs are reproducible and free.
    """

    backend = "external-model"

    def __init__(self, endpoint: str, cache: DiskCache | None = None,
                 auth_token: str | None = None, retries: int = 2, timeout: float = 30.0):
        self.endpoint = endpoint
        self.cache = cache
        self.auth_token = auth_token
        self.retries = retries
        self.timeout = timeout

    def score_turn(self, text: str) -> float:
        key = content_key(self.backend, self.endpoint, text)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return float(hit["score"])
        last = None
        for _ in range(self.retries + 1):
            try:
                headers = {}
                if self.auth_token:
                    headers["Authorization"] = f"Bearer {self.auth_token}"
                resp = requests.post(self.endpoint, json={"input": text},
                                     headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                score = float(resp.json()["score"])
                if self.cache is not None:
                    self.cache.put(key, {"score": score})
                return score
            except (requests.RequestException, KeyError, ValueError, TypeError) as e:
                last = e
        raise ProviderError(f"complexity endpoint failed after {self.retries + 1} attempts: {last}")


class PerplexityComplexity(ComplexityProvider):
    """Instruction perplexity from an LM scoring endpoint (ablation baseline).

    Same wire shape as the external scorer: POST {"input": text} -> {"score": ppl}.
    """

    backend = "perplexity"

    def __init__(self, endpoint: str, cache: DiskCache | None = None,
                 auth_token: str | None = None, retries: int = 2, timeout: float = 30.0):
        self._inner = ExternalComplexity(endpoint, cache=cache, auth_token=auth_token,
                                         retries=retries, timeout=timeout)
        self._inner.backend = self.backend

    def score_turn(self, text: str) -> float:
        return self._inner.score_turn(text)


def complexity(sample: Sample, provider: ComplexityProvider) -> float:
    """Sum of per-turn provider scores over the sample's user turns."""
    total = 0.0
    for m in sample.messages:
        if m.role == "user":
            total += provider.score_turn(m.content)
    return total


# --------------------------------------------------------------------------
# Quality via generated unit tests

class TestGenProvider:
    """Maps (instruction, response, k) to a runnable unit-test program."""

    backend = "abstract"

    def generate(self, instruction: str, response: str, k: int) -> str:
        raise NotImplementedError


class ExternalTestGen(TestGenProvider):
    """HTTP endpoint: POST {"instruction", "response", "k"} -> {"test_program"}."""

    backend = "external-model"

    def __init__(self, endpoint: str, cache: DiskCache | None = None,
                 auth_token: str | None = None, retries: int = 2, timeout: float = 60.0):
        self.endpoint = endpoint
        self.cache = cache
        self.auth_token = auth_token
        self.retries = retries
        self.timeout = timeout

    def generate(self, instruction: str, response: str, k: int) -> str:
        key = content_key(self.backend, self.endpoint, instruction, response, k)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return hit["test_program"]
        last = None
        for _ in range(self.retries + 1):
            try:
                headers = {}
                if self.auth_token:
                    headers["Authorization"] = f"Bearer {self.auth_token}"
                resp = requests.post(
                    self.endpoint,
                    json={"instruction": instruction, "response": response, "k": k},
                    headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                program = resp.json()["test_program"]
                if self.cache is not None:
                    self.cache.put(key, {"test_program": program})
                return program
            except (requests.RequestException, KeyError, TypeError) as e:
                last = e
        raise ProviderError(f"test-gen endpoint failed after {self.retries + 1} attempts: {last}")


@dataclass
class QualityConfig:
    k: int = 12               # generated cases per sample
    timeout: float = 10.0     # seconds per execution
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ScoringError(f"k must be >= 1, got {self.k}")


def final_response(sample: Sample) -> str:
    """Content of the last assistant turn (the tested solution)."""
    for m in reversed(sample.messages):
        if m.role == "assistant":
            return m.content
    raise ScoringError(f"sample {sample.id} has no assistant turn")


def quality(sample: Sample, gen: TestGenProvider, executor, cfg: QualityConfig) -> tuple[int, bool]:
    """Passed-case count for the sample's final response.

    `executor(test_program, solution, declared_cases)` returns an object
    with .status and .passed (the sandbox module's run fits). Returns
    (q, untestable): generation failures and non-executable programs are
    q=0 with the untestable flag set, distinct from a genuine 0/K.
    """
    from .corpus import instruction_text
    try:
        program = gen.generate(instruction_text(sample), final_response(sample), cfg.k)
    except ProviderError:
        return 0, True
    result = executor(program, final_response(sample), cfg.k)
    if result.status in ("crash", "protocol-error"):
        return 0, True
    return min(result.passed, cfg.k), False


# --------------------------------------------------------------------------
# Normalization and combination

def normalize(values: list[float]) -> list[float]:
    """Min-max over the pool; all-equal pools map to 0.5."""
    if not values:
        raise ScoringError("cannot normalize an empty list")
    for i, v in enumerate(values):
        if not math.isfinite(v):
            raise ScoringError(f"non-finite value at position {i}: {v!r}")
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    span = hi - lo
    return [(v - lo) / span for v in values]


def combine(c_norm: float, q_norm: float, alpha: float) -> float:
    """Weighted blend of normalized complexity and quality."""
    if not 0.0 <= alpha <= 1.0:
        raise ScoringError(f"alpha must be in [0,1], got {alpha}")
    return alpha * c_norm + (1.0 - alpha) * q_norm


def score_pool(samples, provider: ComplexityProvider, gen: TestGenProvider,
               executor, cfg: QualityConfig, alpha: float) -> list[ScoreRecord]:
    """Score every sample end to end: raw c and q, then normalize and combine.

    Samples whose complexity provider fails are marked unscored and get
    no normalized scores; they never enter the normalization extremes.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ScoringError(f"alpha must be in [0,1], got {alpha}")
    records = []
    for s in samples:
        rec = ScoreRecord(sample_id=s.id)
        try:
            rec.c = complexity(s, provider)
        except ProviderError as e:
            rec.flags.append("unscored")
            rec.flags.append(str(e))
            records.append(rec)
            continue
        q, untestable = quality(s, gen, executor, cfg)
        rec.q = q
        if untestable:
            rec.flags.append("untestable")
        records.append(rec)
    scored = [r for r in records if r.scored]
    if scored:
        c_norms = normalize([r.c for r in scored])
        q_norms = normalize([float(r.q) for r in scored])
        for r, cn, qn in zip(scored, c_norms, q_norms):
            r.c_norm = cn
            r.q_norm = qn
            r.s = combine(cn, qn, alpha)
    return records
