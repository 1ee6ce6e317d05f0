import hashlib
import sys
from pathlib import Path

import pytest

from codecurate.corpus import Dataset, Message, Sample
from codecurate.sandbox import ExecutionResult
from codecurate.scoring import ProviderError, TestGenProvider

REPO_ROOT = Path(__file__).resolve().parents[1]
SHIM_PATH = REPO_ROOT / "shim" / "runner_shim.py"


def make_sample(sid, instruction, response="ok response", source="fixture", meta=None):
    return Sample(id=sid, source=source,
                  messages=(Message("user", instruction), Message("assistant", response)),
                  meta=meta or {})


def make_dataset(texts, name="fixture", prefix=None):
    prefix = prefix or name
    return Dataset(name=name, samples=[
        make_sample(f"{prefix}:{i}", t, source=name) for i, t in enumerate(texts)])


class MockTestGen(TestGenProvider):
    """Returns a canned program per (instruction, response); counts calls."""

    backend = "mock"

    def __init__(self, program_for=None, fail_for=()):
        self.program_for = program_for or (lambda instr, resp, k: f"# tests for {instr!r}\n")
        self.fail_for = set(fail_for)
        self.calls = 0

    def generate(self, instruction, response, k):
        self.calls += 1
        if instruction in self.fail_for or response in self.fail_for:
            raise ProviderError("mock generation failure")
        return self.program_for(instruction, response, k)


def hash_pass_executor(k_max=12):
    """Deterministic mock executor: passes derived from the solution hash."""

    def _exec(program, solution, declared_cases):
        digest = hashlib.sha256(solution.encode()).digest()
        passed = digest[0] % (min(declared_cases, k_max) + 1)
        return ExecutionResult("ok", declared_cases, passed,
                               [(f"case_{i}", i < passed) for i in range(declared_cases)])

    return _exec


@pytest.fixture
def shim_path():
    assert SHIM_PATH.is_file()
    return str(SHIM_PATH)
