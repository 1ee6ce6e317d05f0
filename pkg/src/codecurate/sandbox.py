"""Sandboxed execution of generated unit-test programs.

Each run materializes the solution and test program in a fresh temp
directory and executes them through the external runner shim as a child
process under a wall-clock timeout, a memory rlimit, and in-process
network/filesystem guards. The guard level is filesystem + network +
rlimit only; it is deliberately not adversary-proof.

The child speaks a line protocol on stdout: `TOTAL <K>` then one
`CASE <name> PASS` / `CASE <name> FAIL <reason>` per case.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .scoring import TestGenProvider, ProviderError


class SandboxError(Exception):
    pass


@dataclass(frozen=True)
class TestProgram:
    __test__ = False  # not a pytest class

    source: str
    declared_cases: int
    language: str = "python"

    def __post_init__(self):
        if self.declared_cases < 1:
            raise SandboxError(f"declared_cases must be >= 1, got {self.declared_cases}")


@dataclass
class ExecLimits:
    timeout: float = 10.0
    memory_mb: int | None = 512
    shim_path: str | None = None  # falls back to $CODECURATE_SHIM

    def resolve_shim(self) -> str:
        path = self.shim_path or os.environ.get("CODECURATE_SHIM")
        if not path or not Path(path).is_file():
            raise SandboxError(
                "runner shim not found; set ExecLimits.shim_path or $CODECURATE_SHIM")
        return path


@dataclass
class ExecutionResult:
    status: str                      # ok | timeout | crash | protocol-error
    total: int
    passed: int
    cases: list[tuple[str, bool]] = field(default_factory=list)
    wall_time: float = 0.0
    detail: str = ""


# In-process guards injected into the child via sitecustomize. Network is
# cut by replacing socket constructors; writes outside the working
# directory are refused at open().
_GUARD = """\
import builtins, os, socket

def _no_network(*a, **k):
    raise OSError("network disabled in sandbox")

socket.socket = _no_network
socket.create_connection = _no_network
socket.socketpair = _no_network

_ROOT = os.path.realpath(os.getcwd())
_open = builtins.open

def _guarded_open(file, mode="r", *args, **kwargs):
    if isinstance(file, (str, bytes, os.PathLike)) and any(c in str(mode) for c in "wxa+"):
        path = os.path.realpath(os.fspath(file))
        if os.path.commonpath([path, _ROOT]) != _ROOT:
            raise PermissionError(f"write outside sandbox dir refused: {path}")
    return _open(file, mode, *args, **kwargs)

builtins.open = _guarded_open
"""


def _parse_verdicts(stdout: str) -> tuple[int | None, list[tuple[str, bool]]]:
    """Extract (TOTAL, cases) from the child's stdout; TOTAL None if absent."""
    total = None
    cases: list[tuple[str, bool]] = []
    for line in stdout.splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0] == "TOTAL" and total is None:
            try:
                total = int(parts[1])
            except ValueError:
                continue
        elif len(parts) >= 3 and parts[0] == "CASE" and parts[2] in ("PASS", "FAIL"):
            cases.append((parts[1], parts[2] == "PASS"))
    return total, cases


def run(program: TestProgram, solution: str, limits: ExecLimits) -> ExecutionResult:
    """Execute one test program against one solution, hermetically.

    Timeouts, crashes, and unparsable output are recorded as data, never
    raised: callers score them, they do not abort pipelines.
    """
    if limits.timeout <= 0:
        raise SandboxError(f"timeout must be positive, got {limits.timeout}")
    shim = limits.resolve_shim()
    workdir = tempfile.mkdtemp(prefix="codecurate-sbx-")
    start = time.monotonic()
    try:
        sol_path = os.path.join(workdir, "solution.py")
        test_path = os.path.join(workdir, "test_program.py")
        with open(sol_path, "w", encoding="utf-8") as f:
            f.write(solution)
        with open(test_path, "w", encoding="utf-8") as f:
            f.write(program.source)
        with open(os.path.join(workdir, "sitecustomize.py"), "w", encoding="utf-8") as f:
            f.write(_GUARD)

        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "PYTHONPATH": workdir,
            "PYTHONDONTWRITEBYTECODE": "1",
        }

        def _limit_child():
            os.setsid()
            if limits.memory_mb is not None:
                import resource
                cap = limits.memory_mb * 1024 * 1024
                try:
                    resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
                except (ValueError, OSError):
                    pass

        proc = subprocess.Popen(
            [sys.executable, shim, sol_path, test_path],
            cwd=workdir, env=env,
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            text=True, preexec_fn=_limit_child,
        )
        timed_out = False
        try:
            stdout, stderr = proc.communicate(timeout=limits.timeout)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            stdout, stderr = proc.communicate()
        wall = time.monotonic() - start

        total, cases = _parse_verdicts(stdout or "")
        passed = sum(1 for _, ok in cases if ok)
        if timed_out:
            return ExecutionResult("timeout", program.declared_cases, passed, cases, wall,
                                   "killed at timeout")
        if proc.returncode != 0 and total is None:
            return ExecutionResult("crash", program.declared_cases, passed, cases, wall,
                                   (stderr or "")[-2000:])
        if total is None or proc.returncode != 0:
            return ExecutionResult("protocol-error", program.declared_cases, passed, cases, wall,
                                   "verdict stream unparsable")
        if total != program.declared_cases or len(cases) != total:
            return ExecutionResult("protocol-error", program.declared_cases, passed, cases, wall,
                                   f"declared {program.declared_cases} cases, stream reported {total}")
        return ExecutionResult("ok", total, passed, cases, wall)
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def make_executor(limits: ExecLimits):
    """Adapter matching scoring.quality's executor signature."""

    def _exec(program_source: str, solution: str, declared_cases: int) -> ExecutionResult:
        return run(TestProgram(program_source, declared_cases), solution, limits)

    return _exec


@dataclass
class BonResult:
    ranked: list[int]                # candidate indices, best first
    passed_counts: list[int]         # per candidate; -1 = generation failed
    chosen: int


def best_of_n(instruction: str, candidates: list[str], gen: TestGenProvider,
              limits: ExecLimits, k: int = 12, runner=None) -> BonResult:
    """Rank candidate solutions by generated-test pass count.

    One test program is generated per (instruction, candidate); ties break
    to the lowest candidate index; failed generations rank last with the
    -1 sentinel. `runner` overrides the sandboxed executor in tests.
    """
    if not candidates:
        raise SandboxError("best_of_n needs at least one candidate")
    execute = runner or (lambda src, sol, cases: run(TestProgram(src, cases), sol, limits))
    counts = []
    for cand in candidates:
        try:
            program = gen.generate(instruction, cand, k)
        except ProviderError:
            counts.append(-1)
            continue
        counts.append(execute(program, cand, k).passed)
    ranked = sorted(range(len(candidates)), key=lambda i: (-counts[i], i))
    return BonResult(ranked=ranked, passed_counts=counts, chosen=ranked[0])


def validate_generator(golden: list[tuple[str, str]], gen: TestGenProvider,
                       limits: ExecLimits, k: int = 10, runner=None) -> dict:
    """Fraction of generated cases that known-correct solutions pass.

    A health check on the test-generation provider itself; the pass rate
    is a provider property, reported but not asserted.
    """
    if not golden:
        raise SandboxError("validate_generator needs a non-empty golden list")
    execute = runner or (lambda src, sol, cases: run(TestProgram(src, cases), sol, limits))
    per_item = []
    for instruction, reference in golden:
        try:
            program = gen.generate(instruction, reference, k)
        except ProviderError:
            per_item.append(0.0)
            continue
        result = execute(program, reference, k)
        per_item.append(result.passed / max(result.total, 1))
    return {"per_item": per_item, "mean": sum(per_item) / len(per_item)}


def run_many(jobs: list[tuple[TestProgram, str]], limits: ExecLimits,
             workers: int | None = None) -> list[ExecutionResult]:
    """Run isolated executions concurrently; result order matches jobs."""
    workers = workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda j: run(j[0], j[1], limits), jobs))
