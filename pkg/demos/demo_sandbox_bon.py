"""Walkthrough: sandboxed test execution and best-of-N candidate ranking.

Runs a hand-written test program against several candidate solutions in
the sandbox (via the runner shim) and picks the one passing the most
cases.
"""

from pathlib import Path

from codecurate.sandbox import ExecLimits, TestProgram, best_of_n, run
from codecurate.scoring import TestGenProvider

SHIM = Path(__file__).resolve().parents[1] / "shim" / "runner_shim.py"
limits = ExecLimits(timeout=5.0, shim_path=str(SHIM))

TESTS = """\
from solution import fizzbuzz

def case_number():
    assert fizzbuzz(7) == "7"

def case_fizz():
    assert fizzbuzz(9) == "Fizz"

def case_buzz():
    assert fizzbuzz(10) == "Buzz"

def case_both():
    assert fizzbuzz(30) == "FizzBuzz"
"""

CANDIDATES = [
    # forgets the combined case
    'def fizzbuzz(n):\n'
    '    if n % 3 == 0: return "Fizz"\n'
    '    if n % 5 == 0: return "Buzz"\n'
    '    return str(n)\n',
    # correct
    'def fizzbuzz(n):\n'
    '    out = ("Fizz" if n % 3 == 0 else "") + ("Buzz" if n % 5 == 0 else "")\n'
    '    return out or str(n)\n',
    # always numeric
    'def fizzbuzz(n):\n    return str(n)\n',
]


class FixedGen(TestGenProvider):
    backend = "fixed"

    def generate(self, instruction, response, k):
        return TESTS


for i, candidate in enumerate(CANDIDATES):
    result = run(TestProgram(TESTS, 4), candidate, limits)
    print(f"candidate {i}: {result.passed}/{result.total} cases ({result.status})")

bon = best_of_n("implement fizzbuzz", CANDIDATES, FixedGen(), limits, k=4)
print(f"\nbest-of-N ranking: {bon.ranked}, chosen candidate {bon.chosen}")
