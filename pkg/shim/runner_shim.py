#!/usr/bin/env python3
"""Minimal test-harness runner: one solution file, one test file.

Usage: <interpreter> runner_shim.py <solution-file> <test-file>

The solution file is loaded as the module ``solution``; the test file is
then executed and every callable whose name starts with ``case`` is run
in isolation, one verdict line per case on stdout:

    TOTAL <K>
    CASE <name> PASS
    CASE <name> FAIL <reason>

The exit code reflects harness integrity only: 0 means the run completed,
regardless of how many cases failed. A malformed test file exits nonzero
before the TOTAL header. If the solution fails to load, cases are still
enumerated (solution attributes resolve to stubs) and every case is
reported FAIL with reason ``solution-load``.

Stdlib only, by design: this runs inside a bare sandboxed interpreter.
"""

import sys
import types


def load_solution(path):
    """Load the solution file as module 'solution'; None on failure."""
    import importlib.util
    try:
        spec = importlib.util.spec_from_file_location("solution", path)
        module = importlib.util.module_from_spec(spec)
        sys.modules["solution"] = module
        spec.loader.exec_module(module)
        return module
    except BaseException:
        stub = types.ModuleType("solution")

        def _missing(name):
            def _fail(*args, **kwargs):
                raise RuntimeError("solution failed to load")
            return _fail

        stub.__getattr__ = _missing
        sys.modules["solution"] = stub
        return None


def load_cases(path):
    """Execute the test file and collect its case callables in order."""
    namespace = {"__name__": "test_program", "__file__": path}
    with open(path, "r", encoding="utf-8") as f:
        source = f.read()
    code = compile(source, path, "exec")
    exec(code, namespace)
    cases = []
    for name, value in namespace.items():
        if name.startswith("case") and callable(value):
            cases.append((name, value))
    return cases


def main(argv):
    if len(argv) != 3:
        print("usage: runner_shim.py <solution-file> <test-file>", file=sys.stderr)
        return 2
    solution_path, test_path = argv[1], argv[2]
    solution = load_solution(solution_path)
    try:
        cases = load_cases(test_path)
    except BaseException as e:
        print(f"test file failed to load: {e!r}", file=sys.stderr)
        return 3

    print(f"TOTAL {len(cases)}", flush=True)
    for name, func in cases:
        if solution is None:
            print(f"CASE {name} FAIL solution-load", flush=True)
            continue
        try:
            func()
        except BaseException as e:
            reason = f"{type(e).__name__}: {e}".replace("\n", " ")[:200]
            print(f"CASE {name} FAIL {reason}", flush=True)
        else:
            print(f"CASE {name} PASS", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
