"""Walkthrough: scoring a pool and selecting a diverse, budgeted subset.

Uses the offline backends (token-length complexity, hashed bag-of-words
embeddings, a stub test generator) so the whole flow runs without any
model endpoint. Production runs swap in the external providers.
"""

import random

from codecurate.corpus import Dataset, Message, Sample
from codecurate.diversity import HashedBagOfWords
from codecurate.pipeline import SelectionConfig, report_composition, run_select
from codecurate.sandbox import ExecutionResult
from codecurate.scoring import TestGenProvider, TokenLengthComplexity

rng = random.Random(0)

TOPICS = ["sorting", "strings", "graphs", "files", "math"]
pool = Dataset(name="pool", samples=[
    Sample(id=f"pool:{i}", source=rng.choice(["alpha-set", "beta-set"]),
           messages=(
               Message("user", f"Task {i}: " + " ".join(
                   rng.choices([f"{t}_{k}" for t in TOPICS for k in range(4)],
                               k=rng.randint(4, 18)))),
               Message("assistant", f"def solution_{i}(): return {i}")))
    for i in range(60)
])


class StubTestGen(TestGenProvider):
    backend = "stub"

    def generate(self, instruction, response, k):
        return "# placeholder test program\n"


def stub_executor(program, solution, declared):
    # pretend the sandbox ran: pass count derived from the solution length
    passed = min(declared, len(solution) % (declared + 1))
    return ExecutionResult("ok", declared, passed, [])


cfg = SelectionConfig(q_budget=12, tau=0.945, alpha=0.5,
                      longest_count=0, top_complexity_count=0)
out = run_select(cfg, pool,
                 complexity_provider=TokenLengthComplexity(),
                 testgen_provider=StubTestGen(),
                 executor=stub_executor,
                 embedding_provider=HashedBagOfWords(dim=128))

print(f"selected {len(out.selected.samples)} of {len(pool.samples)} samples")
print("admission order:", out.chosen.ids[:6], "...")

composition = report_composition(out.selected.samples, "selected")
for source, fraction in sorted(composition.fractions.items()):
    print(f"  {source}: {fraction:.0%}")
