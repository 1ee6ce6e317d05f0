"""Walkthrough: measuring and removing benchmark leakage from a training pool.

We build a small training pool, plant two near-copies of "benchmark"
prompts in it, measure the leakage indicator, and clean the pool down to
the 5% target.
"""

from codecurate.corpus import Dataset, Message, Sample
from codecurate.decontam import build_index, clean, tli


def sample(sid, instruction, response="def solve(): ..."):
    return Sample(id=sid, source="demo",
                  messages=(Message("user", instruction), Message("assistant", response)))


benchmark = Dataset(name="benchmark", samples=[
    sample("bench:0", "Write a function that checks if a number is prime"),
    sample("bench:1", "Reverse the words in a sentence while keeping punctuation"),
    sample("bench:2", "Implement binary search over a sorted list of integers"),
    sample("bench:3", "Count the vowels in a string, case insensitive"),
])

training = Dataset(name="training", samples=[
    sample("train:0", "Explain list comprehensions with three examples"),
    sample("train:1", "Write a function that checks if a number is prime"),  # leaked!
    sample("train:2", "Parse a CSV file and sum the second column"),
    sample("train:3", "Implement binary search over a sorted list of integers"),  # leaked!
    sample("train:4", "Generate the first n rows of Pascal's triangle"),
])

index = build_index(training, n=3)
report = tli(index, benchmark)
print(f"leakage before cleaning: {report.tli:.3f}")
for entry in report.per_test:
    print(f"  {entry['test_id']}: max similarity {entry['max_similarity']:.2f} "
          f"from {entry['argmax_train_id']}")

cleaned, after, removed = clean(training, benchmark, n=3, target_tli=0.05)
print(f"\nremoved {removed} -> leakage now {after.tli:.3f}")
print(f"pool size {len(training.samples)} -> {len(cleaned.samples)}")
