"""codecurate: curation toolkit for code instruction-tuning corpora.

Measures and removes benchmark contamination, scores samples for
instruction complexity and response quality, and greedily selects a
diverse, budgeted subset for training.
"""

__version__ = "0.1.0"
