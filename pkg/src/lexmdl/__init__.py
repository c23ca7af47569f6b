"""Hierarchical lexicon induction by minimum description length."""
__version__ = "0.1.0"
