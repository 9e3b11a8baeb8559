"""Sequence-level residue/functional-group interaction prediction toolkit."""

__version__ = "0.1.0"
