"""Dual-channel side-channel instruction disassembly toolkit.

Desk-scale experiments for recovering executed instructions from
synchronized power and electromagnetic leakage: a synthetic leakage
generator, information-optimal channel fusion, feature selection,
hierarchical discriminant classification (float and fixed-point), and
online self-labeled adaptation against DC drift.
"""

__version__ = "0.1.0"
