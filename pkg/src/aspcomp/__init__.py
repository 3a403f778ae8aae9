"""Orchestration engine for ASP solver competitions.

Runs solver systems on benchmark instances under resource limits, verifies
their answers with per-domain checker programs, and scores/ranks them.
"""

__version__ = "0.1.0"
