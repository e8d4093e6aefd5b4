"""Micro-learning tool provider: signed LTI 1.1 launches in, three-part
micro-content units out, grades written back over LIS Basic Outcomes."""

__version__ = "0.1.0"
