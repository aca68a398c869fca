"""Hybrid fluid model of AIMD sources sharing a Drop-Tail bottleneck."""

__version__ = "0.1.0"
