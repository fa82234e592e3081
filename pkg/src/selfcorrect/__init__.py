"""Tests of a Poisson null against self-correcting point-process alternatives."""

__version__ = "0.1.0"
