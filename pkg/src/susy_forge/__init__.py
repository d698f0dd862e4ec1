"""Confluent second-order and hyperconfluent third-order SUSY partner potentials."""

__version__ = "0.1.0"
