# src/pm_cdm/__init__.py

"""Partial-mastery cognitive diagnosis models: simulation, Gibbs fitting and diagnostics."""

__version__ = "0.1.0"
