"""Counterfactual statement detection and antecedent/consequent extraction."""

__version__ = "0.1.0"
