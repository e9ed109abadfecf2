"""Bilateral trade with interdependent values: payoff regions, incentive-compatible distributions and equilibrium constructions."""

__version__ = "0.1.0"
