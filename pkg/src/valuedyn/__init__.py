"""Bounded-confidence value dynamics in ego networks, with a PSO-tuned
regressor for the interaction threshold."""

__version__ = "0.1.0"
