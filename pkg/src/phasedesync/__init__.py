"""Optimal and approximately optimal stimuli for chaotic desynchronization of neural oscillators."""

__version__ = "0.1.0"
