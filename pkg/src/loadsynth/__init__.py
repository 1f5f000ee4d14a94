"""Synthesis of scalable electricity load profiles with hierarchical
position-wise Markov chains, plus a first-order baseline and a fidelity
metric suite."""

__version__ = "0.1.0"
