"""Desk-scale numerics for quantum Markov semigroups, matrix entropy
inequalities and the non-commutative transport metric."""

__version__ = "0.1.0"
