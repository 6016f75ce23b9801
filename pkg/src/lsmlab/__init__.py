"""Liquid state machine simulator with a linear state-space surrogate analyzer."""

__version__ = "0.1.0"
