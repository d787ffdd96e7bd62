"""Deterministic discrete-event simulator for G.fin fiber-to-the-room networks."""

__version__ = "0.1.0"
