"""Dual-/single-polarized Ricean MIMO channel modeling and MI analysis."""

__version__ = "0.1.0"
