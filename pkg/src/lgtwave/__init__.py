"""Mesonic wave-packet preparation for 1+1D Z2 and U(1) lattice gauge theories."""

__version__ = "0.1.0"
