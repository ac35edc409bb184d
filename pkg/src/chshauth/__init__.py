"""Entanglement-graded authorization verified by CHSH games."""
__version__ = "0.1.0"
