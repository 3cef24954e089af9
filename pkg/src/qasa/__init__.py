"""Quantum-attention rebalance detection and LP backtesting toolkit."""

__version__ = "0.1.0"
