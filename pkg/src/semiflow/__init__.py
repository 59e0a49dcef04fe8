"""Numerical local semiflows, Wazewski pairs, linking minimax and two PDE applications."""

__version__ = "0.1.0"
