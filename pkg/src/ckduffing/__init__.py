"""Classical and quantum simulation of the driven Duffing oscillator with
Caldirola-Kanai dissipation."""

from .model import DuffingParams, GaussianState, damping_factor, effective_hbar

__all__ = ["DuffingParams", "GaussianState", "damping_factor", "effective_hbar"]
__version__ = "0.1.0"
