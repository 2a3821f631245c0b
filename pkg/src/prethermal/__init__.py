"""Simulations of periodically driven quantum chains: free-fermion Ising, dynamical
localization, fragmented fermion chains, scar models and kicked time crystals."""

__version__ = "0.1.0"
