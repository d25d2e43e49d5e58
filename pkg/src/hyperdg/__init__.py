"""Matrix-free high-order DG solver for advection in phase space."""

__version__ = "0.1.0"
