"""Simulation and exact analysis of the iterated Keynesian beauty contest.

N points live in the unit cube; at each step the point farthest from the
barycentre is replaced by a fresh uniform point.  The package simulates the
process (with an event-skipping accelerator), monitors its Lyapunov
diagnostics, and computes the exactly solvable statistics of the modified
one-dimensional three-point variant.
"""

from .backend import BACKEND_NAME, compiled_available

__all__ = ["BACKEND_NAME", "compiled_available"]
__version__ = "0.1.0"
