"""Standing push recovery for a planar biped.

Simulation, reward shaping, safety termination, smoothness-regularized PPO,
and an interactive push playground.
"""

__version__ = "0.1.0"
