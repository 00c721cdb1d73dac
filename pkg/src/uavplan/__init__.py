"""Energy-aware coarse path planning for cellular-connected UAVs.

A grid world with recharge stations and no-fly cells, a tabular Q-learning
planner, a battery validator, exact reference solvers and Monte-Carlo
experiments.
"""

__version__ = "0.1.0"
