"""Stochastic efficient global optimization of integral objectives.

Monte Carlo estimates with controlled error variance feed a stochastic
Kriging surrogate; infill points maximize the augmented expected
improvement and their target variance adapts to how crowded the
neighbourhood already is.
"""

__version__ = "0.1.0"
