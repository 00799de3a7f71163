"""Heisenberg-group calculus, horizontal quasiconvexity checks, Minkowski-type
initial data, and a game-based level-set solver for horizontal curvature flow."""

from . import fields, gameflow, hcalc, hgroup, hull_init, qcheck, sampling

__all__ = ["fields", "gameflow", "hcalc", "hgroup", "hull_init", "qcheck", "sampling"]
__version__ = "0.1.0"
