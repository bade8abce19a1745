"""Numerical laboratory for random K-sat ground states at large clause density.

Modules: :mod:`ksat` (instances, exact ground states), :mod:`pspin` (the
matched mixed p-spin model), :mod:`interp` (interpolation diagnostics),
:mod:`parisi` (zero-temperature Parisi functional), :mod:`mc` (disorder
averages and the expansion residual), :mod:`cli`.
"""
__version__ = "0.1.0"
