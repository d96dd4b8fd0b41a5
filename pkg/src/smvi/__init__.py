"""Numerical diagnostics for split multivalued variational inequalities.

Approximate solution sets are computed by residual membership on grids and
summarized with finite-set metrics (diameter, Hausdorff distance, a
Kuratowski-measure surrogate) to give evidence of Levitin-Polyak
well-posedness.
"""

__version__ = "0.1.0"
