"""snotlab: a desk-scale laboratory for semi-dual neural optimal transport.

Weighted point clouds stand in for probability measures, an exact
transportation-simplex solver provides ground-truth couplings, and a small
numpy neural stack trains potential/map pairs under the max-min objective
with annealed additive-noise smoothing.
"""

__version__ = "0.1.0"
