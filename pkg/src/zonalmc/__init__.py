"""Misiolek curvature of zonal flows on ellipsoids of revolution.

Modules:

* :mod:`zonalmc.geometry`      chart tensor calculus on second-order jets
* :mod:`zonalmc.manifolds`     2D/3D ellipsoid charts and their Killing fields
* :mod:`zonalmc.zonal`         zonality checks, F, sgn(Z), classification
* :mod:`zonalmc.quadrature`    tensor-product quadrature over charts
* :mod:`zonalmc.mc`            mc(Z, Y) by three formulas
* :mod:`zonalmc.perturbation`  commuting divergence-free bump fields
* :mod:`zonalmc.search`        pattern search and positivity certificates
* :mod:`zonalmc.cli`           configuration-driven command line
"""

__version__ = "0.1.0"
