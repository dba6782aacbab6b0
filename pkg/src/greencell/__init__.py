"""Void-cell-aware throughput and energy metrics for PPP small-cell networks."""
from .analytics import (
    NetworkScenario,
    avg_cell_throughput,
    avg_user_throughput,
    coverage_prob,
    ell,
    void_prob,
    void_prob_bounds,
)
from .channel import AssociationScheme, ChannelModel, rho, zeta
from .powergreen import PowerModel, green_cell_throughput, green_user_throughput, transmit_power
from .quadrature import gauss_hermite

__version__ = "0.1.0"
