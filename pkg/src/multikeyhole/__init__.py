"""Multi-keyhole MIMO channels: sampling, outage capacity, Gaussian asymptotics and correlation measures."""

from .asymptotics import (
    GaussianApprox,
    OutageQuery,
    frmk_moments,
    gaussian_outage_prob,
    outage_capacity_eps,
    q_function,
    q_inverse,
    rdmk_moments,
)
from .capacity import (
    CapacitySamples,
    EmpiricalCdf,
    capacity_samples,
    equivalent_rayleigh_capacity,
    instantaneous_capacity,
    keyhole_capacity_factored,
    ks_distance,
    monte_carlo_cdf,
)
from .channel import (
    ChannelSpec,
    EquivalentRayleighSpec,
    RayleighSpec,
    equal_gains,
    sample_keyhole,
    sample_rayleigh,
)
from .corr_models import check_corr, make_corr, psd_sqrt
from .errors import DiagnosticWarning, DomainError, NegativeCapacityWarning, NotPSDError
from .measure import decompose, majorizes, more_correlated, more_imbalanced

__version__ = "0.1.0"
