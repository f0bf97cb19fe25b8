"""slelab: desk-scale simulation lab for critical lattice interfaces and SLE."""

__version__ = "0.1.0"

from .lattice import DiscreteDomain, build_rect_domain, validate_domain
from .observables import MarkedState, fk_observable, cardy
from .drivers import DriverKind, DriverSpec, simulate, simulate_ensemble

__all__ = [
    "__version__",
    "DiscreteDomain",
    "build_rect_domain",
    "validate_domain",
    "MarkedState",
    "fk_observable",
    "cardy",
    "DriverKind",
    "DriverSpec",
    "simulate",
    "simulate_ensemble",
]
