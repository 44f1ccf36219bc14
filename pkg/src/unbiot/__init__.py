"""Stochastic-geometry analysis and simulation of ultra-narrowband IoT access protocols."""

from .model import (Association, ConfigError, DerivedParams, NetworkConfig, Protocol,
                    ProtocolSpec, Scheme, derive_params, load_config, table2_config,
                    validate_config)
from .analytic import (CapacityQuery, UnsupportedCombination, capacity_closed_form,
                       capacity_numeric, enumerate_compositions, harmonic_number,
                       success_given_allocation, success_probability)
from .sim import (InterferenceField, Mode, SimOptions, UnsupportedFidelity,
                  estimate_success_probability, sinr_cdf)

__version__ = "0.1.0"
