"""Pricing and hedging of European options under semi-Markov regime-switching
stochastic volatility.

The package exposes two independent pricing routes that cross-validate each
other: a fixed-point solver for the pricing integral equation on a tensor
grid (:class:`IntegralPricer`) and a direct Monte Carlo evaluation of the
discounted payoff (:func:`price_mc`), plus the locally risk-minimizing
hedge built from the solved price field.
"""

from .errors import ConfigError, NumericalError, ValidationError
from .model import (BoundCheck, MarketState, NovikovEstimate, PayoffSpec,
                    RegimeParams, effective_theta, effective_thetas,
                    estimate_novikov_moment, validate_vol_of_vol)
from .semi_markov import (ConstantHazard, HazardSpec, RegimePath, SaturatingHazard,
                          cumulative_hazard, embedded_matrix, holding_cdf,
                          holding_density, is_irreducible, sample_holding,
                          sample_regime_path, sample_regime_paths,
                          transition_probs, validate_hazards)
from .engine import (ConditionalCloud, PathBundle, conditional_cloud, simulate,
                     terminal_sample)
from .heston import HestonQuote, char_fn, hest, heston_price_grid
from .grids import GridConfig, Grids, PriceField
from .solver import (IntegralPricer, SolverReport, density_weight,
                     inner_expectation, kernel_from_samples, survival_weight)
from .mc import MCResult, price_mc, zero_coupon_mc
from .hedging import FSReport, HedgeEngine, HedgeQuote, fs_residual, hedge_at
from .config import RunConfig, config_hash, load_config, parse_config, parse_payoff

__version__ = "0.1.0"
