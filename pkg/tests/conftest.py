"""Shared fixtures: parameter sets and session-solved price fields.

The heavy fields (default grids, two regimes) are session-scoped because
several acceptance criteria probe the same solves.
"""

from pathlib import Path

import pytest

from smheston import (ConstantHazard, GridConfig, HazardSpec, IntegralPricer,
                      PayoffSpec, RegimeParams, SaturatingHazard)

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture(scope="session")
def params_single():
    return RegimeParams(mu=[0.08], r=[0.03], kappa=[2.0], theta=[0.04],
                        sigma=[0.2], rho=-0.5)


@pytest.fixture(scope="session")
def hazard_empty():
    return HazardSpec(1, {})


@pytest.fixture(scope="session")
def params_two():
    return RegimeParams(mu=[0.08, 0.10], r=[0.03, 0.05], kappa=[2.0, 1.6],
                        theta=[0.04, 0.07], sigma=[0.2, 0.25], rho=-0.5)


@pytest.fixture(scope="session")
def hazard_const():
    return HazardSpec(2, {(0, 1): ConstantHazard(1.0), (1, 0): ConstantHazard(0.8)})


@pytest.fixture(scope="session")
def hazard_sat():
    return HazardSpec(2, {(0, 1): SaturatingHazard(0.9, 1.0, 0.6),
                          (1, 0): SaturatingHazard(0.9, -0.4, 0.8)})


@pytest.fixture(scope="session")
def hazard_mixed():
    return HazardSpec(2, {(0, 1): ConstantHazard(1.2),
                          (1, 0): SaturatingHazard(0.7, 0.8, 0.5)})


@pytest.fixture(scope="session")
def light_grid():
    """Coarse grid for wiring tests where resolution does not matter."""
    return GridConfig(n_t=9, n_s=31, n_v=7, n_y=3, n_inner=512, cloud_dt=2.0 ** -6)


@pytest.fixture(scope="session")
def single_field(params_single, hazard_empty):
    pricer = IntegralPricer(params_single, hazard_empty, T=1.0, s0=100.0, seed=7)
    field, report = pricer.solve(PayoffSpec.call(100.0), init="heston")
    return field, report


@pytest.fixture(scope="session")
def const_pricer(params_two, hazard_const):
    return IntegralPricer(params_two, hazard_const, T=1.0, s0=100.0, seed=11)


@pytest.fixture(scope="session")
def const_fields(const_pricer):
    """Call, put and unit fields for the constant-rate two-regime setup."""
    out = {}
    for payoff in (PayoffSpec.call(100.0), PayoffSpec.put(100.0), PayoffSpec.unit()):
        out[payoff.kind] = const_pricer.solve(payoff, init="heston")
    return out


@pytest.fixture(scope="session")
def sat_fields(params_two, hazard_sat):
    pricer = IntegralPricer(params_two, hazard_sat, T=1.0, s0=100.0, seed=13)
    return {payoff.kind: pricer.solve(payoff, init="heston")
            for payoff in (PayoffSpec.call(100.0), PayoffSpec.put(100.0))}
