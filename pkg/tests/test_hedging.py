import numpy as np
import pytest

from smheston import (ConfigError, HazardSpec, HedgeEngine, IntegralPricer,
                      MarketState, PayoffSpec, RegimeParams, fs_residual, hedge_at)


@pytest.fixture(scope="module")
def rho_zero_field():
    params = RegimeParams(mu=[0.08], r=[0.03], kappa=[2.0], theta=[0.04],
                          sigma=[0.2], rho=0.0)
    hazard = HazardSpec(1, {})
    pricer = IntegralPricer(params, hazard, T=1.0, s0=100.0, seed=5)
    field, _ = pricer.solve(PayoffSpec.call(100.0), init="heston")
    return field, params, hazard


class TestHedgeAt:
    def test_zero_correlation_drops_vega_term(self, rho_zero_field):
        field, params, hazard = rho_zero_field
        st = MarketState(0.0, 100.0, 0.04, 0, 0.0)
        quote = hedge_at(field, params, st, hazard=hazard)
        assert quote.xi == pytest.approx(quote.d_phi_ds, abs=1e-15)

    def test_book_value_identity(self, single_field, params_single, hazard_empty):
        field, _ = single_field
        for discount in (1.0, 0.97):
            st = MarketState(0.1, 90.0, 0.05, 0, 0.05)
            q = hedge_at(field, params_single, st, discount=discount,
                         hazard=hazard_empty)
            bank = 1.0 / discount
            assert q.xi * st.s + q.eps * bank == pytest.approx(q.phi, abs=1e-10)

    def test_deep_in_the_money_unit_delta(self, single_field, params_single,
                                          hazard_empty):
        # far above the strike the payoff slope pins the hedge to one share
        field, _ = single_field
        engine = HedgeEngine(field, params_single, hazard_empty)
        st = MarketState(0.0, 400.0, 0.04, 0, 0.0)
        assert engine.at(st).xi == pytest.approx(1.0, abs=0.02)

    def test_unit_payoff_zero_delta(self, const_fields, params_two, hazard_const):
        field, _ = const_fields["unit"]
        st = MarketState(0.0, 100.0, 0.04, 0, 0.0)
        q = hedge_at(field, params_two, st, hazard=hazard_const)
        assert abs(q.xi) < 1e-4

    def test_call_delta_within_band(self, const_fields, params_two, hazard_const):
        field, _ = const_fields["call"]
        engine = HedgeEngine(field, params_two, hazard_const)
        g = field.grids
        s_q = g.s_nodes[8:-8:6]
        for i in (0, 1):
            for v_q in (g.v_nodes[2], g.v_nodes[8]):
                for t_q in (0.0, 0.5):
                    ds, dv = engine.greeks(i, t_q, s_q, np.full_like(s_q, v_q), 0.0)
                    xi = ds + params_two.rho * params_two.sigma[i] / s_q * dv
                    assert np.all(xi > -0.05) and np.all(xi < 1.05)

    def test_outside_grid_rejected(self, single_field, params_single):
        field, _ = single_field
        with pytest.raises(ConfigError):
            hedge_at(field, params_single, MarketState(0.0, 1e4, 0.04, 0, 0.0))
        with pytest.raises(ConfigError):
            hedge_at(field, params_single, MarketState(0.0, 100.0, 5.0, 0, 0.0))


class TestFSResidual:
    def test_two_regime_light(self, const_fields, params_two, hazard_const):
        field, _ = const_fields["call"]
        st = MarketState(0.0, 100.0, 0.04, 0, 0.0)
        rep = fs_residual(field, params_two, hazard_const, st, n_paths=2000,
                          dt=2.0 ** -7, seed=41)
        assert np.isfinite(rep.mean_lt) and np.isfinite(rep.corr_with_m)
        assert abs(rep.mean_lt) < 5.0 * rep.se_lt
        assert abs(rep.corr_with_m) < 0.12
        assert rep.vega_integral > 0.0
        assert rep.n_paths == 2000

    def test_past_maturity_rejected(self, const_fields, params_two, hazard_const):
        field, _ = const_fields["call"]
        with pytest.raises(ConfigError):
            fs_residual(field, params_two, hazard_const,
                        MarketState(1.0, 100.0, 0.04, 0, 0.0), n_paths=10)

    def test_thread_independent(self, const_fields, params_two, hazard_const):
        field, _ = const_fields["call"]
        st = MarketState(0.0, 100.0, 0.04, 0, 0.0)
        a = fs_residual(field, params_two, hazard_const, st, n_paths=1000,
                        dt=2.0 ** -6, seed=43, threads=1)
        b = fs_residual(field, params_two, hazard_const, st, n_paths=1000,
                        dt=2.0 ** -6, seed=43, threads=3)
        assert a.mean_lt == b.mean_lt and a.corr_with_m == b.corr_with_m
