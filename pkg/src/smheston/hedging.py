"""Locally risk-minimizing hedge ratios and decomposition residuals.

The optimal stock holding combines the field's delta with a correlation
correction through the variance sensitivity:

    xi = d(phi)/ds + rho * sigma(regime) / s * d(phi)/dv

and the money-market position makes the book match the option value.
``fs_residual`` verifies the decomposition empirically: along physical
paths the discounted payoff minus the initial value minus the accumulated
hedge gains should be a mean-zero residual uncorrelated with the stock's
martingale part.

Greeks come from central finite differences of the solved field on its
grid, defect-corrected with the frozen-regime anchor: the field's dominant
smooth component is (survival weight) * (frozen-regime price), whose exact
Greeks are available in closed form, so subtracting that component's
finite-difference defect removes most of the grid-differentiation error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ROLE_FS, iter_path_blocks
from .errors import ConfigError
from .grids import PriceField, interp_axis, interp_field, interp_field_multi
from .heston import heston_greeks_grid, heston_price_grid
from .model import MarketState, RegimeParams
from .semi_markov import HazardSpec
from .solver import survival_weight

__all__ = ["HedgeQuote", "FSReport", "HedgeEngine", "hedge_at", "fs_residual"]


@dataclass(frozen=True)
class HedgeQuote:
    xi: float                 # stock units
    eps: float                # money-market units
    phi: float                # option value at the state
    d_phi_ds: float
    d_phi_dv: float

    def to_dict(self) -> dict:
        return {"xi": self.xi, "eps": self.eps, "phi": self.phi,
                "d_phi_ds": self.d_phi_ds, "d_phi_dv": self.d_phi_dv}


@dataclass(frozen=True)
class FSReport:
    mean_lt: float
    se_lt: float
    std_lt: float
    corr_with_m: float
    vega_integral: float      # estimate of E int V (dphi/dv)^2 dt
    n_paths: int
    dt: float
    seed: int

    def to_dict(self) -> dict:
        return {"mean_lt": self.mean_lt, "se_lt": self.se_lt, "std_lt": self.std_lt,
                "corr_with_m": self.corr_with_m, "vega_integral": self.vega_integral,
                "n_paths": self.n_paths, "dt": self.dt, "seed": self.seed}


def _check_in_grid(field: PriceField, state: MarketState) -> None:
    g = field.grids
    if not (g.t_nodes[0] <= state.t <= g.t_nodes[-1]):
        raise ConfigError(f"time {state.t} outside field grid")
    if not (g.s_nodes[0] <= state.s <= g.s_nodes[-1]):
        raise ConfigError(f"stock {state.s} outside field grid")
    if not (g.v_nodes[0] <= state.v <= g.v_nodes[-1]):
        raise ConfigError(f"variance {state.v} outside field grid")
    if not (g.y_nodes[0] <= state.age <= g.y_nodes[-1]):
        raise ConfigError(f"age {state.age} outside field grid")
    if not 0 <= state.regime < field.n_regimes:
        raise ConfigError(f"regime {state.regime} outside field grid")


class HedgeEngine:
    """Caches the (anchor-corrected) derivative tensors of one price field.

    The field's finite-difference Greeks are split into the survival-weighted
    frozen-regime part, replaced by exact closed-form Greeks evaluated on a
    time-refined grid (removing both the differencing and the time
    interpolation defect of that dominant component), plus the residual part
    interpolated as usual.
    """

    _T_REFINE = 4
    _SV_REFINE = 3

    def __init__(self, field: PriceField, params: RegimeParams,
                 hazard: HazardSpec | None = None, anchored: bool = True):
        self.field = field
        self.params = params
        self.hazard = hazard
        self.anchored = anchored
        g = field.grids
        d_s, d_v = field.gradient_fields()
        if anchored:
            n_t, k = d_s.shape[0], d_s.shape[1]
            anchor = np.empty((n_t, k, g.s_nodes.size, g.v_nodes.size))
            for ell, t in enumerate(g.t_nodes):
                for i in range(k):
                    anchor[ell, i] = heston_price_grid(params, i, field.horizon - t,
                                                       field.payoff, g.s_nodes,
                                                       g.v_nodes)
            anchor_fd_s = np.gradient(anchor, g.s_nodes, axis=2)
            anchor_fd_v = np.gradient(anchor, g.v_nodes, axis=3)
            surv = np.ones((n_t, k, g.y_nodes.size))
            if hazard is not None:
                for ell, t in enumerate(g.t_nodes):
                    for i in range(k):
                        surv[ell, i] = survival_weight(hazard, i, g.y_nodes,
                                                       field.horizon - t)
            d_s = d_s - surv[:, :, :, None, None] * anchor_fd_s[:, :, None, :, :]
            d_v = d_v - surv[:, :, :, None, None] * anchor_fd_v[:, :, None, :, :]
            # the anchor part is interpolated from its own refined grid: the
            # exact Greeks are cheap to evaluate, so interpolation error of
            # the dominant component shrinks by the refinement factor squared
            self.t_fine = np.linspace(g.t_nodes[0], g.t_nodes[-1],
                                      self._T_REFINE * (n_t - 1) + 1)
            self.x_fine = np.linspace(g.x_nodes[0], g.x_nodes[-1],
                                      self._SV_REFINE * (g.x_nodes.size - 1) + 1)
            self.v_fine = np.linspace(g.v_nodes[0], g.v_nodes[-1],
                                      self._SV_REFINE * (g.v_nodes.size - 1) + 1)
            s_fine = np.exp(self.x_fine)
            self.exact_d = np.empty((self.t_fine.size, k, self.x_fine.size,
                                     self.v_fine.size))
            self.exact_v = np.empty_like(self.exact_d)
            for ell, t in enumerate(self.t_fine):
                for i in range(k):
                    self.exact_d[ell, i], self.exact_v[ell, i] = heston_greeks_grid(
                        params, i, field.horizon - t, field.payoff,
                        s_fine, self.v_fine)
        self.d_s = d_s
        self.d_v = d_v

    def _anchor_parts(self, regime, t, x, v):
        """Shared-index multilinear interp of the refined exact-Greek tensors."""
        it, wt = interp_axis(self.t_fine, t)
        ix, wx = interp_axis(self.x_fine, x)
        iv, wv = interp_axis(self.v_fine, v)
        out_d = np.zeros(np.broadcast(t, x).shape)
        out_v = np.zeros_like(out_d)
        for a, pa in ((0, 1.0 - wt), (1, wt)):
            for b, pb in ((0, 1.0 - wx), (1, wx)):
                for c, pc in ((0, 1.0 - wv), (1, wv)):
                    w = pa * pb * pc
                    idx = (it + a, regime, ix + b, iv + c)
                    out_d += w * self.exact_d[idx]
                    out_v += w * self.exact_v[idx]
        return out_d, out_v

    def _survival(self, regime, t, y):
        if self.hazard is None:
            return np.ones(np.broadcast(regime, t).shape)
        regime = np.asarray(regime)
        out = np.empty(np.broadcast(regime, t, y).shape)
        gap = self.field.horizon - np.broadcast_to(t, out.shape)
        yb = np.broadcast_to(y, out.shape)
        rb = np.broadcast_to(regime, out.shape)
        for i in range(self.field.n_regimes):
            mask = rb == i
            if np.any(mask):
                out[mask] = survival_weight(self.hazard, i, yb[mask], gap[mask])
        return out

    def greeks(self, regime, t, s, v, y):
        """Interpolated (d phi/ds, d phi/dv) at query arrays."""
        g = self.field.grids
        x = np.log(s)
        ds, dv = interp_field_multi((self.d_s, self.d_v), g, regime, t, x, v, y)
        if self.anchored:
            surv = self._survival(regime, t, y)
            a_d, a_v = self._anchor_parts(regime, t, x, v)
            ds = ds + surv * a_d
            dv = dv + surv * a_v
        return ds, dv

    def at(self, state: MarketState, discount: float = 1.0) -> HedgeQuote:
        _check_in_grid(self.field, state)
        ds, dv = self.greeks(state.regime, state.t, state.s, state.v, state.age)
        ds, dv = float(ds), float(dv)
        phi = self.field.at(state)
        xi = ds + self.params.rho * self.params.sigma[state.regime] / state.s * dv
        eps = discount * (phi - xi * state.s)
        return HedgeQuote(xi=xi, eps=eps, phi=phi, d_phi_ds=ds, d_phi_dv=dv)


def hedge_at(field: PriceField, params: RegimeParams, state: MarketState,
             discount: float = 1.0, hazard: HazardSpec | None = None) -> HedgeQuote:
    """Hedge ratios at a state from grid derivatives of the solved field.

    ``discount`` is exp(-int_0^t r) along the caller's path (1 at t=0); it
    converts the residual cash value into money-market units so that
    xi*s + eps*B = phi holds exactly.  Passing the hazard spec sharpens the
    anchor correction (survival-weighted); without it the anchor uses
    weight one.
    """
    return HedgeEngine(field, params, hazard).at(state, discount)


def fs_residual(field: PriceField, params: RegimeParams, hazard: HazardSpec,
                state: MarketState, n_paths: int = 10_000, dt: float = 2.0 ** -10,
                seed: int = 0, threads: int = 1) -> FSReport:
    """Empirical decomposition residual along physical-measure paths.

    Per path: L = discount_T * payoff(S_T) - phi(state) - sum_k xi_k * dS*_k
    with xi evaluated at the left endpoint of each grid step and S* the
    discounted stock.  Reports the residual mean (should vanish), its
    standard error, and the sample correlation with the discretized
    martingale part of S (orthogonality check).  Also accumulates the
    vega square-integrability estimate E int V (dphi/dv)^2 dt.
    """
    if state.t >= field.horizon:
        raise ConfigError("state is at or past maturity")
    phi0 = field.at(state)
    engine = HedgeEngine(field, params, hazard)
    rho = params.rho

    l_parts, m_parts = [], []
    vega_acc = 0.0
    tau = field.horizon - state.t
    for block in iter_path_blocks(params, hazard, s0=state.s, v0=state.v,
                                  i0=state.regime, y0=state.age, T=tau, dt=dt,
                                  n_paths=n_paths, measure="physical", seed=seed,
                                  threads=threads, record=True,
                                  collect_martingale=True, role=ROLE_FS):
        t_abs = state.t + block["t_grid"]
        stock, disc = block["stock"], block["discount"]
        var, reg, ages = block["variance"], block["regime"], block["age"]
        n_b, m1 = stock.shape
        s_star = stock * disc
        # xi at the left endpoint of every step, vectorized over (path, step)
        tt = np.broadcast_to(t_abs[:-1], (n_b, m1 - 1))
        ds, dv = engine.greeks(reg[:, :-1], tt, stock[:, :-1], var[:, :-1],
                               ages[:, :-1])
        xi = ds + rho * params.sigma[reg[:, :-1]] / stock[:, :-1] * dv
        gains = np.sum(xi * np.diff(s_star, axis=1), axis=1)
        payoff_disc = disc[:, -1] * field.payoff(stock[:, -1])
        l_parts.append(payoff_disc - phi0 - gains)
        m_parts.append(block["martingale_T"])
        vega_acc += float(np.sum(var[:, :-1] * dv * dv) * (block["t_grid"][1]
                                                           - block["t_grid"][0]))

    l_t = np.concatenate(l_parts)
    m_t = np.concatenate(m_parts)
    n = l_t.size
    se = float(np.std(l_t, ddof=1) / np.sqrt(n))
    corr = float(np.corrcoef(l_t, m_t)[0, 1]) if np.std(m_t) > 0 else 0.0
    return FSReport(mean_lt=float(np.mean(l_t)), se_lt=se,
                    std_lt=float(np.std(l_t, ddof=1)), corr_with_m=corr,
                    vega_integral=vega_acc / n, n_paths=n, dt=dt, seed=seed)
