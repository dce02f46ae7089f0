"""Fixed-point solver for the pricing integral equation.

Conditioning on the first regime transition turns the price into the fixed
point of a contraction: the price in regime i equals the no-transition
survival weight times the frozen-regime price, plus an integral over the
first-transition time u of the discounted transition density times the
price restarted in the destination regime at age zero,

    phi(t,s,v,i,y) = survival_weight * Hest_i(t,s,v)
        + int_0^{T-t} e^{-r_i u} sum_j rate_ij(y+u) e^{-(Lam_i(y+u)-Lam_i(y))}
              E[ phi(t+u, s*R_u, V_u, j, 0) ] du

where (R_u, V_u) is the frozen-regime growth/variance pair started at
(1, v).  The inner expectation is evaluated against fixed Monte Carlo
clouds (common random numbers across iterations), which makes the
discrete operator deterministic, so plain Banach iteration converges.

Because the stock grid is uniform in log s, a cloud collapses into a small
"shift kernel": the empirical joint distribution of (log R / h_x, V_u)
binned onto grid offsets.  Applying the operator is then a batched tensor
contraction of that kernel with padded price slices, where the padding
extends the field beyond the stock range with its linear-growth asymptote
phi ~ slope*s + offset (clipped at zero below).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .engine import ConditionalCloud, iter_cloud_slabs
from .errors import ConfigError, NumericalError
from .grids import GridConfig, Grids, PriceField, interp_axis, interp_field
from .heston import heston_price_grid
from .model import PayoffSpec, RegimeParams
from .semi_markov import HazardSpec, validate_hazards

__all__ = [
    "SolverReport",
    "IntegralPricer",
    "survival_weight",
    "density_weight",
    "inner_expectation",
    "kernel_from_samples",
]


def survival_weight(hazard: HazardSpec, i: int, y, gap):
    """Probability of no transition within ``gap`` given current age y.

    Computed as exp(-(Lambda_i(y+gap) - Lambda_i(y))), which stays accurate
    where both survivals underflow.
    """
    y = np.asarray(y, dtype=float)
    gap = np.asarray(gap, dtype=float)
    out = np.exp(-(hazard.total_cumulative(i, y + gap) - hazard.total_cumulative(i, y)))
    return out if out.ndim else float(out)


def density_weight(hazard: HazardSpec, i: int, y, u):
    """First-transition density at lag u given current age y."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    out = hazard.total_rate(i, y + u) * np.exp(
        -(hazard.total_cumulative(i, y + u) - hazard.total_cumulative(i, y)))
    return out if out.ndim else float(out)


def kernel_from_samples(log_growth: np.ndarray, variance: np.ndarray,
                        h_x: float, v_nodes: np.ndarray,
                        shift_cap: int) -> tuple[int, np.ndarray]:
    """Bin cloud samples into a (v-start, shift, v-node) weight kernel.

    ``log_growth``/``variance`` have shape (n_v_starts, n_samples).  The
    kernel W satisfies: mean_m f(x + log R_m, V_m) = sum_{w,b}
    W[row, w, b] * f(x + (k_lo + w) * h_x, v_nodes[b]) for f linear on the
    grid, per v-start row.
    """
    n_rows, n_samp = log_growth.shape
    q = np.clip(log_growth / h_x, -shift_cap, shift_cap - 1e-9)
    k = np.floor(q).astype(np.int64)
    f = q - k
    k_lo, k_hi = int(k.min()), int(k.max())
    n_k = k_hi - k_lo + 2
    iv, fv = interp_axis(v_nodes, variance)
    n_v = v_nodes.size
    size = n_rows * n_k * n_v
    row_base = (np.arange(n_rows)[:, None] * n_k + (k - k_lo)) * n_v + iv
    w = np.zeros(size)
    for dk in (0, 1):
        for dv in (0, 1):
            wk = f if dk else 1.0 - f
            wv = fv if dv else 1.0 - fv
            w += np.bincount((row_base + dk * n_v + dv).ravel(),
                             weights=(wk * wv).ravel(), minlength=size)
    return k_lo, w.reshape(n_rows, n_k, n_v) / n_samp


def inner_expectation(price_field: PriceField, cloud: ConditionalCloud, j: int,
                      t_eval: float, s: float) -> float:
    """Cloud average of the age-zero field slice: E[phi(t_eval, s*R, V, j, 0)].

    Stock values carried outside the grid are brought back with the
    linear-growth asymptote phi ~ slope*s + boundary offset (floored at 0).
    """
    g = price_field.grids
    x_q = np.log(s) + np.log(cloud.growth)
    x_cl = np.clip(x_q, g.x_nodes[0], g.x_nodes[-1])
    base = interp_field(price_field.values, g, j, t_eval, x_cl, cloud.variance, 0.0)
    vals = base + price_field.payoff.slope * (s * cloud.growth - np.exp(x_cl))
    return float(np.mean(np.maximum(vals, 0.0)))


@dataclass
class SolverReport:
    """Convergence diagnostics of the fixed-point iteration."""

    iterations: int
    converged: bool
    tol: float
    u_norm_history: list = field(default_factory=list)
    ratio_history: list = field(default_factory=list)
    contraction_ratio: float = float("nan")
    q_bound_grid: float = float("nan")
    q_bound_survival: float = float("nan")
    n_inner: int = 0
    wall_time_s: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "iterations": self.iterations,
            "converged": self.converged,
            "tol": self.tol,
            "u_norm_history": [float(x) for x in self.u_norm_history],
            "ratio_history": [float(x) for x in self.ratio_history],
            "contraction_ratio": float(self.contraction_ratio),
            "q_bound_grid": float(self.q_bound_grid),
            "q_bound_survival": float(self.q_bound_survival),
            "n_inner": self.n_inner,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out


class IntegralPricer:
    """Grid solver for the price field of one market configuration.

    Clouds and shift kernels are payoff-independent and built lazily once;
    ``solve`` can then be called for several payoffs, reusing them.
    """

    def __init__(self, params: RegimeParams, hazard: HazardSpec, T: float,
                 s0: float, y0: float = 0.0, grid_config: GridConfig | None = None,
                 seed: int = 0):
        if T <= 0.0:
            raise ConfigError("horizon must be positive")
        validate_hazards(hazard)
        self.params = params
        self.hazard = hazard
        self.T = float(T)
        self.s0 = float(s0)
        self.y0 = float(y0)
        self.seed = int(seed)
        self.config = grid_config or GridConfig()
        self.grids: Grids = self.config.build(params, T, s0, y_max=T + y0)
        self._n_regimes = params.n_regimes
        self._build_quadrature()
        self._kernels = None
        self._static_cache: dict = {}

    # ----- quadrature layout -------------------------------------------------

    def _build_quadrature(self):
        """Gauss-Legendre nodes on the panels of the time grid, shared by all t."""
        g = self.grids
        h = g.h_t
        n_panels = g.t_nodes.size - 1
        gl_x, gl_w = np.polynomial.legendre.leggauss(self.config.panel_quad_nodes)
        off = 0.5 * h * (gl_x + 1.0)
        self.u_panel = np.repeat(np.arange(n_panels), off.size)
        self.u_nodes = (self.u_panel * h + np.tile(off, n_panels))
        self.u_weights = np.tile(0.5 * h * gl_w, n_panels)
        self.u_frac = np.tile(off / h, n_panels)

    # ----- clouds and kernels ------------------------------------------------

    def _ensure_kernels(self):
        if self._kernels is not None:
            return
        g = self.grids
        order = np.argsort(self.u_nodes, kind="stable")
        kernels = {}
        shift_cap = g.x_nodes.size
        for i in range(self._n_regimes):
            slabs = iter_cloud_slabs(self.params, i, g.v_nodes, self.u_nodes[order],
                                     self.config.n_inner, self.seed,
                                     dt=self.config.cloud_dt)
            for u_pos, (u, growth, variance) in zip(order, slabs):
                kernels[(i, int(u_pos))] = kernel_from_samples(
                    np.log(growth), variance, g.h_x, g.v_nodes, shift_cap)
        k_lo = min(k for k, _ in kernels.values())
        k_hi = max(k + w.shape[1] - 1 for k, w in kernels.values())
        self._pad_lo = max(0, -k_lo)
        self._pad_hi = max(0, k_hi)
        self._kernels = kernels

    # ----- payoff-dependent static terms --------------------------------------

    def _static_terms(self, payoff: PayoffSpec):
        key = (payoff.kind, payoff.strike, payoff.half_width)
        if key in self._static_cache:
            return self._static_cache[key]
        g = self.grids
        k = self._n_regimes
        n_t, n_y, n_s, n_v = g.t_nodes.size, g.y_nodes.size, g.s_nodes.size, g.v_nodes.size

        hest = np.empty((n_t, k, n_s, n_v))
        for ell, t in enumerate(g.t_nodes):
            for i in range(k):
                hest[ell, i] = heston_price_grid(self.params, i, self.T - t, payoff,
                                                 g.s_nodes, g.v_nodes)

        surv = np.empty((n_t, k, n_y))
        for i in range(k):
            for ell, t in enumerate(g.t_nodes):
                surv[ell, i] = survival_weight(self.hazard, i, g.y_nodes, self.T - t)
        const_term = surv[:, :, :, None, None] * hest[:, :, None, :, :]

        # rate_w[i, j, y, u] = rate_ij(y+u) * exp(-(Lam_i(y+u)-Lam_i(y)))
        #                      * e^{-r_i u} * quadrature weight
        rate_w = np.zeros((k, k, n_y, self.u_nodes.size))
        yy = g.y_nodes[:, None]
        uu = self.u_nodes[None, :]
        for i in range(k):
            decay = np.exp(-(self.hazard.total_cumulative(i, yy + uu)
                             - self.hazard.total_cumulative(i, yy)))
            disc = np.exp(-self.params.r[i] * self.u_nodes)[None, :] * self.u_weights[None, :]
            for j, hz in self.hazard.pairs_from(i):
                rate_w[i, j] += hz.rate(yy + uu) * decay * disc

        out = {"const_term": const_term, "rate_w": rate_w}
        self._static_cache[key] = out
        return out

    # ----- contraction bounds --------------------------------------------------

    def q_bounds(self) -> tuple[float, float]:
        """(grid surrogate of the weighted contraction bound, survival bound).

        The first evaluates the operator's weighted-norm bound with the
        stock supremum taken at the top grid node; the second is the
        model-level bound sup (F(y+T-t)-F(y))/(1-F(y)), strictly below 1.
        """
        g = self.grids
        s_top = g.s_nodes[-1]
        q_grid = 0.0
        q_surv = 0.0
        yy = g.y_nodes[:, None]
        uu = self.u_nodes[None, :]
        for i in range(self._n_regimes):
            dens = self.hazard.total_rate(i, yy + uu) * np.exp(
                -(self.hazard.total_cumulative(i, yy + uu)
                  - self.hazard.total_cumulative(i, yy)))
            growth_fac = ((1.0 + s_top * np.exp(self.params.r[i] * self.u_nodes))
                          / (1.0 + s_top))[None, :]
            integrand = dens * np.exp(-self.params.r[i] * self.u_nodes)[None, :] \
                * self.u_weights[None, :] * growth_fac
            for ell in range(g.t_nodes.size - 1):
                live = self.u_panel <= (g.t_nodes.size - 2 - ell)
                q_grid = max(q_grid, float(integrand[:, live].sum(axis=1).max()))
                gap = self.T - g.t_nodes[ell]
                q_surv = max(q_surv, float(
                    (1.0 - survival_weight(self.hazard, i, g.y_nodes, gap)).max()))
        return q_grid, q_surv

    # ----- operator -----------------------------------------------------------

    def _padded_slices(self, values: np.ndarray, slope: float) -> np.ndarray:
        """Age-zero slices extended beyond the stock grid by linear growth."""
        g = self.grids
        n_t, k = values.shape[0], values.shape[1]
        n_s, n_v = g.s_nodes.size, g.v_nodes.size
        n_pad = self._pad_lo + n_s + self._pad_hi
        out = np.empty((n_t, k, n_pad, n_v))
        core = values[:, :, 0, :, :]
        out[:, :, self._pad_lo:self._pad_lo + n_s] = core
        if self._pad_lo:
            s_ext = g.s_nodes[0] * np.exp(-g.h_x * np.arange(self._pad_lo, 0, -1))
            ext = core[:, :, 0:1, :] + slope * (s_ext[None, None, :, None] - g.s_nodes[0])
            out[:, :, :self._pad_lo] = np.maximum(ext, 0.0)
        if self._pad_hi:
            s_ext = g.s_nodes[-1] * np.exp(g.h_x * np.arange(1, self._pad_hi + 1))
            out[:, :, self._pad_lo + n_s:] = core[:, :, -1:, :] \
                + slope * (s_ext[None, None, :, None] - g.s_nodes[-1])
        return out

    def apply_operator(self, values: np.ndarray, payoff: PayoffSpec) -> np.ndarray:
        """One application of the discrete pricing operator."""
        self._ensure_kernels()
        static = self._static_terms(payoff)
        g = self.grids
        n_t = g.t_nodes.size
        out = static["const_term"].copy()
        padded = self._padded_slices(values, payoff.slope)
        rate_w = static["rate_w"]
        for i in range(self._n_regimes):
            for u_idx in range(self.u_nodes.size):
                n = int(self.u_panel[u_idx])
                m_lo, m_hi = n, n_t - 1          # slice indices m = ell + n
                frac = self.u_frac[u_idx]
                k_lo, W = self._kernels[(i, u_idx)]
                n_k = W.shape[1]
                start = self._pad_lo + k_lo
                for j, _ in self.hazard.pairs_from(i):
                    if not np.any(rate_w[i, j, :, u_idx]):
                        continue
                    blend = (1.0 - frac) * padded[m_lo:m_hi, j] \
                        + frac * padded[m_lo + 1:m_hi + 1, j]
                    win = sliding_window_view(blend, n_k, axis=1)
                    win = win[:, start:start + g.s_nodes.size]
                    grown = np.tensordot(win, W, axes=([3, 2], [1, 2]))
                    out[0:m_hi - m_lo, i] += (rate_w[i, j, :, u_idx][None, :, None, None]
                                              * grown[:, None, :, :])
        out[n_t - 1] = payoff(g.s_nodes)[None, None, :, None]
        return out

    # ----- fixed point ----------------------------------------------------------

    def initial_values(self, payoff: PayoffSpec, init: str = "payoff") -> np.ndarray:
        g = self.grids
        shape = (g.t_nodes.size, self._n_regimes, g.y_nodes.size,
                 g.s_nodes.size, g.v_nodes.size)
        if init == "payoff":
            return np.broadcast_to(payoff(g.s_nodes)[None, None, None, :, None],
                                   shape).copy()
        if init == "heston":
            return self._static_terms(payoff)["const_term"].copy()
        raise ConfigError(f"unknown initialization '{init}'")

    def solve(self, payoff: PayoffSpec, init: str = "payoff", tol: float = 1e-7,
              max_iter: int = 200) -> tuple[PriceField, SolverReport]:
        """Iterate the operator to its fixed point in the (1+s)-weighted sup norm."""
        t_start = time.perf_counter()
        g = self.grids
        inv_weight = 1.0 / (1.0 + g.s_nodes)[None, None, None, :, None]
        values = self.initial_values(payoff, init) if isinstance(init, str) else init
        diffs: list[float] = []
        ratios: list[float] = []
        converged = False
        for _ in range(max_iter):
            new = self.apply_operator(values, payoff)
            diff = float(np.max(np.abs(new - values) * inv_weight))
            if diffs and diffs[-1] > 0.0:
                ratios.append(diff / diffs[-1])
            diffs.append(diff)
            values = new
            if diff < tol:
                converged = True
                break
        if not converged:
            exc = NumericalError(
                f"fixed-point iteration did not reach {tol:g} in {max_iter} steps; "
                f"last ratios {ratios[-5:]}")
            exc.ratio_history = ratios
            raise exc
        q_grid, q_surv = self.q_bounds()
        tail = [r for r in ratios[-3:] if np.isfinite(r)]
        report = SolverReport(
            iterations=len(diffs), converged=converged, tol=tol,
            u_norm_history=diffs, ratio_history=ratios,
            contraction_ratio=float(np.median(tail)) if tail else 0.0,
            q_bound_grid=q_grid, q_bound_survival=q_surv,
            n_inner=self.config.n_inner,
            wall_time_s=time.perf_counter() - t_start)
        price_field = PriceField(grids=g, values=values, payoff=payoff, horizon=self.T)
        return price_field, report
