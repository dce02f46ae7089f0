"""Tensor grids and the interpolated price field.

The price field lives on a (time, log-stock, variance, regime, age) grid
and is interpolated multilinearly in (t, log s, v, y).  The stock axis is
uniform in log s, which both matches the model's lognormal local moves and
lets the solver reuse one sample cloud across all stock nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError
from .model import MarketState, PayoffSpec, RegimeParams, effective_thetas

__all__ = ["GridConfig", "Grids", "PriceField", "interp_axis", "interp_field"]


@dataclass(frozen=True)
class GridConfig:
    """Resolution knobs for the price-field solver, all overridable via config."""

    n_t: int = 41
    n_s: int = 81
    n_v: int = 21
    n_y: int = 11
    s_lo_mult: float = 0.2
    s_hi_mult: float = 5.0
    v_min: float = 1e-4
    v_max_mult: float = 8.0
    panel_quad_nodes: int = 2
    n_inner: int = 16384
    cloud_dt: float = 2.0 ** -9

    def __post_init__(self):
        if self.n_t < 3 or self.n_s < 5 or self.n_v < 3 or self.n_y < 2:
            raise ConfigError("grid too coarse")
        if not 1 <= self.panel_quad_nodes <= 16:
            raise ConfigError("panel_quad_nodes must be in [1, 16]")

    def build(self, params: RegimeParams, T: float, s0: float, y_max: float) -> "Grids":
        theta_top = float(max(np.max(params.theta), np.max(effective_thetas(params))))
        x = np.linspace(np.log(self.s_lo_mult * s0), np.log(self.s_hi_mult * s0), self.n_s)
        return Grids(
            t_nodes=np.linspace(0.0, T, self.n_t),
            x_nodes=x,
            s_nodes=np.exp(x),
            v_nodes=np.linspace(self.v_min, self.v_max_mult * theta_top, self.n_v),
            y_nodes=np.linspace(0.0, max(y_max, 1e-8), self.n_y),
        )


@dataclass(frozen=True)
class Grids:
    t_nodes: np.ndarray
    x_nodes: np.ndarray
    s_nodes: np.ndarray
    v_nodes: np.ndarray
    y_nodes: np.ndarray

    @property
    def h_t(self) -> float:
        return float(self.t_nodes[1] - self.t_nodes[0])

    @property
    def h_x(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])


def interp_axis(nodes: np.ndarray, q):
    """Bracketing index and fraction along one axis, clamped to the range."""
    q = np.clip(np.asarray(q, dtype=float), nodes[0], nodes[-1])
    idx = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, nodes.size - 2)
    frac = (q - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    return idx, frac


def interp_field_multi(tensors: tuple, grids: Grids, regime, t, x, v, y) -> list:
    """Multilinear interpolation of several (t, regime, y, x, v) tensors at
    the same query points; bracketing indices are computed once and shared.

    All query arguments broadcast; coordinates outside the grid are clamped
    to the boundary.
    """
    regime, t, x, v, y = np.broadcast_arrays(regime, t, x, v, y)
    it, wt = interp_axis(grids.t_nodes, t)
    ix, wx = interp_axis(grids.x_nodes, x)
    iv, wv = interp_axis(grids.v_nodes, v)
    iy, wy = interp_axis(grids.y_nodes, y)
    outs = [np.zeros(np.broadcast(t, x).shape) for _ in tensors]
    for dt_, pt in ((0, 1.0 - wt), (1, wt)):
        for dy, py in ((0, 1.0 - wy), (1, wy)):
            for dx, px in ((0, 1.0 - wx), (1, wx)):
                for dv, pv in ((0, 1.0 - wv), (1, wv)):
                    w = pt * py * px * pv
                    idx = (it + dt_, regime, iy + dy, ix + dx, iv + dv)
                    for out, values in zip(outs, tensors):
                        out += w * values[idx]
    return outs


def interp_field(values: np.ndarray, grids: Grids, regime, t, x, v, y):
    """Multilinear interpolation of a (t, regime, y, x, v) tensor at query points."""
    return interp_field_multi((values,), grids, regime, t, x, v, y)[0]


@dataclass(frozen=True)
class PriceField:
    """Discretized price surface with multilinear interpolation.

    ``values`` has shape (n_t, n_regimes, n_y, n_s, n_v).
    """

    grids: Grids
    values: np.ndarray
    payoff: PayoffSpec
    horizon: float

    @property
    def n_regimes(self) -> int:
        return self.values.shape[1]

    def at(self, state: MarketState) -> float:
        return float(interp_field(self.values, self.grids, state.regime,
                                  state.t, np.log(state.s), state.v, state.age))

    def at_many(self, regime, t, s, v, y) -> np.ndarray:
        return interp_field(self.values, self.grids, regime, t, np.log(s), v, y)

    def gradient_fields(self) -> tuple[np.ndarray, np.ndarray]:
        """Central-difference derivative tensors in s and in v (one-sided at edges)."""
        d_s = np.gradient(self.values, self.grids.s_nodes, axis=3)
        d_v = np.gradient(self.values, self.grids.v_nodes, axis=4)
        return d_s, d_v

    def to_csv(self, path) -> None:
        """Flat dump (t, s, v, regime, y, phi), one row per grid tuple."""
        g = self.grids
        tt, ii, yy, ss, vv = np.meshgrid(g.t_nodes, np.arange(self.n_regimes),
                                         g.y_nodes, g.s_nodes, g.v_nodes, indexing="ij")
        rows = np.column_stack([tt.ravel(), ss.ravel(), vv.ravel(),
                                ii.ravel().astype(float), yy.ravel(), self.values.ravel()])
        np.savetxt(path, rows, delimiter=",", comments="",
                   header="t,s,v,regime,y,phi",
                   fmt=["%.10g", "%.10g", "%.10g", "%d", "%.10g", "%.17g"])

    def save(self, path, meta: dict | None = None) -> None:
        np.savez_compressed(
            path, t_nodes=self.grids.t_nodes, x_nodes=self.grids.x_nodes,
            s_nodes=self.grids.s_nodes, v_nodes=self.grids.v_nodes,
            y_nodes=self.grids.y_nodes, values=self.values,
            horizon=self.horizon,
            payoff=json.dumps(asdict(self.payoff)),
            meta=json.dumps(meta or {}))

    @classmethod
    def load(cls, path) -> "PriceField":
        with np.load(path, allow_pickle=False) as data:
            grids = Grids(t_nodes=data["t_nodes"], x_nodes=data["x_nodes"],
                          s_nodes=data["s_nodes"], v_nodes=data["v_nodes"],
                          y_nodes=data["y_nodes"])
            payoff = PayoffSpec(**json.loads(str(data["payoff"])))
            return cls(grids=grids, values=data["values"], payoff=payoff,
                       horizon=float(data["horizon"]))

    @staticmethod
    def load_meta(path) -> dict:
        with np.load(path, allow_pickle=False) as data:
            return json.loads(str(data["meta"]))
