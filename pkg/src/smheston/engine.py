"""Simulation of the regime-switching stochastic volatility system.

The variance uses a full-truncation Euler scheme (the negative part of the
running state is truncated inside drift and diffusion, recorded values are
clipped at zero) and the log stock price is advanced exactly given the
left-endpoint variance.  Regime parameters switch at the sampled transition
instants: a grid step straddling a transition is split there exactly, so
regime timing carries no O(dt) bias.  Discount factors accumulate the
piecewise-constant short rate exactly in log space.

Paths are generated in fixed-size blocks, each with its own RNG stream
spawned from the master seed, so results are reproducible and independent
of the worker count used to process blocks.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .model import RegimeParams, effective_thetas
from .semi_markov import HazardSpec, sample_regime_paths

__all__ = [
    "PathBundle",
    "ConditionalCloud",
    "simulate",
    "iter_path_blocks",
    "terminal_sample",
    "conditional_cloud",
    "iter_cloud_slabs",
    "simulate_variance_integrals",
]

BLOCK_SIZE = 4096

# RNG substream families; the Monte Carlo pricer and the solver clouds draw
# from different families so the two pricing routes stay independent.
ROLE_SIMULATE = 0
ROLE_CLOUD = 1
ROLE_MC_ORACLE = 2
ROLE_NOVIKOV = 3
ROLE_FS = 4


def block_rng(seed: int, role: int, index: int) -> np.random.Generator:
    """Independent generator for (seed, substream family, block index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, role, index))))


@dataclass(frozen=True)
class PathBundle:
    """Seeded ensemble of simulated paths on a uniform time grid.

    Arrays have shape (n_paths, n_nodes).  ``discount`` is
    exp(-int_0^t r(X_u) du), decreasing with value 1 at t=0; variances are
    clipped at zero at the recorded nodes.
    """

    seed: int
    measure: str
    times: np.ndarray
    stock: np.ndarray
    variance: np.ndarray
    discount: np.ndarray
    regime: np.ndarray
    age: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.stock.shape[0]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def to_csv(self, path, max_paths: int = 100) -> None:
        """Dump up to ``max_paths`` paths as (path, t, S, V, regime, age, discount)."""
        n = min(self.n_paths, max_paths)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "t", "S", "V", "regime", "age", "discount"])
            for p in range(n):
                for k, t in enumerate(self.times):
                    writer.writerow([p, f"{t:.10g}", f"{self.stock[p, k]:.12g}",
                                     f"{self.variance[p, k]:.12g}", int(self.regime[p, k]),
                                     f"{self.age[p, k]:.10g}", f"{self.discount[p, k]:.12g}"])


@dataclass(frozen=True)
class ConditionalCloud:
    """Frozen-regime samples of (growth factor, variance) over one horizon.

    ``growth`` holds S_u / S_0 under the pricing dynamics with the regime
    pinned at ``regime`` and the variance started at ``v_start``; the same
    cloud therefore serves every starting stock level multiplicatively.
    """

    regime: int
    horizon: float
    v_start: float
    growth: np.ndarray
    variance: np.ndarray
    seed: int


def _grid(T: float, dt: float) -> np.ndarray:
    if dt <= 0.0:
        raise ConfigError("dt must be positive")
    if dt >= T:
        raise ConfigError("dt must be smaller than the horizon")
    n_steps = max(1, int(round(T / dt)))
    return np.linspace(0.0, T, n_steps + 1)


def _advance_block(params: RegimeParams, measure: str, trans_times: np.ndarray,
                   trans_states: np.ndarray, s0: float, v0: float,
                   t_grid: np.ndarray, rng: np.random.Generator,
                   record: bool, collect_martingale: bool = False,
                   collect_inv_var: bool = False) -> dict:
    """Step one block of paths over the whole grid.

    ``trans_times``/``trans_states`` come from the batch regime sampler
    (padded with +inf).  Within each grid step, paths are advanced to the
    earlier of the step end and their next transition, repeatedly, so each
    sub-segment sees constant regime parameters.
    """
    n = trans_times.shape[0]
    m = t_grid.shape[0] - 1
    if measure == "mmm":
        drift_tab, theta_tab = params.r, effective_thetas(params)
    elif measure == "physical":
        drift_tab, theta_tab = params.mu, params.theta
    else:
        raise ConfigError(f"unknown measure '{measure}'")
    kappa_tab, sigma_tab, r_tab = params.kappa, params.sigma, params.r
    rho = params.rho
    rho_c = np.sqrt(max(0.0, 1.0 - rho * rho))

    log_s = np.full(n, np.log(s0))
    v = np.full(n, float(v0))
    acc_r = np.zeros(n)
    mart = np.zeros(n) if collect_martingale else None
    inv_var = np.zeros(n) if collect_inv_var else None
    cursor = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)

    if record:
        stock = np.empty((n, m + 1))
        variance = np.empty((n, m + 1))
        discount = np.empty((n, m + 1))
        regime = np.empty((n, m + 1), dtype=np.int16)
        age = np.empty((n, m + 1))
        stock[:, 0] = s0
        variance[:, 0] = max(v0, 0.0)
        discount[:, 0] = 1.0
        regime[:, 0] = trans_states[rows, cursor]
        age[:, 0] = t_grid[0] - trans_times[rows, cursor]

    for k in range(m):
        t_end = t_grid[k + 1]
        t_cur = np.full(n, t_grid[k])
        while True:
            idx = np.flatnonzero(t_end - t_cur > 1e-14)
            if idx.size == 0:
                break
            nxt = trans_times[idx, cursor[idx] + 1]
            seg_end = np.minimum(nxt, t_end)
            h = seg_end - t_cur[idx]
            st = trans_states[idx, cursor[idx]]
            z = rng.standard_normal((2, idx.size))
            vp = np.maximum(v[idx], 0.0)
            sq_vh = np.sqrt(vp * h)
            if collect_martingale:
                mart[idx] += np.exp(log_s[idx]) * sq_vh * z[0]
            if collect_inv_var:
                inv_var[idx] += h / np.maximum(vp, 1e-12)
            log_s[idx] += (drift_tab[st] - 0.5 * vp) * h + sq_vh * z[0]
            v[idx] += kappa_tab[st] * (theta_tab[st] - vp) * h \
                + sigma_tab[st] * sq_vh * (rho * z[0] + rho_c * z[1])
            acc_r[idx] += r_tab[st] * h
            t_cur[idx] = seg_end
            crossed = idx[nxt <= t_end]
            cursor[crossed] += 1
        if record:
            stock[:, k + 1] = np.exp(log_s)
            variance[:, k + 1] = np.maximum(v, 0.0)
            discount[:, k + 1] = np.exp(-acc_r)
            regime[:, k + 1] = trans_states[rows, cursor]
            age[:, k + 1] = t_end - trans_times[rows, cursor]

    bad = ~np.isfinite(log_s) | ~np.isfinite(v)
    if np.any(bad):
        raise NumericalError(f"simulation produced NaN/inf at path index {int(np.argmax(bad))}")

    out = {
        "stock_T": np.exp(log_s),
        "variance_T": np.maximum(v, 0.0),
        "discount_T": np.exp(-acc_r),
        "regime_T": trans_states[rows, cursor],
        "age_T": t_grid[-1] - trans_times[rows, cursor],
    }
    if record:
        out.update(stock=stock, variance=variance, discount=discount, regime=regime, age=age)
    if collect_martingale:
        out["martingale_T"] = mart
    if collect_inv_var:
        out["inv_var_integral"] = inv_var
    return out


def iter_path_blocks(params: RegimeParams, hazard: HazardSpec, s0: float, v0: float,
                     i0: int, y0: float, T: float, dt: float, n_paths: int,
                     measure: str = "physical", seed: int = 0, threads: int = 1,
                     record: bool = False, collect_martingale: bool = False,
                     role: int = ROLE_SIMULATE):
    """Yield per-block simulation results in fixed block order.

    Block decomposition is a constant of the library (BLOCK_SIZE), so the
    stream of results does not depend on ``threads``.
    """
    t_grid = _grid(T, dt)
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)

    def run(block_index: int) -> dict:
        rng = block_rng(seed, role, block_index)
        tt, ts = sample_regime_paths(hazard, i0, y0, T, sizes[block_index], rng)
        out = _advance_block(params, measure, tt, ts, s0, v0, t_grid, rng,
                             record=record, collect_martingale=collect_martingale)
        out["t_grid"] = t_grid
        return out

    if threads <= 1:
        for b in range(len(sizes)):
            yield run(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(run, range(len(sizes)))


def simulate(params: RegimeParams, hazard: HazardSpec, s0: float, v0: float,
             i0: int, y0: float, T: float, dt: float, n_paths: int,
             measure: str = "physical", seed: int = 0, threads: int = 1) -> PathBundle:
    """Simulate full paths of (S, V, regime, age, discount) on a uniform grid."""
    blocks = list(iter_path_blocks(params, hazard, s0, v0, i0, y0, T, dt, n_paths,
                                   measure=measure, seed=seed, threads=threads, record=True))
    return PathBundle(
        seed=seed, measure=measure, times=blocks[0]["t_grid"],
        stock=np.concatenate([b["stock"] for b in blocks]),
        variance=np.concatenate([b["variance"] for b in blocks]),
        discount=np.concatenate([b["discount"] for b in blocks]),
        regime=np.concatenate([b["regime"] for b in blocks]),
        age=np.concatenate([b["age"] for b in blocks]),
    )


def terminal_sample(params: RegimeParams, hazard: HazardSpec, s0: float, v0: float,
                    i0: int, y0: float, T: float, dt: float, n_paths: int,
                    measure: str = "mmm", seed: int = 0, threads: int = 1,
                    role: int = ROLE_SIMULATE) -> dict:
    """Terminal-state sample (S_T, V_T, D_T, regime, age) without storing paths."""
    parts = list(iter_path_blocks(params, hazard, s0, v0, i0, y0, T, dt, n_paths,
                                  measure=measure, seed=seed, threads=threads,
                                  record=False, role=role))
    return {
        "stock_T": np.concatenate([b["stock_T"] for b in parts]),
        "variance_T": np.concatenate([b["variance_T"] for b in parts]),
        "discount_T": np.concatenate([b["discount_T"] for b in parts]),
        "regime_T": np.concatenate([b["regime_T"] for b in parts]),
        "age_T": np.concatenate([b["age_T"] for b in parts]),
    }


def simulate_variance_integrals(params: RegimeParams, hazard: HazardSpec, v0: float,
                                T: float, dt: float, n_paths: int, seed: int = 0) -> np.ndarray:
    """Per-path int_0^T dt / V_t under the physical measure (V floored at 1e-12)."""
    t_grid = _grid(T, dt)
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    outs = []
    for b, size in enumerate(sizes):
        rng = block_rng(seed, ROLE_NOVIKOV, b)
        tt, ts = sample_regime_paths(hazard, 0, 0.0, T, size, rng)
        out = _advance_block(params, "physical", tt, ts, 1.0, v0, t_grid, rng,
                             record=False, collect_inv_var=True)
        outs.append(out["inv_var_integral"])
    return np.concatenate(outs)


def iter_cloud_slabs(params: RegimeParams, i: int, v_starts: np.ndarray,
                     u_nodes: np.ndarray, n_inner: int, seed: int,
                     dt: float = 2.0 ** -9, moment_match: bool = True):
    """Yield (u, growth, variance) at each horizon for all variance starts.

    One set of paths is advanced under the frozen-regime pricing dynamics
    and sampled at every requested horizon; the Brownian increments are
    antithetic pairs shared across the variance starts, so the resulting
    clouds vary smoothly in the starting variance.  With ``moment_match``
    the growth factors are rescaled to their exact mean e^{r u} (the
    martingale value) and the variances to the exact mean-reversion mean,
    which removes the dominant sampling noise of downstream cloud
    averages.  Arrays have shape (len(v_starts), n_inner).
    """
    u_nodes = np.asarray(u_nodes, dtype=float)
    if np.any(np.diff(u_nodes) <= 0.0) or u_nodes[0] <= 0.0:
        raise ConfigError("cloud horizons must be positive and increasing")
    if n_inner % 2:
        raise ConfigError("n_inner must be even (antithetic pairs)")
    rng = block_rng(seed, ROLE_CLOUD, i)
    kappa = params.kappa[i]
    sigma = params.sigma[i]
    theta_hat = float(effective_thetas(params)[i])
    r = params.r[i]
    rho = params.rho
    rho_c = np.sqrt(max(0.0, 1.0 - rho * rho))

    v_starts = np.asarray(v_starts, dtype=float)
    v = np.tile(v_starts[:, None], (1, n_inner))
    log_r = np.zeros_like(v)
    t = 0.0
    for u in u_nodes:
        while u - t > 1e-14:
            h = min(dt, u - t)
            half = rng.standard_normal((2, n_inner // 2))
            z = np.concatenate([half, -half], axis=1)
            vp = np.maximum(v, 0.0)
            sq_vh = np.sqrt(vp * h)
            log_r += (r - 0.5 * vp) * h + sq_vh * z[0]
            v += kappa * (theta_hat - vp) * h + sigma * sq_vh * (rho * z[0] + rho_c * z[1])
            t += h
        growth = np.exp(log_r)
        var_out = np.maximum(v, 0.0)
        if moment_match:
            growth = growth * (np.exp(r * u) / growth.mean(axis=1, keepdims=True))
            v_mean = theta_hat + (v_starts[:, None] - theta_hat) * np.exp(-kappa * u)
            var_out = var_out * (v_mean / np.maximum(var_out.mean(axis=1, keepdims=True),
                                                     1e-300))
        yield u, growth, var_out


def conditional_cloud(params: RegimeParams, i: int, v: float, u: float,
                      n_inner: int = 4096, seed: int = 0,
                      dt: float = 2.0 ** -9) -> ConditionalCloud:
    """Sample (S_u/S_0, V_u) under the pricing dynamics with the regime frozen at i."""
    if u <= 0.0:
        raise ConfigError("cloud horizon must be positive")
    for _, growth, variance in iter_cloud_slabs(params, i, np.array([v]), np.array([u]),
                                                n_inner, seed, dt=dt):
        return ConditionalCloud(regime=i, horizon=u, v_start=v,
                                growth=growth[0], variance=variance[0], seed=seed)
    raise NumericalError("cloud simulation yielded nothing")  # pragma: no cover
