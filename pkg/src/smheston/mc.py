"""Independent Monte Carlo pricer — the ground-truth oracle for the field solver.

Prices are discounted expectations of the terminal payoff under the pricing
dynamics, estimated from full regime-switching paths.  The RNG substream
family differs from the one feeding the solver's clouds, so the two routes
share no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import ROLE_MC_ORACLE, block_rng, terminal_sample, BLOCK_SIZE
from .model import MarketState, PayoffSpec, RegimeParams
from .semi_markov import HazardSpec, sample_regime_paths

__all__ = ["MCResult", "price_mc", "zero_coupon_mc"]

_Z99 = 2.5758293035489004  # two-sided 99% normal quantile


@dataclass(frozen=True)
class MCResult:
    price: float
    std_error: float
    ci99: tuple[float, float]
    n_paths: int
    seed: int

    def to_dict(self) -> dict:
        return {"price": self.price, "std_error": self.std_error,
                "ci99": [self.ci99[0], self.ci99[1]],
                "n_paths": self.n_paths, "seed": self.seed}


def _summarize(samples: np.ndarray, seed: int) -> MCResult:
    n = samples.size
    price = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MCResult(price=price, std_error=se,
                    ci99=(price - _Z99 * se, price + _Z99 * se),
                    n_paths=n, seed=seed)


def price_mc(params: RegimeParams, hazard: HazardSpec, state: MarketState,
             payoff: PayoffSpec, T: float, n_paths: int = 100_000,
             dt: float = 2.0 ** -9, seed: int = 0, threads: int = 1) -> MCResult:
    """Price the payoff by simulating the pricing dynamics from ``state`` to T."""
    tau = T - state.t
    out = terminal_sample(params, hazard, s0=state.s, v0=state.v, i0=state.regime,
                          y0=state.age, T=tau, dt=dt, n_paths=n_paths,
                          measure="mmm", seed=seed, threads=threads,
                          role=ROLE_MC_ORACLE)
    samples = out["discount_T"] * payoff(out["stock_T"])
    return _summarize(samples, seed)


def zero_coupon_mc(params: RegimeParams, hazard: HazardSpec, i: int, y: float,
                   t: float, T: float, n_paths: int = 100_000,
                   seed: int = 0) -> MCResult:
    """Price of the unit payoff; only the regime path and discount are simulated."""
    tau = T - t
    parts = []
    sizes = [BLOCK_SIZE] * (n_paths // BLOCK_SIZE)
    if n_paths % BLOCK_SIZE:
        sizes.append(n_paths % BLOCK_SIZE)
    for b, size in enumerate(sizes):
        rng = block_rng(seed, ROLE_MC_ORACLE, b)
        times, states = sample_regime_paths(hazard, i, y, tau, size, rng)
        # exact integral of the piecewise-constant short rate over [0, tau]
        seg_lo = np.clip(times[:, :-1], 0.0, tau)
        seg_hi = np.clip(times[:, 1:], 0.0, tau)
        lengths = np.maximum(seg_hi - seg_lo, 0.0)
        rates = params.r[np.maximum(states, 0)]
        parts.append(np.exp(-np.sum(lengths * rates, axis=1)))
    return _summarize(np.concatenate(parts), seed)
