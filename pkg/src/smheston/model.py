"""Market model parameters, payoffs, and structural validators.

The market has k regimes. In regime i the stock drifts at mu[i] under the
physical measure (r[i] under the pricing measure) and its instantaneous
variance follows a square-root mean-reverting process with speed kappa[i],
long-run mean theta[i] and vol-of-vol sigma[i]; the two driving Brownian
motions are correlated with a regime-independent rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "RegimeParams",
    "MarketState",
    "PayoffSpec",
    "BoundCheck",
    "NovikovEstimate",
    "validate_vol_of_vol",
    "effective_theta",
    "effective_thetas",
    "estimate_novikov_moment",
]


@dataclass(frozen=True)
class RegimeParams:
    """Per-regime market parameters, all rates annualized.

    Arrays are indexed by regime 0..k-1.  Construction only checks shapes;
    the positivity and vol-of-vol requirements are enforced by
    :func:`validate_vol_of_vol` so that degenerate parameter sets (e.g.
    sigma = 0 limits) can still be built for diagnostics.
    """

    mu: np.ndarray
    r: np.ndarray
    kappa: np.ndarray
    theta: np.ndarray
    sigma: np.ndarray
    rho: float

    def __post_init__(self):
        for name in ("mu", "r", "kappa", "theta", "sigma"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
        k = self.mu.shape[0]
        for name in ("r", "kappa", "theta", "sigma"):
            if getattr(self, name).shape != (k,):
                raise ValidationError(f"parameter array '{name}' must have length {k}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValidationError("rho must lie in [-1, 1]")

    @property
    def n_regimes(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class MarketState:
    """A point (t, s, v, regime, age) of the pricing domain."""

    t: float
    s: float
    v: float
    regime: int
    age: float = 0.0

    def __post_init__(self):
        if self.s <= 0.0:
            raise ValidationError("stock price must be positive")
        if self.v <= 0.0:
            raise ValidationError("variance must be positive")
        if self.t < 0.0:
            raise ValidationError("time must be nonnegative")
        if self.age < 0.0:
            raise ValidationError("age must be nonnegative")


@dataclass(frozen=True)
class PayoffSpec:
    """Lipschitz terminal payoff K with |K(s) - slope*s| <= band.

    The slope/band pair bounds the payoff between two parallel lines and
    drives both the linear-growth extrapolation of the price field and the
    price-band checks.
    """

    kind: str
    strike: float = 0.0
    half_width: float = 0.0

    _KINDS = ("call", "put", "butterfly", "unit")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValidationError(f"unknown payoff kind '{self.kind}'")
        if self.kind in ("call", "put") and self.strike <= 0.0:
            raise ValidationError("strike must be positive")
        if self.kind == "butterfly":
            if self.strike <= 0.0:
                raise ValidationError("butterfly center must be positive")
            if not 0.0 < self.half_width < self.strike:
                raise ValidationError("butterfly half-width must lie in (0, center)")

    @classmethod
    def call(cls, strike: float) -> "PayoffSpec":
        return cls("call", strike=float(strike))

    @classmethod
    def put(cls, strike: float) -> "PayoffSpec":
        return cls("put", strike=float(strike))

    @classmethod
    def butterfly(cls, center: float, half_width: float) -> "PayoffSpec":
        return cls("butterfly", strike=float(center), half_width=float(half_width))

    @classmethod
    def unit(cls) -> "PayoffSpec":
        return cls("unit")

    @property
    def slope(self) -> float:
        """Asymptotic payoff slope in s (1 for a call, 0 otherwise)."""
        return 1.0 if self.kind == "call" else 0.0

    @property
    def band(self) -> float:
        """Uniform bound on |K(s) - slope*s|."""
        if self.kind in ("call", "put"):
            return self.strike
        if self.kind == "butterfly":
            return self.half_width
        return 1.0

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "call":
            out = np.maximum(s - self.strike, 0.0)
        elif self.kind == "put":
            out = np.maximum(self.strike - s, 0.0)
        elif self.kind == "unit":
            out = np.ones_like(s)
        else:
            lo, mid, hi = self.strike - self.half_width, self.strike, self.strike + self.half_width
            out = (np.maximum(s - lo, 0.0) - 2.0 * np.maximum(s - mid, 0.0)
                   + np.maximum(s - hi, 0.0))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class BoundCheck:
    """Per-regime vol-of-vol admissibility check."""

    state: int
    lhs: float            # sigma[i]
    rhs: float            # admissible upper bound
    positivity_bound: float
    integrability_bound: float
    passed: bool


def _sigma_bound(kappa: float, theta: float, excess: float, rho: float) -> tuple[float, float]:
    """Return (positivity bound, square-integrability bound) for sigma.

    excess = mu - r.  The second bound is +inf when 2*rho + sqrt(2) <= 0
    (positive-part convention).
    """
    b1 = math.sqrt(2.0 * kappa * theta + rho * rho * excess * excess) - rho * excess
    denom = 2.0 * rho + math.sqrt(2.0)
    b2 = kappa / denom if denom > 0.0 else math.inf
    return b1, b2


def validate_vol_of_vol(params: RegimeParams) -> list[BoundCheck]:
    """Check sigma[i] against the admissibility bound in every regime.

    The bound is the minimum of two terms: one guaranteeing that the
    variance process stays positive under both the physical and the
    pricing measure, the other guaranteeing square-integrability of the
    stock.  Passing requires strict inequality.

    Raises
    ------
    ValidationError
        If any of mu, r, kappa, theta, sigma is non-positive or mu < r
        in some regime.
    """
    for name in ("mu", "r", "kappa", "theta", "sigma"):
        arr = getattr(params, name)
        if np.any(arr <= 0.0):
            bad = int(np.argmax(arr <= 0.0))
            raise ValidationError(f"{name}[{bad}] must be strictly positive, got {arr[bad]}")
    if np.any(params.mu < params.r):
        bad = int(np.argmax(params.mu < params.r))
        raise ValidationError(f"mu[{bad}] must be >= r[{bad}]")

    report = []
    for i in range(params.n_regimes):
        b1, b2 = _sigma_bound(params.kappa[i], params.theta[i],
                              params.mu[i] - params.r[i], params.rho)
        bound = min(b1, b2)
        report.append(BoundCheck(state=i, lhs=float(params.sigma[i]), rhs=bound,
                                 positivity_bound=b1, integrability_bound=b2,
                                 passed=bool(params.sigma[i] < bound)))
    return report


def effective_theta(params: RegimeParams, i: int) -> float:
    """Long-run variance mean in regime i under the pricing measure.

    The measure change tilts the variance drift: the long-run mean moves
    from theta[i] to theta[i] - rho*sigma[i]*(mu[i]-r[i])/kappa[i].  When
    all sigma bounds pass this value still satisfies the positivity
    condition sigma[i]^2 < 2*kappa[i]*effective_theta.
    """
    return float(params.theta[i]
                 - params.rho * params.sigma[i] * (params.mu[i] - params.r[i]) / params.kappa[i])


def effective_thetas(params: RegimeParams) -> np.ndarray:
    """Vectorized :func:`effective_theta` over all regimes."""
    return params.theta - params.rho * params.sigma * (params.mu - params.r) / params.kappa


@dataclass(frozen=True)
class NovikovEstimate:
    """Monte Carlo probe of the exponential inverse-variance moment."""

    estimate: float
    stable: bool
    exponent_coef: float
    batch_means: tuple = field(default=())


def estimate_novikov_moment(params: RegimeParams, hazard, v0: float, T: float,
                            n_paths: int = 20000, seed: int = 0,
                            dt: float = 2.0 ** -8) -> NovikovEstimate:
    """Estimate E[exp(c * int_0^T 1/V_s ds)] with c = max_i (mu_i-r_i)^2 / 2.

    Finiteness of this moment is what licenses the measure change behind
    the pricing formulas; it cannot be verified exactly, so this is a
    flagged heuristic.  ``stable`` is False when the running estimate
    grows strictly across doubling batch sizes (the signature of a
    diverging expectation), or when any path overflows.

    The time integral uses the left-endpoint variance floored at 1e-12,
    so near-explosions show up as instability rather than as NaN.
    """
    from .engine import simulate_variance_integrals

    c = 0.5 * float(np.max((params.mu - params.r) ** 2))
    if c == 0.0:
        return NovikovEstimate(estimate=1.0, stable=True, exponent_coef=0.0,
                               batch_means=(1.0, 1.0, 1.0, 1.0))

    inv_integrals = simulate_variance_integrals(params, hazard, v0=v0, T=T, dt=dt,
                                                n_paths=n_paths, seed=seed)
    exponents = c * inv_integrals
    values = np.exp(np.minimum(exponents, 700.0))
    overflow = bool(np.any(exponents >= 700.0)) or not np.all(np.isfinite(values))

    checkpoints = [max(1, n_paths // 8), max(1, n_paths // 4), max(1, n_paths // 2), n_paths]
    batch_means = tuple(float(np.mean(values[:m])) for m in checkpoints)
    growing = all(b > a for a, b in zip(batch_means, batch_means[1:]))
    return NovikovEstimate(estimate=float(np.mean(values)),
                           stable=not (growing or overflow),
                           exponent_coef=c, batch_means=batch_means)
