"""Age-dependent regime transitions and exact simulation of the regime chain.

Transitions between regimes are governed by hazard rates lambda_ij(y)
that may depend on the age y (time spent in the current regime).  Two
parametric families are supported, both with closed-form cumulative
hazards so that holding times can be sampled by exact inversion:

* constant:    lambda(y) = c
* saturating:  lambda(y) = c * (1 + m * (1 - exp(-y / tau)))

with c > 0, m > -1, tau > 0.  Both are bounded, strictly positive and
continuously differentiable, and their cumulative hazard diverges, so
every holding time is almost surely finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq
from scipy import integrate, sparse
from scipy.sparse import csgraph

from .errors import NumericalError, ValidationError

__all__ = [
    "ConstantHazard",
    "SaturatingHazard",
    "HazardSpec",
    "RegimePath",
    "cumulative_hazard",
    "holding_cdf",
    "holding_density",
    "transition_probs",
    "sample_holding",
    "sample_regime_path",
    "sample_regime_paths",
    "embedded_matrix",
    "is_irreducible",
    "validate_hazards",
]

_MAX_JUMPS = 10 ** 6
_LAMBDA_TOL = 1e-12


@dataclass(frozen=True)
class ConstantHazard:
    """Age-independent rate; holding times are exponential."""

    c: float

    def __post_init__(self):
        if self.c <= 0.0:
            raise ValidationError("constant hazard rate must be positive")

    def rate(self, y):
        return np.full_like(np.asarray(y, dtype=float), self.c)

    def cumulative(self, y):
        return self.c * np.asarray(y, dtype=float)

    def rate_inf(self, y0: float) -> float:
        return self.c


@dataclass(frozen=True)
class SaturatingHazard:
    """Rate moving monotonically from c at age 0 to c*(1+m) at large age."""

    c: float
    m: float
    tau: float

    def __post_init__(self):
        if self.c <= 0.0:
            raise ValidationError("saturating hazard scale must be positive")
        if self.m <= -1.0:
            raise ValidationError("saturating hazard shape must exceed -1")
        if self.tau <= 0.0:
            raise ValidationError("saturating hazard timescale must be positive")

    def rate(self, y):
        y = np.asarray(y, dtype=float)
        return self.c * (1.0 + self.m * (1.0 - np.exp(-y / self.tau)))

    def cumulative(self, y):
        y = np.asarray(y, dtype=float)
        return self.c * ((1.0 + self.m) * y - self.m * self.tau * (1.0 - np.exp(-y / self.tau)))

    def rate_inf(self, y0: float) -> float:
        # rate is monotone in y, so the infimum over [y0, inf) is at y0 or at infinity
        return min(float(self.rate(y0)), self.c * (1.0 + self.m))


Hazard = Union[ConstantHazard, SaturatingHazard]


@dataclass(frozen=True)
class HazardSpec:
    """Collection of pairwise hazards lambda_ij for a k-state chain.

    ``rates`` maps ordered pairs (i, j), i != j, to a hazard; absent pairs
    mean the transition i -> j never occurs.  A single-state chain with no
    rates is a valid degenerate case.
    """

    n_states: int
    rates: dict

    def __post_init__(self):
        object.__setattr__(self, "rates", dict(self.rates))
        for (i, j) in self.rates:
            if not (0 <= i < self.n_states and 0 <= j < self.n_states):
                raise ValidationError(f"hazard pair ({i},{j}) out of range")
            if i == j:
                raise ValidationError("self-transition hazards are not allowed")

    def pairs_from(self, i: int) -> list:
        return [(j, hz) for (a, j), hz in sorted(self.rates.items()) if a == i]

    def total_rate(self, i: int, y):
        """lambda_i(y) = sum over destinations of lambda_ij(y)."""
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for _, hz in self.pairs_from(i):
            out = out + hz.rate(y)
        return out

    def total_cumulative(self, i: int, y):
        y = np.asarray(y, dtype=float)
        out = np.zeros_like(y)
        for _, hz in self.pairs_from(i):
            out = out + hz.cumulative(y)
        return out

    def total_rate_inf(self, i: int, y0: float) -> float:
        return sum(hz.rate_inf(y0) for _, hz in self.pairs_from(i))

    def all_constant_from(self, i: int) -> bool:
        return all(isinstance(hz, ConstantHazard) for _, hz in self.pairs_from(i))


def cumulative_hazard(spec: HazardSpec, i: int, y):
    """Integrated total transition rate out of state i up to age y, in closed form."""
    return spec.total_cumulative(i, y)


def holding_cdf(spec: HazardSpec, i: int, y):
    """P(holding time in state i <= y) = 1 - exp(-cumulative_hazard).

    Strictly below 1 for every finite y; where the float rounds to 1 the
    value is capped at the next representable number below 1, preserving
    the property consumers rely on (survival ratios stay well-defined).
    """
    return np.minimum(-np.expm1(-spec.total_cumulative(i, y)),
                      np.nextafter(1.0, 0.0))


def holding_density(spec: HazardSpec, i: int, y):
    """Density of the holding time: lambda_i(y) * exp(-Lambda_i(y))."""
    return spec.total_rate(i, y) * np.exp(-spec.total_cumulative(i, y))


def transition_probs(spec: HazardSpec, i: int, y) -> np.ndarray:
    """Conditional jump distribution p_ij(y) = lambda_ij(y) / lambda_i(y).

    Returns a length-k vector with zero weight on i itself; rows sum to 1.
    """
    probs = np.zeros(spec.n_states)
    total = 0.0
    for j, hz in spec.pairs_from(i):
        rij = float(hz.rate(y))
        probs[j] += rij
        total += rij
    if total <= 0.0:
        raise ValidationError(f"state {i} has no outgoing hazard")
    return probs / total


def sample_holding(spec: HazardSpec, i: int, y0: float, rng) -> float:
    """Draw the residual holding time in state i given current age y0.

    Inverts the conditional survival exp(-(Lambda_i(y0+u) - Lambda_i(y0)))
    against a unit exponential draw.  Exact for constant rates; otherwise
    solved by bracketed root finding on the monotone cumulative hazard.
    """
    e = float(rng.exponential())
    if spec.all_constant_from(i):
        lam = float(spec.total_rate(i, y0))
        return e / lam

    base = float(spec.total_cumulative(i, y0))

    def gap(u):
        return float(spec.total_cumulative(i, y0 + u)) - base - e

    lam_lo = spec.total_rate_inf(i, y0)
    hi = e / lam_lo * (1.0 + 1e-9) + 1e-12
    try:
        u = brentq(gap, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
    except (RuntimeError, ValueError) as exc:
        raise NumericalError(f"holding-time inversion failed in state {i}: {exc}") from exc
    if abs(gap(u)) > _LAMBDA_TOL:
        raise NumericalError("holding-time inversion did not reach tolerance")
    return float(u)


def _residual_holding_batch(spec: HazardSpec, i: int, y0: np.ndarray,
                            e: np.ndarray) -> np.ndarray:
    """Vectorized residual holding times for a batch of paths in state i."""
    if spec.all_constant_from(i):
        lam = float(spec.total_rate(i, 0.0))
        return e / lam
    y0 = np.asarray(y0, dtype=float)
    base = spec.total_cumulative(i, y0)
    lam_lo = np.zeros_like(y0)
    for _, hz in spec.pairs_from(i):
        if isinstance(hz, ConstantHazard):
            lam_lo += hz.c
        else:
            lam_lo += np.minimum(hz.rate(y0), hz.c * (1.0 + hz.m))
    # bracket [0, e/lam_lo]; 64 bisection steps drive the bracket below 1e-15 relative
    lo = np.zeros_like(e)
    hi = e / lam_lo * (1.0 + 1e-9) + 1e-12
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        too_small = (spec.total_cumulative(i, y0 + mid) - base) < e
        lo = np.where(too_small, mid, lo)
        hi = np.where(too_small, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RegimePath:
    """Piecewise-constant regime trajectory on [0, horizon].

    ``times[0] = -initial_age`` marks the (possibly pre-horizon) entry into
    the first state; subsequent entries are the transition instants in
    (0, horizon].  ``states[n]`` is the regime on [times[n], times[n+1]).
    """

    times: np.ndarray
    states: np.ndarray
    horizon: float

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=np.int64))
        if self.times.shape[0] != self.states.shape[0]:
            raise ValidationError("times and states must align")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValidationError("transition times must be strictly increasing")

    @property
    def n_transitions(self) -> int:
        return self.times.shape[0] - 1

    def _segment(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, None)

    def state_at(self, t):
        out = self.states[self._segment(t)]
        return out if out.ndim else int(out)

    def age_at(self, t):
        t = np.asarray(t, dtype=float)
        out = t - self.times[self._segment(t)]
        return out if out.ndim else float(out)

    def to_csv(self, path) -> None:
        """Write (transition_time, new_state) rows for diagnostics."""
        rows = np.column_stack([self.times, self.states.astype(float)])
        np.savetxt(path, rows, delimiter=",", header="transition_time,new_state",
                   comments="", fmt=["%.17g", "%d"])


def sample_regime_path(spec: HazardSpec, i0: int, y0: float, T: float,
                       rng) -> RegimePath:
    """Simulate the regime chain on [0, T] starting in i0 with age y0 at t=0."""
    if T <= 0.0:
        raise ValidationError("horizon must be positive")
    times = [-float(y0)]
    states = [int(i0)]
    t, age, state = 0.0, float(y0), int(i0)
    if spec.n_states == 1 or not spec.pairs_from(state):
        return RegimePath(np.array(times), np.array(states), T)
    while True:
        u = sample_holding(spec, state, age, rng)
        t_next = t + u
        if t_next > T:
            break
        jump_age = age + u
        probs = transition_probs(spec, state, jump_age)
        state = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
        times.append(t_next)
        states.append(state)
        t, age = t_next, 0.0
        if len(times) > _MAX_JUMPS:
            raise NumericalError("regime chain exceeded jump budget; rates look explosive")
    return RegimePath(np.array(times), np.array(states), T)


def sample_regime_paths(spec: HazardSpec, i0: int, y0: float, T: float,
                        n_paths: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch of regime paths, padded with +inf sentinel times.

    Returns (times, states): times has shape (n_paths, J+2) with first
    column -y0 and trailing +inf entries once a path has stopped jumping;
    states has shape (n_paths, J+1) mirroring the active segments.
    """
    times_cols = [np.full(n_paths, -float(y0))]
    states_cols = [np.full(n_paths, int(i0), dtype=np.int64)]
    t_cur = np.zeros(n_paths)
    age = np.full(n_paths, float(y0))
    state = states_cols[0].copy()
    alive = np.ones(n_paths, dtype=bool)
    if spec.n_states == 1:
        alive[:] = False
    rounds = 0
    while np.any(alive):
        rounds += 1
        if rounds > _MAX_JUMPS:
            raise NumericalError("regime chain exceeded jump budget; rates look explosive")
        idx = np.flatnonzero(alive)
        e = rng.exponential(size=idx.size)
        u = np.empty(idx.size)
        for i in np.unique(state[idx]):
            m = state[idx] == i
            if not spec.pairs_from(int(i)):
                u[m] = np.inf
                continue
            u[m] = _residual_holding_batch(spec, int(i), age[idx][m], e[m])
        t_next = t_cur[idx] + u
        jumped = t_next <= T
        new_t = np.full(n_paths, np.inf)
        new_s = np.full(n_paths, -1, dtype=np.int64)
        jidx = idx[jumped]
        if jidx.size:
            jump_age = age[jidx] + u[jumped]
            cat = rng.random(jidx.size)
            dest = np.empty(jidx.size, dtype=np.int64)
            for i in np.unique(state[jidx]):
                m = state[jidx] == i
                pairs = spec.pairs_from(int(i))
                rates = np.stack([hz.rate(jump_age[m]) for _, hz in pairs])
                cum = np.cumsum(rates / rates.sum(axis=0), axis=0)
                pick = (cat[m][None, :] > cum).sum(axis=0)
                dest[m] = np.array([j for j, _ in pairs])[np.minimum(pick, len(pairs) - 1)]
            new_t[jidx] = t_next[jumped]
            new_s[jidx] = dest
            t_cur[jidx] = t_next[jumped]
            age[jidx] = 0.0
            state[jidx] = dest
        alive = np.zeros(n_paths, dtype=bool)
        alive[jidx] = True
        times_cols.append(new_t)
        states_cols.append(new_s)
    times = np.column_stack(times_cols + [np.full(n_paths, np.inf)])
    states = np.column_stack(states_cols)
    return times, states


def _age_cutoff(spec: HazardSpec, i: int, tail: float = 1e-12) -> float:
    """Age beyond which the holding-time survival drops below ``tail``."""
    target = -np.log(tail)
    lam_lo = spec.total_rate_inf(i, 0.0)
    hi = target / lam_lo + 1.0
    while float(spec.total_cumulative(i, hi)) < target:
        hi *= 2.0
    return brentq(lambda y: float(spec.total_cumulative(i, y)) - target, 0.0, hi)


def embedded_matrix(spec: HazardSpec, tail: float = 1e-12) -> np.ndarray:
    """Transition matrix of the embedded jump chain.

    Entry (i, j) integrates lambda_ij(y) * exp(-Lambda_i(y)) over ages,
    truncated where the survival falls below ``tail`` (the support pattern,
    which is all irreducibility needs, is unaffected).
    """
    k = spec.n_states
    p_hat = np.zeros((k, k))
    for i in range(k):
        pairs = spec.pairs_from(i)
        if not pairs:
            continue
        y_cut = _age_cutoff(spec, i, tail)
        for j, hz in pairs:
            val, _ = integrate.quad(
                lambda y, h=hz: float(h.rate(y)) * np.exp(-float(spec.total_cumulative(i, y))),
                0.0, y_cut, limit=200)
            p_hat[i, j] += val
    return p_hat


def is_irreducible(spec: HazardSpec) -> bool:
    """Strong connectivity of the embedded chain's support graph."""
    if spec.n_states == 1:
        return True
    p_hat = embedded_matrix(spec)
    graph = sparse.csr_matrix((p_hat > 1e-14).astype(float))
    n_comp, _ = csgraph.connected_components(graph, directed=True, connection="strong")
    return bool(n_comp == 1)


def validate_hazards(spec: HazardSpec) -> None:
    """Structural checks: every state (k >= 2) can leave, and the embedded
    chain is irreducible.  Parameter positivity is enforced at construction.
    """
    if spec.n_states >= 2:
        for i in range(spec.n_states):
            if not spec.pairs_from(i):
                raise ValidationError(f"state {i} has no outgoing hazard rate")
        if not is_irreducible(spec):
            raise ValidationError("embedded transition matrix is reducible")
