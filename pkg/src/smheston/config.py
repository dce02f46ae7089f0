"""YAML configuration: schema, parsing, and the provenance hash.

A configuration fully determines a pricing problem: regimes, hazards,
payoff, horizon, initial state, grid resolution, Monte Carlo defaults and
seed.  Every CLI output embeds the SHA-256 hash of the canonicalized
content so results can be traced back to their inputs; the field cache is
keyed by the same hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError
from .grids import GridConfig
from .model import MarketState, PayoffSpec, RegimeParams
from .semi_markov import ConstantHazard, HazardSpec, SaturatingHazard

__all__ = ["RunConfig", "load_config", "parse_config", "config_hash", "parse_payoff"]

_REGIME_KEYS = ("mu", "r", "kappa", "theta", "sigma")


@dataclass(frozen=True)
class RunConfig:
    params: RegimeParams
    hazard: HazardSpec
    payoff: PayoffSpec
    horizon: float
    state0: MarketState
    grid: GridConfig
    mc_n_paths: int
    mc_dt: float
    seed: int
    content_hash: str
    raw: dict = field(repr=False, default_factory=dict)


def config_hash(raw: dict) -> str:
    """Short hash of the canonical JSON form of the parsed YAML content."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse_payoff(spec) -> PayoffSpec:
    """Payoff from a config mapping or a compact CLI string.

    Mapping form: {kind: call, strike: 100}; {kind: butterfly,
    center: 100, half_width: 10}; {kind: unit}.  String form:
    "call:100", "put:95", "unit", "butterfly:100:10".
    """
    if isinstance(spec, str):
        parts = spec.split(":")
        kind = parts[0]
        if kind == "unit":
            return PayoffSpec.unit()
        if kind in ("call", "put"):
            if len(parts) != 2:
                raise ConfigError(f"payoff '{spec}' needs a strike, e.g. {kind}:100")
            return PayoffSpec(kind, strike=float(parts[1]))
        if kind == "butterfly":
            if len(parts) != 3:
                raise ConfigError("butterfly payoff needs center and half-width")
            return PayoffSpec.butterfly(float(parts[1]), float(parts[2]))
        raise ConfigError(f"unknown payoff kind '{kind}'")
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("payoff must be a mapping with a 'kind' key")
    kind = spec["kind"]
    if kind == "unit":
        return PayoffSpec.unit()
    if kind in ("call", "put"):
        if "strike" not in spec:
            raise ConfigError(f"{kind} payoff needs 'strike'")
        return PayoffSpec(kind, strike=float(spec["strike"]))
    if kind == "butterfly":
        for key in ("center", "half_width"):
            if key not in spec:
                raise ConfigError(f"butterfly payoff needs '{key}'")
        return PayoffSpec.butterfly(float(spec["center"]), float(spec["half_width"]))
    raise ConfigError(f"unknown payoff kind '{kind}'")


def _parse_hazard(entry: dict, n_states: int):
    for key in ("from", "to", "family"):
        if key not in entry:
            raise ConfigError(f"hazard entry missing '{key}': {entry}")
    i, j = int(entry["from"]), int(entry["to"])
    fam = entry["family"]
    if fam == "constant":
        if "c" not in entry:
            raise ConfigError(f"constant hazard {i}->{j} needs 'c'")
        return (i, j), ConstantHazard(c=float(entry["c"]))
    if fam == "saturating":
        for key in ("c", "m", "tau"):
            if key not in entry:
                raise ConfigError(f"saturating hazard {i}->{j} needs '{key}'")
        return (i, j), SaturatingHazard(c=float(entry["c"]), m=float(entry["m"]),
                                        tau=float(entry["tau"]))
    raise ConfigError(f"unknown hazard family '{fam}' (use constant or saturating)")


def parse_config(raw: dict) -> RunConfig:
    for key in ("horizon", "rho", "regimes", "payoff", "initial_state"):
        if key not in raw:
            raise ConfigError(f"config missing required key '{key}'")
    regimes = raw["regimes"]
    if not isinstance(regimes, list) or not regimes:
        raise ConfigError("'regimes' must be a non-empty list")
    for idx, reg in enumerate(regimes):
        for key in _REGIME_KEYS:
            if key not in reg:
                raise ConfigError(f"regime {idx} missing '{key}'")
    params = RegimeParams(
        mu=[float(reg["mu"]) for reg in regimes],
        r=[float(reg["r"]) for reg in regimes],
        kappa=[float(reg["kappa"]) for reg in regimes],
        theta=[float(reg["theta"]) for reg in regimes],
        sigma=[float(reg["sigma"]) for reg in regimes],
        rho=float(raw["rho"]))

    rates = {}
    for entry in raw.get("hazards", []):
        key, hz = _parse_hazard(entry, len(regimes))
        if key in rates:
            raise ConfigError(f"duplicate hazard entry {key[0]}->{key[1]}")
        rates[key] = hz
    hazard = HazardSpec(n_states=len(regimes), rates=rates)

    st = raw["initial_state"]
    for key in ("s", "v", "regime"):
        if key not in st:
            raise ConfigError(f"initial_state missing '{key}'")
    state0 = MarketState(t=float(st.get("t", 0.0)), s=float(st["s"]), v=float(st["v"]),
                         regime=int(st["regime"]), age=float(st.get("age", 0.0)))

    grid_raw = dict(raw.get("grid", {}))
    known = {f.name for f in fields(GridConfig)}
    bad = set(grid_raw) - known
    if bad:
        raise ConfigError(f"unknown grid keys: {sorted(bad)}")
    grid = GridConfig(**grid_raw)

    mc = raw.get("mc", {})
    return RunConfig(
        params=params, hazard=hazard, payoff=parse_payoff(raw["payoff"]),
        horizon=float(raw["horizon"]), state0=state0, grid=grid,
        mc_n_paths=int(mc.get("n_paths", 100_000)),
        mc_dt=float(mc.get("dt", 2.0 ** -9)),
        seed=int(raw.get("seed", 0)),
        content_hash=config_hash(raw), raw=raw)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"cannot parse config{where}: {exc.problem}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return parse_config(raw)
