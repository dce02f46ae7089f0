"""Command-line front end.

Every output is deterministic JSON carrying the config hash, the seed and
the package version, so identical (config, seed) runs produce byte-identical
files regardless of thread count.  Solved price fields are cached in a
directory keyed by the config hash, which makes ``hedge`` and ``fs-check``
cheap follow-ups to ``price --method ie``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_payoff
from .engine import simulate
from .errors import ConfigError, NumericalError, ValidationError
from .grids import PriceField
from .hedging import fs_residual, hedge_at
from .heston import hest
from .mc import price_mc
from .model import MarketState, estimate_novikov_moment, validate_vol_of_vol
from .semi_markov import embedded_matrix, is_irreducible, validate_hazards
from .solver import IntegralPricer

_ERRORS = (ConfigError, ValidationError, NumericalError)


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


def _base_payload(cfg: RunConfig, command: str, seed: int) -> dict:
    return {"command": command, "version": __version__,
            "config_hash": cfg.content_hash, "seed": seed}


def _parse_state(cfg: RunConfig, state_str: str | None) -> MarketState:
    if state_str is None:
        return cfg.state0
    parts = state_str.split(",")
    if len(parts) != 5:
        raise ConfigError("--state must be t,s,v,regime,age")
    return MarketState(t=float(parts[0]), s=float(parts[1]), v=float(parts[2]),
                       regime=int(parts[3]), age=float(parts[4]))


def _payoff_tag(payoff) -> str:
    if payoff.kind == "unit":
        return "unit"
    if payoff.kind == "butterfly":
        return f"butterfly{payoff.strike:g}x{payoff.half_width:g}"
    return f"{payoff.kind}{payoff.strike:g}"


def _solve_or_load(cfg: RunConfig, payoff, seed: int, cache_dir: str):
    """Returns (field, solver report dict, cache path); solves on cache miss."""
    cache = Path(cache_dir)
    cache.mkdir(parents=True, exist_ok=True)
    path = cache / f"field_{cfg.content_hash}_{_payoff_tag(payoff)}_s{seed}.npz"
    if path.exists():
        meta = PriceField.load_meta(path)
        return PriceField.load(path), meta.get("solver_report"), str(path)
    pricer = IntegralPricer(cfg.params, cfg.hazard, T=cfg.horizon, s0=cfg.state0.s,
                            y0=cfg.state0.age, grid_config=cfg.grid, seed=seed)
    field, report = pricer.solve(payoff, init="heston")
    report_dict = report.to_dict(include_timing=False)
    field.save(path, meta={"config_hash": cfg.content_hash, "seed": seed,
                           "solver_report": report_dict})
    return field, report_dict, str(path)


@click.group()
def main():
    """Regime-switching stochastic volatility pricer."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--novikov-paths", default=20000, show_default=True,
              help="Paths for the heuristic exponential-moment probe.")
@click.option("--out", default=None, help="Write the JSON report here.")
def validate(config_path, novikov_paths, out):
    """Check model assumptions; exit 0 only if all hard checks pass."""
    try:
        cfg = load_config(config_path)
    except _ERRORS as exc:
        _fail(exc)
    payload = _base_payload(cfg, "validate", cfg.seed)
    hard_pass = True
    try:
        checks = validate_vol_of_vol(cfg.params)
        payload["vol_of_vol"] = [{"state": c.state, "lhs": c.lhs, "rhs": c.rhs,
                                  "passed": c.passed} for c in checks]
        hard_pass &= all(c.passed for c in checks)
    except _ERRORS as exc:
        payload["vol_of_vol"] = {"error": str(exc)}
        hard_pass = False
    try:
        validate_hazards(cfg.hazard)
        payload["hazards"] = {"passed": True,
                              "irreducible": is_irreducible(cfg.hazard),
                              "embedded_matrix": embedded_matrix(cfg.hazard).tolist()
                              if cfg.hazard.rates else []}
    except _ERRORS as exc:
        payload["hazards"] = {"passed": False, "error": str(exc)}
        hard_pass = False
    if hard_pass:
        est = estimate_novikov_moment(cfg.params, cfg.hazard, v0=cfg.state0.v,
                                      T=cfg.horizon, n_paths=novikov_paths,
                                      seed=cfg.seed)
        payload["novikov_moment"] = {"estimate": est.estimate, "stable": est.stable,
                                     "exponent_coef": est.exponent_coef,
                                     "advisory": True}
    payload["passed"] = hard_pass
    _emit(payload, out)
    sys.exit(0 if hard_pass else 1)


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--method", type=click.Choice(["ie", "mc", "heston"]), default="ie",
              show_default=True)
@click.option("--state", default=None, help="Override state as t,s,v,regime,age.")
@click.option("--payoff", "payoff_str", default=None,
              help="Override payoff, e.g. call:100, put:95, unit, butterfly:100:10.")
@click.option("--regime", default=None, type=int,
              help="Frozen regime for --method heston (default: state regime).")
@click.option("--seed", default=None, type=int, help="Override the config seed.")
@click.option("--n-paths", default=None, type=int, help="MC paths override.")
@click.option("--dt", default=None, type=float, help="MC step override.")
@click.option("--threads", default=1, show_default=True)
@click.option("--cache-dir", default=".smheston_cache", show_default=True)
@click.option("--dump-field", default=None, help="Also write the field as CSV here.")
@click.option("--out", default=None, help="Write the JSON result here.")
def price(config_path, method, state, payoff_str, regime, seed, n_paths, dt,
          threads, cache_dir, dump_field, out):
    """Price the configured payoff at a state by the chosen method."""
    try:
        cfg = load_config(config_path)
        st = _parse_state(cfg, state)
        payoff = parse_payoff(payoff_str) if payoff_str else cfg.payoff
        use_seed = cfg.seed if seed is None else seed
        payload = _base_payload(cfg, "price", use_seed)
        payload["method"] = method
        payload["state"] = {"t": st.t, "s": st.s, "v": st.v,
                            "regime": st.regime, "age": st.age}
        payload["payoff"] = {"kind": payoff.kind, "strike": payoff.strike,
                             "half_width": payoff.half_width}
        if method == "mc":
            res = price_mc(cfg.params, cfg.hazard, st, payoff, T=cfg.horizon,
                           n_paths=n_paths or cfg.mc_n_paths, dt=dt or cfg.mc_dt,
                           seed=use_seed, threads=threads)
            payload["result"] = res.to_dict()
        elif method == "heston":
            reg = st.regime if regime is None else regime
            quote = hest(cfg.params, reg, st.t, st.s, st.v, payoff, cfg.horizon)
            payload["result"] = {"price": quote.price, "regime": quote.regime,
                                 "t_gap": quote.t_gap}
        else:
            field, report, cache_path = _solve_or_load(cfg, payoff, use_seed, cache_dir)
            payload["result"] = {"price": field.at(st), "field_cache": cache_path}
            if report is not None:
                payload["solver_report"] = report
            if dump_field:
                field.to_csv(dump_field)
        _emit(payload, out)
    except _ERRORS as exc:
        _fail(exc)


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--state", default=None, help="Override state as t,s,v,regime,age.")
@click.option("--seed", default=None, type=int)
@click.option("--cache-dir", default=".smheston_cache", show_default=True)
@click.option("--out", default=None)
def hedge(config_path, state, seed, cache_dir, out):
    """Hedge ratios (stock and money-market units) at a state."""
    try:
        cfg = load_config(config_path)
        st = _parse_state(cfg, state)
        use_seed = cfg.seed if seed is None else seed
        field, _, cache_path = _solve_or_load(cfg, cfg.payoff, use_seed, cache_dir)
        quote = hedge_at(field, cfg.params, st)
        payload = _base_payload(cfg, "hedge", use_seed)
        payload["state"] = {"t": st.t, "s": st.s, "v": st.v,
                            "regime": st.regime, "age": st.age}
        payload["result"] = quote.to_dict()
        payload["result"]["field_cache"] = cache_path
        _emit(payload, out)
    except _ERRORS as exc:
        _fail(exc)


@main.command("fs-check")
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--n-paths", default=10000, show_default=True)
@click.option("--dt", default=2.0 ** -9, show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--threads", default=1, show_default=True)
@click.option("--cache-dir", default=".smheston_cache", show_default=True)
@click.option("--out", default=None)
def fs_check(config_path, n_paths, dt, seed, threads, cache_dir, out):
    """Decomposition residual report along physical paths."""
    try:
        cfg = load_config(config_path)
        use_seed = cfg.seed if seed is None else seed
        field, _, _ = _solve_or_load(cfg, cfg.payoff, use_seed, cache_dir)
        rep = fs_residual(field, cfg.params, cfg.hazard, cfg.state0,
                          n_paths=n_paths, dt=dt, seed=use_seed, threads=threads)
        payload = _base_payload(cfg, "fs-check", use_seed)
        payload["result"] = rep.to_dict()
        _emit(payload, out)
    except _ERRORS as exc:
        _fail(exc)


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--n-paths", default=1000, show_default=True)
@click.option("--dt", default=2.0 ** -7, show_default=True)
@click.option("--measure", type=click.Choice(["physical", "mmm"]), default="physical",
              show_default=True)
@click.option("--seed", default=None, type=int)
@click.option("--threads", default=1, show_default=True)
@click.option("--dump-paths", default=None, help="Write sampled paths as CSV here.")
@click.option("--max-dump", default=100, show_default=True,
              help="Cap on the number of dumped paths.")
@click.option("--out", default=None)
def simulate_cmd(config_path, n_paths, dt, measure, seed, threads, dump_paths,
                 max_dump, out):
    """Simulate paths; optionally dump them to CSV."""
    try:
        cfg = load_config(config_path)
        use_seed = cfg.seed if seed is None else seed
        bundle = simulate(cfg.params, cfg.hazard, s0=cfg.state0.s, v0=cfg.state0.v,
                          i0=cfg.state0.regime, y0=cfg.state0.age, T=cfg.horizon,
                          dt=dt, n_paths=n_paths, measure=measure, seed=use_seed,
                          threads=threads)
        if dump_paths:
            bundle.to_csv(dump_paths, max_paths=max_dump)
        payload = _base_payload(cfg, "simulate", use_seed)
        payload["result"] = {
            "n_paths": bundle.n_paths, "dt": bundle.dt, "measure": measure,
            "mean_terminal_stock": float(np.mean(bundle.stock[:, -1])),
            "mean_terminal_variance": float(np.mean(bundle.variance[:, -1])),
            "mean_terminal_discount": float(np.mean(bundle.discount[:, -1])),
            "mean_discounted_stock": float(np.mean(bundle.discount[:, -1]
                                                   * bundle.stock[:, -1])),
            "mean_jumps": float(np.mean(np.sum(np.diff(bundle.regime.astype(int),
                                                       axis=1) != 0, axis=1))),
        }
        _emit(payload, out)
    except _ERRORS as exc:
        _fail(exc)


main.add_command(simulate_cmd, name="simulate")

if __name__ == "__main__":
    main()
