import json

import pytest
from click.testing import CliRunner

from smheston.cli import main
from tests.conftest import CONFIG_DIR

FAST_SINGLE = """\
horizon: 1.0
rho: -0.5
regimes:
  - {mu: 0.08, r: 0.03, kappa: 2.0, theta: 0.04, sigma: 0.2}
hazards: []
payoff: {kind: call, strike: 100.0}
initial_state: {s: 100.0, v: 0.04, regime: 0, age: 0.0}
grid: {n_t: 9, n_s: 41, n_v: 9, n_y: 2, n_inner: 512, cloud_dt: 0.015625}
mc: {n_paths: 5000, dt: 0.03125}
seed: 99
"""

FAST_TWO = """\
horizon: 1.0
rho: -0.5
regimes:
  - {mu: 0.08, r: 0.03, kappa: 2.0, theta: 0.04, sigma: 0.2}
  - {mu: 0.10, r: 0.05, kappa: 1.6, theta: 0.07, sigma: 0.25}
hazards:
  - {from: 0, to: 1, family: constant, c: 1.0}
  - {from: 1, to: 0, family: constant, c: 0.8}
payoff: {kind: call, strike: 100.0}
initial_state: {s: 100.0, v: 0.04, regime: 0, age: 0.0}
grid: {n_t: 9, n_s: 41, n_v: 9, n_y: 3, n_inner: 512, cloud_dt: 0.015625}
mc: {n_paths: 5000, dt: 0.03125}
seed: 99
"""


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def fast_single(tmp_path):
    p = tmp_path / "single.yaml"
    p.write_text(FAST_SINGLE)
    return str(p)


@pytest.fixture()
def fast_two(tmp_path):
    p = tmp_path / "two.yaml"
    p.write_text(FAST_TWO)
    return str(p)


class TestValidate:
    def test_shipped_configs_pass(self, runner):
        for name in ("single_regime.yaml", "two_regime_constant.yaml",
                     "two_regime_saturating.yaml"):
            res = runner.invoke(main, ["validate", str(CONFIG_DIR / name),
                                       "--novikov-paths", "1000"])
            assert res.exit_code == 0, res.output

    def test_sigma_bound_violation_fails(self, runner, tmp_path):
        bad = FAST_SINGLE.replace("sigma: 0.2", "sigma: 0.6")
        p = tmp_path / "bad.yaml"
        p.write_text(bad)
        res = runner.invoke(main, ["validate", str(p)])
        assert res.exit_code == 1
        payload = json.loads(res.output)
        assert payload["vol_of_vol"][0]["passed"] is False

    def test_reducible_chain_fails(self, runner, tmp_path):
        cfg = FAST_TWO.replace(
            "regimes:", "regimes:\n  - {mu: 0.08, r: 0.03, kappa: 2.0, theta: 0.04, sigma: 0.2}"
        ).replace("- {from: 1, to: 0, family: constant, c: 0.8}",
                  "- {from: 1, to: 0, family: constant, c: 0.8}\n  - {from: 2, to: 0, family: constant, c: 0.5}")
        p = tmp_path / "reducible.yaml"
        p.write_text(cfg)
        res = runner.invoke(main, ["validate", str(p)])
        assert res.exit_code == 1
        payload = json.loads(res.output)
        assert payload["hazards"]["passed"] is False
        assert "reducible" in payload["hazards"]["error"]

    def test_malformed_yaml_reports_line(self, runner, tmp_path):
        p = tmp_path / "broken.yaml"
        p.write_text("horizon: 1.0\nregimes: [a: b\n")
        res = runner.invoke(main, ["validate", str(p)])
        assert res.exit_code == 2
        assert "line" in res.output


class TestPrice:
    def test_heston_method(self, runner, fast_single, tmp_path):
        out = tmp_path / "q.json"
        res = runner.invoke(main, ["price", fast_single, "--method", "heston",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        payload = json.loads(out.read_text())
        assert payload["result"]["price"] == pytest.approx(9.480714875447106)
        assert payload["config_hash"]
        assert payload["seed"] == 99

    def test_ie_equals_heston_single_regime(self, runner, fast_single, tmp_path):
        # probe on a grid node so the comparison is pure degeneracy, not
        # interpolation: v node 1 of linspace(1e-4, 8*theta_eff, 9) where the
        # grid top uses the pricing-measure long-run mean 0.0425
        v_node = 1e-4 + (8.0 * 0.0425 - 1e-4) / 8.0
        state = f"0,100,{v_node!r},0,0"
        cache = tmp_path / "cache"
        res_ie = runner.invoke(main, ["price", fast_single, "--method", "ie",
                                      "--state", state, "--cache-dir", str(cache)])
        assert res_ie.exit_code == 0, res_ie.output
        ie = json.loads(res_ie.output)["result"]["price"]
        res_h = runner.invoke(main, ["price", fast_single, "--method", "heston",
                                     "--state", state])
        heston = json.loads(res_h.output)["result"]["price"]
        assert abs(ie - heston) / heston < 1e-4

    def test_mc_ci_brackets_ie(self, runner, fast_two, tmp_path):
        cache = tmp_path / "cache"
        res_ie = runner.invoke(main, ["price", fast_two, "--method", "ie",
                                      "--cache-dir", str(cache)])
        ie = json.loads(res_ie.output)["result"]["price"]
        res_mc = runner.invoke(main, ["price", fast_two, "--method", "mc",
                                      "--n-paths", "40000", "--dt", "0.001953125"])
        mc = json.loads(res_mc.output)["result"]
        # coarse grids: allow the CI plus a grid-resolution margin
        assert mc["ci99"][0] - 0.25 < ie < mc["ci99"][1] + 0.25

    def test_payoff_and_state_overrides(self, runner, fast_single):
        res = runner.invoke(main, ["price", fast_single, "--method", "heston",
                                   "--payoff", "unit",
                                   "--state", "0,100,0.04,0,0"])
        assert res.exit_code == 0
        assert json.loads(res.output)["result"]["price"] == pytest.approx(
            0.9704455335485082)

    def test_bad_state_usage_error(self, runner, fast_single):
        res = runner.invoke(main, ["price", fast_single, "--state", "1,2"])
        assert res.exit_code == 2
        assert "t,s,v,regime,age" in res.output

    def test_bad_payoff_usage_error(self, runner, fast_single):
        res = runner.invoke(main, ["price", fast_single, "--method", "heston",
                                   "--payoff", "call"])
        assert res.exit_code == 2


class TestReproducibility:
    def test_mc_byte_identical_across_threads_and_repeats(self, runner, fast_two,
                                                          tmp_path):
        outs = []
        for idx, threads in enumerate(("1", "3", "1")):
            out = tmp_path / f"o{idx}.json"
            res = runner.invoke(main, ["price", fast_two, "--method", "mc",
                                       "--threads", threads, "--out", str(out)])
            assert res.exit_code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_ie_byte_identical_cold_and_warm(self, runner, fast_two, tmp_path):
        cache = tmp_path / "cache"
        outs = []
        for idx in range(2):
            out = tmp_path / f"ie{idx}.json"
            res = runner.invoke(main, ["price", fast_two, "--method", "ie",
                                       "--cache-dir", str(cache),
                                       "--out", str(out)])
            assert res.exit_code == 0, res.output
            outs.append(out.read_bytes())
        # second run hits the field cache yet emits identical bytes
        assert outs[0] == outs[1]


class TestHedgeAndFsCheck:
    def test_hedge_book_identity(self, runner, fast_two, tmp_path):
        cache = tmp_path / "cache"
        res = runner.invoke(main, ["hedge", fast_two, "--cache-dir", str(cache)])
        assert res.exit_code == 0, res.output
        payload = json.loads(res.output)["result"]
        assert payload["xi"] * 100.0 + payload["eps"] == pytest.approx(
            payload["phi"], abs=1e-9)

    def test_fs_check_schema(self, runner, fast_two, tmp_path):
        cache = tmp_path / "cache"
        res = runner.invoke(main, ["fs-check", fast_two, "--n-paths", "500",
                                   "--dt", "0.015625", "--cache-dir", str(cache)])
        assert res.exit_code == 0, res.output
        payload = json.loads(res.output)["result"]
        for key in ("mean_lt", "se_lt", "corr_with_m", "vega_integral"):
            assert key in payload


class TestSimulate:
    def test_dump_monotone_discount(self, runner, fast_two, tmp_path):
        dump = tmp_path / "paths.csv"
        res = runner.invoke(main, ["simulate", fast_two, "--n-paths", "64",
                                   "--dt", "0.0625", "--dump-paths", str(dump),
                                   "--max-dump", "10"])
        assert res.exit_code == 0, res.output
        import numpy as np
        data = np.genfromtxt(dump, delimiter=",", names=True)
        for p in range(10):
            disc = data["discount"][data["path"] == p]
            assert np.all(np.diff(disc) < 0.0)
        payload = json.loads(res.output)
        assert payload["result"]["n_paths"] == 64
