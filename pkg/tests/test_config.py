"""Strict config parsing and resolution into runtime objects."""

import json

import pytest

from cogrelay.config import (DEFAULT_CONFIG, ConfigError, config_hash,
                             load_config, nearest_index, resolve_config)
from cogrelay.mdp import truncated_exponential_levels


def test_empty_document_is_a_complete_run():
    rc = resolve_config(None)
    params = rc.model_params()
    assert params.queues.lambda_s == 0.5
    assert rc.grids().shape == (10, 10, 4, 11, 21)
    assert rc.grids().n_states == 92_400
    assert rc.solver_config().discount == 0.98
    assert rc.solver_mode() == ("joint", None)


def test_unknown_keys_are_rejected_with_their_path():
    with pytest.raises(ConfigError, match="state_grids.rho_p_levls"):
        load_config({"state_grids": {"rho_p_levls": [0.1]}})
    with pytest.raises(ConfigError, match="unknown config key: fudge"):
        load_config({"fudge": 1})


def test_sections_must_be_mappings():
    with pytest.raises(ConfigError, match="must be a section"):
        load_config({"channel": 5})


def test_merge_preserves_sibling_defaults():
    cfg = load_config({"queues": {"lambda_s": 0.4}})
    assert cfg["queues"]["lambda_s"] == 0.4
    assert cfg["queues"]["mu_s_max"] == 0.8
    assert cfg["channel"] == DEFAULT_CONFIG["channel"]


def test_loaded_documents_do_not_alias_the_defaults():
    cfg = load_config(None)
    cfg["queues"]["lambda_s"] = 0.9
    assert DEFAULT_CONFIG["queues"]["lambda_s"] == 0.5


def test_db_fields_resolve_to_linear_units():
    rc = resolve_config({"channel": {"gamma_s_db": 10.0},
                         "power": {"p_av_db": 5.0}})
    assert rc.channel().gamma_s == pytest.approx(10.0, rel=1e-15)
    assert rc.power().p_av == pytest.approx(10.0 ** 0.5, rel=1e-15)
    assert rc.timing().tau == pytest.approx(0.3e-3, rel=1e-15)
    assert rc.sensing().n_samples == 300


def test_beta_sp_defaults_to_beta_s():
    rc = resolve_config(None)
    assert rc.channel().beta_sp == rc.channel().beta_s
    rc = resolve_config({"channel": {"beta_sp": 0.7}})
    assert rc.channel().beta_sp == 0.7


def test_reference_power_defaults_to_budget():
    rc = resolve_config(None)
    assert rc.power().reference_power == rc.power().p_av
    rc = resolve_config({"power": {"p_ref_db": 0.0}})
    assert rc.power().reference_power == pytest.approx(1.0, rel=1e-15)


def test_solver_mode_resolution():
    rc = resolve_config({"solver": {"mode": "fixed_pd", "pinned_pd": 0.5}})
    assert rc.solver_mode() == ("fixed_pd", 5)
    rc = resolve_config({"solver": {"mode": "fixed_ic", "pinned_ic_db": -15.0}})
    assert rc.solver_mode() == ("fixed_ic", 0)


def test_solver_mode_strictness():
    with pytest.raises(ConfigError, match="pinned_pd is required"):
        resolve_config({"solver": {"mode": "fixed_pd"}}).solver_mode()
    with pytest.raises(ConfigError, match="pinned_ic_db is required"):
        resolve_config({"solver": {"mode": "fixed_ic"}}).solver_mode()
    with pytest.raises(ConfigError, match="not on the configured grid"):
        resolve_config({"solver": {"mode": "fixed_pd",
                                   "pinned_pd": 0.55}}).solver_mode()
    with pytest.raises(ConfigError, match="must be joint"):
        resolve_config({"solver": {"mode": "greedy"}}).solver_mode()


def test_sweep_spec_defaults():
    spec = resolve_config(None).sweep_spec()
    assert spec.variable == "pd"
    assert spec.grid == tuple(resolve_config(None).action_grids().pd_levels)
    assert len(spec.ic_fixed) == 3
    assert spec.pd_fixed == (0.1, 0.9)
    assert spec.rho_p == (0.1, 0.9)


def test_sweep_spec_db_grids():
    spec = resolve_config({"sweep": {"variable": "ic"}}).sweep_spec()
    assert len(spec.grid) == 21
    assert min(spec.grid) == pytest.approx(10.0 ** -1.5, rel=1e-15)
    spec = resolve_config({"sweep": {"variable": "pav"}}).sweep_spec()
    assert len(spec.grid) == 11
    spec = resolve_config(
        {"sweep": {"variable": "pav", "grid_db": [0.0, 40.0]}}).sweep_spec()
    assert spec.grid == (1.0, pytest.approx(1.0e4, rel=1e-12))


def test_sweep_spec_strictness():
    with pytest.raises(ConfigError, match="non-empty"):
        resolve_config({"sweep": {"grid": []}}).sweep_spec()
    with pytest.raises(ConfigError, match="must be pd, ic or pav"):
        resolve_config({"sweep": {"variable": "power"}}).sweep_spec()
    with pytest.raises(ConfigError, match=r"lie in \[0, 1\]"):
        resolve_config({"sweep": {"grid": [0.5, 1.5]}}).sweep_spec()


def test_sim_config_resolution_and_seed_override():
    rc = resolve_config({"sim": {"n_slots": 5000, "seed": 9, "pd": 0.6}})
    cfg = rc.sim_config()
    assert (cfg.n_slots, cfg.seed, cfg.pd) == (5000, 9, 0.6)
    assert cfg.pf is None and cfg.pi1 is None
    assert rc.sim_config(seed=77).seed == 77


def test_config_hash_is_order_invariant():
    a = {"queues": {"lambda_s": 0.4, "mu_s_max": 0.8}}
    b = {"queues": {"mu_s_max": 0.8, "lambda_s": 0.4}}
    assert config_hash(load_config(a)) == config_hash(load_config(b))
    c = {"queues": {"lambda_s": 0.41}}
    assert config_hash(load_config(a)) != config_hash(load_config(c))
    rc = resolve_config(a)
    assert rc.sha256 == config_hash(rc.raw)


def test_nearest_index():
    assert nearest_index(0.23, (0.0, 0.2, 0.4)) == 1
    assert nearest_index(5.0, (0.0, 0.2, 0.4)) == 2


def test_explicit_power_levels_override_quantisation():
    rc = resolve_config({"state_grids": {"p_s_levels": [0.5, 1.5],
                                         "p_s_stationary": [0.3, 0.7]}})
    sg = rc.state_grids()
    assert sg.p_s_levels == (0.5, 1.5)
    assert sg.p_s_stationary == (0.3, 0.7)
    rc = resolve_config({"state_grids": {"p_s_levels": [0.5, 1.5]}})
    assert rc.state_grids().p_s_stationary == (0.5, 0.5)


def test_default_power_levels_follow_the_truncated_exponential():
    rc = resolve_config(None)
    p_av = rc.power().p_av
    levels, probs = truncated_exponential_levels(p_av, p_av, 4)
    sg = rc.state_grids()
    assert sg.p_s_levels == levels
    assert sg.p_s_stationary == probs
    assert rc.state_grids(p_av=2.0).p_s_levels == \
        truncated_exponential_levels(2.0, 2.0, 4)[0]


def test_config_files_load_and_fail_loudly(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"queues": {"lambda_s": 0.3}}))
    assert load_config(path)["queues"]["lambda_s"] == 0.3

    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)

    arr = tmp_path / "array.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(arr)
