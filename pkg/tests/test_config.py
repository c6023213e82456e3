import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tddlink.config import (
    ConfigError,
    RngStream,
    SystemConfig,
    complex_normal,
    config_to_dict,
    db_to_linear,
    dump_config,
    linear_to_db,
    load_scenario_file,
    parse_config,
    validate_config,
)


class TestDbConversion:
    @pytest.mark.parametrize("db, expected", [(0, 1.0), (10, 10.0), (-10, 0.1)])
    def test_examples(self, db, expected):
        assert db_to_linear(db) == pytest.approx(expected, rel=1e-15)

    def test_array_input(self):
        out = db_to_linear(np.array([0.0, 20.0]))
        np.testing.assert_allclose(out, [1.0, 100.0])

    @given(st.floats(-60, 60))
    def test_inverse(self, x):
        assert linear_to_db(db_to_linear(x)) == pytest.approx(x, abs=1e-9)


class TestValidation:
    def test_valid_example(self):
        cfg = SystemConfig(M=16, K=8, T=30, tau_r=8, tau_f=0, rho_f=1.0, rho_r=1.0)
        assert validate_config(cfg) is cfg

    def test_more_users_than_pilots(self):
        with pytest.raises(ConfigError, match="K"):
            SystemConfig(M=16, K=9, T=30, tau_r=8, rho_f=1.0, rho_r=1.0)

    def test_no_data_symbol(self):
        with pytest.raises(ConfigError, match="data"):
            SystemConfig(M=16, K=8, T=30, tau_r=29, tau_f=0, rho_f=1.0, rho_r=1.0)

    def test_last_feasible_length(self):
        cfg = SystemConfig(M=16, K=8, T=30, tau_r=28, rho_f=1.0, rho_r=1.0)
        assert cfg.data_symbols == 1

    @pytest.mark.parametrize("field, value", [("rho_f", -1.0), ("rho_r", 0.0), ("w", np.nan)])
    def test_nonpositive_values(self, field, value):
        kwargs = dict(M=4, K=2, T=10, tau_r=2, rho_f=1.0, rho_r=1.0)
        kwargs[field] = value
        with pytest.raises(ConfigError):
            SystemConfig(**kwargs)

    def test_wrong_length_list(self):
        with pytest.raises(ConfigError):
            SystemConfig(M=4, K=2, T=10, tau_r=2, rho_f=[1.0, 2.0, 3.0], rho_r=1.0)


class TestSystemConfig:
    def test_scalars_broadcast(self):
        cfg = SystemConfig(M=4, K=3, T=10, tau_r=3, rho_f=2.0, rho_r=0.5)
        assert cfg.rho_f == (2.0, 2.0, 2.0)
        assert cfg.w == (1.0, 1.0, 1.0)
        assert cfg.is_homogeneous

    def test_variances_sum_to_one(self):
        cfg = SystemConfig(M=4, K=3, T=10, tau_r=3, rho_f=1.0, rho_r=[0.01, 1.0, 100.0])
        np.testing.assert_array_equal(cfg.est_var + cfg.err_var, 1.0)
        np.testing.assert_allclose(cfg.err_var, 1.0 / (1.0 + 3 * np.array([0.01, 1.0, 100.0])))

    def test_replace_revalidates(self):
        cfg = SystemConfig(M=4, K=2, T=10, tau_r=2, rho_f=1.0, rho_r=1.0)
        assert cfg.replace(tau_r=5).tau_r == 5
        with pytest.raises(ConfigError):
            cfg.replace(tau_r=1)


configs = st.builds(
    lambda K, extra, M, snr_f, snr_r, w: SystemConfig(
        M=M, K=K, T=K + extra + 2, tau_r=K + extra, rho_f=snr_f[:K], rho_r=snr_r[:K], w=w[:K]),
    K=st.integers(1, 4),
    extra=st.integers(0, 5),
    M=st.integers(1, 16),
    snr_f=st.lists(st.floats(1e-3, 1e4), min_size=4, max_size=4),
    snr_r=st.lists(st.floats(1e-3, 1e4), min_size=4, max_size=4),
    w=st.lists(st.floats(0.1, 10), min_size=4, max_size=4),
)


class TestSerialization:
    @given(configs)
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, cfg):
        assert parse_config(config_to_dict(cfg)) == cfg

    def test_db_keys_and_offset(self):
        cfg = parse_config({"M": 8, "K": 2, "T": 30, "tau_r": 2, "rho_f_db": [10, 20], "rho_r_db": "offset:10"})
        np.testing.assert_allclose(cfg.rho_f, [10.0, 100.0])
        np.testing.assert_allclose(cfg.rho_r, [1.0, 10.0])

    def test_missing_key_rejected(self):
        with pytest.raises(ConfigError, match="tau_r"):
            parse_config({"M": 8, "K": 2, "T": 30, "rho_f_db": 0, "rho_r_db": 0})

    def test_bad_offset_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"M": 8, "K": 2, "T": 30, "tau_r": 2, "rho_f_db": 0, "rho_r_db": "minus:3"})

    def test_file_round_trip(self, tmp_path):
        cfg = SystemConfig(M=8, K=3, T=20, tau_r=4, tau_f=1, rho_f=[1.0, 3.0, 7.5], rho_r=0.2, w=[1, 2, 3])
        path = tmp_path / "s.yaml"
        dump_config(cfg, path, seed=7)
        loaded, extra = load_scenario_file(path)
        assert loaded == cfg
        assert extra["seed"] == 7


class TestRngStream:
    def test_determinism(self):
        a = RngStream(5, (1, 2)).generator().standard_normal(10_000)
        b = RngStream(5, (1, 2)).generator().standard_normal(10_000)
        np.testing.assert_array_equal(a, b)

    def test_substreams_differ(self):
        s = RngStream(5)
        a = s.child(0).generator().standard_normal(100)
        b = s.child(1).generator().standard_normal(100)
        assert not np.allclose(a, b)

    def test_spawn_matches_children(self):
        s = RngStream(9)
        assert s.spawn(3) == [s.child(i) for i in range(3)]

    def test_complex_normal_moments(self, rng):
        z = complex_normal(rng, 200_000, var=2.0)
        assert np.var(z.real) == pytest.approx(1.0, rel=0.02)
        assert np.var(z.imag) == pytest.approx(1.0, rel=0.02)
        assert abs(np.mean(z.real * z.imag)) < 0.02
