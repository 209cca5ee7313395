import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contagion_hjb import (
    ConfigError,
    DefaultState,
    ParameterError,
    all_states,
    data_path,
    flip,
    load_params,
    states_by_defaults_desc,
    theta,
    validate,
)


class TestDefaultState:
    def test_parse_and_label_roundtrip(self):
        z = DefaultState.from_bits("01")
        assert z.bits == (0, 1)
        assert z.label == "01"
        assert z.survivors == (1,)
        assert z.n_defaulted == 1

    def test_flip_examples(self):
        assert flip(DefaultState.from_bits("01"), 1).label == "11"
        assert flip(DefaultState.from_bits("11"), 2).label == "10"

    def test_flip_zero_is_identity(self):
        z = DefaultState.from_bits("10")
        assert flip(z, 0) is z

    def test_flip_out_of_range(self):
        with pytest.raises(ParameterError):
            DefaultState.from_bits("10").flip(3)

    @given(st.integers(min_value=1, max_value=8), st.data())
    def test_flip_involution(self, n, data):
        mask = data.draw(st.integers(min_value=0, max_value=(1 << n) - 1))
        j = data.draw(st.integers(min_value=1, max_value=n))
        z = DefaultState(n=n, mask=mask)
        assert z.flip(j).flip(j) == z

    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=1, max_size=8))
    def test_bits_roundtrip(self, bits):
        z = DefaultState.from_bits(bits)
        assert list(z.bits) == bits
        assert DefaultState.from_bits(z.label) == z

    def test_recursion_order_groups(self):
        groups = states_by_defaults_desc(2)
        assert [z.label for z in groups[0]] == ["11"]
        assert sorted(z.label for z in groups[1]) == ["01", "10"]
        assert [z.label for z in groups[2]] == ["00"]


class TestValidate:
    def test_table1_is_valid(self, table1):
        assert validate(table1) is table1

    def test_validate_idempotent(self, table1):
        assert validate(validate(table1)) is table1

    def test_generator_row_sum(self, table1):
        Q = table1.Q.copy()
        Q[0, 1] = 0.4
        with pytest.raises(ParameterError, match="generator row 1"):
            validate(table1.replace(Q=Q))

    def test_generator_negative_offdiagonal(self, table1):
        Q = np.array([[0.5, -0.5], [1.0, -1.0]])
        with pytest.raises(ParameterError, match="generator row 1"):
            validate(table1.replace(Q=Q))

    def test_gamma_boundary_excluded(self, table1):
        with pytest.raises(ParameterError, match=r"gamma must lie in \(0,1\)"):
            validate(table1.replace(gamma=1.0))

    def test_g_positive(self, table1):
        g = table1.g.copy()
        g[0] = 0.0
        with pytest.raises(ParameterError, match="g must be positive"):
            validate(table1.replace(g=g))

    def test_sigma_positive_definite(self, table1):
        sigma = table1.sigma.copy()
        sigma[1, 1, :] = sigma[1, 0, :]  # collinear rows
        with pytest.raises(ParameterError, match="positive definite"):
            validate(table1.replace(sigma=sigma))

    def test_missing_h_detected(self, table1):
        h = table1.h.copy()
        z = table1.state("01")
        h[1, z.mask, 0] = np.nan
        with pytest.raises(ParameterError, match="missing default intensity h for stock 1"):
            validate(table1.replace(h=h))

    def test_nonpositive_nu_detected(self, table1):
        nu = table1.nu.copy()
        nu[0, 0] = 0.0
        with pytest.raises(ParameterError, match="nu must be positive"):
            validate(table1.replace(nu=nu))

    def test_too_many_stocks_rejected(self, table1):
        with pytest.raises(ParameterError, match="exceeds the supported maximum"):
            validate(table1.replace(n=17))


class TestTheta:
    def test_table1_regime1_all_alive(self, table1):
        got = theta(table1, 0, table1.state("00"))
        np.testing.assert_allclose(got, [1.4, 1.2], rtol=0, atol=1e-15)

    def test_table1_regime2_stock2_defaulted(self, table1):
        got = theta(table1, 1, table1.state("01"))
        assert got[0] == pytest.approx(2.34, abs=1e-14)

    def test_zero_premium_case(self, table1):
        params = table1.replace(
            mu=np.tile(table1.r[:, None], (1, table1.n)),
            h=np.zeros_like(table1.h),
        )
        for z in all_states(params.n):
            for i in range(params.m):
                np.testing.assert_array_equal(theta(params, i, z), 0.0)

    def test_regime_out_of_range(self, table1):
        with pytest.raises(ParameterError):
            theta(table1, 5, table1.state("00"))


class TestConfigLoading:
    def test_missing_nu_state_named(self, tmp_path, table1):
        text = data_path("table1.cfg").read_text()
        broken = text.replace('"11" = [2.6, 5.0]\n', "")
        path = tmp_path / "broken.cfg"
        path.write_text(broken)
        params = load_params(path)
        with pytest.raises(ParameterError, match="missing claim intensity nu for state '11'"):
            validate(params)

    def test_missing_h_entry_named(self, tmp_path):
        text = data_path("table1.cfg").read_text()
        broken = text.replace('"01" = { 1 = [0.7, 1.0] }\n', "")
        path = tmp_path / "broken.cfg"
        path.write_text(broken)
        with pytest.raises(ParameterError, match="missing default intensity h for stock 1 at state '01'"):
            validate(load_params(path))

    def test_per_state_premium_table(self, tmp_path, table1):
        text = data_path("table1.cfg").read_text()
        per_state = text.replace(
            "p = [0.8, 0.5]",
            'p = { "00" = [0.8, 0.5], "10" = [0.8, 0.5], "01" = [0.8, 0.5], "11" = [0.7, 0.4] }',
        )
        path = tmp_path / "per_state.cfg"
        path.write_text(per_state)
        params = validate(load_params(path))
        assert params.p[0, 0] == 0.8
        assert params.p[0, params.state("11").mask] == 0.7
        np.testing.assert_array_equal(table1.p[:, 0], params.p[:, 0])

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[model\nn = 2")
        with pytest.raises(ConfigError):
            load_params(path)

    def test_missing_section(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[model]\nn = 2\nm = 2\nd = 2\nd_bar = 1\ngamma = 0.5\nT = 1.0\n")
        with pytest.raises(ConfigError, match="market"):
            load_params(path)

    def test_params_arrays_immutable(self, table1):
        with pytest.raises(ValueError):
            table1.Q[0, 0] = 1.0
