"""Tests for config parsing, validation, and canonical echo."""

import pytest

from pentajm.config import (
    COMMANDS,
    RunConfig,
    build_config,
    load_config,
    parse_config_text,
)
from pentajm.errors import ConfigError
from pentajm.potmat import PotentialModel


def make(command="scatter", text="", **overrides):
    return build_config(command, parse_config_text(text), **overrides)


class TestParsing:
    def test_comments_and_whitespace(self):
        text = """
        # leading comment
        beta = 4.5   # trailing comment

        matrix.size   =  32
        """
        entries = parse_config_text(text)
        assert entries["beta"][0] == "4.5"
        assert entries["matrix.size"][0] == "32"

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config_text("beta = 1\njust some words\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("beta = 1\nbeta = 2\n")

    def test_empty_key_rejected(self):
        with pytest.raises(ConfigError, match="empty key"):
            parse_config_text("= 3\n")

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match=r"unknown key 'betta' \(line 1\)"):
            make(text="betta = 4.0")

    @pytest.mark.parametrize(
        "line,fragment",
        [
            ("ell = two", "expected an integer"),
            ("beta = abc", "expected a number"),
            ("beta = inf", "finite"),
            ("window.near = 1.0", "'low, high'"),
            ("family = hermite", "must be one of"),
            ("figures = maybe", "expected on or off"),
            ("n_list = ", "integer list"),
        ],
    )
    def test_bad_values_name_the_key(self, line, fragment):
        key = line.split("=")[0].strip()
        with pytest.raises(ConfigError, match=fragment) as exc:
            make(text=line)
        assert key in str(exc.value)


class TestValidation:
    def test_defaults_are_valid_for_every_command(self):
        for command in COMMANDS:
            cfg = make(command=command)
            assert cfg.command == command

    def test_unknown_command_rejected(self):
        with pytest.raises(ConfigError, match="command"):
            make(command="explode")

    @pytest.mark.parametrize(
        "text,key",
        [
            ("strength = 0.25", "strength"),  # critical coupling boundary
            ("ell = -1", "ell"),
            ("beta = -1.0", "beta"),
            ("lambda = 0", "lambda"),
            ("k = -2", "k"),
            ("potential.range = 0", "potential.range"),
            ("n_list = 100, 100", "n_list"),
            ("x_start = 0", "x_start"),
            ("x_stop = 0.0005", "x_stop"),
            ("x_count = 1", "x_count"),
            ("window.near = 2.0, 1.0", "window.near"),
            ("e_start = 0", "e_start"),
            ("e_stop = 0.1", "e_stop"),
            ("e_count = 0", "e_count"),
            ("matrix.size = 7", "matrix.size"),
            ("tol.greens = 0", "tol.greens"),
            ("tol.quadrature = 2", "tol.quadrature"),
            ("check.orders = 0", "check.orders"),
            ("check.systems = 0", "check.systems"),
            ("seed = -1", "seed"),
            ("jobs = -2", "jobs"),
        ],
    )
    def test_precondition_violations(self, text, key):
        with pytest.raises(ConfigError) as exc:
            make(text=text)
        assert key in str(exc.value)

    def test_single_point_grid_needs_matching_endpoints(self):
        with pytest.raises(ConfigError, match="e_count"):
            make(text="e_count = 1")
        cfg = make(text="e_count = 1\ne_start = 2.0\ne_stop = 2.0")
        assert cfg.e_count == 1

    def test_supercritical_threshold_is_ell_dependent(self):
        make(text="ell = 0\nstrength = 0.26")
        with pytest.raises(ConfigError, match="critical"):
            make(text="ell = 1\nstrength = 0.26")


class TestDomainObjects:
    def test_potential_model_kinds(self):
        cfg = make(text="potential.kind = gaussian\npotential.v0 = -0.5")
        model = cfg.potential_model()
        assert isinstance(model, PotentialModel)
        assert cfg.potential_v0 == -0.5

    def test_none_potential_maps_to_none(self):
        cfg = make(text="potential.kind = none")
        assert cfg.potential_model() is None

    def test_physical_params_k_override(self):
        cfg = make()
        assert cfg.physical_params().k == cfg.k
        assert cfg.physical_params(1.25).k == 1.25

    def test_effective_jobs_floor(self):
        assert make(text="jobs = 0").effective_jobs() >= 1
        assert make(text="jobs = 3").effective_jobs() == 3


class TestOverridesAndEcho:
    def test_cli_overrides_win(self):
        cfg = make(text="precision = double\njobs = 2", precision="extended", jobs=7)
        assert cfg.precision == "extended"
        assert cfg.jobs == 7

    def test_bad_precision_override_rejected(self):
        with pytest.raises(ConfigError, match="precision"):
            make(precision="quad")

    def test_echo_round_trip(self):
        # feeding the echoed pairs back as a config reproduces the config
        cfg = make(text="beta = 2.5\nmatrix.size = 48\nwindow.far = 21.0, 39.0")
        text = "\n".join(f"{k} = {v}" for k, v in cfg.echo_items())
        again = make(text=text)
        for key in ("beta", "matrix_size", "window_far", "n_list", "strength"):
            assert getattr(again, key) == getattr(cfg, key)

    def test_echo_is_sorted_and_omits_execution_knobs(self):
        items = make().echo_items()
        keys = [k for k, _ in items]
        assert keys == sorted(keys)
        assert "jobs" not in keys and "figures" not in keys
        assert "matrix.size" in keys and "lambda" in keys

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "absent.cfg"), "scatter")

    def test_load_config_reads_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("matrix.size = 16\n# comment\n", encoding="utf-8")
        cfg = load_config(str(path), "scatter", out_dir=str(tmp_path))
        assert cfg.matrix_size == 16
        assert cfg.out_dir == str(tmp_path)
        assert isinstance(cfg, RunConfig)
