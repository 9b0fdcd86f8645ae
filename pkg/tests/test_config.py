import pytest

from dampscat.config import DEFAULTS, load_config, validate
from dampscat.errors import ConfigError


def _write(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    return p


def test_minimal_config_fills_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, 'coefficient = { kind = "zero" }\n'))
    assert cfg.raw["seed"] == DEFAULTS["seed"]
    assert cfg.tol == 1e-10 and cfg.time_grid().size == 13


def test_missing_coefficient(tmp_path):
    with pytest.raises(ConfigError, match="coefficient"):
        load_config(_write(tmp_path, "seed = 1\n"))


@pytest.mark.parametrize("text", [
    'coefficient = { kind = "zero" }\nbogus = 1\n',
    'coefficient = { kind = "nope" }\n',
    'coefficient = { kind = "zero" }\n[times]\nt_min = 5.0\nt_max = 1.0\n',
    'coefficient = { kind = "zero" }\n[tolerances]\nintegrator = -1.0\n',
    'coefficient = { kind = "zero" }\nseed = "x"\n',
    'coefficient = { kind = "zero" }\n[regime]\nfoo = 1\n',
    'coefficient = { kind = "zero" }\nspectral = { kind = "moon" }\n',
    'coefficient = { kind = "zero"\n',
])
def test_invalid_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_regime_overrides_reach_coefficient():
    cfg = validate({"coefficient": {"kind": "mu_over_1pt", "mu": 0.3},
                    "regime": {"mu_upper": 0.35, "mu_plus": 0.4}})
    assert cfg.coefficient_model().mu_upper == 0.35 and cfg.mu_plus == 0.4


def test_hash_tracks_content():
    a = validate({"coefficient": {"kind": "zero"}})
    b = validate({"coefficient": {"kind": "zero"}, "seed": 1})
    assert a.config_hash() == validate({"coefficient": {"kind": "zero"}}).config_hash()
    assert a.config_hash() != b.config_hash()
    assert a.with_overrides(seed=1).config_hash() == b.config_hash()
