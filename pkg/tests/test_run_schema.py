"""
Тесты для src/run_schema.py (валидация конфигурации прогона).
"""
import pytest

from src.errors import ConfigError
from src.run_schema import RunConfig, build_run_config, load_run_config


def _paths(exc) -> list:
    return [e["path"] for e in exc.value.detail["errors"]]


def test_defaults_are_valid():
    cfg = build_run_config()
    assert isinstance(cfg, RunConfig)
    assert cfg.dt == pytest.approx(0.01)
    assert cfg.fluid.interface_flux == "closed"
    assert cfg.plate.nonlinearity == "linear_zero"


def test_overrides_merge(tiny_tree):
    cfg = build_run_config(tiny_tree, {"time": {"N": 4}})
    assert cfg.time.N == 4
    assert cfg.time.T == pytest.approx(0.01)
    assert cfg.dt == pytest.approx(0.0025)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as exc:
        build_run_config({"fluid": {"viscosity": 1.0}})
    assert "fluid.viscosity" in _paths(exc)


@pytest.mark.parametrize(
    "tree",
    [
        {"time": {"T": 0.0}},
        {"time": {"N": 0}},
        {"fluid": {"gamma": 1.0}},
        {"fluid": {"a": 8.0}},
        {"fluid": {"mu": 1.0, "lam": -0.7}},
        {"fluid": {"dimension": 3, "gamma": 1.5}},
        {"fluid": {"eps": 0.0}},
        {"fluid": {"interface_flux": "leaky"}},
        {"plate": {"nonlinearity": "kirchhoff"}},
        {"plate": {"nonlinearity": "berger_type", "berger_q1": 0.0, "berger_q2": 1.0}},
        {"basis": {"k": 1}, "plate": {"w0_modes": [0.1, 0.2]}},
        {"basis": {"k": 1}, "fluid": {"u0_modes": [0.1, 0.2, 0.3]}},
    ],
)
def test_invalid_configs(tree):
    with pytest.raises(ConfigError) as exc:
        build_run_config(tree)
    assert exc.value.code == "config.invalid"


def test_zero_eps_allowed_explicitly():
    cfg = build_run_config({"fluid": {"eps": 0.0, "allow_zero_eps": True}})
    assert cfg.fluid.eps == 0.0


def test_3d_gamma_above_threshold():
    assert build_run_config({"fluid": {"dimension": 3, "gamma": 1.8}}).fluid.dimension == 3


def test_load_run_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("geometry.nx = 8\ngeometry.nz = 4\ntime.N = 2\nplate.w0_modes = [0.01]\n")
    cfg = load_run_config(p)
    assert (cfg.geometry.nx, cfg.geometry.nz, cfg.time.N) == (8, 4, 2)
    assert cfg.plate.w0_modes == [0.01]
    with pytest.raises(ConfigError) as exc:
        load_run_config(tmp_path / "missing.cfg")
    assert exc.value.detail["path"].endswith("missing.cfg")
    p.write_text("time.N = 2\ntime.N = 3\n")
    with pytest.raises(ConfigError, match="parse error"):
        load_run_config(p)
