"""
Тесты для src/cli.py (подкоманды и коды выхода).
"""
import json

import pytest

from src.cli import _out_dir, build_parser, main
from src.config import settings


def _json_tail(out: str) -> dict:
    """Последний JSON-объект в выводе"""
    return json.loads(out[out.rindex("\n{") + 1 :] if "\n{" in out else out)


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_check_filter_passes(capsys):
    assert main(["check", "--filter", "clamped_root"]) == 0
    out = capsys.readouterr().out
    assert "clamped_root" in out and "PASS" in out


def test_check_unknown_filter(capsys):
    assert main(["check", "--filter", "no_such_check"]) == 2
    assert _json_tail(capsys.readouterr().out)["code"] == "config.invalid"


def test_missing_config_is_config_error(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "out")])
    assert code == 2
    payload = _json_tail(capsys.readouterr().out)
    assert payload["status"] == "error"
    assert payload["code"] == "config.invalid"


def test_non_empty_out_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("geometry.nx = 8\ngeometry.nz = 4\ntime.N = 1\n")
    out = tmp_path / "out"
    out.mkdir()
    (out / "old.csv").write_text("x\n")
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    assert _json_tail(capsys.readouterr().out)["code"] == "cli.output_exists"


def test_bases_dump(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("basis.k = 1\nbasis.gamma_cells = 16\nbasis.lift_nodes = 64\n")
    dump = tmp_path / "bases.json"
    assert main(["bases", "--config", str(cfg), "--json", str(dump)]) == 0
    assert dump.exists()
    assert json.loads(dump.read_text()) == json.loads(capsys.readouterr().out)


@pytest.mark.slow
def test_run_writes_artifacts(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("geometry.nx = 8\ngeometry.nz = 4\ntime.T = 0.01\ntime.N = 2\ntime.fsp_substeps = 2\nbasis.k = 1\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["status"] == "ok"
    assert (out / "ledger.csv").exists() and (out / "manifest.json").exists()


def test_unexpected_exception_is_json_error(monkeypatch, capsys):
    """Исключение вне иерархии FsiError: JSON internal.error и код 1."""

    def boom(args):
        raise OSError("disk full")

    monkeypatch.setattr("src.cli.cmd_check", boom)
    assert main(["check"]) == 1
    payload = _json_tail(capsys.readouterr().out)
    assert payload["status"] == "error"
    assert payload["code"] == "internal.error"
    assert payload["detail"] == {"message": "disk full", "type": "OSError"}


def test_default_out_under_artifacts_dir(tmp_path, monkeypatch, capsys):
    """Без --out каталог вывода — ARTIFACTS_DIR/<имя конфига>."""
    monkeypatch.setattr(settings, "ARTIFACTS_DIR", tmp_path / "artifacts")
    assert _out_dir(None, "configs/demo.cfg") == tmp_path / "artifacts" / "demo"
    assert _out_dir(str(tmp_path / "x"), "configs/demo.cfg") == tmp_path / "x"

    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("geometry.nx = 8\ngeometry.nz = 4\ntime.N = 1\n")
    taken = tmp_path / "artifacts" / "tiny"
    taken.mkdir(parents=True)
    (taken / "old.csv").write_text("x\n")
    assert main(["run", "--config", str(cfg)]) == 2
    assert _json_tail(capsys.readouterr().out)["detail"]["path"] == str(taken)
