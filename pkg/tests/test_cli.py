from __future__ import annotations

import orjson
import pytest

from src import cli, db


@pytest.fixture(autouse=True)
def _history(tmp_path, monkeypatch):
    monkeypatch.setattr(db, "get_db_path", lambda: str(tmp_path / "runs.sqlite3"))
    db.reset_engine()
    yield
    db.reset_engine()


def _run(capsys, *argv):
    code = cli.main(list(argv) + ["--quiet"])
    return code, capsys.readouterr().out


def test_qsol_at_point(capsys):
    code, out = _run(capsys, "qsol", "--p", "5", "--g", "1", "--point", "0,1,2", "--no-store")
    assert code == 0
    doc = orjson.loads(out)
    assert doc["verdict"] == "pass"
    assert doc["result"]["matrix"] == [[4, 0, 1]]


def test_csv_matrix(capsys):
    code, out = _run(capsys, "hasse-witt", "--p", "5", "--g", "1", "--at", "0,1,2", "--format", "csv",
                     "--no-store")
    assert code == 0
    assert out.splitlines() == [",c1", "r1,3"]


def test_csv_without_matrix_is_rejected(capsys):
    code, out = _run(capsys, "gm-check", "--g", "1", "--format", "csv", "--no-store")
    assert code == 2
    assert orjson.loads(out)["error"] == "InvalidParameter"


def test_degenerate_regime_exit_code(capsys):
    code, out = _run(capsys, "qsol", "--p", "3", "--s", "1", "--g", "2", "--no-store")
    assert code == 2
    doc = orjson.loads(out)
    assert doc["error"] == "DegenerateRegime"
    assert doc["exit"] == 2


def test_bad_prime_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["qsol", "--p", "4", "--g", "1"])
    assert exc.value.code == 2


def test_missing_parameter(capsys):
    code, out = _run(capsys, "verify-kz", "--g", "1", "--no-store")
    assert code == 2
    assert "--p" in orjson.loads(out)["message"]


def test_config_file_sits_under_flags(tmp_path, capsys):
    cfg = tmp_path / "run.env"
    cfg.write_text("p=7\ng=1\npoint=0,1,2\n", encoding="utf-8")
    code, out = _run(capsys, "qsol", "--config", str(cfg), "--p", "5", "--no-store")
    assert code == 0
    doc = orjson.loads(out)
    assert doc["result"]["p"] == 5
    assert doc["result"]["point"] == [0, 1, 2]


def test_missing_config_file(tmp_path, capsys):
    code, out = _run(capsys, "qsol", "--config", str(tmp_path / "nope.env"), "--no-store")
    assert code == 2


def test_output_is_deterministic(capsys):
    argv = ["verify-kz", "--p", "5", "--g", "1", "--point", "0,1,2", "--no-store"]
    first = _run(capsys, *argv)
    second = _run(capsys, *argv)
    assert first == second
    assert first[0] == 0


def test_runs_are_stored(capsys):
    code, _ = _run(capsys, "hasse-witt", "--p", "5", "--g", "1")
    assert code == 0
    with db.get_engine().connect() as conn:
        rows = conn.exec_driver_sql("SELECT subcommand, verdict, exit_code FROM runs").fetchall()
        checks = conn.exec_driver_sql("SELECT name, passed FROM checks").fetchall()
    assert [tuple(r) for r in rows] == [("hasse-witt", "pass", 0)]
    assert [tuple(c) for c in checks] == [("det_certificate", 1)]


def test_local_solve_match(capsys):
    code, out = _run(capsys, "local-solve", "--p", "5", "--g", "1", "--point", "0,1,2", "--degree", "6",
                     "--match", "--no-store")
    assert code == 0
    doc = orjson.loads(out)
    assert doc["result"]["lattice"]["rank"] == 1
    assert doc["result"]["match"]["pass"]


def test_cartier_from_file(tmp_path, capsys):
    form = {"components": [{"vars": ["t1"], "terms": [{"exp": [2], "c": "1"}], "mod": "3^1", "cutoff": 8}]}
    path = tmp_path / "form.json"
    path.write_bytes(orjson.dumps(form))
    code, out = _run(capsys, "cartier", "--p", "3", "--input", str(path), "--iterate", "2", "--no-store")
    assert code == 0
    steps = orjson.loads(out)["result"]["steps"]
    assert [s["certified_degree"] for s in steps] == [2, 0]
    assert steps[1]["zero"]


def test_p_curvature_kz_at_point(capsys):
    code, out = _run(capsys, "p-curvature", "--p", "7", "--g", "1", "--point", "0,1,3", "--no-store")
    assert code == 0
    assert len(orjson.loads(out)["result"]["psi"]) == 3


def test_config_file_quoting_and_export(tmp_path, capsys):
    cfg = tmp_path / "run.env"
    cfg.write_text('# run file\nexport p=7\ng="1"\npoint=\'0,1,2\'\nseed=\n', encoding="utf-8")
    code, out = _run(capsys, "qsol", "--config", str(cfg), "--no-store")
    assert code == 0
    doc = orjson.loads(out)
    assert doc["result"]["p"] == 7
    assert doc["result"]["point"] == [0, 1, 2]


def test_gm_p_curvature_stores_measured_sigma(tmp_path, capsys):
    cfg = tmp_path / "run.env"
    cfg.write_text("sigma=1\n", encoding="utf-8")
    code, out = _run(capsys, "p-curvature", "--config", str(cfg), "--p", "7", "--g", "1",
                     "--point", "0,1,3", "--connection", "gm")
    assert code == 0
    assert orjson.loads(out)["result"]["sigma"] == -1
    with db.get_engine().connect() as conn:
        rows = conn.exec_driver_sql("SELECT subcommand, sigma FROM runs").fetchall()
    assert [tuple(r) for r in rows] == [("p-curvature", -1)]


def test_runs_without_gauss_manin_store_no_sigma(capsys):
    code, _ = _run(capsys, "hasse-witt", "--p", "5", "--g", "1")
    assert code == 0
    with db.get_engine().connect() as conn:
        rows = conn.exec_driver_sql("SELECT sigma FROM runs").fetchall()
    assert [tuple(r) for r in rows] == [(None,)]


def test_config_file_needs_dotenv(tmp_path, monkeypatch):
    import sys

    from src.config import read_run_file
    from src.errors import InvalidParameter

    cfg = tmp_path / "run.env"
    cfg.write_text("p=5\n", encoding="utf-8")
    monkeypatch.setitem(sys.modules, "dotenv", None)
    with pytest.raises(InvalidParameter):
        read_run_file(cfg)
