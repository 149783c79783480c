from __future__ import annotations

import pandas as pd

from src import db, report

MANIFEST = {
    "tool_version": "0.1.0", "started_at": "2026-01-02T03:04:05+00:00", "subcommand": "report",
    "params": {"p": 5, "s": 1, "g": 1, "seed": 7}, "sigma": -1, "verdict": "fail", "exit_code": 1,
    "wall_seconds": 1.5,
    "checks": [
        {"name": "kz_residuals", "pass": True, "modulus": "5^1", "degree": None, "detail": {}, "seconds": 0.1},
        {"name": "local_flat", "pass": False, "modulus": "5^1", "degree": 10,
         "detail": {"error": "NoMatch", "message": "b is not quasi-constant"}, "seconds": 0.4},
    ],
}


def test_markdown_lists_every_check():
    md = report.render_markdown(MANIFEST, "2026-01-02", pd.DataFrame())
    assert "**Verdict: FAIL** (1/2 checks)" in md
    assert "| kz_residuals | pass | 5^1 |" in md
    assert "| local_flat | **FAIL** | 5^1 | 10 |" in md
    assert "`local_flat` raised `NoMatch`" in md
    assert "Recent runs" not in md


def test_run_writes_markdown_and_html(tmp_path, monkeypatch):
    monkeypatch.setattr(db, "get_db_path", lambda: str(tmp_path / "h.sqlite3"))
    db.reset_engine()
    db.store_run(MANIFEST, db.init_db())
    md_path = report.run(MANIFEST, outdir=tmp_path / "reports", docs_dir=tmp_path / "docs", html=True)
    db.reset_engine()
    text = md_path.read_text(encoding="utf-8")
    assert "## Recent runs" in text
    html = (tmp_path / "docs" / "index.html").read_text(encoding="utf-8")
    assert "<table>" in html
    archive = (tmp_path / "docs" / "archive.html").read_text(encoding="utf-8")
    assert f"{md_path.stem}.html" in archive


def test_recent_runs_without_history(tmp_path, monkeypatch):
    monkeypatch.setattr(db, "get_db_path", lambda: str(tmp_path / "empty.sqlite3"))
    db.reset_engine()
    frame = report.recent_runs()
    db.reset_engine()
    assert frame.empty
