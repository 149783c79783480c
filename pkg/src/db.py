# src/db.py
from __future__ import annotations
from pathlib import Path

from sqlalchemy import create_engine, text
from sqlalchemy.engine import Engine

from .config import ROOT, get_db_path
from .exactring import dumps

_engine: Engine | None = None
SCHEMA_PATH = ROOT / "src" / "schema.sql"


def get_engine(db_path: str | None = None) -> Engine:
    global _engine
    if _engine is None:
        path = db_path or get_db_path()
        if path != ":memory:":
            Path(path).parent.mkdir(parents=True, exist_ok=True)
        _engine = create_engine(
            f"sqlite+pysqlite:///{path}",
            future=True,
            echo=False,
            connect_args={"check_same_thread": False},
        )
    return _engine


def reset_engine() -> None:
    """Drop the cached engine (tests point KZ_DB_PATH somewhere else)."""
    global _engine
    if _engine is not None:
        _engine.dispose()
    _engine = None


def init_db(engine: Engine | None = None, schema_path: str | Path = SCHEMA_PATH) -> Engine:
    eng = engine or get_engine()
    sql = Path(schema_path).read_text(encoding="utf-8")
    with eng.begin() as conn:
        conn.exec_driver_sql("PRAGMA journal_mode=WAL;")
        conn.exec_driver_sql("PRAGMA synchronous=NORMAL;")
        for stmt in sql.split(";\n"):
            s = stmt.strip()
            if s:
                conn.exec_driver_sql(s)
    return eng


INSERT_RUN = text("""
INSERT INTO runs(started_at, subcommand, params_json, sigma, verdict, exit_code, wall_seconds, manifest_json)
VALUES (:started_at, :subcommand, :params_json, :sigma, :verdict, :exit_code, :wall_seconds, :manifest_json)
""")

INSERT_CHECK = text("""
INSERT INTO checks(run_id, name, passed, modulus, degree, detail_json)
VALUES (:run_id, :name, :passed, :modulus, :degree, :detail_json)
""")


def store_run(manifest: dict, engine: Engine | None = None) -> int:
    """Append a run manifest and its per-check verdicts; returns the run id."""
    eng = engine or get_engine()
    with eng.begin() as conn:
        res = conn.execute(INSERT_RUN, {
            "started_at": manifest["started_at"],
            "subcommand": manifest["subcommand"],
            "params_json": dumps(manifest.get("params", {})).decode(),
            "sigma": manifest.get("sigma"),
            "verdict": manifest["verdict"],
            "exit_code": manifest["exit_code"],
            "wall_seconds": manifest["wall_seconds"],
            "manifest_json": dumps(manifest).decode(),
        })
        run_id = res.lastrowid
        for chk in manifest.get("checks", []):
            conn.execute(INSERT_CHECK, {
                "run_id": run_id,
                "name": chk["name"],
                "passed": int(bool(chk["pass"])),
                "modulus": chk.get("modulus"),
                "degree": chk.get("degree"),
                "detail_json": dumps(chk.get("detail", {})).decode(),
            })
    return run_id


RECENT_RUNS = """
SELECT id, started_at, subcommand, verdict, exit_code, wall_seconds
FROM runs ORDER BY id DESC LIMIT :limit
"""
