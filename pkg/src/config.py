# src/config.py
from __future__ import annotations
import os
from pathlib import Path

from .errors import InvalidParameter

# Load .env if present (optional dependency)
try:
    from dotenv import load_dotenv
    load_dotenv()
except Exception:
    pass

# Project root (two levels up from src/config.py)
ROOT = Path(__file__).resolve().parent.parent

# ---------------- env readers ----------------
def _env_bool(name: str, default: bool) -> bool:
    v = os.getenv(name, str(default)).strip().lower()
    return v in ("1", "true", "yes", "on")

def _env_int(name: str, default: int) -> int:
    v = os.getenv(name, str(default))
    v = v.split("#", 1)[0].strip()   # drop inline comments if present
    try:
        return int(v)
    except Exception:
        return default

def _env_str(name: str, default: str) -> str:
    v = os.getenv(name)
    return v if v not in (None, "") else default

def _env_csv(name: str, default: list[str]) -> list[str]:
    raw = os.getenv(name, "")
    out = [p.strip() for p in raw.split(",") if p.strip()]
    return out or list(default)

# ---------------- Core paths ----------------
DB_PATH = _env_str("KZ_DB_PATH", "./db/kzpadic.sqlite3")
REPORTS_DIR = _env_str("KZ_REPORTS_DIR", "reports")
DOCS_DIR = _env_str("KZ_DOCS_DIR", "docs")

def _resolve(p: str) -> str:
    if not p.startswith("/"):
        return str((ROOT / p).resolve())
    return p

def get_db_path() -> str:
    """
    Return the run-history DB path, made absolute relative to project ROOT.
    """
    return _resolve(DB_PATH)

def get_reports_dir() -> Path:
    return Path(_resolve(REPORTS_DIR))

def get_docs_dir() -> Path:
    return Path(_resolve(DOCS_DIR))

# ---------------- Arithmetic budget ----------------
MODULUS_BITS = _env_int("KZ_MODULUS_BITS", 62)   # p^s < 2^MODULUS_BITS
MAX_PRIME = _env_int("KZ_MAX_PRIME", 50)         # p-curvature recursion bound

# ---------------- Sampling ----------------
SEED = _env_int("KZ_SEED", 20240611)
MAX_RESAMPLE = _env_int("KZ_MAX_RESAMPLE", 1000)

# ---------------- Runs ----------------
WORKERS = _env_int("KZ_WORKERS", 1)
SUITE = _env_csv("KZ_SUITE", [])   # empty -> every registered check

# ---------------- Reports ----------------
REPORT_HTML = _env_bool("KZ_REPORT_HTML", True)
RETAIN_REPORTS = _env_int("KZ_RETAIN_REPORTS", 30)


# ---------------- key-value run files ----------------
def read_run_file(path: str | os.PathLike) -> dict[str, str]:
    """
    Read an optional key-value file whose keys mirror the long CLI flags
    (p, s, g, point, samples, degree, seed, format). Empty values are dropped.
    """
    try:
        from dotenv import dotenv_values
    except ImportError:
        raise InvalidParameter("--config files are read with python-dotenv, which is not installed") from None

    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    raw = dotenv_values(p)
    return {k.strip().lower().replace("_", "-"): v for k, v in raw.items() if v not in (None, "")}
