# src/report.py
import re
from datetime import date
from pathlib import Path

import markdown
import pandas as pd
from jinja2 import Environment

from .config import REPORT_HTML, get_docs_dir, get_reports_dir
from .exactring import dumps

# ─────────────────────────────────────────────────────────────────────────────
# [RP-1] Templates
# ─────────────────────────────────────────────────────────────────────────────

_ENV = Environment(autoescape=False, trim_blocks=True, lstrip_blocks=True)

REPORT_MD = _ENV.from_string("""\
# KZ suite — p = {{ params.p }}, s = {{ params.s }}, g = {{ params.g }}

*{{ day }} · kzpadic {{ manifest.tool_version }} · seed {{ params.seed }} · σ = {{ manifest.sigma }}*

**Verdict: {{ manifest.verdict | upper }}** ({{ passed }}/{{ checks | length }} checks)

| Check | Result | Modulus | Degree | Seconds |
|---|---|---|---|---|
{% for c in checks %}
| {{ c.name }} | {{ "pass" if c["pass"] else "**FAIL**" }} | {{ c.modulus or "exact" }} | {{ c.degree if c.degree is not none else "—" }} | {{ c.seconds if c.seconds is defined else "" }} |
{% endfor %}

Every "pass" is a congruence certified modulo the listed modulus; series checks
are certified through the listed total degree only.

{% for c in checks if c.detail.error is defined %}
- `{{ c.name }}` raised `{{ c.detail.error }}`: {{ c.detail.message }}
{% endfor %}
{% if recent %}

## Recent runs

| Run | Started | Subcommand | Verdict | Exit | Seconds |
|---|---|---|---|---|---|
{% for r in recent %}
| {{ r.id }} | {{ r.started_at }} | {{ r.subcommand }} | {{ r.verdict }} | {{ r.exit_code }} | {{ r.wall_seconds }} |
{% endfor %}
{% endif %}

<details><summary>Manifest</summary>

```json
{{ manifest_json }}
```

</details>
""")

PAGE_HTML = _ENV.from_string("""<!doctype html>
<html lang="en"><head>
<meta charset="utf-8"/><meta name="viewport" content="width=device-width, initial-scale=1"/>
<title>{{ title }}</title>
<style>
  body { font: 15px/1.55 -apple-system,BlinkMacSystemFont,"Segoe UI",Roboto,Arial; max-width: 980px; margin: 40px auto; padding: 0 16px; color:#0f172a; }
  table { width:100%; border-collapse:collapse; margin:8px 0 16px; }
  th,td { border:1px solid #e2e8f0; padding:6px 10px; font-variant-numeric: tabular-nums; }
  thead th { background:#f1f5f9; }
  a { color:#2563eb; text-decoration:none; } a:hover { text-decoration:underline; }
  pre { background:#f8fafc; padding:12px; overflow:auto; }
</style>
</head><body>
<p><a href="index.html">Latest</a> · <a href="archive.html">Archive</a></p>
{{ body }}
</body></html>
""")

ARCHIVE_HTML = _ENV.from_string("""<!doctype html>
<meta charset="utf-8">
<title>Archive — KZ Reports</title>
<style>
  body { font: 16px/1.5 -apple-system,BlinkMacSystemFont,"Segoe UI",Roboto,Arial; max-width: 780px; margin: 40px auto; padding: 0 16px; color:#0f172a; }
  a { color:#2563eb; text-decoration: none; }
</style>
<h1>Archive</h1>
<p>Total: {{ dates | length }}</p>
<ol reversed>
{% for d in dates %}
<li><a href="{{ d }}.html">{{ d }}</a></li>
{% endfor %}
</ol>
""")

DATE_HTML_RE = re.compile(r"^(\d{4}-\d{2}-\d{2})\.html$")

# ─────────────────────────────────────────────────────────────────────────────
# [RP-2] Helpers
# ─────────────────────────────────────────────────────────────────────────────


def recent_runs(limit: int = 10) -> pd.DataFrame:
    """Last runs from the history DB (empty frame when there is none yet)."""
    from sqlalchemy import text

    from .db import RECENT_RUNS, get_engine

    try:
        with get_engine().connect() as conn:
            return pd.read_sql_query(text(RECENT_RUNS), conn, params={"limit": limit})
    except Exception:
        return pd.DataFrame(columns=["id", "started_at", "subcommand", "verdict", "exit_code", "wall_seconds"])


def render_markdown(manifest: dict, day: str, recent: pd.DataFrame | None = None) -> str:
    checks = manifest.get("checks", [])
    rows = [] if recent is None else recent.to_dict(orient="records")
    return REPORT_MD.render(
        manifest=manifest, params=manifest.get("params", {}), checks=checks, day=day,
        passed=sum(1 for c in checks if c["pass"]), recent=rows,
        manifest_json=dumps({k: v for k, v in manifest.items() if k != "checks"}, indent=True).decode(),
    )


def _write_index_archive(docs_dir: Path, today_html: Path) -> None:
    """index.html is the latest dated page; archive.html lists all of them."""
    docs_dir.mkdir(parents=True, exist_ok=True)
    (docs_dir / "index.html").write_text(today_html.read_text(encoding="utf-8"), encoding="utf-8")
    dates = sorted((m.group(1) for m in (DATE_HTML_RE.match(p.name) for p in docs_dir.iterdir()) if m),
                   reverse=True)
    (docs_dir / "archive.html").write_text(ARCHIVE_HTML.render(dates=dates), encoding="utf-8")

# ─────────────────────────────────────────────────────────────────────────────
# [RP-3] main
# ─────────────────────────────────────────────────────────────────────────────


def run(manifest: dict, outdir: Path | None = None, docs_dir: Path | None = None,
        html: bool | None = None) -> Path:
    out = Path(outdir) if outdir else get_reports_dir()
    out.mkdir(parents=True, exist_ok=True)
    day = date.today().isoformat()
    md = render_markdown(manifest, day, recent_runs())
    md_path = out / f"{day}.md"
    md_path.write_text(md, encoding="utf-8")

    if REPORT_HTML if html is None else html:
        docs = Path(docs_dir) if docs_dir else get_docs_dir()
        docs.mkdir(parents=True, exist_ok=True)
        body = markdown.markdown(md, extensions=["tables", "fenced_code", "md_in_html"])
        page = docs / f"{day}.html"
        page.write_text(PAGE_HTML.render(title=f"KZ suite — {day}", body=body), encoding="utf-8")
        _write_index_archive(docs, page)
    return md_path
