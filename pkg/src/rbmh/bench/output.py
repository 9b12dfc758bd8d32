"""Serialisation of experiment reports: JSON document, delimited tables and envelope files."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Union

from .experiment import ExperimentReport

REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.json"
README_FILE = "README.md"

_README = """\
# Output files

report.json
    Full experiment report. `config` echoes the experiment keys, `seed` the base
    seed. `scales[]` holds, per proposal scale: `cells` (variance ratios),
    `accounting` (proposal ledger), `replications` (per-chain estimates) and,
    when traces were requested, `envelopes`.
    A cell is {h, estimator, baseline, ratio, se, terms, sign_test}: the pooled
    empirical variance of the estimator's per-block terms divided by that of the
    baseline's, with a grouped-jackknife standard error and a one-sided sign
    test over replications. `null` marks cells that cannot be computed.
timings.json
    Wall-clock seconds per replication (median, mean, total) per scale.
    Informational only and kept apart so report.json stays reproducible.
table_<name>.csv
    One row per (scale, estimator): columns scale, estimator, baseline, then
    `<h>` and `<h>_se` for every test function.
table_<name>.txt
    The same table aligned for reading.
envelope_<estimator>[_<scale>].csv
    Columns iteration, min, q05, q95, max of the running estimate across
    replications. `delta` is the path average, `delta_k` the weighted one.
"""


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def write_report(report: ExperimentReport, outdir: Union[str, Path]) -> Path:
    """Write report.json, timings.json and the column README; return the report path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / REPORT_FILE
    path.write_text(dumps(report.to_dict()))
    (outdir / TIMINGS_FILE).write_text(dumps(report.timings))
    (outdir / README_FILE).write_text(_README)
    return path


def read_report(path: Union[str, Path]) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a report file ({exc})") from None


def _as_dict(report) -> dict:
    return report.to_dict() if isinstance(report, ExperimentReport) else report


def table_rows(report) -> tuple:
    """Header and rows: one row per scale for each (estimator, baseline) pair.

    The first row of every scale is the main weighted estimator against the
    occupation counts; later rows (oracle, control variate, other ``k``)
    follow in the order the cells were produced.
    """
    rep = _as_dict(report)
    hs = list(dict.fromkeys(c["h"] for s in rep["scales"] for c in s["cells"]))
    header = ["scale", "estimator", "baseline"]
    for h in hs:
        header += [h, f"{h}_se"]
    rows = []
    for s in rep["scales"]:
        pairs = list(dict.fromkeys((c["estimator"], c["baseline"]) for c in s["cells"]))
        for est, base in pairs:
            row = [s["scale"], est, base]
            for h in hs:
                cell = next((c for c in s["cells"]
                             if c["h"] == h and c["estimator"] == est and c["baseline"] == base), None)
                row += [None, None] if cell is None else [cell["ratio"], cell["se"]]
            rows.append(row)
    return header, rows


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def render_table(report) -> str:
    header, rows = table_rows(report)
    cells = [header] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def table_csv(report) -> str:
    header, rows = table_rows(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_tables(report, outdir: Union[str, Path], name: str = None) -> list:
    rep = _as_dict(report)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = name or rep["config"].get("name", "experiment")
    csv_path = outdir / f"table_{name}.csv"
    txt_path = outdir / f"table_{name}.txt"
    csv_path.write_text(table_csv(rep))
    txt_path.write_text(render_table(rep))
    return [csv_path, txt_path]


def emit_figure_data(reports: Union[dict, ExperimentReport, Iterable], outdir: Union[str, Path]) -> list:
    """Write envelope files (min, 5%, 95%, max of running estimates per iteration)."""
    if isinstance(reports, (dict, ExperimentReport)):
        reports = [reports]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    reps = [_as_dict(r) for r in reports]
    blocks = [s for r in reps for s in r["scales"] if s.get("envelopes")]
    if not blocks:
        raise ValueError("report has no running-estimate traces; rerun with trace enabled")
    single = len(blocks) == 1
    for s in blocks:
        env = s["envelopes"]
        for est in ("delta", "delta_k"):
            suffix = "" if single else f"_{s['scale']:g}"
            path = outdir / f"envelope_{est}{suffix}.csv"
            e = env[est]
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["iteration", "min", "q05", "q95", "max"])
            for t, row in enumerate(zip(e["min"], e["q05"], e["q95"], e["max"]), start=1):
                w.writerow([t] + ["" if v is None else repr(v) for v in row])
            path.write_text(buf.getvalue())
            written.append(path)
    return written
