"""
Result files.

Each run writes, into its output directory:

- ``<name>.csv``: ``level,n,error,batch_stderr`` rows, then an
  ``order,ci_halfwidth`` footer (sweeps only),
- ``<name>.plot.csv``: the same table with log2 columns,
- ``<name>.rows.csv``: the result rows of experiments that aren't sweeps,
- ``<name>.manifest.json``: fingerprint, version, timings and the verdict.

Floats are written with ``repr``, the shortest string that reads back to the
same double, so the CSV files are bitwise reproducible and lossless.
"""
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd
import rapidjson
import structlog

from emrates._config import Acceptance, ExperimentKind
from emrates.metrics import RateFit

_LOG = structlog.get_logger()

TABLE_HEADER = ("level", "n", "error", "batch_stderr")
FOOTER_HEADER = ("order", "ci_halfwidth")
PLOT_HEADER = ("level", "n", "log2_n", "error", "log2_error", "batch_stderr")


@dataclass
class ResultRecord:
    name: str
    kind: ExperimentKind
    fingerprint: str
    version: str
    config: Dict[str, Any]
    theorem: Dict[str, str]
    levels: Tuple[int, ...] = ()
    errors: Tuple[float, ...] = ()
    batch_stderr: Tuple[float, ...] = ()
    rate: Optional[RateFit] = None
    # Result rows of experiments that aren't sweeps (seminorm estimates,
    # density diagnostics).
    rows: List[Dict[str, Any]] = field(default_factory=list)
    # The value checked against the acceptance band.
    headline: Optional[float] = None
    acceptance: Optional[Acceptance] = None
    passed: Optional[bool] = None
    wall_clock: float = 0.0
    workers: int = 1
    path_count: int = 0

    @property
    def is_sweep(self) -> bool:
        return self.kind.is_sweep


def _cell(value) -> str:
    """
    >>> _cell(0.1), _cell(3), _cell(None), _cell(True)
    ('0.1', '3', '', 'true')
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]):
    out = io.StringIO()
    cw = csv.writer(out, lineterminator="\n")
    cw.writerow(header)
    cw.writerows([_cell(v) for v in row] for row in rows)
    path.write_text(out.getvalue(), encoding="utf-8")


def emit_csv(record: ResultRecord, path: Path) -> Path:
    """The error table, then the fitted order as a footer."""
    if not record.levels:
        raise ValueError(f"{record.name} has no levels to write")
    if record.rate is None:
        raise ValueError(f"{record.name} has no fitted rate")

    out = io.StringIO()
    cw = csv.writer(out, lineterminator="\n")
    cw.writerow(TABLE_HEADER)
    for n, error, stderr in zip(record.levels, record.errors, record.batch_stderr):
        cw.writerow([_cell(v) for v in (n.bit_length() - 1, n, error, stderr)])
    cw.writerow(FOOTER_HEADER)
    cw.writerow([_cell(record.rate.order), _cell(record.rate.ci_halfwidth)])
    path.write_text(out.getvalue(), encoding="utf-8")
    return path


def emit_plot_csv(record: ResultRecord, path: Path) -> Path:
    if not record.levels:
        raise ValueError(f"{record.name} has no levels to write")
    _write_rows(
        path,
        PLOT_HEADER,
        (
            (
                n.bit_length() - 1,
                n,
                float(n.bit_length() - 1),
                error,
                math.log2(error) if error > 0 else -math.inf,
                stderr,
            )
            for n, error, stderr in zip(
                record.levels, record.errors, record.batch_stderr
            )
        ),
    )
    return path


def emit_rows_csv(record: ResultRecord, path: Path) -> Path:
    # Rows may leave some columns out (eg. divergent estimates have no value).
    columns: List[str] = []
    for row in record.rows:
        columns.extend(k for k in row if k not in columns)
    _write_rows(path, columns, ([row.get(k) for k in columns] for row in record.rows))
    return path


def read_csv(path: Path) -> Tuple[List[Dict[str, float]], Dict[str, float]]:
    """
    Parse an emitted error table back into its rows and footer.
    """
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        lines = list(csv.reader(f))
    if not lines or tuple(lines[0]) != TABLE_HEADER:
        raise ValueError(f"{path} is not an error table")
    footer_at = lines.index(list(FOOTER_HEADER))
    rows = [
        dict(
            level=int(level),
            n=int(n),
            error=float(error),
            batch_stderr=float(stderr),
        )
        for level, n, error, stderr in lines[1:footer_at]
    ]
    order, ci_halfwidth = (float(v) for v in lines[footer_at + 1])
    return rows, dict(order=order, ci_halfwidth=ci_halfwidth)


def manifest_doc(record: ResultRecord) -> Dict[str, Any]:
    rate = record.rate
    return dict(
        name=record.name,
        kind=record.kind.value,
        fingerprint=record.fingerprint,
        version=record.version,
        theorem=record.theorem,
        config=record.config,
        path_count=record.path_count,
        workers=record.workers,
        wall_clock_seconds=record.wall_clock,
        budget_minutes=record.config.get("budget_minutes"),
        levels=list(record.levels),
        errors=list(record.errors),
        batch_stderr=list(record.batch_stderr),
        rate=None
        if rate is None
        else dict(
            order=rate.order,
            slope=rate.slope,
            intercept=rate.intercept,
            residual_sum=rate.residual_sum,
            ci_halfwidth=rate.ci_halfwidth,
            batch_orders=list(rate.batch_orders),
        ),
        rows=record.rows,
        headline=record.headline,
        acceptance=None
        if record.acceptance is None
        else dict(
            minimum=record.acceptance.minimum,
            maximum=record.acceptance.maximum,
            target=record.acceptance.target,
        ),
        passed=record.passed,
    )


def write_manifest(record: ResultRecord, path: Path) -> Path:
    path.write_text(
        rapidjson.dumps(
            manifest_doc(record),
            indent=2,
            sort_keys=True,
            number_mode=rapidjson.NM_NAN,
        ),
        encoding="utf-8",
    )
    return path


def write_outputs(record: ResultRecord, output_dir: Path) -> Dict[str, Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    base = output_dir / record.name
    written = {}
    if record.is_sweep:
        written["csv"] = emit_csv(record, Path(f"{base}.csv"))
        written["plot"] = emit_plot_csv(record, Path(f"{base}.plot.csv"))
    if record.rows:
        written["rows"] = emit_rows_csv(record, Path(f"{base}.rows.csv"))
    written["manifest"] = write_manifest(record, Path(f"{base}.manifest.json"))
    _LOG.info(
        "report.written",
        experiment=record.name,
        files=sorted(str(p) for p in written.values()),
    )
    return written


REPORT_COLUMNS = (
    "name",
    "kind",
    "headline",
    "ci_halfwidth",
    "band",
    "target",
    "passed",
    "paths",
    "seconds",
)


def _report_row(doc: Dict[str, Any]) -> Dict[str, Any]:
    acceptance = doc.get("acceptance") or {}
    rate = doc.get("rate") or {}
    band = None
    if acceptance:
        band = str(Acceptance(acceptance.get("minimum"), acceptance.get("maximum")))
    return dict(
        name=doc["name"],
        kind=doc["kind"],
        headline=doc.get("headline"),
        ci_halfwidth=rate.get("ci_halfwidth"),
        band=band,
        target=acceptance.get("target"),
        passed=doc.get("passed"),
        paths=doc.get("path_count"),
        seconds=doc.get("wall_clock_seconds"),
    )


def load_manifests(results_dir: Path) -> pd.DataFrame:
    """One row per manifest found in ``results_dir``."""
    paths = sorted(Path(results_dir).glob("*.manifest.json"))
    docs = []
    for path in paths:
        try:
            text = path.read_text(encoding="utf-8")
            docs.append(rapidjson.loads(text, number_mode=rapidjson.NM_NAN))
        except rapidjson.JSONDecodeError as e:
            _LOG.warning("report.unreadable", path=str(path), error=str(e))
    frame = pd.DataFrame(
        [_report_row(doc) for doc in docs], columns=list(REPORT_COLUMNS)
    )
    return frame.set_index("name").sort_index()
