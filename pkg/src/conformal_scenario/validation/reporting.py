"""CSV and JSON serialization of experiment reports.

Output is deterministic: floats use ``repr``, keys are sorted, and nothing
depends on wall-clock time or thread count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

from .experiments import Report

CSV_COLUMNS = ("trial_index", "seed", "V", "r_p", "miscovered", "flags")


def file_stem(report: Report) -> str:
    seed = report.attempts[0]["root_seed"] if report.attempts else report.config.root_seed
    return f"{report.experiment.value}_{report.config.spec.m}_{report.r}_{seed}"


def _num(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def _json_safe(value: Any) -> Any:
    # JSON has no inf/nan; spell them as strings
    if isinstance(value, float) and not math.isfinite(value):
        return _num(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def csv_text(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report.records:
        flags = list(rec.flags)
        if rec.excluded and rec.excluded not in flags:
            flags.append(rec.excluded)
        if rec.excluded:
            flags.append("excluded")
        miscovered = "" if rec.miscovered is None else str(int(rec.miscovered))
        writer.writerow([rec.trial_index, rec.seed, _num(rec.V), _num(rec.r_p), miscovered, ";".join(flags)])
    return buf.getvalue()


def summary(report: Report) -> dict[str, Any]:
    exclusions = report.exclusions
    return _json_safe(
        {
            "experiment": report.experiment.value,
            "config": report.config.echo(),
            "r_effective": report.r,
            "trials": len(report.records),
            "recorded": report.recorded,
            "exclusions": exclusions,
            "excluded_total": sum(exclusions.values()),
            "checks": [c.to_dict() for c in report.checks],
            "passed": report.passed,
            "attempts": report.attempts,
            "details": report.extras,
        }
    )


def summary_text(report: Report) -> str:
    return json.dumps(summary(report), indent=2, sort_keys=True) + "\n"


def write_report(report: Report, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``<experiment>_<m>_<r>_<seed>.csv`` and ``.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = file_stem(report)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    csv_path.write_text(csv_text(report))
    json_path.write_text(summary_text(report))
    return csv_path, json_path


def describe(report: Report) -> str:
    """Short human-readable verdict, one line per check."""
    lines = [f"{report.experiment.value}: {'PASS' if report.passed else 'FAIL'} "
             f"(trials={len(report.records)}, recorded={report.recorded}, exclusions={report.exclusions or {}})"]
    for c in report.checks:
        exact = f" [{c.expected_exact}]" if c.expected_exact else ""
        lines.append(
            f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: observed={c.observed:.6g} expected={c.expected:.6g}{exact} "
            f"{c.kind} allowed={c.allowed:.4g} n={c.n}"
        )
    return "\n".join(lines)
