"""The evidence report and its JSON, CSV and HTML renderings.

All three renderings are deterministic: the same report always produces the
same bytes.
"""
from __future__ import annotations

import csv
import html
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import List

from .errors import UnsupportedFormat
from .timeline import TimelineEvent

SCHEMA = "streamtrace-report/1"
CSV_COLUMNS = ("timestamp", "clock", "source", "event_kind", "subject", "liveness",
               "evidence_file", "evidence_sha256", "detail")


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"
    HTML = "html"

    @classmethod
    def parse(cls, text: str) -> "ReportFormat":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UnsupportedFormat(f"unsupported report format: {text!r}") from None


@dataclass
class EvidenceReport:
    case: dict
    installations: List[dict] = field(default_factory=list)
    timeline: List[TimelineEvent] = field(default_factory=list)
    discrepancies: List[dict] = field(default_factory=list)
    warnings: List[dict] = field(default_factory=list)
    anomalies: List[dict] = field(default_factory=list)
    manifest: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "case": self.case,
            "installations": self.installations,
            "timeline": [e.to_dict() for e in self.timeline],
            "discrepancies": self.discrepancies,
            "warnings": self.warnings,
            "anomalies": self.anomalies,
            "manifest": self.manifest,
        }


def _json_bytes(obj) -> bytes:
    text = json.dumps(obj, indent=2, ensure_ascii=False)
    # lone surrogates (undecodable evidence bytes) become \udcXX escapes
    return (text + "\n").encode("utf-8", "backslashreplace")


def _csv_bytes(report: EvidenceReport) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(CSV_COLUMNS)
    for e in report.timeline:
        ts = e.timestamp
        w.writerow([
            ts.render() if ts else "",
            ts.trust.value if ts else "",
            e.source.value,
            e.event_kind,
            e.subject,
            e.liveness,
            e.evidence_file,
            e.evidence_sha256,
            json.dumps(e.detail, sort_keys=True, ensure_ascii=False),
        ])
    return buf.getvalue().encode("utf-8", "backslashreplace")


def _html_bytes(report: EvidenceReport) -> bytes:
    data = report.to_dict()
    # "<" only occurs inside JSON strings, so escaping it keeps "</script>" and
    # "<!--" out of the data block without changing the decoded value
    embedded = json.dumps(data, indent=1, ensure_ascii=False).replace("<", "\\u003c")
    case = data["case"]
    esc = html.escape
    rows = []
    for e in report.timeline:
        ts = e.timestamp.render() if e.timestamp else ""
        rows.append(
            "<tr>" + "".join(f"<td>{esc(str(v))}</td>" for v in (
                ts, e.source.value, e.event_kind, e.subject, e.liveness, e.evidence_file)) + "</tr>")
    warnings = "".join(f"<li>{esc(w.get('message', str(w)))}</li>" for w in report.warnings)
    installs = "".join(
        f"<li>{esc(i.get('platform', ''))}: {esc(i.get('home_path', ''))}</li>"
        for i in report.installations)
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>Evidence report {esc(str(case.get('case_id', '')))}</title>",
        "<style>body{font-family:sans-serif}table{border-collapse:collapse}"
        "td,th{border:1px solid #999;padding:2px 6px;font-size:12px;vertical-align:top}</style>",
        "</head><body>",
        f"<h1>Evidence report {esc(str(case.get('case_id', '')))}</h1>",
        "<dl>" + "".join(f"<dt>{esc(str(k))}</dt><dd>{esc(str(v))}</dd>" for k, v in case.items()) + "</dl>",
        "<p>Times ending in <code>?</code> come from the device clock and are unverified; "
        "times ending in <code>Z</code> are filesystem UTC.</p>",
        f"<h2>Installations</h2><ul>{installs}</ul>",
        f"<h2>Warnings</h2><ul>{warnings}</ul>",
        "<h2>Timeline</h2><table><thead><tr><th>time</th><th>source</th><th>event</th>"
        "<th>subject</th><th>liveness</th><th>evidence</th></tr></thead><tbody>",
        "\n".join(rows),
        "</tbody></table>",
        f'<script type="application/json" id="streamtrace-report">\n{embedded}\n</script>',
        "</body></html>",
    ]
    return ("\n".join(parts) + "\n").encode("utf-8", "backslashreplace")


def emit_report(report: EvidenceReport, fmt) -> bytes:
    if not isinstance(fmt, ReportFormat):
        fmt = ReportFormat.parse(str(fmt))
    if fmt is ReportFormat.JSON:
        return _json_bytes(report.to_dict())
    if fmt is ReportFormat.CSV:
        return _csv_bytes(report)
    return _html_bytes(report)


def extract_embedded_json(html_bytes: bytes) -> dict:
    """Recover the report data block from an HTML rendering."""
    text = html_bytes.decode("utf-8")
    start = text.index('id="streamtrace-report">') + len('id="streamtrace-report">')
    end = text.index("</script>", start)
    return json.loads(text[start:end])
