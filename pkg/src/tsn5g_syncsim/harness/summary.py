"""Summary statistics over run traces, and cross-scenario comparison.

Summaries are pure functions of the trace CSV text. ``summary.csv`` is a long
table ``scenario,subject,metric,value`` where ``subject`` is a node id, or
``*`` for scenario-wide values.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path

TRACE_HEADER = "# tsn5g-syncsim trace v1"
REQUIREMENT_NS = 1_000_000  # strict: max offset must be < 1 ms
SUMMARY_COLUMNS = ["scenario", "subject", "metric", "value"]


class MalformedTrace(ValueError):
    pass


@dataclass(frozen=True)
class OffsetStats:
    samples: int
    max_abs_true_offset_ns: int
    mean_ns: float
    std_ns: float
    p99_abs_ns: int

    @classmethod
    def from_offsets(cls, offsets: list[int]) -> OffsetStats:
        if not offsets:
            raise ValueError("no offsets")
        abs_sorted = sorted(abs(o) for o in offsets)
        rank = max(math.ceil(0.99 * len(abs_sorted)), 1)  # nearest-rank percentile
        return cls(
            len(offsets),
            abs_sorted[-1],
            statistics.fmean(offsets),
            statistics.pstdev(offsets) if len(offsets) > 1 else 0.0,
            abs_sorted[rank - 1],
        )


@dataclass
class RunSummary:
    scenario: str
    nodes: dict[str, OffsetStats] = field(default_factory=dict)
    ds_max_um: float | None = None
    ds_max_q_um: float | None = None
    recovered_dt_ns: float | None = None
    counters: dict[str, int] = field(default_factory=dict)

    @property
    def max_abs_true_offset_ns(self) -> int | None:
        if not self.nodes:
            return None
        return max(s.max_abs_true_offset_ns for s in self.nodes.values())

    @property
    def meets_requirement(self) -> bool:
        worst = self.max_abs_true_offset_ns
        return worst is not None and worst < REQUIREMENT_NS

    def rows(self) -> list[list[str]]:
        out = []
        for node, st in sorted(self.nodes.items()):
            out += [
                [self.scenario, node, "samples", str(st.samples)],
                [self.scenario, node, "max_abs_true_offset_ns", str(st.max_abs_true_offset_ns)],
                [self.scenario, node, "mean_ns", _fmt(st.mean_ns)],
                [self.scenario, node, "std_ns", _fmt(st.std_ns)],
                [self.scenario, node, "p99_abs_ns", str(st.p99_abs_ns)],
            ]
        for name in ("ds_max_um", "ds_max_q_um", "recovered_dt_ns"):
            value = getattr(self, name)
            if value is not None:
                out.append([self.scenario, "*", name, _fmt(value)])
        for name, value in sorted(self.counters.items()):
            out.append([self.scenario, "*", name, str(value)])
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> RunSummary:
        rows = _read_rows(text, SUMMARY_COLUMNS, "summary.csv")
        if not rows:
            raise MalformedTrace("summary.csv: no rows")
        summary = cls(rows[0]["scenario"])
        per_node: dict[str, dict[str, str]] = {}
        for row in rows:
            subject, metric, value = row["subject"], row["metric"], row["value"]
            if subject != "*":
                per_node.setdefault(subject, {})[metric] = value
            elif metric in ("ds_max_um", "ds_max_q_um", "recovered_dt_ns"):
                setattr(summary, metric, float(value))
            else:
                summary.counters[metric] = int(value)
        try:
            for node, m in per_node.items():
                summary.nodes[node] = OffsetStats(
                    int(m["samples"]),
                    int(m["max_abs_true_offset_ns"]),
                    float(m["mean_ns"]),
                    float(m["std_ns"]),
                    int(m["p99_abs_ns"]),
                )
        except (KeyError, ValueError) as exc:
            raise MalformedTrace(f"summary.csv: bad node metrics ({exc})") from None
        return summary


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _read_rows(text: str, required: list[str], what: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedTrace(f"{what}: empty")
    reader = csv.DictReader(lines)
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise MalformedTrace(f"{what}: missing columns {missing}")
    rows = list(reader)
    for i, row in enumerate(rows):
        if None in row or any(row[c] is None for c in required):
            raise MalformedTrace(f"{what}: row {i + 1} has the wrong number of fields")
    return rows


def _comment_value(text: str, key: str) -> str | None:
    for ln in text.splitlines():
        if ln.startswith("# ") and "=" in ln and ln[2:].split("=", 1)[0] == key:
            return ln.split("=", 1)[1]
    return None


def summarize_texts(traces: dict[str, str], scenario: str | None = None) -> RunSummary:
    """Summarize a run from its trace texts keyed by file name."""
    if "offsets.csv" not in traces:
        raise MalformedTrace("offsets.csv missing")
    offsets: dict[str, list[int]] = {}
    rows = _read_rows(traces["offsets.csv"], ["scenario", "node_id", "true_offset_ns"], "offsets.csv")
    for i, row in enumerate(rows):
        try:
            offsets.setdefault(row["node_id"], []).append(int(row["true_offset_ns"]))
        except ValueError:
            raise MalformedTrace(f"offsets.csv: row {i + 1}: non-integer offset") from None
        scenario = scenario or row["scenario"]
    summary = RunSummary(scenario or "unknown")
    summary.nodes = {n: OffsetStats.from_offsets(v) for n, v in sorted(offsets.items())}

    counters = {"no_matching_sfn": 0, "stale_record": 0, "residence_over_bound": 0}
    if "sfnsync.csv" in traces:
        for row in _read_rows(traces["sfnsync.csv"], ["status"], "sfnsync.csv"):
            if row["status"] in counters:
                counters[row["status"]] += 1
            elif row["status"] != "applied":
                raise MalformedTrace(f"sfnsync.csv: unknown status {row['status']!r}")
    summary.counters = counters

    if "positions.csv" in traces:
        text = traces["positions.csv"]
        prow = _read_rows(text, ["ds_um", "ds_q_um"], "positions.csv")
        if prow:
            summary.ds_max_um = max(abs(float(r["ds_um"])) for r in prow)
            summary.ds_max_q_um = max(abs(float(r["ds_q_um"])) for r in prow)
            v_max = _comment_value(text, "v_max_m_s")
            if v_max is not None:
                summary.recovered_dt_ns = summary.ds_max_um * 1e-6 / float(v_max) * 1e9
    return summary


def summarize(path: str | Path) -> RunSummary:
    """Summarize from a run directory, or from any trace CSV inside one."""
    p = Path(path)
    run_dir = p if p.is_dir() else p.parent
    if not p.exists():
        raise MalformedTrace(f"{p}: no such file or directory")
    traces = {}
    for name in ("offsets.csv", "sfnsync.csv", "positions.csv"):
        f = run_dir / name
        if f.exists():
            text = f.read_text()
            if not text.startswith(TRACE_HEADER):
                raise MalformedTrace(f"{f}: missing '{TRACE_HEADER}' header")
            traces[name] = text
    return summarize_texts(traces)


@dataclass
class Comparison:
    summaries: list[RunSummary]

    @property
    def all_pass(self) -> bool:
        return all(s.meets_requirement for s in self.summaries)

    def rows(self) -> list[list[str]]:
        out = []
        for s in self.summaries:
            worst = s.max_abs_true_offset_ns
            out.append(
                [
                    s.scenario,
                    "" if worst is None else str(worst),
                    "" if s.ds_max_um is None else _fmt(s.ds_max_um),
                    "" if s.recovered_dt_ns is None else _fmt(s.recovered_dt_ns),
                    "pass" if s.meets_requirement else "fail",
                ]
            )
        return out

    header = ["scenario", "max_abs_true_offset_ns", "ds_max_um", "recovered_dt_ns", "lt_1ms"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows())
        return buf.getvalue()

    def to_text(self) -> str:
        table = [self.header, *self.rows()]
        widths = [max(len(r[i]) for r in table) for i in range(len(self.header))]
        lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in table]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def compare(*summaries: RunSummary) -> Comparison:
    if len(summaries) < 2:
        raise ValueError("compare needs at least two summaries")
    return Comparison(list(summaries))
