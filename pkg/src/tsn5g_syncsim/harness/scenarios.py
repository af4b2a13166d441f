"""Build and run the three evaluation topologies.

``wireline_gptp``
    gm -> bridge -> {node1, node2}, all wireline.
``ptp_over_wireless``
    gm -> node1 over wireline, gm -> node2 over the wireless link.
``sfn_anchored``
    gm -> ref over wireline; the gNB fans frame boundaries out to ref and to
    the mobile UEs; ref multicasts SyncTuples over each UE's delivery link.

Every run produces CSV traces (as strings) and a :class:`RunSummary` that is
computed from those strings, so re-summarizing the written files gives the
same numbers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Any

from tsn5g_syncsim.clock import SimulatedClock
from tsn5g_syncsim.demonstrator import CarriageRun, MotionProfile, SensorModel, sample_grid
from tsn5g_syncsim.gptp import GptpSlave, GrandMaster, RelayBridge
from tsn5g_syncsim.harness.config import ScenarioConfig
from tsn5g_syncsim.harness.summary import RunSummary, TRACE_HEADER, summarize_texts
from tsn5g_syncsim.netsim import Constant, Event, Simulator
from tsn5g_syncsim.radioframe import Gnb, SfnCounter
from tsn5g_syncsim.sfnsync import ReferenceSystem, SfnUe

OFFSET_COLUMNS = ["scenario", "node_id", "sim_time_ns", "kind", "true_offset_ns"]
SFN_COLUMNS = [
    "scenario",
    "ue_id",
    "sim_time_ns",
    "sfn",
    "applied_offset_ns",
    "tuple_age_ns",
    "true_offset_ns",
    "t_tsn_ns",
    "status",
]
POSITION_COLUMNS = ["run", "t_ns", "s1_um", "s2_um", "ds_um", "s1_q_um", "s2_q_um", "ds_q_um"]
EVENT_COLUMNS = ["fire_at_ns", "seq", "dest", "sender", "payload"]

TRACE_FILES = ("offsets.csv", "sfnsync.csv", "positions.csv", "events.csv")


@dataclass
class Topology:
    sim: Simulator
    gm: GrandMaster
    tracked: list[str]  # nodes whose offset to the GM is reported
    carriages: tuple[str, str]


class _Probe:
    name = "_probe"

    def __init__(self, recorder: _Recorder, interval_ns: int):
        self.recorder = recorder
        self.interval_ns = interval_ns

    def handle(self, sim: Simulator, event: Event) -> None:
        self.recorder.probe(sim)
        sim.schedule(sim.now + self.interval_ns, self.name, None)


class _Recorder:
    """Collects trace rows and per-node clock histories from listener callbacks."""

    def __init__(self, scenario: str, topo_gm: GrandMaster, tracked: list[str], sim: Simulator):
        self.scenario = scenario
        self.gm = topo_gm
        self.sim = sim
        self.tracked = tracked
        self.offset_rows: list[list[Any]] = []
        self.sfn_rows: list[list[Any]] = []
        self._steady: set[str] = set()  # nodes past their first non-provisional correction
        self.history: dict[str, list[tuple[int, SimulatedClock]]] = {
            n: [(0, sim.nodes[n].clock)] for n in tracked
        }

    def _true_offset(self, clock: SimulatedClock, now: int) -> int:
        return clock.read(now) - self.gm.clock.read(now)

    def probe(self, sim: Simulator) -> None:
        for name in self.tracked:
            node = sim.nodes[name]
            if node.synced:
                self.offset_rows.append([self.scenario, name, sim.now, "probe", self._true_offset(node.clock, sim.now)])

    def on_event(self, sim: Simulator, node: Any, kind: str, **info) -> None:
        now = sim.now
        if kind == "correction":
            if node.name in self._steady:
                self.offset_rows.append([self.scenario, node.name, now, "pre", self._true_offset(info["before"], now)])
            self.history[node.name].append((now, info["after"]))
            if node.synced:
                self.offset_rows.append([self.scenario, node.name, now, "post", self._true_offset(info["after"], now)])
                self._steady.add(node.name)
        if isinstance(node, SfnUe):
            tup = info.get("tuple") or info["diag"]
            row = [self.scenario, node.name, now, tup.sfn]
            if kind == "correction":
                diag = info["diag"]
                row += [diag.applied_offset_ns, diag.tuple_age_ns, self._true_offset(info["after"], now)]
            else:
                row += ["", info.get("age", ""), self._true_offset(node.clock, now)]
            row += [tup.t_tsn_ns, "applied" if kind == "correction" else kind]
            self.sfn_rows.append(row)


def build_topology(cfg: ScenarioConfig, sim: Simulator) -> Topology:
    clock = lambda n: cfg.clock_for(n).build()  # noqa: E731
    common = dict(pdelay_interval_ns=cfg.pdelay_interval_ns)
    if cfg.scenario == "wireline_gptp":
        gm = sim.add_node(GrandMaster("gm", clock("gm"), ["bridge"], cfg.sync_interval_ns, cfg.pdelay_turnaround_ns))
        bridge = sim.add_node(
            RelayBridge(
                "bridge",
                clock("bridge"),
                "gm",
                ["node1", "node2"],
                Constant(cfg.bridge_residence_ns),
                turnaround_ns=cfg.pdelay_turnaround_ns,
                seed=cfg.seed,
                **common,
            )
        )
        slaves = [sim.add_node(GptpSlave(n, clock(n), "bridge", **common)) for n in ("node1", "node2")]
        sim.connect("gm", "bridge", cfg.wireline)
        for s in slaves:
            sim.connect("bridge", s.name, cfg.wireline)
        for n in (gm, bridge, *slaves):
            n.start(sim)
        return Topology(sim, gm, ["node1", "node2"], ("node1", "node2"))

    if cfg.scenario == "ptp_over_wireless":
        gm = sim.add_node(GrandMaster("gm", clock("gm"), ["node1", "node2"], cfg.sync_interval_ns, cfg.pdelay_turnaround_ns))
        slaves = [sim.add_node(GptpSlave(n, clock(n), "gm", **common)) for n in ("node1", "node2")]
        sim.connect("gm", "node1", cfg.wireline)
        sim.connect("gm", "node2", cfg.wireless)
        for n in (gm, *slaves):
            n.start(sim)
        return Topology(sim, gm, ["node1", "node2"], ("node1", "node2"))

    ues = [n for n in cfg.node_names() if n.startswith("ue")]
    gm = sim.add_node(GrandMaster("gm", clock("gm"), ["ref"], cfg.sync_interval_ns, cfg.pdelay_turnaround_ns))
    ref = sim.add_node(ReferenceSystem("ref", clock("ref"), "gm", ues, cfg.sfn.decimation, **common))
    for n in ues:
        sim.add_node(SfnUe(n, clock(n), cfg.sfn.store_capacity, cfg.sfn.staleness_ns))
    gnb = sim.add_node(Gnb("gnb", SfnCounter(), cfg.sfn.per_subframe))
    for name in ("ref", *ues):
        gnb.attach(name, cfg.sfn.observation_offsets.get(name, 0))
    sim.connect("gm", "ref", cfg.wireline)
    delivery = cfg.delivery if cfg.delivery is not None else cfg.wireless
    for ue in ues:
        sim.connect("ref", ue, delivery, name=f"pubsub:{ue}")
    gm.start(sim)
    ref.start(sim)
    gnb.start(sim, cfg.sfn.first_boundary_ns)
    return Topology(sim, gm, ["ref", *ues], (ues[0], ues[1]) if len(ues) > 1 else (ues[0], ues[0]))


def _carriage_start(history: list[tuple[int, SimulatedClock]], commanded: int) -> int:
    """First true instant at which the piecewise clock reaches ``commanded``."""
    for i, (t_from, clock) in enumerate(history):
        t_to = history[i + 1][0] if i + 1 < len(history) else None
        if clock.read(t_from) >= commanded:
            return t_from
        t_star = clock.true_time_at(commanded)
        if t_to is None or t_star < t_to:
            return max(t_star, t_from)
    raise AssertionError("unreachable")


def _write_csv(columns: list[str], rows: list[list[Any]], comments: tuple[str, ...] = ()) -> str:
    buf = io.StringIO()
    buf.write(TRACE_HEADER + "\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _um(x: float) -> str:
    return f"{x * 1e6:.4f}"


def _demonstrator_rows(cfg: ScenarioConfig, topo: Topology, rec: _Recorder) -> list[list[Any]]:
    demo = cfg.demo
    profile = MotionProfile(demo.v_max, demo.a_max, demo.stroke)
    sensor = SensorModel(stroke=demo.stroke, enabled=demo.sensor)
    rows: list[list[Any]] = []
    c1, c2 = topo.carriages
    for k in range(demo.repeats):
        commanded_s = demo.start_s + k * demo.period_s
        commanded = int(commanded_s * 1_000_000_000)
        runs = [
            CarriageRun(profile, commanded, _carriage_start(rec.history[c], commanded)) for c in (c1, c2)
        ]
        for t in sample_grid(runs[0], runs[1], demo.grid_ns):
            t = int(t)
            s1, s2 = runs[0].position_at(t), runs[1].position_at(t)
            q1, q2 = sensor.quantize(s1), sensor.quantize(s2)
            rows.append([k, t, _um(s1), _um(s2), _um(s1 - s2), _um(q1), _um(q2), _um(q1 - q2)])
    return rows


@dataclass
class RunResult:
    traces: dict[str, str]
    summary: RunSummary
    topology: Topology


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    sim = Simulator(cfg.seed)
    topo = build_topology(cfg, sim)
    rec = _Recorder(cfg.scenario, topo.gm, topo.tracked, sim)
    for name in topo.tracked:
        sim.nodes[name].listeners.append(rec.on_event)
    sim.add_node(_Probe(rec, cfg.probe_interval_ns), traced=False)
    sim.schedule(0, "_probe", None)
    sim.run_until(cfg.duration_ns)

    traces = {
        "offsets.csv": _write_csv(OFFSET_COLUMNS, rec.offset_rows),
        "sfnsync.csv": _write_csv(SFN_COLUMNS, rec.sfn_rows),
        "events.csv": _write_csv(EVENT_COLUMNS, [list(r) for r in sim.trace]),
    }
    if cfg.demo.enabled:
        traces["positions.csv"] = _write_csv(
            POSITION_COLUMNS, _demonstrator_rows(cfg, topo, rec), (f"v_max_m_s={cfg.demo.v_max!r}",)
        )
    summary = summarize_texts(traces, scenario=cfg.scenario)
    return RunResult(traces, summary, topo)

