"""Seeded, single-threaded discrete-event scheduler with per-link delay models.

Events fire in ``(fire_at, seq)`` order, where ``seq`` is a global insertion
counter, so ties resolve by insertion order and a run is fully determined by
its seed and configuration.

Randomness comes from numpy's PCG64 generator. Every link direction owns an
independent stream derived from ``SeedSequence(seed, spawn_key=(crc32(link), dir))``,
so adding a link never perturbs the draws of existing ones.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Protocol, Union

import numpy as np

Direction = Literal["up", "down"]
DIRECTIONS: tuple[Direction, ...] = ("down", "up")


class SchedulingInPast(ValueError):
    pass


@dataclass(frozen=True)
class Constant:
    delay_ns: int

    def __post_init__(self) -> None:
        if self.delay_ns < 0:
            raise ValueError("Constant delay must be >= 0")


@dataclass(frozen=True)
class Uniform:
    min_ns: int
    max_ns: int

    def __post_init__(self) -> None:
        if not 0 <= self.min_ns <= self.max_ns:
            raise ValueError("Uniform needs 0 <= min_ns <= max_ns")


@dataclass(frozen=True)
class Normal:
    mean_ns: int
    sigma_ns: int
    floor_ns: int = 0

    def __post_init__(self) -> None:
        if self.sigma_ns < 0 or self.floor_ns < 0:
            raise ValueError("Normal needs sigma_ns >= 0 and floor_ns >= 0")


@dataclass(frozen=True)
class Asymmetric:
    up: LinkModel
    down: LinkModel


LinkModel = Union[Constant, Uniform, Normal, Asymmetric]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sample_delay(link: LinkModel, direction: Direction, rng: np.random.Generator) -> int:
    """Draw one non-negative one-way delay in ns."""
    if isinstance(link, Asymmetric):
        return sample_delay(link.up if direction == "up" else link.down, direction, rng)
    if isinstance(link, Constant):
        return link.delay_ns
    if isinstance(link, Uniform):
        return int(rng.integers(link.min_ns, link.max_ns, endpoint=True))
    if isinstance(link, Normal):
        return max(link.floor_ns, round(rng.normal(link.mean_ns, link.sigma_ns)), 0)
    raise TypeError(f"unknown link model {link!r}")


class Link:
    """A named link between an upstream and a downstream node.

    Traffic from ``upstream`` to ``downstream`` travels in the ``down``
    direction, the reverse in the ``up`` direction.
    """

    def __init__(self, name: str, upstream: str, downstream: str, model: LinkModel, seed: int):
        self.name = name
        self.upstream = upstream
        self.downstream = downstream
        self.model = model
        key = zlib.crc32(name.encode())
        self._rngs = {d: make_rng(seed, key, i) for i, d in enumerate(DIRECTIONS)}

    def direction_from(self, src: str) -> Direction:
        if src == self.upstream:
            return "down"
        if src == self.downstream:
            return "up"
        raise KeyError(f"{src!r} is not an endpoint of link {self.name!r}")

    def sample(self, direction: Direction) -> int:
        return sample_delay(self.model, direction, self._rngs[direction])


class Node(Protocol):
    name: str

    def handle(self, sim: Simulator, event: Event) -> None: ...


@dataclass(order=True)
class Event:
    fire_at: int
    seq: int
    dest: str = field(compare=False)
    payload: Any = field(compare=False)
    sender: str | None = field(default=None, compare=False)


class Simulator:
    """Global event queue plus node and link registry."""

    def __init__(self, seed: int = 0, *, record_trace: bool = True):
        self.seed = seed
        self.now = 0
        self.nodes: dict[str, Node] = {}
        self.links: dict[frozenset[str], Link] = {}
        self.trace: list[tuple[int, int, str, str, str]] | None = [] if record_trace else None
        self._queue: list[Event] = []
        self._seq = 0
        self._observers: list[Callable[[Simulator, Event], None]] = []
        self._untraced: set[str] = set()

    def add_node(self, node: Node, traced: bool = True) -> Node:
        if node.name in self.nodes:
            raise ValueError(f"duplicate node {node.name!r}")
        self.nodes[node.name] = node
        if not traced:
            self._untraced.add(node.name)
        return node

    def connect(self, upstream: str, downstream: str, model: LinkModel, name: str | None = None) -> Link:
        link = Link(name or f"{upstream}->{downstream}", upstream, downstream, model, self.seed)
        self.links[frozenset((upstream, downstream))] = link
        return link

    def link_between(self, a: str, b: str) -> Link:
        return self.links[frozenset((a, b))]

    def schedule(self, fire_at: int, dest: str, payload: Any, sender: str | None = None) -> Event:
        if fire_at < self.now:
            raise SchedulingInPast(f"fire_at={fire_at} < now={self.now}")
        ev = Event(fire_at, self._seq, dest, payload, sender)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def transmit(self, src: str, dst: str, payload: Any) -> int:
        """Send ``payload`` over the link joining ``src`` and ``dst``; returns the drawn delay."""
        link = self.link_between(src, dst)
        delay = link.sample(link.direction_from(src))
        self.schedule(self.now + delay, dst, payload, sender=src)
        return delay

    def observe(self, fn: Callable[[Simulator, Event], None]) -> None:
        """Register a callback invoked before each event is dispatched."""
        self._observers.append(fn)

    def run_until(self, t_end: int) -> None:
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            self.now = ev.fire_at
            if self.trace is not None and ev.dest not in self._untraced:
                self.trace.append((ev.fire_at, ev.seq, ev.dest, ev.sender or "", _describe(ev.payload)))
            for fn in self._observers:
                fn(self, ev)
            self.nodes[ev.dest].handle(self, ev)
        self.now = max(self.now, t_end)

    @property
    def pending(self) -> int:
        return len(self._queue)


def _describe(payload: Any) -> str:
    if isinstance(payload, (bytes, bytearray)):
        return payload.hex()
    return repr(payload)
