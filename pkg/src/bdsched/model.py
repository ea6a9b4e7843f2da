"""Packets, buffers and slotted-time semantics for bounded-delay buffer management.

Deadlines are absolute. A packet released at step ``r`` with deadline ``d`` may be
transmitted in any step ``t`` with ``r <= t < d``. One step of the model is:
transmit, then advance the clock and drop everything whose deadline has been
reached, then inject the new arrivals.
"""

from __future__ import annotations

import heapq
import itertools
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator


class ContractError(ValueError):
    """An operation was called with inputs that violate its contract."""


@dataclass(frozen=True, slots=True)
class Packet:
    weight: float
    release: int
    deadline: int
    id: int = 0

    def __post_init__(self):
        if not self.weight > 0:
            raise ContractError(f"packet weight must be positive, got {self.weight}")
        if self.deadline <= self.release:
            raise ContractError(
                f"deadline {self.deadline} must exceed release {self.release}"
            )

    @property
    def lifespan(self) -> int:
        return self.deadline - self.release

    @property
    def value(self) -> tuple[float, int]:
        return (self.weight, self.deadline)

    def relative_deadline(self, t: int) -> int:
        return self.deadline - t

    def copy(self, new_id: int) -> "Packet":
        return Packet(self.weight, self.release, self.deadline, new_id)


class PacketFactory:
    """Hands out packets with ids unique within one simulation run."""

    def __init__(self, start: int = 0):
        self._ids = itertools.count(start)

    def make(self, weight: float, release: int, deadline: int) -> Packet:
        return Packet(weight, release, deadline, next(self._ids))

    def copy(self, packet: Packet) -> Packet:
        return packet.copy(next(self._ids))


def dominates(b: Packet, a: Packet) -> bool:
    """True if ``a`` is dominated by ``b``: no heavier and expiring no earlier."""
    return a.weight <= b.weight and a.deadline >= b.deadline


def strictly_dominates(b: Packet, a: Packet) -> bool:
    return dominates(b, a) and (a.weight < b.weight or a.deadline > b.deadline)


class Buffer:
    """Pending packets of one player at the current step.

    Packets are bucketed by deadline so that expiry costs O(expired) rather than
    O(pending); this matters for adversaries that hoard packets over long games.
    """

    def __init__(self, current_step: int = 0, pending: Iterable[Packet] = ()):
        self.current_step = current_step
        self._by_id: dict[int, Packet] = {}
        self._buckets: dict[int, dict[int, Packet]] = {}
        self._deadlines: list[int] = []
        self._values: dict[tuple[float, int], int] = {}
        for p in pending:
            self.add(p)

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Packet]:
        return iter(self._by_id.values())

    def __contains__(self, packet: Packet) -> bool:
        return packet.id in self._by_id

    def __repr__(self) -> str:
        items = ", ".join(f"({p.weight:g}, d={p.deadline})" for p in self.sorted())
        return f"Buffer(t={self.current_step}, [{items}])"

    def sorted(self) -> list[Packet]:
        return sorted(self._by_id.values(), key=lambda p: (-p.weight, p.deadline, p.id))

    def get(self, packet_id: int) -> Packet | None:
        return self._by_id.get(packet_id)

    def values(self) -> Counter:
        """Multiset of (weight, deadline) pairs; ids are ignored."""
        return Counter(self._values)

    def distinct(self) -> list[Packet]:
        """One representative packet per distinct (weight, deadline) value."""
        seen = {}
        for bucket in self._buckets.values():
            for p in bucket.values():
                seen.setdefault(p.value, p)
        return list(seen.values())

    def copy(self) -> "Buffer":
        return Buffer(self.current_step, self._by_id.values())

    def add(self, packet: Packet) -> None:
        if packet.id in self._by_id:
            raise ContractError(f"packet id {packet.id} already pending")
        if not packet.release <= self.current_step < packet.deadline:
            raise ContractError(
                f"packet {packet} cannot be pending at step {self.current_step}"
            )
        self._by_id[packet.id] = packet
        bucket = self._buckets.get(packet.deadline)
        if bucket is None:
            bucket = self._buckets[packet.deadline] = {}
            heapq.heappush(self._deadlines, packet.deadline)
        bucket[packet.id] = packet
        key = (packet.weight, packet.deadline)
        self._values[key] = self._values.get(key, 0) + 1

    def remove(self, packet: Packet) -> None:
        if packet.id not in self._by_id:
            raise ContractError(
                f"packet {packet} is not pending at step {self.current_step}"
            )
        del self._by_id[packet.id]
        bucket = self._buckets[packet.deadline]
        del bucket[packet.id]
        if not bucket:
            del self._buckets[packet.deadline]
        self._discount((packet.weight, packet.deadline))

    def _discount(self, key) -> None:
        c = self._values[key]
        if c == 1:
            del self._values[key]
        else:
            self._values[key] = c - 1

    def is_strictly_dominated(self, packet: Packet) -> bool:
        for w, d in self._values:
            if w >= packet.weight and d <= packet.deadline and (
                w > packet.weight or d < packet.deadline
            ):
                return True
        return False

    def advance(
        self, transmitted: Packet | None = None, injections: Iterable[Packet] = ()
    ) -> list[Packet]:
        """Run one step in place; returns the packets that expired."""
        if transmitted is not None:
            self.remove(transmitted)
        self.current_step += 1
        expired = []
        while self._deadlines and self._deadlines[0] <= self.current_step:
            d = heapq.heappop(self._deadlines)
            bucket = self._buckets.pop(d, None)
            if not bucket:
                continue
            for p in bucket.values():
                del self._by_id[p.id]
                self._discount((p.weight, p.deadline))
                expired.append(p)
        for p in injections:
            if p.release != self.current_step:
                raise ContractError(
                    f"injected packet {p} must be released at step {self.current_step}"
                )
            self.add(p)
        return expired


def advance(
    buffer: Buffer, transmitted: Packet | None, injections: Iterable[Packet]
) -> tuple[Buffer, list[Packet]]:
    """Functional form of :meth:`Buffer.advance`; the input buffer is untouched."""
    nxt = buffer.copy()
    expired = nxt.advance(transmitted, injections)
    return nxt, expired


@dataclass
class Trace:
    """An oblivious instance: per-step lists of (weight, lifespan) arrivals."""

    steps: list[tuple[int, list[tuple[float, int]]]] = field(default_factory=list)

    def __post_init__(self):
        last = -1
        for t, arrivals in self.steps:
            if t <= last:
                raise ContractError(f"trace step indices must increase (got {t} after {last})")
            last = t
            for w, l in arrivals:
                if not w > 0:
                    raise ContractError(f"step {t}: weight must be positive, got {w}")
                if int(l) != l or l < 1:
                    raise ContractError(f"step {t}: lifespan must be a positive integer, got {l}")

    def __len__(self) -> int:
        return sum(len(a) for _, a in self.steps)

    @property
    def horizon(self) -> int:
        """First step at which nothing from the trace can still be pending."""
        return max((t + l for t, arrivals in self.steps for _, l in arrivals), default=0)

    def packets(self, factory: PacketFactory | None = None) -> list[Packet]:
        factory = factory or PacketFactory()
        return [
            factory.make(w, t, t + l) for t, arrivals in self.steps for w, l in arrivals
        ]

    def arrivals_by_step(self, factory: PacketFactory | None = None) -> dict[int, list[Packet]]:
        out: dict[int, list[Packet]] = {}
        for p in self.packets(factory):
            out.setdefault(p.release, []).append(p)
        return out

    @classmethod
    def from_packets(cls, packets: Iterable[Packet]) -> "Trace":
        by_step: dict[int, list[tuple[float, int]]] = {}
        for p in sorted(packets, key=lambda p: (p.release, p.id)):
            by_step.setdefault(p.release, []).append((p.weight, p.lifespan))
        return cls(sorted(by_step.items()))

    def dumps(self) -> str:
        lines = [
            json.dumps({"t": t, "inject": [{"w": w, "l": l} for w, l in arrivals]})
            for t, arrivals in self.steps
        ]
        return "".join(line + "\n" for line in lines)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        steps = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line, parse_float=float)
                t = rec["t"]
                arrivals = [(float(a["w"]), a["l"]) for a in rec["inject"]]
                if not isinstance(t, int) or isinstance(t, bool):
                    raise TypeError(f"step index must be an integer, got {t!r}")
                for _, l in arrivals:
                    if not isinstance(l, int) or isinstance(l, bool):
                        raise TypeError(f"lifespan must be an integer, got {l!r}")
                # validate incrementally so errors carry the offending line
                cls(steps[-1:] + [(t, arrivals)])
                steps.append((t, arrivals))
            except (ValueError, KeyError, TypeError) as exc:
                raise TraceFormatError(lineno, str(exc)) from exc
        return cls(steps)

    @classmethod
    def load(cls, path: str | Path) -> "Trace":
        return cls.loads(Path(path).read_text())


class TraceFormatError(ValueError):
    def __init__(self, lineno: int | None, msg: str):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{where}{msg}")
