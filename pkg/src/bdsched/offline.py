"""Offline optimum for a fixed instance.

Feasible packet sets form a transversal matroid (packets matched to time slots
inside their windows), so taking packets heaviest-first and keeping each one
whenever an augmenting path still places everything gives a maximum-weight
schedule. The final slot assignment is the EDF order of the kept set.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .model import Packet, Trace

BRUTE_FORCE_MAX_PACKETS = 12
BRUTE_FORCE_MAX_HORIZON = 8


class InstanceTooLarge(ValueError):
    pass


@dataclass
class Schedule:
    assignments: dict[int, Packet] = field(default_factory=dict)

    @property
    def gain(self) -> float:
        return float(sum(p.weight for p in self.assignments.values()))

    def packets(self) -> list[Packet]:
        return [self.assignments[t] for t in sorted(self.assignments)]

    def validate(self) -> None:
        seen = set()
        for t, p in self.assignments.items():
            assert p.id not in seen, f"packet {p.id} scheduled twice"
            seen.add(p.id)
            assert p.release <= t < p.deadline, f"packet {p} outside its window at {t}"


def _edf(jobs: Sequence[tuple[Packet, int]]) -> dict[int, Packet] | None:
    """EDF slot assignment of (packet, earliest slot) jobs, or None if some job misses."""
    order = sorted(jobs, key=lambda j: j[1])
    ready: list = []
    out = {}
    i = 0
    t = order[0][1] if order else 0
    while i < len(order) or ready:
        if not ready and order[i][1] > t:
            t = order[i][1]
        while i < len(order) and order[i][1] <= t:
            p = order[i][0]
            heapq.heappush(ready, (p.deadline, -p.weight, p.id, p))
            i += 1
        d, _, _, p = heapq.heappop(ready)
        if t >= d:
            return None
        out[t] = p
        t += 1
    return out


def _greedy_matching(jobs: Sequence[tuple[Packet, int]]) -> list[tuple[Packet, int]]:
    """Heaviest-first selection with an augmenting-path feasibility test."""
    order = sorted(jobs, key=lambda j: (-j[0].weight, j[0].deadline, j[0].id))
    cap = len(order)
    occupant: dict[int, int] = {}  # slot -> job index
    slot_of: dict[int, int] = {}
    kept = []

    def window(k):
        p, start = order[k]
        # any feasible set has an EDF schedule finishing each job within `cap` slots
        return range(start, min(p.deadline, start + cap))

    for k in range(len(order)):
        parent = {k: None}
        frontier = deque([k])
        seen_slots = set()
        found = None
        while frontier and found is None:
            q = frontier.popleft()
            for s in window(q):
                if s in seen_slots:
                    continue
                seen_slots.add(s)
                if s not in occupant:
                    found = (q, s)
                    break
                nxt = occupant[s]
                if nxt not in parent:
                    parent[nxt] = q
                    frontier.append(nxt)
        if found is None:
            continue
        q, s = found
        while q is not None:
            old = slot_of.get(q)
            occupant[s] = q
            slot_of[q] = s
            q, s = parent[q], old
        kept.append(order[k])
    return kept


def _schedule(jobs: list[tuple[Packet, int]]) -> Schedule:
    if not jobs:
        return Schedule()
    everything = _edf(jobs)
    if everything is not None:
        return Schedule(everything)
    kept = _greedy_matching(jobs)
    assignments = _edf(kept)
    assert assignments is not None
    return Schedule(assignments)


def opt_schedule(instance: Trace | Iterable[Packet]) -> Schedule:
    """Maximum-weight schedule of a trace (or an explicit packet collection)."""
    packets = instance.packets() if isinstance(instance, Trace) else list(instance)
    return _schedule([(p, p.release) for p in packets])


def provisional_schedule(
    pending: Iterable[Packet], current_step: int
) -> tuple[Schedule, list[Packet]]:
    """Optimal schedule of ``pending`` assuming nothing else ever arrives.

    Also returns the support set: the earliest-deadline packet and the heaviest
    packet of that schedule (one packet if they coincide).
    """
    jobs = [(p, max(p.release, current_step)) for p in pending]
    sched = _schedule(jobs)
    chosen = sched.packets()
    if not chosen:
        return sched, []
    earliest = min(chosen, key=lambda p: (p.deadline, -p.weight, p.id))
    heaviest = min(chosen, key=lambda p: (-p.weight, p.deadline, p.id))
    support = [earliest] if earliest.id == heaviest.id else [earliest, heaviest]
    return sched, support


def brute_force_opt(instance: Trace | Iterable[Packet]) -> float:
    """Exact optimum by trying every per-step choice (small instances only)."""
    packets = instance.packets() if isinstance(instance, Trace) else list(instance)
    if len(packets) > BRUTE_FORCE_MAX_PACKETS:
        raise InstanceTooLarge(
            f"{len(packets)} packets exceeds exhaustive bound {BRUTE_FORCE_MAX_PACKETS}"
        )
    if not packets:
        return 0.0
    start = min(p.release for p in packets)
    end = max(p.deadline for p in packets)
    if end > BRUTE_FORCE_MAX_HORIZON:
        raise InstanceTooLarge(
            f"horizon {end} exceeds exhaustive bound {BRUTE_FORCE_MAX_HORIZON}"
        )
    alive = [
        sum(1 << i for i, p in enumerate(packets) if p.deadline > t) for t in range(end + 1)
    ]

    @lru_cache(maxsize=None)
    def best(t: int, sent: int) -> float:
        if t >= end:
            return 0.0
        sent &= alive[t]
        result = best(t + 1, sent & alive[t + 1])
        for i, p in enumerate(packets):
            bit = 1 << i
            if p.release <= t < p.deadline and not sent & bit:
                result = max(result, p.weight + best(t + 1, (sent | bit) & alive[t + 1]))
        return result

    return best(start, 0)
