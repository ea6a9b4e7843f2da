"""The Mix-R randomized memoryless policy and the greedy baseline.

Mix-R builds a chain of mutually non-dominated pending packets h_1..h_m (weights
and deadlines both strictly decreasing), then hands probability to them greedily:
p_i = 1 - w_{i+1}/w_i while unassigned mass remains, the residual going to the
last packet that still gets any.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import ContractError, Packet
from .offline import provisional_schedule

RESIDUAL_EPS = 1e-12


def _priority(p: Packet) -> tuple:
    # heaviest first; equal weights -> earliest deadline strictly dominates the rest
    return (-p.weight, p.deadline, p.id)


def build_chain(pending: Iterable[Packet]) -> list[Packet]:
    """Chain h_1..h_m for the given pending packets; [] means a no-op step.

    Scanning packets heaviest-first (earliest deadline first among equal
    weights), a packet is not dominated by any chain member so far exactly when
    its deadline is below the last member's, and then it is the heaviest
    non-strictly-dominated packet of what remains.
    """
    chain: list[Packet] = []
    last = None
    for x in sorted(pending, key=_priority):
        if last is None or x.deadline < last:
            chain.append(x)
            last = x.deadline
    return chain


def build_distribution(weights: Sequence[float]) -> tuple[list[float], int]:
    """Probabilities p_1..p_m and support size n for chain weights w_1 > ... > w_m."""
    m = len(weights)
    if m == 0:
        raise ContractError("empty chain")
    if not weights[-1] > 0:
        raise ContractError("chain weights must be positive")

    probs = [0.0] * m
    r = 1.0
    n = 0
    prev = weights[0]  # h_0 is the heaviest packet, so p_0 = 0
    for j, w in enumerate(weights):
        if j > 0:
            if not w < prev:
                raise ContractError(f"chain weights must strictly decrease: {list(weights)}")
            p = 1.0 - w / prev
            if p > r:
                p = r
            probs[j - 1] = p
            r -= p
            if r < RESIDUAL_EPS:
                r = 0.0
        if r > 0:
            n += 1
        prev = w
    probs[m - 1] = r
    return probs, n


@dataclass(frozen=True)
class Chain:
    items: tuple[Packet, ...]
    probs: tuple[float, ...]
    support: int

    @classmethod
    def from_items(cls, items: Sequence[Packet]) -> "Chain":
        probs, n = build_distribution([h.weight for h in items])
        return cls(tuple(items), tuple(probs), n)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def n(self) -> int:
        return self.support

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(h.weight for h in self.items)

    @property
    def deadlines(self) -> tuple[int, ...]:
        return tuple(h.deadline for h in self.items)

    def expected_gain(self) -> float:
        return sum(p * h.weight for p, h in zip(self.probs, self.items))

    def index_of(self, packet: Packet) -> int | None:
        """0-based index of the chain item with the same (weight, deadline)."""
        for i, h in enumerate(self.items):
            if h.weight == packet.weight and h.deadline == packet.deadline:
                return i
        return None


def mixr_chain(pending: Iterable[Packet]) -> Chain | None:
    items = build_chain(pending)
    return Chain.from_items(items) if items else None


def select_index(chain: Chain, rng) -> int:
    """Sample a 0-based chain index with one uniform draw."""
    u = rng.random()
    acc = 0.0
    for i in range(chain.support):
        acc += chain.probs[i]
        if u < acc:
            return i
    return chain.support - 1


def select(chain: Chain, rng) -> Packet:
    return chain.items[select_index(chain, rng)]


def restricted_chain(pending: Iterable[Packet], support_set: Iterable[Packet]) -> Chain:
    """Mix-R with H_0 initialised to ``support_set`` instead of all pending packets."""
    ids = {p.id for p in pending}
    support_set = list(support_set)
    if not support_set:
        raise ContractError("support set must be non-empty")
    outside = [p for p in support_set if p.id not in ids]
    if outside:
        raise ContractError(f"support set is not a subset of pending: {outside}")
    return Chain.from_items(build_chain(support_set))


def greedy_select(pending: Iterable[Packet]) -> Packet:
    return min(pending, key=_priority)


@dataclass(frozen=True)
class Choice:
    packet: Packet | None
    chain: Chain | None = None
    index: int | None = None  # 0-based position of ``packet`` in ``chain``


class MixR:
    name = "mixr"

    def chain(self, pending: Sequence[Packet], t: int | None = None) -> Chain | None:
        return mixr_chain(pending)

    def distribution(self, pending: Sequence[Packet], t: int | None = None) -> list[tuple[Packet, float]]:
        chain = self.chain(pending, t)
        if chain is None:
            return []
        return list(zip(chain.items, chain.probs))

    def choose(self, pending: Sequence[Packet], rng, t: int | None = None) -> Choice:
        chain = self.chain(pending, t)
        if chain is None:
            return Choice(None)
        i = select_index(chain, rng)
        return Choice(chain.items[i], chain, i)


class ProvisionalMixR(MixR):
    """Mix-R restricted to the earliest-deadline and heaviest packets of an
    optimal provisional schedule (at most two candidates per step)."""

    name = "mixr-prov"

    def chain(self, pending: Sequence[Packet], t: int | None = None) -> Chain | None:
        if not pending:
            return None
        if t is None:
            t = max(p.release for p in pending)
        _, support = provisional_schedule(pending, t)
        return restricted_chain(pending, support)


class Greedy:
    """Always transmits the heaviest pending packet."""

    name = "greedy"

    def chain(self, pending: Sequence[Packet], t: int | None = None) -> Chain | None:
        # full Mix-R chain, kept for auditing; greedy's own choice is h_1
        return mixr_chain(pending)

    def distribution(self, pending: Sequence[Packet], t: int | None = None) -> list[tuple[Packet, float]]:
        return [(greedy_select(pending), 1.0)] if pending else []

    def choose(self, pending: Sequence[Packet], rng, t: int | None = None) -> Choice:
        if not pending:
            return Choice(None)
        return Choice(greedy_select(pending))


ALGORITHMS = {cls.name: cls for cls in (MixR, ProvisionalMixR, Greedy)}


def make_algorithm(name: str):
    try:
        return ALGORITHMS[name]()
    except KeyError:
        raise ContractError(
            f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}"
        ) from None
