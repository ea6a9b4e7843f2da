"""Instance generators, the adaptive game engine and the geometric lower-bound adversary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .mixr import Choice, Chain, mixr_chain
from .model import Buffer, ContractError, Packet, PacketFactory, Trace
from .offline import opt_schedule, provisional_schedule

# ---------------------------------------------------------------------------
# oblivious instances


GENERATOR_KINDS = ("s_uniform", "s_bounded", "two_weight", "agreeable")


@dataclass
class GeneratorSpec:
    kind: str = "s_bounded"
    s: int = 2
    steps: int = 100
    rate: int = 2  # packets injected per step
    w_min: float = 1.0
    w_max: float = 10.0

    def __post_init__(self):
        aliases = {"suniform": "s_uniform", "sbounded": "s_bounded", "twoweight": "two_weight"}
        self.kind = aliases.get(self.kind, self.kind)
        if self.kind not in GENERATOR_KINDS:
            raise ContractError(f"unknown generator kind {self.kind!r}")
        if self.s < 1:
            raise ContractError(f"s must be at least 1, got {self.s}")
        if self.steps < 0 or self.rate < 0:
            raise ContractError("steps and rate must be non-negative")
        if not 0 < self.w_min <= self.w_max:
            raise ContractError(f"need 0 < w_min <= w_max, got {self.w_min}, {self.w_max}")
        if self.kind == "two_weight" and self.w_min == self.w_max:
            raise ContractError("two_weight needs w_min < w_max")

    def __call__(self, rng) -> Trace:
        return generate(self, rng)


def generate(spec: GeneratorSpec, rng) -> Trace:
    steps = []
    frontier = 0  # latest deadline issued so far (agreeable instances)
    for t in range(spec.steps):
        arrivals = []
        for _ in range(spec.rate):
            if spec.kind == "two_weight":
                w = float(rng.choice([spec.w_min, spec.w_max]))
            else:
                w = float(rng.uniform(spec.w_min, spec.w_max))
            if spec.kind == "s_uniform":
                life = spec.s
            elif spec.kind == "agreeable":
                lo = max(t + 1, frontier)
                d = int(rng.integers(lo, t + spec.s + 1))
                frontier = max(frontier, d)
                life = d - t
            else:
                life = int(rng.integers(1, spec.s + 1))
            arrivals.append((w, life))
        if arrivals:
            steps.append((t, arrivals))
    return Trace(steps)


def is_s_uniform(trace: Trace, s: int) -> bool:
    return all(l == s for _, a in trace.steps for _, l in a)


def is_s_bounded(trace: Trace, s: int) -> bool:
    return all(1 <= l <= s for _, a in trace.steps for _, l in a)


def distinct_weights(trace: Trace) -> set[float]:
    return {w for _, a in trace.steps for w, _ in a}


def is_agreeable(trace: Trace) -> bool:
    """r_i < r_j implies d_i <= d_j for every pair of packets."""
    latest = -math.inf
    for t, arrivals in trace.steps:
        if not arrivals:
            continue
        ds = [t + l for _, l in arrivals]
        if min(ds) < latest:
            return False
        latest = max(latest, max(ds))
    return True


def satisfies(spec: GeneratorSpec, trace: Trace) -> bool:
    if spec.kind == "s_uniform":
        return is_s_uniform(trace, spec.s)
    if spec.kind == "s_bounded":
        return is_s_bounded(trace, spec.s)
    if spec.kind == "two_weight":
        return is_s_bounded(trace, spec.s) and len(distinct_weights(trace)) <= 2
    return is_s_bounded(trace, spec.s) and is_agreeable(trace)


# ---------------------------------------------------------------------------
# adaptive game


@dataclass
class Response:
    inject: list[Packet] = field(default_factory=list)
    delete: list[Packet] = field(default_factory=list)


class AdversaryStrategy:
    """Injects packets and runs its own schedule alongside the algorithm.

    The engine calls ``choose_transmission`` for step t before the algorithm's
    draw for step t, and reveals the algorithm's packet only in ``post_step``.
    """

    #: queue-mode strategies may delete pending items (Collecting Items)
    deletes = False

    def start(self, factory: PacketFactory, algorithm, T: int) -> list[Packet]:
        raise NotImplementedError

    def choose_transmission(self, t: int, pending: Buffer) -> Packet | None:
        raise NotImplementedError

    def post_step(self, t: int, alg_packet: Packet | None) -> Response:
        raise NotImplementedError


class StrategyViolation(ContractError):
    pass


@dataclass(slots=True)
class StepRecord:
    """One step of a game. Indices are 0-based positions in ``chain``."""

    t: int
    chain: Chain | None
    f: int | None
    z: int | None
    alg_packet: Packet | None
    adv_packet: Packet | None
    alg_gain: float
    adv_gain: float


@dataclass
class GameResult:
    T: int
    alg_gain: float = 0.0
    adv_gain: float = 0.0
    alg_drain: float = 0.0
    adv_drain: float = 0.0
    max_support: int = 0
    records: list[StepRecord] | None = None

    @property
    def ratio(self) -> float:
        return self.adv_gain / self.alg_gain if self.alg_gain else math.inf


class GameObserver:
    def on_start(self, alg_buf: Buffer, adv_buf: Buffer) -> None:
        pass

    def on_choice(self, rec: StepRecord, alg_buf: Buffer) -> None:
        """Called with both choices made, before any buffer is modified."""

    def on_advance(self, rec: StepRecord, deleted: list[Packet], injections: list[Packet], alg_buf: Buffer) -> None:
        pass


def representative_index(chain: Chain, packet: Packet) -> int | None:
    """Chain item standing in for ``packet``: equal value, else its first dominator."""
    i = chain.index_of(packet)
    if i is not None:
        return i
    for i, h in enumerate(chain.items):
        if packet.weight <= h.weight and packet.deadline >= h.deadline:
            return i
    return None


def play_adaptive(
    algorithm,
    strategy: AdversaryStrategy,
    T: int,
    rng,
    observers: Sequence[GameObserver] = (),
    record: bool = False,
) -> GameResult:
    """Play ``T`` steps of the algorithm against an adaptive strategy, then drain."""
    if T < 0:
        raise ContractError(f"T must be non-negative, got {T}")
    factory = PacketFactory()
    alg_buf = Buffer(0)
    adv_buf = Buffer(0)
    for p in strategy.start(factory, algorithm, T):
        alg_buf.add(p)
        adv_buf.add(p)
    result = GameResult(T, records=[] if record else None)
    for obs in observers:
        obs.on_start(alg_buf, adv_buf)

    for t in range(T):
        # adversary commits first; it never sees this step's draw
        adv_pkt = strategy.choose_transmission(t, adv_buf)
        if adv_pkt is not None:
            if adv_buf.get(adv_pkt.id) is not adv_pkt:
                raise StrategyViolation(f"step {t}: adversary transmitted non-pending {adv_pkt}")
            if adv_buf.is_strictly_dominated(adv_pkt):
                raise StrategyViolation(
                    f"step {t}: adversary transmitted strictly dominated {adv_pkt}"
                )
        choice: Choice = algorithm.choose(list(alg_buf), rng, t)
        alg_pkt = choice.packet
        chain = choice.chain
        if chain is not None and chain.support > result.max_support:
            result.max_support = chain.support
        z = None
        if adv_pkt is not None and chain is not None:
            z = representative_index(chain, adv_pkt)
        rec = StepRecord(
            t, chain, choice.index, z, alg_pkt, adv_pkt,
            alg_pkt.weight if alg_pkt else 0.0,
            adv_pkt.weight if adv_pkt else 0.0,
        )
        result.alg_gain += rec.alg_gain
        result.adv_gain += rec.adv_gain
        for obs in observers:
            obs.on_choice(rec, alg_buf)
        if record:
            result.records.append(rec)

        resp = strategy.post_step(t, alg_pkt)
        if alg_pkt is not None:
            alg_buf.remove(alg_pkt)
        if adv_pkt is not None:
            adv_buf.remove(adv_pkt)
        deleted = []
        if resp.delete:
            if not strategy.deletes:
                raise StrategyViolation(f"step {t}: strategy may not delete packets")
            for p in resp.delete:
                if p in alg_buf:
                    alg_buf.remove(p)
                    deleted.append(p)
                if p in adv_buf:
                    adv_buf.remove(p)
        alg_buf.advance(None, resp.inject)
        adv_buf.advance(None, resp.inject)
        for obs in observers:
            obs.on_advance(rec, deleted, resp.inject, alg_buf)

    result.alg_drain = drain_gain(alg_buf)
    result.adv_drain = drain_gain(adv_buf)
    result.alg_gain += result.alg_drain
    result.adv_gain += result.adv_drain
    return result


def drain_gain(buf: Buffer) -> float:
    """Best gain collectable from ``buf`` if nothing else ever arrives."""
    sched, _ = provisional_schedule(buf, buf.current_step)
    return sched.gain


class MirrorStrategy(AdversaryStrategy):
    """Injects a fixed trace and transmits whatever ``policy`` picks on its own buffer.

    With the same policy and seed as the algorithm the two schedules coincide.
    """

    def __init__(self, policy, trace: Trace, seed=None):
        self.policy = policy
        self.trace = trace
        self.rng = np.random.default_rng(seed)

    def start(self, factory, algorithm, T):
        self.arrivals = self.trace.arrivals_by_step(factory)
        return self.arrivals.get(0, [])

    def choose_transmission(self, t, pending):
        return self.policy.choose(list(pending), self.rng, t).packet

    def post_step(self, t, alg_packet):
        return Response(inject=self.arrivals.get(t + 1, []))


class OptReplayStrategy(AdversaryStrategy):
    """Oblivious adversary: injects a fixed trace and follows its offline optimum."""

    def __init__(self, trace: Trace):
        self.trace = trace

    def start(self, factory, algorithm, T):
        self.arrivals = self.trace.arrivals_by_step(factory)
        packets = [p for ps in self.arrivals.values() for p in ps]
        self.schedule = opt_schedule(packets)
        return self.arrivals.get(0, [])

    def choose_transmission(self, t, pending):
        return self.schedule.assignments.get(t)

    def post_step(self, t, alg_packet):
        return Response(inject=self.arrivals.get(t + 1, []))


# ---------------------------------------------------------------------------
# geometric lower-bound construction


def default_growth(n: int) -> float:
    return 1.0 + 1.0 / n


def geometric_expected_ratio(n: int, a: float, q: Sequence[float], k: int) -> float:
    """Amortized per-step adversary gain over algorithm gain for strategy k."""
    q = np.asarray(q, dtype=float)
    if q.shape != (n + 1,):
        raise ContractError(f"q must have n+1={n + 1} entries")
    if abs(q.sum() - 1.0) > 1e-9 or (q < 0).any():
        raise ContractError(f"q is not a probability distribution: {q.tolist()}")
    if not 0 <= k <= n:
        raise ContractError(f"k must be in 0..{n}")
    w = a ** np.arange(n + 1)
    return float((w[k] + q[k + 1:] @ w[k + 1:]) / (q @ w))


def geometric_mixing_weights(n: int, a: float) -> np.ndarray:
    """Coefficients v_0..v_n averaging the n+1 strategies into the a^(n+1)/M bound."""
    if not a > 1:
        raise ContractError(f"growth factor must exceed 1, got {a}")
    if a - n * (a - 1) < -1e-12:
        raise ContractError(
            f"a={a} makes v_n negative; need a <= n/(n-1) (a = 1 + 1/n is the optimum)"
        )
    M = a ** (n + 1) - n * (a - 1)
    v = np.array([a ** (n - k) * (a - 1) for k in range(n)] + [a - n * (a - 1)]) / M
    return np.clip(v, 0.0, None)


def geometric_bound(n: int, a: float) -> float:
    return a ** (n + 1) / (a ** (n + 1) - n * (a - 1))


def auto_best_k(n: int, a: float, q: Sequence[float], rel_tol: float = 1e-12) -> int:
    """Strategy index maximizing the expected ratio; near-ties go to the smallest k."""
    ratios = [geometric_expected_ratio(n, a, q, k) for k in range(n + 1)]
    top = max(ratios)
    return next(k for k, r in enumerate(ratios) if r >= top * (1 - rel_tol))


def geometric_pending(n: int, a: float, deadline_base: int = 1) -> list[Packet]:
    """Items a^0..a^n in increasing deadline order."""
    return [Packet(a ** j, 0, deadline_base + j, j) for j in range(n + 1)]


def algorithm_geometric_distribution(algorithm, n: int, a: float) -> list[float]:
    """The memoryless algorithm's distribution q over the geometric items."""
    pending = geometric_pending(n, a)
    q = [0.0] * (n + 1)
    for p, prob in algorithm.distribution(pending, 0):
        q[p.id] += prob
    return q


class GeometricQueueStrategy(AdversaryStrategy):
    """Adaptive strategy keeping exactly one copy of each a^0..a^n pending for the
    algorithm; the adversary collects a^k every step and hoards copies of heavier
    items the algorithm took.

    ``mode="queue"`` deletes a^0..a^k each step and reissues them. ``mode="packet"``
    stays within the packet model: a^0 arrives with lifespan 1 every step and the
    heavier items carry fixed deadlines past the end of the game. Expiry can only
    emulate deletion of a^0 there, so packet mode requires k = 0.
    """

    def __init__(self, n: int, a: float | None = None, k: int | str = 0, mode: str = "queue"):
        if n < 1:
            raise ContractError(f"n must be at least 1, got {n}")
        if mode not in ("queue", "packet"):
            raise ContractError(f"mode must be 'queue' or 'packet', got {mode!r}")
        self.n = n
        self.a = default_growth(n) if a is None else float(a)
        if not self.a > 1:
            raise ContractError(f"growth factor must exceed 1, got {self.a}")
        if k != "auto" and not 0 <= int(k) <= n:
            raise ContractError(f"k must be in 0..{n} or 'auto'")
        self.k_spec = k
        self.mode = mode
        self.deletes = mode == "queue"
        self.weights = [self.a ** j for j in range(n + 1)]

    def resolve_k(self, algorithm) -> int:
        if self.k_spec == "auto":
            q = algorithm_geometric_distribution(algorithm, self.n, self.a)
            return auto_best_k(self.n, self.a, q)
        return int(self.k_spec)

    def start(self, factory, algorithm, T):
        self.factory = factory
        self.k = self.resolve_k(algorithm)
        if self.mode == "packet" and self.k != 0:
            raise ContractError(
                "packet mode can only emulate strategy k=0; use mode='queue' for k>0"
            )
        # past the last step of the game plus the longest possible drain
        self.base = 2 * T + 2 * self.n + 4
        self.current = [self._issue(j, 0) for j in range(self.n + 1)]
        self._index = {p.id: j for j, p in enumerate(self.current)}
        return list(self.current)

    def _issue(self, j: int, release: int) -> Packet:
        if self.mode == "packet" and j == 0:
            deadline = release + 1
        else:
            deadline = self.base + j
        return self.factory.make(self.weights[j], release, deadline)

    def choose_transmission(self, t, pending):
        return self.current[self.k]

    def post_step(self, t, alg_packet):
        k = self.k
        j = self._index[alg_packet.id]
        if self.mode == "queue":
            resp = Response(delete=self.current[: k + 1])
            refresh = list(range(k + 1))
        else:
            resp = Response()
            refresh = [0]
        if j > k:
            refresh.append(j)
        for i in refresh:
            p = self.current[i] = self._issue(i, t + 1)
            self._index[p.id] = i
            resp.inject.append(p)
        return resp


def parse_adversary(text: str) -> GeometricQueueStrategy:
    """Parse ``geometric:n=<int>[,a=<float>][,k=<int|auto>][,mode=queue|packet]``."""
    name, _, args = text.partition(":")
    if name != "geometric":
        raise ContractError(f"unknown adversary {name!r}")
    params = {}
    for item in filter(None, args.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ContractError(f"malformed adversary parameter {item!r}")
        params[key.strip()] = val.strip()
    unknown = set(params) - {"n", "a", "k", "mode"}
    if unknown or "n" not in params:
        raise ContractError(f"adversary needs n=<int>; unknown keys {sorted(unknown)}")
    k = params.get("k", "0")
    return GeometricQueueStrategy(
        int(params["n"]),
        float(params["a"]) if "a" in params else None,
        "auto" if k == "auto" else int(k),
        params.get("mode", "queue"),
    )


def parse_generator(text: str) -> GeneratorSpec:
    """Parse ``<kind>:s=<int>,steps=<int>,rate=<int>,wmin=<float>,wmax=<float>``."""
    kind, _, args = text.partition(":")
    params = {}
    for item in filter(None, args.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ContractError(f"malformed generator parameter {item!r}")
        params[key.strip()] = val.strip()
    casts = {"s": int, "steps": int, "rate": int, "wmin": float, "wmax": float}
    unknown = set(params) - set(casts)
    if unknown:
        raise ContractError(f"unknown generator keys {sorted(unknown)}")
    kw = {k: casts[k](v) for k, v in params.items()}
    if "wmin" in kw:
        kw["w_min"] = kw.pop("wmin")
    if "wmax" in kw:
        kw["w_max"] = kw.pop("wmax")
    return GeneratorSpec(kind, **kw)
