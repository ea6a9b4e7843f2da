"""Per-step audits of Mix-R's distribution, the buffer-sync referee and
Monte Carlo competitive-ratio estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import adversary as adv
from .mixr import Chain, make_algorithm, mixr_chain
from .model import Buffer, ContractError, Packet, PacketFactory, Trace
from .offline import opt_schedule

AUDIT_RTOL = 1e-9
RNG_NAME = "numpy.random.PCG64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def ratio_bound(N: int) -> float:
    """Competitive ratio guaranteed when at most N packets get positive probability."""
    if N < 1:
        raise ContractError(f"N must be at least 1, got {N}")
    return 1.0 / (1.0 - (1.0 - 1.0 / N) ** N)


E_RATIO = math.e / (math.e - 1)


# ---------------------------------------------------------------------------
# analytic audit of one step


class AuditViolation(AssertionError):
    def __init__(self, msg: str, chain: Chain):
        self.chain = chain
        super().__init__(
            f"{msg}; chain weights={list(chain.weights)} deadlines={list(chain.deadlines)} "
            f"probs={list(chain.probs)} n={chain.support}"
        )


@dataclass
class AuditReport:
    adv_gains: list[float]  # E[adversary amortized gain | it sends h_z], z = 0..m-1
    max_adv_gain: float
    alg_gain: float
    alg_lower_bound: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def ratio(self) -> float:
        return self.max_adv_gain / self.alg_gain


def audit_step(chain: Chain, strict: bool = True, rtol: float = AUDIT_RTOL) -> AuditReport:
    """Check the per-step inequalities E[ADV] <= w_1 and E[MIX] >= w_1(1-(1-1/n)^n)."""
    w, p, n = chain.weights, chain.probs, chain.support
    w1 = w[0]
    tol = rtol * w1
    adv_gains = []
    prefix = 0.0
    for wz, pz in zip(w, p):
        adv_gains.append(wz + prefix)
        prefix += pz * wz
    alg_gain = prefix
    bound = w1 * (1.0 - (1.0 - 1.0 / n) ** n) if n >= 1 else math.inf
    report = AuditReport(adv_gains, max(adv_gains), alg_gain, bound)

    total = sum(p)
    if abs(total - 1.0) > rtol or min(p) < 0:
        report.violations.append(f"probabilities do not form a distribution (sum={total!r})")
    if report.max_adv_gain > w1 + tol:
        report.violations.append(
            f"adversary gain {report.max_adv_gain!r} exceeds w_1={w1!r}"
        )
    for z in range(min(n, len(w))):
        if abs(adv_gains[z] - w1) > tol:
            report.violations.append(
                f"adversary gain for z={z} is {adv_gains[z]!r}, not equalized with w_1={w1!r}"
            )
            break
    if alg_gain < bound - tol:
        report.violations.append(f"expected gain {alg_gain!r} below bound {bound!r}")
    if strict and report.violations:
        raise AuditViolation("; ".join(report.violations), chain)
    return report


def gain_identity(chain: Chain) -> float:
    """w_1 (1 - prod_{i<n}(1-p_i) * sum_{i<n} p_i), equal to the expected gain."""
    n = chain.support
    head = chain.probs[: n - 1]
    return chain.weights[0] * (1.0 - math.prod(1.0 - x for x in head) * sum(head))


# ---------------------------------------------------------------------------
# buffer-sync referee


class BufferMismatch(AssertionError):
    pass


@dataclass
class RefereeResult:
    gain: float
    case: int


def _remove_value(buf: Buffer, weight: float, deadline: int) -> Packet:
    for p in buf:
        if p.weight == weight and p.deadline == deadline:
            buf.remove(p)
            return p
    raise BufferMismatch(f"no packet ({weight}, d={deadline}) in adversary buffer {buf!r}")


def buffer_sync_referee(
    chain: Chain,
    f: int,
    z: int,
    alg_buffer: Buffer,
    adv_buffer: Buffer,
    factory: PacketFactory,
) -> RefereeResult:
    """Apply the amortization buffer modification for one step.

    ``alg_buffer`` and ``adv_buffer`` hold the pending packets before the step
    and must agree as multisets of (weight, deadline). The algorithm sends
    chain item ``f`` and the adversary item ``z`` (0-based). ``adv_buffer`` is
    modified in place so that it equals the algorithm's post-transmission
    buffer; the adversary's amortized gain is returned.
    """
    if alg_buffer.values() != adv_buffer.values():
        raise BufferMismatch(
            f"buffers differ before the step: alg={alg_buffer!r} adv={adv_buffer!r}"
        )
    hf, hz = chain.items[f], chain.items[z]
    _remove_value(adv_buffer, hz.weight, hz.deadline)
    if f == z:
        result = RefereeResult(hz.weight, 1)
    elif hf.deadline <= hz.deadline:
        # case 1: upgrade h_f to a copy of h_z
        _remove_value(adv_buffer, hf.weight, hf.deadline)
        adv_buffer.add(factory.copy(hz))
        result = RefereeResult(hz.weight, 1)
    else:
        # case 2: adversary also sends h_f, and receives a copy of h_z
        _remove_value(adv_buffer, hf.weight, hf.deadline)
        adv_buffer.add(factory.copy(hz))
        result = RefereeResult(hz.weight + hf.weight, 2)
    expected = alg_buffer.values()
    expected[hf.value] -= 1
    if +expected != adv_buffer.values():
        raise BufferMismatch(f"buffers differ after step with f={f}, z={z}")
    return result


class SyncReferee(adv.GameObserver):
    """Runs the amortized accounting alongside a game on a shadow adversary buffer.

    The real adversary's packet is mapped to its chain representative; if the
    algorithm has nothing dominating it, h_1 (the worst case for the algorithm)
    stands in.
    """

    def __init__(self):
        self.factory = PacketFactory(start=-(10**15))
        self.steps = 0
        self.amortized = 0.0
        self.expected = 0.0
        self.variance = 0.0
        self.cases = [0, 0, 0]

    def on_start(self, alg_buf, adv_buf):
        self.shadow = Buffer(alg_buf.current_step, [self.factory.copy(p) for p in alg_buf])

    def on_choice(self, rec, alg_buf):
        if rec.alg_packet is None:
            if len(self.shadow):
                raise BufferMismatch(f"step {rec.t}: shadow buffer not empty")
            return
        chain = rec.chain or mixr_chain(list(alg_buf))
        f = rec.f if rec.f is not None else chain.index_of(rec.alg_packet)
        z = rec.z if rec.chain is not None else None
        if z is None and rec.adv_packet is not None:
            z = adv.representative_index(chain, rec.adv_packet)
        if z is None:
            z = 0
        res = buffer_sync_referee(chain, f, z, alg_buf, self.shadow, self.factory)
        self.steps += 1
        self.amortized += res.gain
        self.cases[res.case] += 1
        w, p = chain.weights, chain.probs
        mean = sum(p[i] * w[i] for i in range(z))
        second = sum(p[i] * w[i] ** 2 for i in range(z))
        self.expected += audit_step(chain, strict=False).adv_gains[z]
        self.variance += second - mean * mean

    def on_advance(self, rec, deleted, injections, alg_buf):
        for p in deleted:
            _remove_value(self.shadow, p.weight, p.deadline)
        self.shadow.advance(None, injections)
        if self.shadow.values() != alg_buf.values():
            raise BufferMismatch(f"step {rec.t}: buffers differ at step boundary")

    @property
    def sigma(self) -> float:
        return math.sqrt(max(self.variance, 0.0))


class Auditor(adv.GameObserver):
    """Audits every step's chain; keeps a few violations for reporting."""

    def __init__(self, strict: bool = False, keep: int = 10, perturb: float = 0.0):
        self.strict = strict
        self.keep = keep
        self.perturb = perturb
        self.steps = 0
        self.violation_count = 0
        self.violations: list[tuple[int, str]] = []
        self.worst_ratio = 0.0

    def on_choice(self, rec, alg_buf):
        chain = rec.chain
        if chain is None:
            return
        if self.perturb:
            # negative control: a deliberately broken distribution
            probs = (chain.probs[0] + self.perturb,) + chain.probs[1:]
            chain = Chain(chain.items, probs, chain.support)
        report = audit_step(chain, strict=self.strict)
        self.steps += 1
        if report.ratio > self.worst_ratio:
            self.worst_ratio = report.ratio
        if not report.ok:
            self.violation_count += 1
            if len(self.violations) < self.keep:
                self.violations.append((rec.t, str(AuditViolation("; ".join(report.violations), chain))))


# ---------------------------------------------------------------------------
# ratio estimation


def track_N(records: Iterable[adv.StepRecord]) -> int:
    """Largest number of packets given positive probability in any step."""
    return max((r.chain.support for r in records if r.chain is not None), default=0)


@dataclass
class RunResult:
    seed: int
    alg_gain: float
    opp_gain: float
    max_support: int


@dataclass
class RatioEstimate:
    alg_total: float
    opp_total: float
    runs: list[RunResult]
    base_seed: int
    rng: str = RNG_NAME

    @property
    def ratio(self) -> float:
        return self.opp_total / self.alg_total if self.alg_total else math.inf

    @property
    def stderr(self) -> float:
        """Delta-method standard error of the ratio of summed gains."""
        k = len(self.runs)
        if k < 2 or not self.alg_total:
            return 0.0
        a = np.array([r.alg_gain for r in self.runs])
        o = np.array([r.opp_gain for r in self.runs])
        resid = o - self.ratio * a
        return float(np.sqrt((resid**2).sum() / (k * (k - 1))) / a.mean())

    @property
    def track_N(self) -> int:
        return max((r.max_support for r in self.runs), default=0)

    @property
    def seeds(self) -> list[int]:
        return [r.seed for r in self.runs]

    def as_dict(self) -> dict:
        N = self.track_N
        return {
            "ratio": self.ratio,
            "stderr": self.stderr,
            "alg_total": self.alg_total,
            "opp_total": self.opp_total,
            "runs": len(self.runs),
            "base_seed": self.base_seed,
            "seeds": self.seeds,
            "rng": self.rng,
            "track_N": N,
            "ratio_bound": ratio_bound(N) if N else None,
        }


def play_trace(algorithm, trace: Trace, rng, observers=(), record=False) -> adv.GameResult:
    """Run the algorithm on an oblivious trace; the opponent follows the offline optimum."""
    return adv.play_adaptive(
        algorithm, adv.OptReplayStrategy(trace), trace.horizon, rng, observers, record
    )


def run_once(
    algorithm,
    opponent,
    T: int | None,
    seed: int,
    observers: Sequence[adv.GameObserver] = (),
    record: bool = False,
) -> adv.GameResult:
    """One game against ``opponent``: a Trace, a GeneratorSpec, or a strategy factory."""
    if isinstance(algorithm, str):
        algorithm = make_algorithm(algorithm)
    rng = make_rng(seed)
    if isinstance(opponent, adv.GeneratorSpec):
        opponent = opponent(rng)
    if isinstance(opponent, Trace):
        return play_trace(algorithm, opponent, rng, observers, record)
    strategy = opponent(seed) if callable(opponent) else opponent
    return adv.play_adaptive(algorithm, strategy, T or 0, rng, observers, record)


def estimate_ratio(
    algorithm,
    opponent,
    runs: int,
    T: int | None = None,
    base_seed: int = 0,
    observers: Callable[[], Sequence[adv.GameObserver]] | None = None,
) -> RatioEstimate:
    """Ratio of summed opponent gain to summed algorithm gain over independent runs.

    Run i uses seed ``base_seed + i``. Against traces the opponent gain is the
    offline optimum; against adaptive strategies it is the strategy's own gain.
    """
    if runs < 1:
        raise ContractError(f"runs must be at least 1, got {runs}")
    results = []
    for i in range(runs):
        seed = base_seed + i
        game = run_once(algorithm, opponent, T, seed, observers() if observers else ())
        results.append(RunResult(seed, game.alg_gain, game.adv_gain, game.max_support))
    return RatioEstimate(
        sum(r.alg_gain for r in results),
        sum(r.opp_gain for r in results),
        results,
        base_seed,
    )


def geometric_opponent(n: int, a: float | None = None, k=0, mode: str = "queue"):
    def factory(seed):
        return adv.GeometricQueueStrategy(n, a, k, mode)

    return factory


def self_opponent(algorithm_name: str, trace: Trace):
    """The algorithm's own schedule as opponent (same policy, same random stream)."""

    def factory(seed):
        return adv.MirrorStrategy(make_algorithm(algorithm_name), trace, seed)

    return factory
