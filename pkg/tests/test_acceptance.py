"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary and when this file is run directly.
"""

import math
import time

import numpy as np
import pytest

from bdsched import adversary as adv
from bdsched import harness as hz
from bdsched.mixr import build_chain, build_distribution, mixr_chain, select_index
from bdsched.model import Packet, dominates
from bdsched.offline import BRUTE_FORCE_MAX_HORIZON, BRUTE_FORCE_MAX_PACKETS, brute_force_opt, opt_schedule

RESULTS: dict[int, str] = {}

CORPUS_SIZE = 100_000
GAME_RUNS = 20
SWEEP_RUNS = 12  # stderr ~2e-4, far inside the 1% tolerance
GAME_T = 100_000
TIME_LIMIT = 120.0


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS[k] = line
    print(line)
    assert ok, line


def random_corpus(size, seed):
    """Pending sets of 1..50 packets with random real weights and integer deadlines."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(size):
        m = int(rng.integers(1, 51))
        ws = rng.uniform(0.01, 100.0, m)
        if rng.random() < 0.3:  # force weight and deadline ties
            ws = rng.integers(1, 8, m).astype(float)
        ds = rng.integers(1, int(rng.integers(1, 60)) + 1, m)
        out.append([Packet(float(w), 0, int(d), i) for i, (w, d) in enumerate(zip(ws, ds))])
    return out


@pytest.fixture(scope="module")
def corpus():
    return random_corpus(CORPUS_SIZE, 20240101)


@pytest.fixture(scope="module")
def chains(corpus):
    start = time.perf_counter()
    out = [build_chain(p) for p in corpus]
    return out, time.perf_counter() - start


def test_chain_correctness(corpus, chains):
    built, elapsed = chains
    bad = 0
    for pending, chain in zip(corpus, built):
        ok = all(a.weight > b.weight and a.deadline > b.deadline for a, b in zip(chain, chain[1:]))
        ok = ok and all(any(dominates(h, p) for h in chain) for p in pending)
        bad += not ok
    report(1, bad == 0 and elapsed < 30, f"{len(corpus)} sets, {bad} violations, build time {elapsed:.1f}s")


def test_distribution_correctness(chains):
    built, _ = chains
    bad = 0
    for chain in built:
        w = [h.weight for h in chain]
        p, n = build_distribution(w)
        m = len(w)
        ok = abs(sum(p) - 1) <= 1e-9 and 1 <= n <= m
        ok = ok and all(abs(p[i] - (1 - w[i + 1] / w[i])) <= 1e-12 for i in range(n - 1))
        ok = ok and all(p[i] == 0 for i in range(n, m))
        ok = ok and all(p[i] <= 1 - w[i + 1] / w[i] + 1e-12 for i in range(m - 1))
        bad += not ok
    report(2, bad == 0, f"{len(built)} chains, {bad} violations")


def test_per_step_audit():
    steps = violations = 0
    games = []
    for n in (1, 2, 4, 9):
        games.append(("geometric", n, lambda seed, n=n: adv.GeometricQueueStrategy(n, k="auto"), 150_000, 1000 + n))
    for s in (2, 3, 5, 8):
        spec = adv.GeneratorSpec("s_bounded", s=s, steps=25_000, rate=3)
        for seed in range(4):
            games.append(("s_bounded", s, spec, None, seed))
    for _, _, opponent, T, seed in games:
        auditor = hz.Auditor(keep=3)
        hz.run_once("mixr", opponent, T, seed, [auditor])
        steps += auditor.steps
        violations += auditor.violation_count
    report(3, violations == 0 and steps >= 1_000_000, f"{steps} audited steps over {len(games)} games, {violations} violations")


_lowerbound_cache: dict[int, tuple] = {}


def lowerbound_estimate(N):
    if N not in _lowerbound_cache:
        start = time.perf_counter()
        est = hz.estimate_ratio("mixr", hz.geometric_opponent(N - 1, k="auto"), SWEEP_RUNS, GAME_T, base_seed=7000 + 100 * N)
        _lowerbound_cache[N] = (est, time.perf_counter() - start)
    return _lowerbound_cache[N]


def test_two_bounded_tightness():
    start = time.perf_counter()
    est = hz.estimate_ratio("mixr", hz.geometric_opponent(1, a=2.0, k=0), GAME_RUNS, GAME_T, base_seed=4000)
    elapsed = time.perf_counter() - start
    rel = abs(est.ratio / (4 / 3) - 1)
    report(4, rel <= 0.01 and elapsed < TIME_LIMIT,
           f"ratio {est.ratio:.5f} +/- {est.stderr:.5f} vs 4/3 (off {100 * rel:.3f}%), {elapsed:.0f}s")


_sweep: dict[int, tuple[bool, str]] = {}


@pytest.mark.parametrize("N", [2, 3, 5, 10])
def test_lower_bound_sweep(N):
    est, elapsed = lowerbound_estimate(N)
    target = hz.ratio_bound(N)
    rel = abs(est.ratio / target - 1)
    ok = rel <= 0.01 and elapsed < TIME_LIMIT and est.track_N == N
    _sweep[N] = (ok, f"N={N}: ratio {est.ratio:.5f} +/- {est.stderr:.5f} vs {target:.5f} "
                     f"(off {100 * rel:.3f}%), {elapsed:.0f}s")
    all_ok = all(v[0] for v in _sweep.values())
    RESULTS[5] = f"criterion 5: {'PASS' if all_ok else 'FAIL'} - " + "; ".join(v[1] for v in _sweep.values())
    print(_sweep[N][1])
    assert ok, _sweep[N][1]


def test_upper_bound_conformance():
    lines = []
    ok = True
    for s in (2, 3, 5):
        spec = adv.GeneratorSpec("s_bounded", s=s, steps=5_000, rate=3)
        est = hz.estimate_ratio("mixr", spec, GAME_RUNS, base_seed=500 * s)
        bound = hz.ratio_bound(s)
        per_run_n = [r.max_support for r in est.runs]
        this = est.ratio <= bound + 3 * est.stderr and max(per_run_n) <= s
        ok &= this
        lines.append(f"s={s}: {est.ratio:.4f} <= {bound:.4f}+3*{est.stderr:.4f}, track_N {max(per_run_n)}")
    report(6, ok, "; ".join(lines))


def test_opt_oracle_equivalence():
    rng = np.random.default_rng(77)
    mismatches = 0
    count = 10_000
    for _ in range(count):
        m = int(rng.integers(0, BRUTE_FORCE_MAX_PACKETS + 1))
        packets = []
        for i in range(m):
            r = int(rng.integers(0, BRUTE_FORCE_MAX_HORIZON))
            d = int(rng.integers(r + 1, BRUTE_FORCE_MAX_HORIZON + 1))
            packets.append(Packet(float(rng.integers(1, 21)), r, d, i))
        sched = opt_schedule(packets)
        sched.validate()
        mismatches += sched.gain != brute_force_opt(packets)
    report(7, mismatches == 0, f"{count} instances, {mismatches} mismatches")


def _indices(chain, seed, draws=8):
    rng = np.random.default_rng(seed)
    return [select_index(chain, rng) for _ in range(draws)]


def test_invariance():
    sets = random_corpus(10_000, 99)
    rng = np.random.default_rng(5)
    bad = 0
    for k, pending in enumerate(sets):
        base = mixr_chain(pending)
        ids = [h.id for h in base.items]
        picks = _indices(base, k)
        same = mixr_chain(pending)
        c = float(np.exp(rng.uniform(-5, 5)))
        scaled = mixr_chain([Packet(p.weight * c, 0, p.deadline, p.id) for p in pending])
        ds = sorted({p.deadline for p in pending})
        new = np.cumsum(rng.integers(1, 10, len(ds)))
        remap = dict(zip(ds, (int(x) for x in new)))
        moved = mixr_chain([Packet(p.weight, 0, remap[p.deadline], p.id) for p in pending])
        for other in (same, scaled, moved):
            if [h.id for h in other.items] != ids or other.n != base.n or _indices(other, k) != picks:
                bad += 1
                break
        bad += same.probs != base.probs or moved.probs != base.probs
    report(8, bad == 0, f"{len(sets)} sets x 3 transformations, {bad} differences")


def test_buffer_sync_referee():
    lines = []
    ok = True
    games = [(f"geometric n={n}", hz.geometric_opponent(n, k="auto"), 20_000, 30 + n) for n in (1, 2, 4, 9)]
    for s in (2, 3, 5):
        games.append((f"s_bounded s={s}", adv.GeneratorSpec("s_bounded", s=s, steps=10_000, rate=3), None, s))
    for name, opponent, T, seed in games:
        ref = hz.SyncReferee()
        try:
            hz.run_once("mixr", opponent, T, seed, [ref])
        except hz.BufferMismatch as exc:
            ok = False
            lines.append(f"{name}: {exc}")
            continue
        dev = abs(ref.amortized - ref.expected)
        this = dev <= 3 * ref.sigma + 1e-9 * ref.expected
        ok &= this
        lines.append(f"{name}: |{ref.amortized:.1f}-{ref.expected:.1f}| <= 3*{ref.sigma:.1f}")
    report(9, ok, "; ".join(lines))


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
