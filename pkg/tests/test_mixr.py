import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdsched.mixr import (
    Chain,
    Greedy,
    MixR,
    ProvisionalMixR,
    build_chain,
    build_distribution,
    greedy_select,
    make_algorithm,
    mixr_chain,
    restricted_chain,
    select,
    select_index,
)
from bdsched.model import ContractError, Packet, dominates

from conftest import pending_sets
from oracles import chain_by_definition, distribution_by_loop


def vals(packets):
    return [(p.weight, p.deadline) for p in packets]


def pk(*pairs):
    return [Packet(float(w), 0, d, i) for i, (w, d) in enumerate(pairs)]


@pytest.mark.parametrize(
    "pending, expected",
    [
        (pk((10, 5), (8, 3), (7, 4), (4, 1)), [(10, 5), (8, 3), (4, 1)]),
        (pk((5, 3), (5, 1)), [(5, 1)]),
        (pk((7, 2)), [(7, 2)]),
    ],
)
def test_build_chain_examples(pending, expected):
    assert vals(build_chain(pending)) == expected


def test_empty_pending_is_noop():
    assert build_chain([]) == []
    assert mixr_chain([]) is None
    assert MixR().choose([], np.random.default_rng(0)).packet is None


@pytest.mark.parametrize(
    "weights, probs, n",
    [((10, 8, 4), (0.2, 0.5, 0.3), 3), ((10, 1, 0.5), (0.9, 0.1, 0.0), 2), ((7,), (1.0,), 1)],
)
def test_build_distribution_examples(weights, probs, n):
    p, got_n = build_distribution(weights)
    assert got_n == n
    assert p == pytest.approx(probs, abs=1e-15)


def test_build_distribution_rejects_bad_chains():
    with pytest.raises(ContractError):
        build_distribution([])
    with pytest.raises(ContractError):
        build_distribution([3, 3])
    with pytest.raises(ContractError):
        build_distribution([2, 5])


def test_select_point_mass_and_zero_probability(rng):
    one = Chain.from_items(pk((7, 2)))
    assert all(select(one, rng).weight == 7 for _ in range(100))
    chain = Chain.from_items(pk((10, 3), (1, 2), (0.5, 1)))
    assert chain.probs[2] == 0
    assert all(select_index(chain, rng) != 2 for _ in range(20_000))


def test_select_frequencies_within_three_sigma():
    chain = Chain.from_items(pk((10, 3), (8, 2), (4, 1)))
    rng = np.random.default_rng(2024)
    draws = 1_000_000
    counts = np.bincount([select_index(chain, rng) for _ in range(draws)], minlength=3)
    for c, p in zip(counts, (0.2, 0.5, 0.3)):
        sigma = math.sqrt(draws * p * (1 - p))
        assert abs(c - draws * p) <= 3 * sigma


def test_restricted_chain_examples():
    pending = pk((10, 5), (8, 3), (4, 1))
    assert vals(restricted_chain(pending, pending).items) == vals(build_chain(pending))
    sub = restricted_chain(pending, pending[1:])
    assert vals(sub.items) == [(8, 3), (4, 1)]
    assert sub.probs == pytest.approx((0.5, 0.5))
    single = restricted_chain(pending, pending[:1])
    assert single.probs == (1.0,)
    with pytest.raises(ContractError):
        restricted_chain(pending, [])
    with pytest.raises(ContractError):
        restricted_chain(pending, [Packet(1.0, 0, 2, 99)])


@pytest.mark.parametrize(
    "pending, expected",
    [(pk((10, 5), (8, 3)), (10, 5)), (pk((5, 3), (5, 1)), (5, 1)), (pk((7, 2)), (7, 2))],
)
def test_greedy_select_examples(pending, expected):
    p = greedy_select(pending)
    assert (p.weight, p.deadline) == expected
    assert Greedy().choose(pending, None).packet is p


def test_algorithm_registry():
    assert isinstance(make_algorithm("mixr"), MixR)
    assert isinstance(make_algorithm("greedy"), Greedy)
    assert isinstance(make_algorithm("mixr-prov"), ProvisionalMixR)
    with pytest.raises(ContractError):
        make_algorithm("nope")


def test_provisional_variant_support_at_most_two(rng):
    pending = pk((10, 5), (8, 3), (7, 4), (4, 1), (3, 2))
    chain = ProvisionalMixR().chain(pending, 0)
    assert 1 <= chain.m <= 2
    assert sum(chain.probs) == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=300)
@given(pending_sets(max_size=15, integer_weights=True))
def test_chain_matches_definitional_algorithm(pending):
    assert build_chain(pending) == chain_by_definition(pending)


@settings(max_examples=300)
@given(pending_sets(max_size=20))
def test_chain_structure(pending):
    chain = build_chain(pending)
    for a, b in zip(chain, chain[1:]):
        assert a.weight > b.weight and a.deadline > b.deadline
    for p in pending:
        assert any(dominates(h, p) for h in chain)
    # chain length bounded by distinct lifespans and distinct weights
    assert len(chain) <= len({p.deadline for p in pending})
    assert len(chain) <= len({p.weight for p in pending})


@settings(max_examples=300)
@given(pending_sets(max_size=20))
def test_distribution_matches_transcribed_loop(pending):
    weights = [h.weight for h in build_chain(pending)]
    p, n = build_distribution(weights)
    p_ref, n_ref = distribution_by_loop(weights)
    assert n == n_ref
    assert p == pytest.approx(p_ref, abs=1e-12)


@settings(max_examples=300)
@given(pending_sets(max_size=20))
def test_distribution_facts(pending):
    chain = mixr_chain(pending)
    w, p, n, m = chain.weights, chain.probs, chain.n, chain.m
    assert abs(sum(p) - 1) <= 1e-9
    assert all(x >= 0 for x in p)
    assert 1 <= n <= m
    for i in range(n - 1):
        assert p[i] == pytest.approx(1 - w[i + 1] / w[i], abs=1e-12)
    for i in range(n, m):
        assert p[i] == 0
    for i in range(m - 1):
        assert p[i] <= 1 - w[i + 1] / w[i] + 1e-12


@settings(max_examples=300)
@given(pending_sets(max_size=20))
def test_gain_identity_and_bounds(pending):
    from bdsched.harness import gain_identity

    chain = mixr_chain(pending)
    w1, n = chain.weights[0], chain.n
    gain = chain.expected_gain()
    assert gain == pytest.approx(gain_identity(chain), rel=1e-12, abs=1e-12 * w1)
    assert gain >= w1 * (1 - (1 - 1 / n) ** n) - 1e-9 * w1
    prefix = 0.0
    for z in range(chain.m):
        adv = chain.weights[z] + prefix
        assert adv <= w1 * (1 + 1e-9)
        if z < n:
            assert adv == pytest.approx(w1, rel=1e-9)
        prefix += chain.probs[z] * chain.weights[z]


@settings(max_examples=200)
@given(pending_sets(max_size=20), st.floats(1e-3, 1e3), st.randoms(use_true_random=False))
def test_memoryless_scale_and_deadline_invariance(pending, c, rnd):
    base = mixr_chain(pending)
    ids = [h.id for h in base.items]
    again = mixr_chain(list(reversed(pending)))
    assert [h.id for h in again.items] == ids and again.probs == base.probs
    scaled = mixr_chain([Packet(p.weight * c, p.release, p.deadline, p.id) for p in pending])
    assert [h.id for h in scaled.items] == ids
    assert scaled.n == base.n
    assert scaled.probs == pytest.approx(base.probs, abs=1e-12)
    # strictly increasing remap of deadlines
    ds = sorted({p.deadline for p in pending})
    gaps = [rnd.randint(1, 5) for _ in ds]
    remap = {d: sum(gaps[: i + 1]) for i, d in enumerate(ds)}
    moved = mixr_chain([Packet(p.weight, 0, remap[p.deadline], p.id) for p in pending])
    assert [h.id for h in moved.items] == ids and moved.probs == base.probs
