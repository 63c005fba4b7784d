import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disco_fcit.aggregators import AggregatorSpec
from disco_fcit.identity import IdentityToken
from disco_fcit.lowrank import DegenerateInputError, LowRankAdapter
from disco_fcit.server import (FRESH, ClientUpdate, DynamicCache, SubspaceEntry,
                               cache_from_dict, cache_to_dict, match_token,
                               merge_global_token, pair_mismatched,
                               select_client_subspace, server_round)

import oracles
from conftest import make_update, random_adapter


def entry(vec, n=1, adapter=None):
    adapter = adapter or LowRankAdapter(np.zeros((2, 1)), np.zeros((1, 2)))
    return SubspaceEntry(adapter=adapter, token=IdentityToken(np.asarray(vec, float), n))


def unit_at_angle(c):
    """2-d unit vector with cosine ``c`` to (1, 0)."""
    return np.array([c, np.sqrt(1 - c * c)])


def test_match_self_and_orthogonal():
    cache = DynamicCache((entry([1, 0]), entry([0, 1])))
    assert match_token(IdentityToken(np.array([2.0, 0.0]), 1), cache) == 0
    assert match_token(IdentityToken(np.array([0.0, 0.0, 1.0]), 1),
                       DynamicCache((entry([1, 0, 0]), entry([0, 1, 0])))) is None


def test_match_prefers_highest_then_lowest_index():
    q = np.array([1.0, 0.0])
    cache = DynamicCache((entry(unit_at_angle(0.93)), entry(unit_at_angle(0.95))))
    sims = [oracles.cos(q, e.token.vector) for e in cache.entries]
    assert match_token(IdentityToken(q, 1), cache) == int(np.argmax(sims)) == 1
    tie = DynamicCache((entry(unit_at_angle(0.95)), entry(unit_at_angle(0.95))))
    assert match_token(IdentityToken(q, 1), tie) == 0


def test_match_empty_cache_and_degenerate():
    assert match_token(IdentityToken(np.array([1.0, 0.0]), 1), DynamicCache()) is None
    with pytest.raises(DegenerateInputError):
        match_token(IdentityToken(np.zeros(2), 1), DynamicCache((entry([1, 0]),)))


def test_select_client_subspace():
    q = IdentityToken(np.array([1.0, 0.0]), 3)
    assert select_client_subspace(DynamicCache(), q) is FRESH
    cache = DynamicCache((entry([0, 1]), entry([0, 1]), entry([1, 0])))
    assert select_client_subspace(cache, q) == 2
    near = DynamicCache((entry(unit_at_angle(0.89)),), tau=0.9)
    assert oracles.cos([1, 0], near.entries[0].token.vector) < 0.9
    assert select_client_subspace(near, q) is FRESH


def test_pair_mismatched_examples():
    same = [make_update([1, 0], 2, 0), make_update([3, 0], 1, 1)]
    assert [len(g) for g in pair_mismatched(same, 0.9)] == [2]
    ortho = [make_update(v, 1, i) for i, v in enumerate(np.eye(3))]
    assert [len(g) for g in pair_mismatched(ortho, 0.9)] == [1, 1, 1]


def test_pair_mismatched_against_exhaustive_grouping():
    # tokens 0 and 1 at cosine 0.95, token 2 at 0.3 to both
    t0 = np.array([1.0, 0.0, 0.0])
    t1 = np.array([0.95, np.sqrt(1 - 0.95**2), 0.0])
    a = 0.3
    b = (0.3 - 0.95 * a) / np.sqrt(1 - 0.95**2)
    t2 = np.array([a, b, np.sqrt(1 - a * a - b * b)])
    toks = [t0, t1, t2]
    assert oracles.cos(t1, t2) == pytest.approx(0.3, abs=1e-12)
    ups = [make_update(t, 1, i) for i, t in enumerate(toks)]
    groups = sorted(sorted(u.client_id for u in g) for g in pair_mismatched(ups, 0.9))
    assert groups == oracles.best_grouping([t.tolist() for t in toks], 0.9) == [[0, 1], [2]]


def test_pair_mismatched_iterates_in_client_order():
    ups = [make_update([0, 1], 1, 5), make_update([1, 0], 1, 2)]
    groups = pair_mismatched(ups, 0.9)
    assert [g[0].client_id for g in groups] == [2, 5]


def test_merge_global_token_examples():
    tok = merge_global_token(entry([1, 0], 2), [make_update([0, 1], 2)])
    assert tok.vector.tolist() == [0.5, 0.5] and tok.support == 4
    single = merge_global_token(None, [make_update([0.6, 0.8], 7)])
    assert np.allclose(single.vector, [0.6, 0.8], atol=1e-15) and single.support == 7
    tok = merge_global_token(entry([2, 0], 3), [make_update([0, 3], 1), make_update([1, 1], 2)])
    want = oracles.weighted_mean([[2, 0], [0, 3], [1, 1]], [3, 1, 2])
    assert np.max(np.abs(tok.vector - want)) < 1e-12
    assert np.allclose(tok.vector, [8 / 6, 5 / 6], atol=1e-15) and tok.support == 6


def _adapter(rng):
    return random_adapter(rng, 3, 4, 2)


def test_server_round_singleton_fedavg(rng):
    cache = DynamicCache((entry([1, 0, 0], 4, _adapter(rng)),))
    a = _adapter(rng)
    new = server_round([make_update([1, 0, 0], 3, 0, a)], cache)
    assert new.entries[0].adapter.identical(a)
    assert new.entries[0].token.support == 7


def test_server_round_creates_entry_from_mutual_matches(rng):
    a1, a2 = _adapter(rng), _adapter(rng)
    cache = DynamicCache((entry([1, 0, 0], 4, _adapter(rng)),))
    ups = [make_update([0, 1, 0], 3, 0, a1), make_update([0, 1, 0.01], 5, 1, a2)]
    new = server_round(ups, cache, stage=2)
    assert len(new) == 2 and new.entries[1].created_at_stage == 2
    want = oracles.weighted_mean([a1.B.ravel().tolist(), a2.B.ravel().tolist()], [3, 5])
    assert np.max(np.abs(new.entries[1].adapter.B.ravel() - want)) < 1e-12
    assert new.entries[0] is cache.entries[0]


def test_server_round_empty_is_noop(rng):
    cache = DynamicCache((entry([1, 0], 2, random_adapter(rng, 2, 2, 1)),))
    assert server_round([], cache) is cache


def test_server_round_only_reads_upload_fields(rng):
    # ClientUpdate carries no task label; routing is decided by tokens alone
    assert "task" not in ClientUpdate.__dataclass_fields__
    a = _adapter(rng)
    up = make_update([1, 0, 0], 2, 0, a)
    relabeled = make_update([1, 0, 0], 2, 99, a)
    c1 = server_round([up], DynamicCache())
    c2 = server_round([relabeled], DynamicCache())
    assert c1.entries[0].adapter.identical(c2.entries[0].adapter)


def _random_round(g, dim, n_updates):
    # tokens near one of a few prototype directions so matching actually happens
    protos = np.eye(dim)[: max(2, dim // 2)]
    ups = []
    for i in range(n_updates):
        v = protos[g.integers(len(protos))] + 0.05 * g.standard_normal(dim)
        ups.append(make_update(np.abs(v), int(g.integers(1, 20)), i, random_adapter(g, 3, 4, 2)))
    return ups


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["FedAvg", "FedAdam", "FedYogi"]))
def test_round_invariants(seed, kind):
    g = np.random.default_rng(seed)
    cache = DynamicCache(tau=0.9)
    spec = AggregatorSpec(kind)
    for rnd in range(4):
        ups = _random_round(g, 6, int(g.integers(0, 6)))
        matched = {match_token(u.token, cache) for u in ups}
        before_total = sum(e.token.support for e in cache.entries)
        new = server_round(ups, cache, spec, stage=rnd)
        # count conservation and monotone growth
        assert sum(e.token.support for e in new.entries) == before_total + sum(u.sample_count for u in ups)
        assert len(new) >= len(cache)
        # subspace isolation
        for i, e in enumerate(cache.entries):
            if i not in matched:
                assert new.entries[i].adapter.identical(e.adapter)
                assert new.entries[i].token.vector.tobytes() == e.token.vector.tobytes()
        cache = new


def test_low_threshold_collapses_to_one_subspace(rng):
    ups = [make_update(np.abs(rng.standard_normal(4)) + 0.1, 2, i, _adapter(rng)) for i in range(6)]
    cache = server_round(ups, DynamicCache(tau=0.1))
    assert len(cache) == 1


def test_replay_is_bitwise_identical():
    def replay():
        g = np.random.default_rng(7)
        cache = DynamicCache()
        for rnd in range(5):
            cache = server_round(_random_round(g, 6, 4), cache, AggregatorSpec("FedAdam"), stage=rnd)
        return json.dumps(cache_to_dict(cache))
    assert replay() == replay()


def test_cache_json_roundtrip(rng, tmp_path):
    cache = server_round(_random_round(rng, 6, 5), DynamicCache(tau=0.8), AggregatorSpec("FedAdam"))
    cache = server_round(_random_round(rng, 6, 5), cache, AggregatorSpec("FedAdam"))
    data = json.loads(json.dumps(cache_to_dict(cache)))
    assert set(data) == {"tau", "entries"}
    assert {"B", "A", "token", "count", "createdAtStage"} <= set(data["entries"][0])
    back = cache_from_dict(data)
    assert back.tau == 0.8 and len(back) == len(cache)
    for a, b in zip(cache.entries, back.entries):
        assert a.adapter.identical(b.adapter)
        assert a.token.vector.tobytes() == b.token.vector.tobytes()
        assert a.state.v[0].tobytes() == b.state.v[0].tobytes()


def test_update_count_must_match_token():
    with pytest.raises(ValueError):
        ClientUpdate(adapter=LowRankAdapter([[0.0]], [[0.0]]),
                     token=IdentityToken(np.ones(2), 3), sample_count=2, client_id=0)
