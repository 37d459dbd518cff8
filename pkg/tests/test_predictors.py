import math

import pytest

from tagreuse import predictors, registry
from tagreuse.folksonomy import Folksonomy, Post, TagHistory, build_cooccurrence, resource_context
from tagreuse.predictors import BLLParams, GIRPParams
from tagreuse.testing import random_folksonomy
from tagreuse.utils import DataError, ParameterError, ScoredTag

DAY = 86400


def history_of(*posts) -> TagHistory:
    posts = [Post("u", f"r{i}", frozenset(tags), t) for i, (tags, t) in enumerate(posts)]
    return TagHistory(Folksonomy(posts))


def test_top_k_no_padding():
    assert predictors.top_k({"a": 3, "b": 1}, 5) == (ScoredTag("a", 3.0), ScoredTag("b", 1.0))


def test_top_k_breaks_ties_by_tag():
    assert [t.tag for t in predictors.top_k({"b": 2, "a": 2}, 1)] == ["a"]


def test_top_k_matches_sort(rng):
    scores = {f"t{i}": float(s) for i, s in enumerate(rng.random(100))}
    expected = sorted(scores.items(), key=lambda i: (-i[1], i[0]))[:10]
    assert [(t.tag, t.score) for t in predictors.top_k(scores, 10)] == expected


def test_top_k_rejects_zero():
    with pytest.raises(ParameterError):
        predictors.top_k({"a": 1}, 0)


def test_mp_counts_posts(fixture_split):
    mp = predictors.MostPopularPredictor().fit(fixture_split.train)
    assert mp.score("u1", "r3", 300) == {"a": 2.0, "b": 1.0, "c": 1.0}
    assert mp.score("nobody", "r3", 300) == {}
    assert [t.tag for t in mp.predict("u1", "r3", 300, 5)] == ["a", "b", "c"]


def test_recency_last_use_wins():
    f = Folksonomy(
        [
            Post("u", "r1", frozenset("a"), 5),
            Post("u", "r2", frozenset("b"), 9),
            Post("u", "r3", frozenset("a"), 12),
        ]
    )
    recency = predictors.RecencyPredictor().fit(f)
    assert [t.tag for t in recency.predict("u", "r9", 20, 2)] == ["a", "b"]
    recency.fit(Folksonomy(f.posts[:2]))
    assert [t.tag for t in recency.predict("u", "r9", 20, 2)] == ["b", "a"]


def test_unfitted_predictor_raises():
    with pytest.raises(DataError, match="not fitted"):
        predictors.BLLPredictor().score("u", "r", 1)
    with pytest.raises(DataError, match="not fitted"):
        predictors.BLLACPredictor().score("u", "r", 1)


def test_bll_zero_decay_is_log_count():
    history = history_of(("ab", 0), ("a", 100), ("a", 200))
    scores = predictors.bll_activation(history, "u", 1000, 0.0)
    assert scores["a"] == pytest.approx(math.log(3), abs=1e-12)
    assert scores["b"] == pytest.approx(0.0, abs=1e-12)


def test_bll_unit_lag_is_zero():
    history = history_of(("a", 99))
    for d in (0.1, 0.5, 2.0):
        assert predictors.bll_activation(history, "u", 100, d)["a"] == pytest.approx(0.0, abs=1e-12)


def test_bll_clamps_lag():
    history = history_of(("a", 100))
    assert predictors.bll_activation(history, "u", 100, 0.5)["a"] == pytest.approx(0.0, abs=1e-12)


def test_bll_two_usages():
    history = history_of(("a", 0), ("a", DAY))
    score = predictors.bll_activation(history, "u", 2 * DAY, 0.5)["a"]
    assert score == pytest.approx(math.log(86400 ** -0.5 + 172800 ** -0.5), rel=1e-12)
    assert score == pytest.approx(math.log(0.003402 + 0.002406), abs=1e-3)


def test_bll_stays_finite_for_large_decay():
    history = history_of(("a", 0))
    assert math.isfinite(predictors.bll_activation(history, "u", 10 ** 9, 50.0)["a"])


def test_bll_matches_mp_ranking_without_decay(rng):
    f = random_folksonomy(rng, num_posts=150)
    mp = predictors.MostPopularPredictor().fit(f)
    bll = predictors.BLLPredictor(BLLParams(d=0.0)).fit(f)
    t_ref = 10 ** 8
    for user in f.users:
        expected = {t: math.log(n) for t, n in mp.score(user, "r", t_ref).items()}
        actual = bll.score(user, "r", t_ref)
        assert actual.keys() == expected.keys()
        for tag in expected:
            assert actual[tag] == pytest.approx(expected[tag], abs=1e-9)


def test_girp_two_usages():
    history = history_of(("a", 0), ("a", DAY))
    score = predictors.girp_score(history, "u", 2 * DAY, 1.0)["a"]
    assert score == pytest.approx(math.log(math.exp(-1) + math.exp(-2)), rel=1e-9)


def test_girp_same_time_is_zero():
    history = history_of(("a", 100))
    assert predictors.girp_score(history, "u", 100, 0.5)["a"] == pytest.approx(0.0, abs=1e-4)


def test_girp_small_lambda_ranks_by_count():
    history = history_of(("ab", 0), ("a", DAY), ("c", 5 * DAY))
    scores = predictors.girp_score(history, "u", 10 * DAY, 1e-9)
    assert [t.tag for t in predictors.top_k(scores, 3)][0] == "a"


def history_scores(posts, t_ref: int):
    f = Folksonomy([Post("u", f"r{i}", frozenset(tags), t) for i, (tags, t) in enumerate(posts)])
    fitted = [
        predictors.MostPopularPredictor(),
        predictors.BLLPredictor(),
        predictors.GIRPPredictor(),
    ]
    return {p.name: p.fit(f).score("u", "r", t_ref) for p in fitted}


def random_history(rng, size: int, horizon: int):
    posts = [("a", int(rng.integers(horizon)))]
    for _ in range(size):
        tags = "".join(rng.choice(list("abcd"), size=int(rng.integers(1, 3)), replace=False))
        posts.append((tags, int(rng.integers(horizon))))
    return posts


def test_extra_usage_never_lowers_score(rng):
    horizon = 60 * DAY
    for _ in range(50):
        posts = random_history(rng, int(rng.integers(0, 10)), horizon)
        t_ref = horizon + int(rng.integers(1, 10 * DAY))
        before = history_scores(posts, t_ref)
        after = history_scores(posts + [("a", int(rng.integers(t_ref + 1)))], t_ref)
        for name in ("mp", "bll", "girp"):
            assert after[name]["a"] >= before[name]["a"] - 1e-12, name
        assert after["mp"]["a"] == before["mp"]["a"] + 1


def test_later_usage_never_lowers_score(rng):
    horizon = 60 * DAY
    for _ in range(50):
        posts = random_history(rng, int(rng.integers(0, 10)), horizon)
        t_ref = horizon + int(rng.integers(1, 10 * DAY))
        i = int(rng.integers(len(posts)))
        tags, t = posts[i]
        if "a" not in tags:
            i, (tags, t) = 0, posts[0]
        moved = list(posts)
        moved[i] = (tags, int(rng.integers(t, t_ref + 1)))
        before = history_scores(posts, t_ref)
        after = history_scores(moved, t_ref)
        for name in ("bll", "girp"):
            assert after[name]["a"] >= before[name]["a"] - 1e-12, name
        assert after["mp"] == before["mp"]


def test_top_k_invariant_under_scaling(rng):
    for _ in range(100):
        # small integers, so ties are common
        scores = {f"t{i}": float(s) for i, s in enumerate(rng.integers(0, 5, size=20))}
        expected = [t.tag for t in predictors.top_k(scores, 10)]
        for c in (2.0 ** -3, 2.0, 2.0 ** 10):
            scaled = {tag: c * s for tag, s in scores.items()}
            assert [t.tag for t in predictors.top_k(scaled, 10)] == expected


def test_params_validate():
    with pytest.raises(ParameterError):
        BLLParams(d=-0.1).validate()
    with pytest.raises(ParameterError):
        BLLParams(beta=1.5).validate()
    with pytest.raises(ParameterError):
        GIRPParams(lam=0.0).validate()


def test_semcon_without_context_is_empty(fixture_split):
    semcon = predictors.SemConPredictor().fit(fixture_split.train)
    assert semcon.score("u1", "r3", 300) == {}


def test_semcon_single_context_tag():
    posts = [Post(f"u{i}", f"r{i}", frozenset("ab"), i) for i in range(4)]
    posts += [Post("u8", "r8", frozenset("ac"), 8), Post("u9", "target", frozenset("a"), 9)]
    semcon = predictors.SemConPredictor().fit(Folksonomy(posts))
    assert semcon.score("u0", "target", 10) == {"b": 4.0, "c": 1.0}


def test_semcon_matches_double_loop(rng):
    for _ in range(5):
        f = random_folksonomy(rng, num_posts=80, num_resources=10)
        semcon = predictors.SemConPredictor().fit(f)
        cooc = build_cooccurrence(f)
        for user in f.users:
            for resource in f.resources:
                context = resource_context(f, resource, user)
                expected = {}
                for c, n in context.items():
                    for tag in f.tags:
                        value = n * cooc.get(c, tag)
                        if value:
                            expected[tag] = expected.get(tag, 0) + value
                assert semcon.score(user, resource, 0) == pytest.approx(expected)


def test_max_normalize():
    assert predictors.max_normalize({"a": 4.0, "b": 1.0}) == {"a": 1.0, "b": 0.25}
    assert predictors.max_normalize({}) == {}
    assert predictors.max_normalize_log({"a": 0.0, "b": math.log(0.5)}) == pytest.approx(
        {"a": 1.0, "b": 0.5}
    )


def broad_fixture() -> Folksonomy:
    return Folksonomy(
        [
            Post("u1", "r1", frozenset("ab"), 0),
            Post("u1", "r2", frozenset("c"), DAY),
            Post("u2", "r3", frozenset("ab"), 0),
            Post("u2", "r4", frozenset("ad"), DAY),
            Post("u2", "r5", frozenset("bd"), 2 * DAY),
        ]
    )


def test_bllac_hand_computed():
    f = broad_fixture()
    t_ref = 3 * DAY
    bllac = predictors.BLLACPredictor(BLLParams(d=0.5, beta=0.3)).fit(f)
    scores = bllac.score("u1", "r5", t_ref)

    # u1 used a and b 3 days ago, c 2 days ago
    base = {"a": (3 * DAY) ** -0.5, "b": (3 * DAY) ** -0.5, "c": (2 * DAY) ** -0.5}
    top = max(base.values())
    # the context of r5 is {b, d}: cooc(b, a) = 2, cooc(b, d) = 1, cooc(d, a) = 1
    context = {"a": 3.0, "b": 1.0, "d": 1.0}
    expected = {
        tag: 0.3 * base.get(tag, 0.0) / top + 0.7 * context.get(tag, 0.0) / 3.0
        for tag in "abcd"
    }
    assert scores == pytest.approx(expected, rel=1e-9)


def test_bllac_endpoints():
    f = broad_fixture()
    t_ref = 3 * DAY
    bll = predictors.BLLPredictor().fit(f).score("u1", "r5", t_ref)
    semcon = predictors.SemConPredictor().fit(f).score("u1", "r5", t_ref)

    only_bll = predictors.BLLACPredictor(BLLParams(beta=1.0)).fit(f).score("u1", "r5", t_ref)
    normalized = predictors.max_normalize_log(bll)
    assert only_bll == pytest.approx({t: normalized.get(t, 0.0) for t in only_bll})

    only_context = predictors.BLLACPredictor(BLLParams(beta=0.0)).fit(f).score("u1", "r5", t_ref)
    normalized = predictors.max_normalize(semcon)
    assert only_context == pytest.approx({t: normalized.get(t, 0.0) for t in only_context})


def test_bllac_without_context_ranks_as_bll(rng):
    f = random_folksonomy(rng, num_posts=100, num_resources=1000)
    bll = predictors.BLLPredictor().fit(f)
    bllac = predictors.BLLACPredictor().fit(f)
    for user in f.users:
        assert [t.tag for t in bllac.predict(user, "unseen", 10 ** 8, 10)] == [
            t.tag for t in bll.predict(user, "unseen", 10 ** 8, 10)
        ]


def test_registry_builds_every_predictor():
    for name in registry.PREDICTORS:
        predictor = registry.build_predictor(name, seed=1)
        assert predictor.name == name


def test_registry_applies_parameters():
    bll = registry.build_predictor("bll", {"bll.d": "0.8"})
    assert bll.params.d == 0.8
    bllac = registry.build_predictor("bllac", {"bll.d": 0.8, "bllac.beta": 0.2})
    assert bllac.params == BLLParams(d=0.8, beta=0.2)
    folkrank = registry.build_predictor("folkrank", {"folkrank.binary": "true"})
    assert folkrank.params.binary is True


def test_registry_rejects_bad_input():
    with pytest.raises(ParameterError, match="unknown predictor"):
        registry.build_predictor("nope")
    with pytest.raises(ParameterError, match="unknown parameter"):
        registry.build_predictor("bll", {"bll.x": 1})
    with pytest.raises(ParameterError, match="invalid value"):
        registry.build_predictor("bll", {"bll.d": "high"})
    with pytest.raises(ParameterError, match="seed"):
        registry.build_predictor("pitf")
    with pytest.raises(ParameterError):
        registry.build_predictor("girp", {"girp.lambda": -1})
