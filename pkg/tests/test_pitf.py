import numpy as np
import pytest

from tagreuse import pitf
from tagreuse.evaluation import EvalConfig, run_protocol
from tagreuse.folksonomy import Folksonomy, Post, chronological_split
from tagreuse.pitf import PitfModel, PitfParams, PitfPredictor, TrainConfig
from tagreuse.testing import RandomPredictor, planted_folksonomy, random_folksonomy
from tagreuse.utils import DataError, ParameterError

GRADIENT_KEYS = [
    ("user", 0, "user"),
    ("resource", 1, "resource"),
    ("tag_user_pos", 2, "tag_pos"),
    ("tag_user_neg", 2, "tag_neg"),
    ("tag_resource_pos", 3, "tag_pos"),
    ("tag_resource_neg", 3, "tag_neg"),
]


def random_model(rng: np.random.Generator, sizes=(4, 5, 6), k=3, scale=0.5) -> PitfModel:
    nu, nr, nt = sizes
    tables = [rng.normal(0, scale, size=(n, k)) for n in (nu, nr, nt, nt)]
    return PitfModel(*tables, seed=0)


def test_init_model_is_deterministic():
    a = pitf.init_model(3, 4, 5, 8, seed=11)
    b = pitf.init_model(3, 4, 5, 8, seed=11)
    assert a == b
    assert a != pitf.init_model(3, 4, 5, 8, seed=12)


def test_init_model_scalar_factors():
    model = pitf.init_model(1, 1, 1, 1, seed=0)
    assert all(t.shape == (1, 1) for t in model.tables())
    assert all(np.isfinite(t).all() for t in model.tables())


def test_init_model_draws_small_normals():
    model = pitf.init_model(100000, 1, 1, 1, seed=3)
    assert abs(model.user_factors.mean()) < 4 * 0.01 / np.sqrt(100000)
    assert model.user_factors.std() == pytest.approx(0.01, rel=0.02)


def test_init_model_validates():
    with pytest.raises(ParameterError):
        pitf.init_model(1, 1, 1, 0, seed=0)
    with pytest.raises(ParameterError):
        pitf.init_model(0, 1, 1, 2, seed=0)


def test_pitf_score_hand_arithmetic():
    model = PitfModel(
        np.array([[2.0]]), np.array([[1.0]]), np.array([[3.0]]), np.array([[5.0]]), seed=0
    )
    assert pitf.pitf_score(model, 0, 0, 0) == 11.0


def test_pitf_score_zero_model():
    model = PitfModel(*[np.zeros((2, 3)) for _ in range(4)], seed=0)
    assert pitf.pitf_score(model, 1, 0, 1) == 0.0


def test_pitf_score_matches_loop(rng):
    model = random_model(rng)
    U, R, TU, TR = model.tables()
    for _ in range(100):
        u, r, t = int(rng.integers(4)), int(rng.integers(5)), int(rng.integers(6))
        expected = sum(U[u, f] * TU[t, f] + R[r, f] * TR[t, f] for f in range(model.k))
        assert pitf.pitf_score(model, u, r, t) == pytest.approx(expected, abs=1e-12)


def test_pitf_score_checks_indices(rng):
    model = random_model(rng)
    with pytest.raises(ParameterError, match="tag index"):
        pitf.pitf_score(model, 0, 0, 6)
    with pytest.raises(ParameterError, match="user index"):
        pitf.pitf_score(model, -1, 0, 0)


def test_bpr_gradient_matches_finite_differences(rng):
    step = 1e-5
    for _ in range(100):
        model = random_model(rng)
        tag_pos, tag_neg = (int(t) for t in rng.choice(6, 2, replace=False))
        args = dict(
            user=int(rng.integers(4)),
            resource=int(rng.integers(5)),
            tag_pos=tag_pos,
            tag_neg=tag_neg,
        )
        gamma = float(rng.uniform(0, 0.1))
        gradient = pitf.bpr_gradient(model, regularization=gamma, **args)
        for key, table, row in GRADIENT_KEYS:
            values = model.tables()[table]
            numeric = np.zeros(model.k)
            for f in range(model.k):
                original = values[args[row], f]
                values[args[row], f] = original + step
                up = pitf.bpr_objective(model, regularization=gamma, **args)
                values[args[row], f] = original - step
                down = pitf.bpr_objective(model, regularization=gamma, **args)
                values[args[row], f] = original
                numeric[f] = (up - down) / (2 * step)
            error = np.linalg.norm(gradient[key] - numeric)
            scale = max(np.linalg.norm(gradient[key]), np.linalg.norm(numeric), 1e-8)
            assert error / scale < 1e-4, key


def test_bpr_step_follows_gradient(rng):
    for _ in range(20):
        model = random_model(rng)
        before = model.copy()
        gradient = pitf.bpr_gradient(model, 1, 2, 3, 4, 0.01)
        pitf.bpr_step(model, 1, 2, 3, 4, 0.1, 0.01)
        assert model.user_factors[1] == pytest.approx(
            before.user_factors[1] + 0.1 * gradient["user"], abs=1e-12
        )
        assert model.tag_resource_factors[4] == pytest.approx(
            before.tag_resource_factors[4] + 0.1 * gradient["tag_resource_neg"], abs=1e-12
        )
        # other rows are untouched
        assert np.array_equal(model.user_factors[0], before.user_factors[0])
        assert np.array_equal(model.tag_user_factors[5], before.tag_user_factors[5])


def test_bpr_step_zero_rate_keeps_model(rng):
    model = random_model(rng)
    before = model.copy()
    pitf.bpr_step(model, 0, 0, 1, 2, 0.0, 0.5)
    assert model == before


def test_bpr_step_saturates(rng):
    model = random_model(rng, k=1, scale=0.0)
    model.user_factors[0, 0] = 100.0
    model.tag_user_factors[0, 0] = 100.0
    model.tag_user_factors[1, 0] = -100.0
    before = model.copy()
    pitf.bpr_step(model, 0, 0, 0, 1, 1.0, 0.0)
    for a, b in zip(model.tables(), before.tables()):
        assert np.abs(a - b).max() < 1e-12


def test_bpr_step_rejects_equal_tags(rng):
    with pytest.raises(ParameterError, match="differ"):
        pitf.bpr_step(random_model(rng), 0, 0, 1, 1, 0.1, 0.0)


def test_train_config_validates():
    with pytest.raises(ParameterError, match="epochs"):
        TrainConfig(epochs=0).validate()
    with pytest.raises(ParameterError):
        TrainConfig(learn_rate=0).validate()


def test_train_counts_steps():
    f = Folksonomy([Post("u", "r", frozenset("ab"), 1), Post("v", "s", frozenset("c"), 2)])
    model = pitf.init_model(2, 2, 3, 2, seed=0)
    stats = []
    pitf.train(model, f, TrainConfig(epochs=1, negatives=3), lambda m, s: stats.append(s))
    assert len(stats) == 1
    assert stats[0].epoch == 1
    assert stats[0].steps == 3 * 3


def test_train_is_deterministic(rng):
    f = random_folksonomy(rng, num_posts=60)
    sizes = (len(f.users), len(f.resources), len(f.tags))
    config = TrainConfig(epochs=5, seed=4)
    a = pitf.train(pitf.init_model(*sizes, 8, seed=4), f, config)
    b = pitf.train(pitf.init_model(*sizes, 8, seed=4), f, config)
    assert a == b


def test_train_rejects_bad_input():
    one_tag = Folksonomy([Post("u", "r", frozenset("a"), 1), Post("u", "s", frozenset("a"), 2)])
    with pytest.raises(ParameterError, match="2 tags"):
        pitf.train(pitf.init_model(1, 2, 1, 2, 0), one_tag, TrainConfig())
    two_tags = Folksonomy([Post("u", "r", frozenset("a"), 1), Post("u", "s", frozenset("b"), 2)])
    with pytest.raises(ParameterError, match="sizes"):
        pitf.train(pitf.init_model(1, 1, 2, 2, 0), two_tags, TrainConfig())
    with pytest.raises(DataError):
        pitf.train(pitf.init_model(1, 1, 2, 2, 0), Folksonomy([]), TrainConfig())


def test_sample_negatives_avoids_post_tags(rng):
    f = random_folksonomy(rng, num_posts=50, num_tags=6)
    incidences = pitf.build_incidences(f)
    order = np.arange(len(incidences.tags))
    negatives = pitf.sample_negatives(rng, incidences, order, len(f.tags))
    for post_idx, tag in zip(incidences.posts, negatives):
        assert f.tags[tag] not in f.posts[post_idx].tags


def test_train_reduces_loss():
    f = planted_folksonomy(seed=2)
    sizes = (len(f.users), len(f.resources), len(f.tags))
    losses = []
    pitf.train(
        pitf.init_model(*sizes, 16, seed=2),
        f,
        TrainConfig(epochs=10, seed=2),
        lambda m, s: losses.append(s.mean_loss),
    )
    assert losses[-1] < losses[0]


def test_train_reduces_loss_on_fixed_sample():
    f = planted_folksonomy(seed=2)
    incidences = pitf.build_incidences(f)
    order = np.arange(len(incidences.tags))
    negatives = pitf.sample_negatives(np.random.default_rng(0), incidences, order, len(f.tags))

    losses = []

    def record(model, stats):
        losses.append(
            pitf.sampled_bpr_loss(
                model, incidences.users, incidences.resources, incidences.tags, negatives
            )
        )

    sizes = (len(f.users), len(f.resources), len(f.tags))
    pitf.train(pitf.init_model(*sizes, 16, seed=2), f, TrainConfig(epochs=5, seed=2), record)
    assert len(losses) == 5
    assert losses[4] < losses[0]


def test_pitf_score_scales_with_tag_factors(rng):
    model = random_model(rng)
    num_users, num_resources, num_tags = model.sizes
    for c in (0.5, 3.0, 10.0):
        tag = int(rng.integers(num_tags))
        scaled = model.copy()
        scaled.tag_user_factors[tag] *= c
        scaled.tag_resource_factors[tag] *= c
        for u in range(num_users):
            for r in range(num_resources):
                assert pitf.pitf_score(scaled, u, r, tag) == pytest.approx(
                    c * pitf.pitf_score(model, u, r, tag), rel=1e-12, abs=1e-12
                )
                other = (tag + 1) % num_tags
                assert pitf.pitf_score(scaled, u, r, other) == pitf.pitf_score(model, u, r, other)


def test_sampled_bpr_loss_of_zero_model():
    model = PitfModel(*[np.zeros((3, 2)) for _ in range(4)], seed=0)
    index = np.array([0, 1, 2])
    loss = pitf.sampled_bpr_loss(model, index, index, index, np.array([1, 2, 0]))
    assert loss == pytest.approx(np.log(2))


def test_checkpoint_round_trip(tmp_path, rng):
    model = random_model(rng)
    path = tmp_path / "model.npz"
    pitf.save_model(model, path)
    assert pitf.load_model(path) == model


def test_checkpoint_rejects_other_version(tmp_path, rng):
    model = random_model(rng)
    path = tmp_path / "model.npz"
    names = ["user_factors", "resource_factors", "tag_user_factors", "tag_resource_factors"]
    np.savez(
        path,
        format_version=np.array(99),
        k=np.array(3),
        sizes=np.array(model.sizes),
        seed=np.array(0),
        **dict(zip(names, model.tables())),
    )
    with pytest.raises(DataError, match="version"):
        pitf.load_model(path)


def test_predictor_cold_start():
    f = Folksonomy([Post("u", "r", frozenset("ab"), 1), Post("v", "s", frozenset("bc"), 2)])
    predictor = PitfPredictor(PitfParams(k=4, epochs=2), seed=0).fit(f)
    assert predictor.score("nobody", "nothing", 0) == {}
    assert set(predictor.score("u", "nothing", 0)) == {"a", "b", "c"}
    assert set(predictor.score("nobody", "r", 0)) == {"a", "b", "c"}


def test_planted_structure_beats_random():
    split = chronological_split(planted_folksonomy(seed=5))
    config = EvalConfig()
    predictor = PitfPredictor(PitfParams(k=16, epochs=50), seed=5)
    trained = run_protocol(predictor, split, config)
    baseline = run_protocol(RandomPredictor(seed=5), split, config)
    assert trained.f1 >= 2 * baseline.f1
