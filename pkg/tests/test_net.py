import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisosmooth import NoiseSpec, rng_stream
from anisosmooth.core import ConfigError, DimensionMismatch, DivergenceDetected, Family
from anisosmooth.net import (
    Mlp,
    NoiseGenNet,
    TrainConfig,
    forward_scores,
    load_checkpoint,
    mean_loss,
    pgd_attack,
    save_checkpoint,
    smoothing_loss,
    total_loss_and_grads,
    train,
    variance_loss,
)

from oracles import gradient_probe


def softmax(s):
    e = np.exp(s - s.max())
    return e / e.sum()


def zero_mlp(dims):
    return Mlp(dims, [np.zeros((a, b)) for a, b in zip(dims[:-1], dims[1:])], [np.zeros(b) for b in dims[1:]])


def two_blobs(n=512, seed=0):
    rng = np.random.default_rng(seed)
    Y = np.repeat([0, 1], n // 2)
    centers = np.where(Y[:, None] == 0, [-2.0, 0.0], [2.0, 0.0])
    return centers + 0.3 * rng.standard_normal((n, 2)), Y


def test_forward_scores_examples():
    assert np.allclose(softmax(forward_scores(zero_mlp([3, 4, 5]), [1.0, 2.0, 3.0])), 0.2)
    f = Mlp([1, 2], [np.array([[1.0, 0.0]])], [np.zeros(2)])
    assert forward_scores(f, [2.0]).tolist() == [2.0, 0.0]
    rng = np.random.default_rng(0)
    for seed in range(20):
        s = forward_scores(Mlp.create([6, 8, 8, 4], seed), rng.standard_normal(6))
        assert np.all(np.isfinite(s))
        assert abs(softmax(s).sum() - 1.0) <= 1e-12
    with pytest.raises(DimensionMismatch):
        forward_scores(f, [1.0, 2.0])


def test_argmax_matches_scores():
    f = Mlp.create([3, 8, 4], 1)
    X = np.random.default_rng(1).standard_normal((100, 3))
    assert np.array_equal(f.evaluate_batch(X), np.argmax(f.scores_batch(X), axis=1))


def test_smoothing_loss_examples():
    confident = Mlp([2, 2], [np.zeros((2, 2))], [np.array([1000.0, 0.0])])
    g = NoiseGenNet.create(2, hidden=8, seed=0)
    assert smoothing_loss(confident, g, [0.5, -1.0], 0, 5, rng_stream(0, 0)) == 0.0
    uniform = zero_mlp([2, 8, 3])
    for seed in range(3):
        assert smoothing_loss(uniform, g, [1.0, 1.0], 2, 5, rng_stream(seed, 0)) == pytest.approx(math.log(3), abs=1e-15)


def test_smoothing_loss_recomputation():
    f = Mlp.create([3, 16, 2], 2)
    g = NoiseGenNet.create(3, hidden=8, seed=3)
    x = np.array([0.3, -1.2, 2.0])
    stream = rng_stream(7, 1)
    got = smoothing_loss(f, g, x, 1, 5, stream, start=10)
    mean, scale, _ = g.forward(x[None, :])
    total = 0.0
    for s in range(5):
        z = x + mean[0] + scale[0] * stream.normals(1, 3, start=10 + s)[0]
        logits = forward_scores(f, z)
        total += -(logits[1] - (logits.max() + math.log(np.exp(logits - logits.max()).sum())))
    assert abs(got - total / 5) <= 1e-12
    assert got >= 0


def test_variance_loss_examples():
    assert variance_loss(NoiseSpec.isotropic(0.7, 3), np.zeros(3), 0.7) == 0.0
    assert variance_loss(NoiseSpec(Family.GAUSSIAN, [0, 0], [0.5, 2.0]), [0, 0], 1.0) == 0.5
    assert variance_loss(NoiseSpec(Family.GAUSSIAN, [0, 0], [1.5, 2.0]), [0, 0], 1.0) == 0.5
    g = NoiseGenNet.create(2, hidden=8, seed=0, init_scale=0.7)
    g.scale_w[...] = 0.0
    assert variance_loss(g, [3.0, -4.0], 0.7) <= 1e-12


def test_mean_loss_examples():
    assert mean_loss(NoiseSpec.isotropic(1.0, 2), [0, 0]) == 0.0
    assert mean_loss(NoiseSpec(Family.GAUSSIAN, [3.0, 4.0], [1, 1]), [0, 0]) == 5.0
    rng = np.random.default_rng(4)
    for seed in range(50):
        g = NoiseGenNet.create(5, hidden=8, seed=seed)
        g.mean_w[...] = rng.standard_normal(g.mean_w.shape)
        x = rng.standard_normal(5)
        mu = g.forward(x[None, :])[0][0]
        assert abs(mean_loss(g, x) - math.sqrt(sum(m * m for m in mu))) <= 1e-12


def test_zero_weights_give_zero_loss_and_grads():
    f = Mlp.create([2, 16, 16, 2], 0)
    g = NoiseGenNet.create(2, hidden=16, seed=1)
    X = np.random.default_rng(0).standard_normal((6, 2))
    res = total_loss_and_grads(f, g, X, np.array([0, 1] * 3), TrainConfig(loss_weights=(0, 0, 0)), rng_stream(0, 0))
    assert res.total == 0.0
    assert all(np.all(gr == 0) for gr in res.grads_f + res.grads_g)


def test_variance_stationary_at_target():
    g = NoiseGenNet.create(2, hidden=8, seed=0, scale_range=(0.25, 0.75))
    g.scale_w[...] = 0.0
    g.scale_b[...] = 0.0
    f = Mlp.create([2, 4, 2], 0)
    X = np.random.default_rng(0).standard_normal((4, 2))
    cfg = TrainConfig(loss_weights=(0, 1, 0), sigma_target=0.5)
    res = total_loss_and_grads(f, g, X, np.zeros(4, dtype=int), cfg, rng_stream(0, 0))
    assert res.total == 0.0
    assert np.all(res.grads_g[-1] == 0) and np.all(res.grads_g[-2] == 0)


def test_loss_decomposition():
    rng = np.random.default_rng(5)
    f = Mlp.create([4, 16, 3], 5)
    g = NoiseGenNet.create(4, hidden=8, seed=6)
    g.mean_w[...] = rng.standard_normal(g.mean_w.shape)
    X = rng.standard_normal((7, 4))
    Y = rng.integers(0, 3, 7)
    cfg = TrainConfig(loss_weights=(0.7, 1.3, 0.4), sigma_target=0.6, samples_per_input=5)
    stream = rng_stream(2, 2)
    res = total_loss_and_grads(f, g, X, Y, cfg, stream, start=3)
    ls = np.mean([smoothing_loss(f, g, X[i], Y[i], 5, stream, 3 + 5 * i) for i in range(7)])
    lv = np.mean([variance_loss(g, x, 0.6) for x in X])
    lm = np.mean([mean_loss(g, x) for x in X])
    assert abs(res.smoothing - ls) <= 1e-12
    assert abs(res.variance - lv) <= 1e-12
    assert abs(res.mean - lm) <= 1e-12
    assert abs(res.total - (0.7 * ls + 1.3 * lv + 0.4 * lm)) <= 1e-12


@pytest.mark.parametrize("weights", [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0.5)],
                         ids=["smoothing", "variance", "mean", "combined"])
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_central_differences(weights, seed):
    worst, skipped = gradient_probe(weights, 10 + seed, probes=20)
    assert skipped <= 4
    assert worst < 1e-4


def test_generator_output_bounds():
    rng = np.random.default_rng(0)
    for seed in range(10):
        g = NoiseGenNet.create(6, hidden=16, seed=seed, mean_bound=0.8, scale_range=(0.1, 2.5))
        for p in g.params():
            p[...] = rng.standard_normal(p.shape) * rng.uniform(0.1, 5.0)
        X = rng.standard_normal((1000, 6)) * 10.0 ** rng.uniform(-3, 3, (1000, 1))
        mean, scale, _ = g.forward(X)
        assert np.all(np.abs(mean) <= 0.8)
        assert np.all((scale >= 0.1) & (scale <= 2.5))


def test_train_decreases_smoothing_loss():
    X, Y = two_blobs()
    f = Mlp.create([2, 16, 16, 2], 0)
    g = NoiseGenNet.create(2, hidden=16, seed=1)
    out = train(f, g, X, Y, TrainConfig(sigma_target=0.5, epochs=10))
    assert out.trace[-1]["smoothing"] < out.trace[0]["smoothing"]
    assert all(math.isfinite(r["total"]) for r in out.trace)


def test_train_zero_learning_rate_is_noop():
    X, Y = two_blobs(64)
    f = Mlp.create([2, 8, 2], 0)
    g = NoiseGenNet.create(2, hidden=8, seed=1)
    out = train(f, g, X, Y, TrainConfig(learning_rate=0.0, epochs=2))
    for a, b in zip(f.params() + g.params(), out.f.params() + out.g.params()):
        assert a.tobytes() == b.tobytes()


def test_train_deterministic():
    X, Y = two_blobs(128)
    f = Mlp.create([2, 8, 2], 0)
    g = NoiseGenNet.create(2, hidden=8, seed=1)
    cfg = TrainConfig(epochs=3, seed=9)
    assert train(f, g, X, Y, cfg).trace == train(f, g, X, Y, cfg).trace


def test_train_divergence():
    X, _ = two_blobs(64)
    Y = np.arange(64) % 2
    with pytest.raises(DivergenceDetected):
        train(Mlp.create([2, 8, 2], 0), NoiseSpec.isotropic(0.5, 2), X * 1e200, Y,
              TrainConfig(learning_rate=1e200, epochs=2))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(loss_weights=(1, -1, 0))
    X, Y = two_blobs(16)
    with pytest.raises(ConfigError):
        train(Mlp.create([2, 2], 0), NoiseGenNet.create(2, hidden=4), X, Y, TrainConfig(sigma_target=9.0))
    with pytest.raises(ConfigError):
        train(Mlp.create([2, 2], 0), NoiseGenNet.create(2, hidden=4), X, Y, TrainConfig(loss_weights=(0, 0, 0)))


@pytest.mark.slow
def test_variance_loss_pull():
    X, Y = two_blobs()
    f = Mlp.create([2, 16, 2], 0)
    g = NoiseGenNet.create(2, hidden=16, seed=1, init_scale=2.0)
    cfg = TrainConfig(loss_weights=(0, 1, 0), sigma_target=0.5, epochs=200)
    out = train(f, g, X, Y, cfg)
    mins = out.g.forward(X)[1].min(axis=1)
    assert np.max(np.abs(mins - 0.5) / 0.5) < 0.05


def linear_model():
    return Mlp([2, 2], [np.array([[-1.0, 1.0], [0.0, 0.0]])], [np.zeros(2)])


def test_pgd_zero_budget():
    f = Mlp.create([3, 8, 2], 0)
    x = np.array([0.1, 0.2, 0.3])
    assert np.array_equal(pgd_attack(f, x, 1, 0.0), x)


def test_pgd_flips_linear_model():
    f = linear_model()
    x = np.array([0.1, 0.0])
    assert f.evaluate(x) == 1
    adv = pgd_attack(f, x, 1, 0.2)
    assert f.evaluate(adv) == 0
    assert np.max(np.abs(adv - x)) <= 0.2 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1000), st.floats(0.0, 1.0), st.integers(1, 12))
def test_pgd_stays_feasible(seed, eps, iters):
    rng = np.random.default_rng(seed)
    f = Mlp.create([4, 8, 3], seed)
    X = rng.uniform(0, 1, (8, 4))
    Y = rng.integers(0, 3, 8)
    for k in range(1, iters + 1):
        adv = pgd_attack(f, X, Y, eps, iters=k, step=rng.uniform(0.01, 0.5), clip=(0.0, 1.0))
        assert np.max(np.abs(adv - X)) <= eps + 1e-12
        assert adv.min() >= 0.0 and adv.max() <= 1.0


def test_checkpoint_round_trip(tmp_path):
    f = Mlp.create([3, 5, 2], 4)
    g = NoiseGenNet.create(3, hidden=6, seed=5, mean_bound=0.3, scale_range=(0.1, 3.0))
    save_checkpoint(tmp_path / "f.json", f, seed=4)
    save_checkpoint(tmp_path / "g.json", g, seed=5)
    f2, g2 = load_checkpoint(tmp_path / "f.json"), load_checkpoint(tmp_path / "g.json")
    X = np.random.default_rng(0).standard_normal((10, 3))
    assert f2.scores_batch(X).tobytes() == f.scores_batch(X).tobytes()
    m, s, _ = g.forward(X)
    m2, s2, _ = g2.forward(X)
    assert m.tobytes() == m2.tobytes() and s.tobytes() == s2.tobytes()
    assert g2.mean_bound == 0.3 and g2.scale_range == (0.1, 3.0)


def test_checkpoint_schema_version(tmp_path):
    import json

    save_checkpoint(tmp_path / "f.json", Mlp.create([2, 2], 0))
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc["schema_version"] == 1 and doc["layer_dims"] == [2, 2]
    doc["schema_version"] = 99
    (tmp_path / "f.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_checkpoint(tmp_path / "f.json")
