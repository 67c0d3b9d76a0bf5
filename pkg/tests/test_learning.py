import numpy as np
import pytest

from safestep.errors import EmptyDataset, TooShort
from safestep.learning import (EpisodeDataset, MlpEstimator, TrainingConfig,
                               build_dataset, load_dataset, load_estimator,
                               mlp_gradient_check, save_dataset,
                               save_estimator, smooth_and_differentiate,
                               train_estimator)


def make_dataset(X, residual, dt=1e-3):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    nominal = np.zeros(X.shape[0])
    return EpisodeDataset(X=X, U=np.zeros((X.shape[0], 1)),
                          hdot_measured=residual, hdot_nominal=nominal,
                          dt=dt)


def test_differentiate_constant_is_zero():
    out = smooth_and_differentiate(np.full(50, 3.3), dt=1e-3, window=11)
    assert np.max(np.abs(out)) <= 1e-12


def test_differentiate_linear_ramp_exact():
    c, dt = 2.5, 1e-3
    series = c * np.arange(200) * dt
    for window in (1, 5, 11):
        out = smooth_and_differentiate(series, dt=dt, window=window)
        assert np.max(np.abs(out[1:-1] - c)) <= 1e-10


def test_differentiate_sine_accuracy():
    dt = 1e-3
    t = np.arange(0, 2.0, dt)
    out = smooth_and_differentiate(np.sin(t), dt=dt, window=11)
    half = 5
    interior = slice(half + 1, -half - 1)
    assert np.max(np.abs(out[interior] - np.cos(t)[interior])) <= 1e-4


def test_differentiate_too_short():
    with pytest.raises(TooShort):
        smooth_and_differentiate(np.zeros(5), dt=1e-3, window=11)


def test_normalization_round_trip():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(100, 4)) * np.array([1.0, 10.0, 0.1, 5.0])
    ds = make_dataset(X, rng.normal(size=100))
    net = MlpEstimator(n_inputs=4, seed=1)
    net.set_normalization(ds.feature_mean, ds.feature_std)
    back = net.denormalize(net.normalize(X))
    assert np.max(np.abs(back - X)) <= 1e-12


def test_zero_variance_guard():
    X = np.column_stack([np.ones(50), np.arange(50.0)])
    ds = make_dataset(X, np.zeros(50))
    assert ds.feature_std[0] == 1.0
    assert ds.feature_std[1] > 0


def test_linear_net_mae_subgradient():
    # No hidden layers: gradient of MAE is sign(residual) * input.
    net = MlpEstimator(n_inputs=3, hidden=(), seed=2)
    x = np.array([[0.5, -1.0, 2.0]])
    y = np.array([-10.0])   # prediction > target -> sign +1
    gw, gb = net.gradients(x, y)
    assert np.allclose(gw[0], x, atol=1e-12)
    assert np.allclose(gb[0], [1.0], atol=1e-12)
    # zero residual: sign(0) = 0 convention
    y_eq = net.predict(x)
    gw, gb = net.gradients(x, y_eq)
    assert np.allclose(gw[0], 0.0)
    assert np.allclose(gb[0], 0.0)


def test_gradient_check_random_nets():
    rng = np.random.default_rng(3)
    for seed in range(10):
        net = MlpEstimator(n_inputs=2, hidden=(50, 50), seed=seed)
        while True:
            X = rng.normal(size=(8, 2))
            y = rng.normal(size=8)
            if net.min_preactivation(X) > 1e-6 \
                    and np.min(np.abs(net.predict(X) - y)) > 1e-6:
                break
        assert mlp_gradient_check(net, X, y) <= 1e-4


def test_residual_formulation_equivalence():
    # MAE of (nominal + prediction, measured) equals MAE of
    # (prediction, measured - nominal) for the same weights.
    rng = np.random.default_rng(4)
    X = rng.normal(size=(64, 3))
    nominal = rng.normal(size=64)
    measured = nominal + rng.normal(size=64)
    net = MlpEstimator(n_inputs=3, seed=5)
    pred = net.predict(X)
    direct = np.mean(np.abs((nominal + pred) - measured))
    residual = np.mean(np.abs(pred - (measured - nominal)))
    assert direct == pytest.approx(residual, abs=1e-12)


def test_train_constant_residual():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, size=(640, 2))
    ds = make_dataset(X, np.full(640, 3.0))
    net = MlpEstimator(n_inputs=2, seed=7)
    cfg = TrainingConfig(learning_rate=1e-3, batch_size=32, epochs=200,
                         seed=8)
    trained = train_estimator(ds, net, cfg)
    assert trained.final_mae <= 0.05
    assert trained.final_mae <= trained.initial_mae


def test_train_sine_residual():
    rng = np.random.default_rng(9)
    X = rng.uniform(-2, 2, size=(2000, 1))
    ds = make_dataset(X, np.sin(X[:, 0]))
    net = MlpEstimator(n_inputs=1, seed=10)
    cfg = TrainingConfig(learning_rate=5e-3, batch_size=32, epochs=300,
                         seed=11)
    trained = train_estimator(ds, net, cfg)
    assert trained.final_mae <= 0.05


def test_train_zero_residual_fits_zero():
    rng = np.random.default_rng(12)
    X = rng.uniform(-1, 1, size=(500, 2))
    ds = make_dataset(X, np.zeros(500))
    net = MlpEstimator(n_inputs=2, seed=13)
    cfg = TrainingConfig(learning_rate=1e-3, batch_size=8, epochs=300,
                         seed=14)
    trained = train_estimator(ds, net, cfg)
    assert np.max(np.abs(trained.predict(X))) <= 1e-2


def test_train_deterministic():
    rng = np.random.default_rng(15)
    X = rng.uniform(-1, 1, size=(256, 2))
    ds = make_dataset(X, np.sin(X[:, 0]) + X[:, 1])
    cfg = TrainingConfig(learning_rate=2e-3, batch_size=16, epochs=40,
                         seed=16)
    a = train_estimator(ds, MlpEstimator(n_inputs=2, seed=17), cfg)
    b = train_estimator(ds, MlpEstimator(n_inputs=2, seed=17), cfg)
    assert np.array_equal(a.flat_params(), b.flat_params())


def test_train_empty_raises():
    ds = EpisodeDataset(X=np.zeros((0, 2)), U=np.zeros((0, 1)),
                        hdot_measured=np.zeros(0), hdot_nominal=np.zeros(0),
                        dt=1e-3)
    with pytest.raises(EmptyDataset):
        train_estimator(ds, MlpEstimator(n_inputs=2, seed=0),
                        TrainingConfig())


def test_estimator_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(18)
    net = MlpEstimator(n_inputs=3, seed=19)
    net.set_normalization(rng.normal(size=3), rng.uniform(0.5, 2, size=3))
    path = tmp_path / "estimator.txt"
    save_estimator(net, path)
    back = load_estimator(path)
    X = rng.normal(size=(20, 3))
    assert np.array_equal(back.flat_params(), net.flat_params())
    assert np.allclose(back.predict(X), net.predict(X), atol=0)


def test_dataset_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(20)
    ds = make_dataset(rng.normal(size=(30, 4)), rng.normal(size=30))
    path = tmp_path / "dataset.csv"
    save_dataset(ds, path)
    back = load_dataset(path, dt=ds.dt, n_states=4)
    assert np.allclose(back.X, ds.X)
    assert np.allclose(back.residuals, ds.residuals)


def test_build_dataset_splits_phases():
    # Synthetic trace with one impact: windows must not span it.
    from safestep.dynamics import HybridTrace, ImpactEvent

    n, dt = 200, 1e-3
    t = np.arange(n) * dt
    h = np.concatenate([np.linspace(1, 0.5, 100),
                        np.linspace(0.9, 0.6, 100)])
    tr = HybridTrace(t=t, x=np.zeros((n, 2)), u=np.zeros((n, 1)), dt=dt)
    tr.barrier_h = h.reshape(-1, 1)
    tr.barrier_hdot_nominal = np.zeros((n, 1))
    tr.events = [ImpactEvent(t=t[100] - dt / 2, x_minus=np.zeros(2),
                             x_plus=np.zeros(2))]
    ds = build_dataset(tr, 0, window=11, trim=5)
    assert len(ds) == 2 * (100 - 10)
    # Derivatives are the two ramp slopes, never a mixture.
    slopes = np.unique(np.round(ds.residuals, 6))
    assert set(slopes) == {np.round(-0.5 / (99 * dt), 6),
                           np.round(-0.3 / (99 * dt), 6)}
    for phase in (0, 1):
        sel = ds.phase_ids == phase
        assert sel.sum() == 90


def test_build_dataset_empty_trace():
    from safestep.dynamics import HybridTrace

    tr = HybridTrace(t=np.zeros(0), x=np.zeros((0, 2)), u=np.zeros((0, 1)),
                     dt=1e-3)
    tr.barrier_h = np.zeros((0, 1))
    tr.barrier_hdot_nominal = np.zeros((0, 1))
    ds = build_dataset(tr, 0)
    assert len(ds) == 0


def test_dataset_concatenate():
    rng = np.random.default_rng(21)
    a = make_dataset(rng.normal(size=(10, 2)), rng.normal(size=10))
    b = make_dataset(rng.normal(size=(15, 2)), rng.normal(size=15))
    joined = EpisodeDataset.concatenate([a, b])
    assert len(joined) == 25
    assert np.unique(joined.phase_ids).size == 2
