"""Disturbance estimation: data pipeline, MLP, and ERM training.

A rollout's barrier series is smoothed and numerically differentiated per
continuous phase (never across impacts), paired with the nominal
derivative estimate logged by the controller, and the residual between
the two is regressed by a small ReLU network under mean absolute error
with plain mini-batch subgradient descent. Everything is deterministic
under the configured seed.
"""

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import DivergedLoss, EmptyDataset, TooShort

ZERO_VARIANCE_GUARD = 1e-12


def smooth_and_differentiate(series, dt, window):
    """Centered moving average then central differences, length-preserving.

    Windows shrink symmetrically at the boundaries (which keeps affine
    series exact); the first and last derivatives are one-sided.
    """
    series = np.asarray(series, dtype=float)
    n = series.size
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd count")
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n < window:
        raise TooShort(f"series of {n} samples is shorter than the "
                       f"window ({window})")
    half = window // 2
    # Mean taken relative to the window center (exact for constant data).
    smoothed = np.empty(n)
    if half == 0:
        smoothed[:] = series
    else:
        from numpy.lib.stride_tricks import sliding_window_view
        center = series[half:n - half]
        windows = sliding_window_view(series, window)
        smoothed[half:n - half] = center \
            + (windows - center[:, None]).mean(axis=1)
        for i in range(half):
            w = i
            smoothed[i] = series[i] \
                + np.mean(series[i - w:i + w + 1] - series[i])
            j = n - 1 - i
            smoothed[j] = series[j] \
                + np.mean(series[j - w:j + w + 1] - series[j])
    deriv = np.empty(n)
    deriv[1:-1] = (smoothed[2:] - smoothed[:-2]) / (2.0 * dt)
    deriv[0] = (smoothed[1] - smoothed[0]) / dt
    deriv[-1] = (smoothed[-1] - smoothed[-2]) / dt
    return deriv


@dataclass
class EpisodeDataset:
    """Samples ((x, u), hdot) with the nominal estimate attached."""

    X: np.ndarray               # N x n states
    U: np.ndarray               # N x m inputs (context, not a feature)
    hdot_measured: np.ndarray   # N
    hdot_nominal: np.ndarray    # N
    dt: float
    phase_ids: np.ndarray = None
    feature_mean: np.ndarray = field(default=None)
    feature_std: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        self.U = np.asarray(self.U, dtype=float)
        if self.U.ndim == 1:
            self.U = self.U.reshape(-1, 1)
        if self.phase_ids is None:
            self.phase_ids = np.zeros(len(self), dtype=int)
        self.phase_ids = np.asarray(self.phase_ids, dtype=int)
        if self.feature_mean is None:
            self.refresh_normalization()

    def __len__(self):
        return self.X.shape[0]

    def refresh_normalization(self):
        if len(self) == 0:
            n = self.X.shape[1] if self.X.ndim == 2 else 0
            self.feature_mean = np.zeros(n)
            self.feature_std = np.ones(n)
            return
        self.feature_mean = self.X.mean(axis=0)
        std = self.X.std(axis=0)
        std[std < ZERO_VARIANCE_GUARD] = 1.0
        self.feature_std = std

    @property
    def residuals(self):
        return self.hdot_measured - self.hdot_nominal

    @staticmethod
    def concatenate(datasets):
        datasets = [d for d in datasets if len(d) > 0]
        if not datasets:
            raise EmptyDataset("no samples to concatenate")
        dt = datasets[0].dt
        offset = 0
        ids = []
        for d in datasets:
            ids.append(d.phase_ids + offset)
            offset += int(d.phase_ids.max(initial=-1)) + 1
        return EpisodeDataset(
            X=np.vstack([d.X for d in datasets]),
            U=np.vstack([d.U for d in datasets]),
            hdot_measured=np.concatenate([d.hdot_measured for d in datasets]),
            hdot_nominal=np.concatenate([d.hdot_nominal for d in datasets]),
            dt=dt, phase_ids=np.concatenate(ids))


def build_dataset(trace, barrier_index, window=11, trim=5):
    """Assemble the learning dataset for one barrier from a rollout.

    The differentiated series is the one whose derivative the controller
    estimates: the ECBF extension when logged, the barrier value
    otherwise. Phases shorter than the window are skipped with a warning,
    and samples within max(trim, window//2) steps of an impact are
    dropped so no stencil spans a reset.
    """
    if trace.barrier_h is None:
        raise ValueError("trace carries no barrier columns")
    he = trace.barrier_he
    use_he = he is not None and np.all(np.isfinite(he[:, barrier_index]))
    series = (he if use_he else trace.barrier_h)[:, barrier_index]
    nominal = trace.barrier_hdot_nominal[:, barrier_index]
    ids = trace.phase_ids()
    cut = max(trim, window // 2)

    keep_X, keep_U, keep_meas, keep_nom, keep_ids = [], [], [], [], []
    for phase in np.unique(ids):
        sel = np.flatnonzero(ids == phase)
        if sel.size < window or sel.size <= 2 * cut:
            if sel.size:
                warnings.warn(f"phase {phase} too short to differentiate "
                              f"({sel.size} samples); skipped")
            continue
        deriv = smooth_and_differentiate(series[sel], trace.dt, window)
        inner = sel[cut:-cut]
        keep_X.append(trace.x[inner])
        keep_U.append(trace.u[inner])
        keep_meas.append(deriv[cut:-cut])
        keep_nom.append(nominal[inner])
        keep_ids.append(np.full(inner.size, phase, dtype=int))
    if not keep_X:
        n = trace.x.shape[1] if len(trace) else 0
        m = trace.u.shape[1] if len(trace) else 0
        return EpisodeDataset(X=np.zeros((0, n)), U=np.zeros((0, m)),
                              hdot_measured=np.zeros(0),
                              hdot_nominal=np.zeros(0), dt=trace.dt,
                              phase_ids=np.zeros(0, dtype=int))
    return EpisodeDataset(
        X=np.vstack(keep_X), U=np.vstack(keep_U),
        hdot_measured=np.concatenate(keep_meas),
        hdot_nominal=np.concatenate(keep_nom),
        dt=trace.dt, phase_ids=np.concatenate(keep_ids))


def save_dataset(ds, path):
    header = [f"x{i}" for i in range(ds.X.shape[1])] \
        + [f"u{i}" for i in range(ds.U.shape[1])] \
        + ["hdot_measured", "hdot_nominal", "phase"]
    table = np.column_stack([ds.X, ds.U, ds.hdot_measured, ds.hdot_nominal,
                             ds.phase_ids.astype(float)])
    np.savetxt(path, table, delimiter=",", header=",".join(header),
               comments="", fmt="%.17g")


def load_dataset(path, dt, n_states):
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.size == 0:
        table = table.reshape(0, n_states + 3)
    n_inputs = table.shape[1] - n_states - 3
    return EpisodeDataset(
        X=table[:, :n_states],
        U=table[:, n_states:n_states + n_inputs],
        hdot_measured=table[:, -3], hdot_nominal=table[:, -2],
        dt=dt, phase_ids=table[:, -1].astype(int))


class MlpEstimator:
    """ReLU network with identity output, trained from scratch here.

    Hidden widths default to two layers of 50 units. Inputs are
    standardized with the stored per-feature statistics.
    """

    def __init__(self, n_inputs, hidden=(50, 50), seed=0,
                 feature_mean=None, feature_std=None):
        sizes = [n_inputs, *hidden, 1]
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit,
                                            size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))
        self.feature_mean = np.zeros(n_inputs) if feature_mean is None \
            else np.asarray(feature_mean, dtype=float)
        self.feature_std = np.ones(n_inputs) if feature_std is None \
            else np.asarray(feature_std, dtype=float)

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] \
            + [w.shape[0] for w in self.weights]

    def set_normalization(self, mean, std):
        self.feature_mean = np.asarray(mean, dtype=float)
        self.feature_std = np.asarray(std, dtype=float)

    def normalize(self, X):
        return (X - self.feature_mean) / self.feature_std

    def denormalize(self, Xn):
        return Xn * self.feature_std + self.feature_mean

    def _forward(self, X):
        """Activations per layer for a batch (rows are samples)."""
        acts = [self.normalize(np.atleast_2d(X))]
        pre = []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ W.T + b
            pre.append(z)
            acts.append(np.maximum(z, 0.0) if i < len(self.weights) - 1
                        else z)
        return acts, pre

    def predict(self, X):
        acts, _ = self._forward(X)
        return acts[-1][:, 0]

    def __call__(self, x):
        return float(self.predict(np.atleast_2d(x))[0])

    def mae(self, X, targets):
        return float(np.mean(np.abs(self.predict(X) - targets)))

    def gradients(self, X, targets):
        """Parameter subgradients of the batch MAE (sign(0) taken as 0)."""
        X = np.atleast_2d(X)
        targets = np.asarray(targets, dtype=float)
        acts, pre = self._forward(X)
        n = X.shape[0]
        delta = np.sign(acts[-1][:, 0] - targets)[:, None] / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in reversed(range(len(self.weights))):
            grads_w[i] = delta.T @ acts[i]
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i]) * (pre[i - 1] > 0)
        return grads_w, grads_b

    def min_preactivation(self, X):
        """Distance of hidden pre-activations from the ReLU kink."""
        _, pre = self._forward(X)
        if len(pre) == 1:
            return np.inf
        return float(min(np.min(np.abs(z)) for z in pre[:-1]))

    def flat_params(self):
        return np.concatenate([a.ravel() for pair in
                               zip(self.weights, self.biases) for a in pair])

    def set_flat_params(self, flat):
        flat = np.asarray(flat, dtype=float)
        pos = 0
        for i in range(len(self.weights)):
            w = self.weights[i]
            self.weights[i] = flat[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            b = self.biases[i]
            self.biases[i] = flat[pos:pos + b.size].copy()
            pos += b.size
        if pos != flat.size:
            raise ValueError("flat parameter size mismatch")

    def copy(self):
        dup = MlpEstimator.__new__(MlpEstimator)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup.feature_mean = self.feature_mean.copy()
        dup.feature_std = self.feature_std.copy()
        return dup


@dataclass
class TrainingConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 200
    seed: int = 0
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least one")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")


def train_estimator(ds, net, cfg):
    """Fit the residual hdot_measured - hdot_nominal by MAE descent.

    Returns a trained copy of net (the best epoch by training MAE, which
    keeps the final-not-worse-than-initial contract under plain
    subgradient steps). Deterministic given cfg.seed.
    """
    if len(ds) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    net = net.copy()
    net.set_normalization(ds.feature_mean, ds.feature_std)
    rng = np.random.default_rng(cfg.seed)
    n = len(ds)
    idx = rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    val_idx, train_idx = idx[:n_val], idx[n_val:]
    X, y = ds.X[train_idx], ds.residuals[train_idx]

    initial = net.mae(X, y)
    best, best_params = initial, net.flat_params()
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            gw, gb = net.gradients(X[batch], y[batch])
            for i in range(len(net.weights)):
                net.weights[i] -= cfg.learning_rate * gw[i]
                net.biases[i] -= cfg.learning_rate * gb[i]
        epoch_mae = net.mae(X, y)
        history.append(epoch_mae)
        if epoch_mae < best:
            best, best_params = epoch_mae, net.flat_params()
    if history and history[-1] > 10.0 * max(initial, 1e-12):
        raise DivergedLoss(f"training MAE grew from {initial:.3g} to "
                           f"{history[-1]:.3g}")
    net.set_flat_params(best_params)
    net.history = history
    net.initial_mae = initial
    net.final_mae = best
    if n_val:
        net.val_mae = net.mae(ds.X[val_idx], ds.residuals[val_idx])
    return net


def mlp_gradient_check(net, X, targets, step=1e-6):
    """Max relative error of analytic MAE gradients vs central FD."""
    X = np.atleast_2d(X)
    targets = np.asarray(targets, dtype=float)
    gw, gb = net.gradients(X, targets)
    analytic = np.concatenate([a.ravel() for pair in zip(gw, gb)
                               for a in pair])
    probe = net.copy()
    flat = probe.flat_params()
    fd = np.empty_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + step
        probe.set_flat_params(flat)
        up = probe.mae(X, targets)
        flat[i] = saved - step
        probe.set_flat_params(flat)
        down = probe.mae(X, targets)
        flat[i] = saved
        fd[i] = (up - down) / (2.0 * step)
    probe.set_flat_params(flat)
    # Central differences of the MAE carry rounding noise of roughly
    # eps/step ~ 1e-10, so the relative-error floor sits safely above it.
    scale = np.maximum(np.abs(analytic) + np.abs(fd), 1e-5)
    return float(np.max(np.abs(analytic - fd) / scale))


ESTIMATOR_FORMAT = "safestep-mlp-v1"


def save_estimator(net, path):
    """Flat numeric weight file with a header (portable, versioned)."""
    lines = [ESTIMATOR_FORMAT,
             " ".join(str(s) for s in net.layer_sizes),
             " ".join(f"{v:.17g}" for v in net.feature_mean),
             " ".join(f"{v:.17g}" for v in net.feature_std)]
    lines += [f"{v:.17g}" for v in net.flat_params()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_estimator(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ESTIMATOR_FORMAT:
        raise ValueError(f"not a {ESTIMATOR_FORMAT} file: {path}")
    sizes = [int(s) for s in lines[1].split()]
    mean = np.array([float(v) for v in lines[2].split()])
    std = np.array([float(v) for v in lines[3].split()])
    net = MlpEstimator(n_inputs=sizes[0], hidden=tuple(sizes[1:-1]),
                       feature_mean=mean, feature_std=std)
    net.set_flat_params(np.array([float(v) for v in lines[4:] if v]))
    return net
