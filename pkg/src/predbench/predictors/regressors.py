"""Regression learners backing the model-based predictors.

Everything is numpy-only and deterministic given its rng, which keeps
fitted predictors bit-reproducible across runs. Split search in the trees
has a fast matmul path for 0/1 features (the architecture encodings) and a
sort-scan path for continuous columns (curve and proxy features).
"""

import numpy as np

from .. import autodiff as ad
from ..errors import InsufficientData, NumericalFailure


# --- decision trees ----------------------------------------------------


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value):
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value


class RegressionTree:
    """CART-style regressor minimizing squared error."""

    def __init__(self, max_depth=None, min_samples_leaf=1, min_samples_split=2,
                 max_features=1.0, rng=None):
        self.max_depth = max_depth
        self.min_samples_leaf = int(min_samples_leaf)
        self.min_samples_split = int(min_samples_split)
        self.max_features = float(max_features)
        self.rng = rng or np.random.default_rng(0)
        self.root = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self._binary = np.array([set(np.unique(X[:, j])) <= {0.0, 1.0}
                                 for j in range(X.shape[1])])
        self.root = self._grow(X, y, np.arange(len(y)), 0)
        return self

    def _grow(self, X, y, idx, depth):
        node = _Node(float(y[idx].mean()))
        n = idx.size
        if (self.max_depth is not None and depth >= self.max_depth) \
                or n < self.min_samples_split or n < 2 * self.min_samples_leaf:
            return node
        yi = y[idx]
        if np.all(yi == yi[0]):
            return node
        d = X.shape[1]
        n_feats = max(1, int(round(self.max_features * d)))
        feats = np.sort(self.rng.choice(d, size=n_feats, replace=False)) \
            if n_feats < d else np.arange(d)
        best = self._best_split(X, yi, idx, feats)
        if best is None:
            return node
        feature, threshold = best
        mask = X[idx, feature] <= threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        node.feature = feature
        node.threshold = threshold
        node.left = self._grow(X, y, left_idx, depth + 1)
        node.right = self._grow(X, y, right_idx, depth + 1)
        return node

    def _best_split(self, X, yi, idx, feats):
        n = idx.size
        total = yi.sum()
        best_gain, best = 0.0, None
        bin_feats = feats[self._binary[feats]]
        if bin_feats.size:
            sub = X[np.ix_(idx, bin_feats)]
            n1 = sub.sum(axis=0)
            s1 = sub.T @ yi
            n0 = n - n1
            s0 = total - s1
            ok = (n0 >= self.min_samples_leaf) & (n1 >= self.min_samples_leaf)
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(ok, s0**2 / n0 + s1**2 / n1 - total**2 / n, -np.inf)
            if ok.any():
                j = int(np.argmax(gain))
                if gain[j] > best_gain + 1e-12:
                    best_gain, best = float(gain[j]), (int(bin_feats[j]), 0.5)
        for f in feats[~self._binary[feats]]:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            sc, yc = col[order], yi[order]
            csum = np.cumsum(yc)
            # candidate cut after sorted position i (left size = i + 1)
            counts = np.arange(1, n)
            valid = (sc[:-1] < sc[1:]) & (counts >= self.min_samples_leaf) \
                & (n - counts >= self.min_samples_leaf)
            if not valid.any():
                continue
            sl = csum[:-1]
            sr = total - sl
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = np.where(valid, sl**2 / counts + sr**2 / (n - counts)
                                - total**2 / n, -np.inf)
            j = int(np.argmax(gain))
            if gain[j] > best_gain + 1e-12:
                best_gain = float(gain[j])
                best = (int(f), float(0.5 * (sc[j] + sc[j + 1])))
        return best

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        self._predict_into(self.root, X, np.arange(X.shape[0]), out)
        return out

    def _predict_into(self, node, X, idx, out):
        if node.left is None:
            out[idx] = node.value
            return
        mask = X[idx, node.feature] <= node.threshold
        self._predict_into(node.left, X, idx[mask], out)
        self._predict_into(node.right, X, idx[~mask], out)


class RandomForest:
    def __init__(self, n_estimators=32, max_features=0.5, min_samples_leaf=1,
                 min_samples_split=2, bootstrap=True, rng=None):
        self.n_estimators = int(n_estimators)
        self.max_features = float(max_features)
        self.min_samples_leaf = int(min_samples_leaf)
        self.min_samples_split = int(min_samples_split)
        self.bootstrap = bootstrap
        self.rng = rng or np.random.default_rng(0)
        self.trees: list[RegressionTree] = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = len(y)
        self.trees = []
        for _ in range(self.n_estimators):
            idx = self.rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = RegressionTree(None, self.min_samples_leaf, self.min_samples_split,
                                  self.max_features, self.rng)
            tree.fit(X[idx], y[idx])
            self.trees.append(tree)
        return self

    def predict(self, X):
        return np.mean([t.predict(X) for t in self.trees], axis=0)


class GradientBoostedTrees:
    def __init__(self, n_estimators=64, learning_rate=0.1, max_depth=3,
                 feature_fraction=0.8, min_samples_leaf=2, rng=None):
        self.n_estimators = int(n_estimators)
        self.learning_rate = float(learning_rate)
        self.max_depth = int(max_depth)
        self.feature_fraction = float(feature_fraction)
        self.min_samples_leaf = int(min_samples_leaf)
        self.rng = rng or np.random.default_rng(0)
        self.base = 0.0
        self.trees: list[RegressionTree] = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.base = float(y.mean())
        pred = np.full(len(y), self.base)
        self.trees = []
        for _ in range(self.n_estimators):
            tree = RegressionTree(self.max_depth, self.min_samples_leaf, 2,
                                  self.feature_fraction, self.rng)
            tree.fit(X, y - pred)
            pred += self.learning_rate * tree.predict(X)
            self.trees.append(tree)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        pred = np.full(X.shape[0], self.base)
        for tree in self.trees:
            pred += self.learning_rate * tree.predict(X)
        return pred


# --- bayesian linear regression -----------------------------------------


class BayesianLinearRegression:
    """Gaussian prior N(0, 1/alpha) on weights, noise precision beta; the
    posterior mean is the ridge solution."""

    def __init__(self, alpha=1.0, beta=100.0):
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.mean = None

    @staticmethod
    def _design(X):
        X = np.asarray(X, dtype=float)
        return np.hstack([X, np.ones((X.shape[0], 1))])

    def fit(self, X, y):
        phi = self._design(X)
        y = np.asarray(y, dtype=float)
        A = self.alpha * np.eye(phi.shape[1]) + self.beta * phi.T @ phi
        try:
            self.mean = self.beta * np.linalg.solve(A, phi.T @ y)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular normal equations") from exc
        return self

    def predict(self, X):
        return self._design(X) @ self.mean


# --- gaussian process ----------------------------------------------------


class GaussianProcess:
    """RBF-kernel GP regression with escalating jitter on the Cholesky."""

    JITTERS = (1e-10, 1e-8, 1e-6, 1e-4)

    def __init__(self, length_scale=2.0, noise=1e-3, signal_var=1.0):
        self.length_scale = float(length_scale)
        self.noise = float(noise)
        self.signal_var = float(signal_var)

    def _kernel(self, A, B):
        d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        return self.signal_var * np.exp(-0.5 * d2 / self.length_scale**2)

    def fit(self, X, y):
        self.X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.y_mean = float(y.mean())
        K = self._kernel(self.X, self.X)
        n = K.shape[0]
        last = None
        for jitter in self.JITTERS:
            try:
                self.L = np.linalg.cholesky(K + (self.noise + jitter) * np.eye(n))
                break
            except np.linalg.LinAlgError as exc:
                last = exc
        else:
            raise NumericalFailure("kernel matrix not positive definite") from last
        z = np.linalg.solve(self.L, y - self.y_mean)
        self.alpha_vec = np.linalg.solve(self.L.T, z)
        return self

    def predict(self, X):
        Ks = self._kernel(np.asarray(X, dtype=float), self.X)
        return self.y_mean + Ks @ self.alpha_vec


# --- feedforward regressor ------------------------------------------------


class MLPRegressor:
    """Fully connected ReLU regressor trained full-batch with Adam."""

    def __init__(self, num_layers=5, width=20, learning_rate=0.01,
                 epochs=200, rng=None):
        self.num_layers = int(num_layers)
        self.width = int(width)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.rng = rng or np.random.default_rng(0)

    def _init_params(self, d):
        sizes = [d] + [self.width] * self.num_layers + [1]
        params = []
        for i in range(len(sizes) - 1):
            fan_in = sizes[i]
            params.append(self.rng.normal(0, np.sqrt(2.0 / fan_in), (sizes[i], sizes[i + 1])))
            params.append(np.zeros((1, sizes[i + 1])))
        return params

    def _forward(self, xt, ptensors):
        h = xt
        n_affine = len(ptensors) // 2
        for i in range(n_affine):
            h = ad.add(ad.matmul(h, ptensors[2 * i]), ptensors[2 * i + 1])
            if i < n_affine - 1:
                h = ad.relu(h)
        return h

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(y) < 2:
            raise InsufficientData("need at least 2 rows")
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        target = ((y - self.y_mean) / self.y_std)[:, None]
        self.params = self._init_params(X.shape[1])
        m = [np.zeros_like(p) for p in self.params]
        v = [np.zeros_like(p) for p in self.params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        for step in range(1, self.epochs + 1):
            ptensors = [ad.Tensor(p) for p in self.params]
            pred = self._forward(ad.Tensor(X), ptensors)
            diff = ad.sub(pred, ad.const(target))
            loss = ad.scale(ad.tsum(ad.mul(diff, diff)), 1.0 / len(y))
            grads = ad.backprop(loss, ptensors)
            for i, g in enumerate(grads):
                m[i] = b1 * m[i] + (1 - b1) * g.data
                v[i] = b2 * v[i] + (1 - b2) * g.data**2
                mh = m[i] / (1 - b1**step)
                vh = v[i] / (1 - b2**step)
                self.params[i] = self.params[i] - self.learning_rate * mh / (np.sqrt(vh) + eps)
        return self

    def predict(self, X):
        with ad.no_grad():
            pred = self._forward(ad.Tensor(np.asarray(X, dtype=float)),
                                 [ad.Tensor(p) for p in self.params])
        return pred.data[:, 0] * self.y_std + self.y_mean
