"""Logistic-regression models trained by full-batch gradient descent."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from docembed._validation import check_array, check_is_fitted


def sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z, axis=-1):
    shifted = z - z.max(axis=axis, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=axis, keepdims=True)


def logistic_loss_and_grad(w, b, X, y, l2=0.0):
    """Mean binary cross-entropy and its exact gradient.

    Stable via the softplus identity: per-sample loss is
    softplus(z) - y*z with z = Xw + b.
    """
    z = X @ w + b
    loss = float(np.mean(np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z))) - y * z))
    loss += 0.5 * l2 * float(w @ w)
    residual = sigmoid(z) - y
    grad_w = X.T @ residual / len(y) + l2 * w
    grad_b = float(residual.mean())
    return loss, grad_w, grad_b


def softmax_loss_and_grad(W, b, X, y, l2=0.0):
    """Mean multinomial cross-entropy and its exact gradient."""
    logits = X @ W + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    n = len(y)
    loss = float(np.mean(log_z - shifted[np.arange(n), y]))
    loss += 0.5 * l2 * float(np.sum(W * W))
    probs = softmax(logits)
    probs[np.arange(n), y] -= 1.0
    grad_W = X.T @ probs / n + l2 * W
    grad_b = probs.mean(axis=0)
    return loss, grad_W, grad_b


class LogisticRegressionGD(BaseEstimator):
    """Binary logistic regression; weights start at zero so that training
    is deterministic without a seed."""

    def __init__(self, lr=0.5, n_iters=500, l2=0.0):
        self.lr = lr
        self.n_iters = n_iters
        self.l2 = l2

    def fit(self, X, y):
        X = check_array(X, "X")
        y = np.asarray(y, dtype=np.float64)
        classes = np.unique(y)
        if not np.all(np.isin(classes, [0.0, 1.0])):
            raise ValueError("labels must be 0/1")
        if len(classes) < 2:
            raise ValueError("need both classes present to fit")
        w = np.zeros(X.shape[1])
        b = 0.0
        for _ in range(self.n_iters):
            _, gw, gb = logistic_loss_and_grad(w, b, X, y, self.l2)
            w -= self.lr * gw
            b -= self.lr * gb
        self.weights_ = w
        self.bias_ = b
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, "X")
        return sigmoid(X @ self.weights_ + self.bias_)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))


class SoftmaxRegression(BaseEstimator):
    """Multinomial logistic regression with L2 regularization."""

    def __init__(self, lr=0.5, n_iters=500, l2=0.0):
        self.lr = lr
        self.n_iters = n_iters
        self.l2 = l2

    def fit(self, X, y):
        X = check_array(X, "X")
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes to fit")
        index = {c: i for i, c in enumerate(self.classes_)}
        yi = np.array([index[c] for c in y])
        W = np.zeros((X.shape[1], len(self.classes_)))
        b = np.zeros(len(self.classes_))
        for _ in range(self.n_iters):
            _, gW, gb = softmax_loss_and_grad(W, b, X, yi, self.l2)
            W -= self.lr * gW
            b -= self.lr * gb
        self.weights_ = W
        self.bias_ = b
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, "X")
        return softmax(X @ self.weights_ + self.bias_)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))
