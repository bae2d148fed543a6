"""Activation functions and their derivatives."""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def sigmoid_grad_from_output(y):
    return y * (1.0 - y)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def tanh_grad_from_output(y):
    return 1.0 - y * y


def relu(x):
    return np.maximum(0.0, np.asarray(x, dtype=np.float64))


def relu_grad(x):
    return (np.asarray(x) > 0).astype(np.float64)


def softmax(v, axis: int = -1):
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - np.max(v, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_jacobian(y):
    """``J[i, j] = y_i (delta_ij - y_j)`` for a single output vector."""
    y = np.asarray(y, dtype=np.float64)
    return np.diag(y) - np.outer(y, y)


def softmax_backward(y, grad_out):
    """Vector-Jacobian product of softmax, row-wise for 2-D inputs."""
    dot = np.sum(y * grad_out, axis=-1, keepdims=True)
    return y * (grad_out - dot)


HIDDEN = {
    "sigmoid": (sigmoid, sigmoid_grad_from_output),
    "tanh": (tanh, tanh_grad_from_output),
}
