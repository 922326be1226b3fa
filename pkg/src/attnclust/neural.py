"""Differentiable layers with hand-written gradients, in double precision.

Everything the document encoder needs and nothing more: an LSTM cell, a
bidirectional sequence encoder, softmax attention pooling, and a dense
softmax/cross-entropy head. Each forward has a matching backward over an
explicit cache, and `finite_difference_check` verifies any loss gradient
against central differences.

Gate order inside fused LSTM arrays is i, f, o, g (input, forget, output,
candidate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NeuralError(Exception):
    pass


def sigmoid(x):
    # piecewise form avoids exp overflow for large |x|
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x):
    z = x - np.max(x)
    e = np.exp(z)
    return e / e.sum()


def xavier_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class LstmCellParams:
    """Fused LSTM weights: W (4h, d_in), U (4h, h), b (4h,)."""
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self):
        return self.U.shape[1]

    @property
    def input_size(self):
        return self.W.shape[1]


def init_lstm_params(rng, d_in, h):
    """Xavier-uniform weights; zero biases except forget gate at 1."""
    W = xavier_uniform(rng, (4 * h, d_in), d_in, h)
    U = xavier_uniform(rng, (4 * h, h), h, h)
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0
    return LstmCellParams(W, U, b)


def zero_lstm_grads(p):
    return LstmCellParams(np.zeros_like(p.W), np.zeros_like(p.U),
                          np.zeros_like(p.b))


@dataclass
class AttentionParams:
    """tanh projection W (a, s), bias b (a,), learned context vector u (a,)."""
    W: np.ndarray
    b: np.ndarray
    u: np.ndarray


def init_attention_params(rng, state_dim, a):
    W = xavier_uniform(rng, (a, state_dim), state_dim, a)
    return AttentionParams(W, np.zeros(a), xavier_uniform(rng, (a,), a, 1))


def zero_attention_grads(p):
    return AttentionParams(np.zeros_like(p.W), np.zeros_like(p.b),
                           np.zeros_like(p.u))


# ---------------------------------------------------------------------------
# LSTM cell and sequences


def lstm_cell_step(x, h_prev, c_prev, params):
    """One LSTM step: returns (h_next, c_next).

    i = sig(W_i x + U_i h + b_i), f and o likewise, g = tanh(...);
    c' = f*c + i*g; h' = o*tanh(c').
    """
    x = np.asarray(x, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(h_prev))
            and np.all(np.isfinite(c_prev))):
        raise NeuralError("non-finite input to lstm_cell_step")
    h = params.hidden_size
    z = params.W @ x + params.U @ h_prev + params.b
    i = sigmoid(z[:h])
    f = sigmoid(z[h:2 * h])
    o = sigmoid(z[2 * h:3 * h])
    g = np.tanh(z[3 * h:])
    c_next = f * c_prev + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


def lstm_forward(xs, params):
    """Run the cell over a (T, d_in) sequence from zero state.

    Returns (hs (T, h), cache) where the cache holds everything the
    backward pass needs.
    """
    xs = np.asarray(xs, dtype=np.float64)
    T = xs.shape[0]
    h = params.hidden_size
    I = np.empty((T, h))
    F = np.empty((T, h))
    O = np.empty((T, h))
    G = np.empty((T, h))
    C = np.empty((T, h))
    Ct = np.empty((T, h))
    H = np.empty((T, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in range(T):
        z = params.W @ xs[t] + params.U @ h_prev + params.b
        I[t] = sigmoid(z[:h])
        F[t] = sigmoid(z[h:2 * h])
        O[t] = sigmoid(z[2 * h:3 * h])
        G[t] = np.tanh(z[3 * h:])
        C[t] = F[t] * c_prev + I[t] * G[t]
        Ct[t] = np.tanh(C[t])
        H[t] = O[t] * Ct[t]
        h_prev = H[t]
        c_prev = C[t]
    cache = {"xs": xs, "I": I, "F": F, "O": O, "G": G, "C": C, "Ct": Ct, "H": H}
    return H, cache


def lstm_backward(dH, cache, params, grads):
    """Backprop a (T, h) gradient on the hidden states; returns dxs (T, d_in).

    Accumulates into `grads` (a zero_lstm_grads-shaped LstmCellParams).
    """
    xs = cache["xs"]
    I, F, O, G = cache["I"], cache["F"], cache["O"], cache["G"]
    C, Ct, H = cache["C"], cache["Ct"], cache["H"]
    T = xs.shape[0]
    h = params.hidden_size
    dxs = np.zeros_like(xs)
    dh_carry = np.zeros(h)
    dc_carry = np.zeros(h)
    for t in range(T - 1, -1, -1):
        dh = dH[t] + dh_carry
        dc = dc_carry + dh * O[t] * (1.0 - Ct[t] ** 2)
        c_prev = C[t - 1] if t > 0 else np.zeros(h)
        do = dh * Ct[t]
        di = dc * G[t]
        df = dc * c_prev
        dg = dc * I[t]
        dz = np.concatenate([di * I[t] * (1 - I[t]),
                             df * F[t] * (1 - F[t]),
                             do * O[t] * (1 - O[t]),
                             dg * (1 - G[t] ** 2)])
        h_prev = H[t - 1] if t > 0 else np.zeros(h)
        grads.W += np.outer(dz, xs[t])
        grads.U += np.outer(dz, h_prev)
        grads.b += dz
        dxs[t] = params.W.T @ dz
        dh_carry = params.U.T @ dz
        dc_carry = dc * F[t]
    return dxs


def bilstm_encode(xs, fwd, bwd, length=None):
    """Encode a sequence bidirectionally: output_t = [h_fwd_t, h_bwd_t].

    Both directions start from zero state; the backward direction reads the
    sequence right to left. If `length` is given, only the first `length`
    positions are encoded and returned, so trailing padding cannot leak into
    the states.
    """
    states, _ = bilstm_forward(xs, fwd, bwd, length)
    return states


def bilstm_forward(xs, fwd, bwd, length=None):
    xs = np.asarray(xs, dtype=np.float64)
    if length is not None:
        xs = xs[:length]
    if xs.shape[0] == 0:
        raise NeuralError("empty sequence")
    hs_f, cache_f = lstm_forward(xs, fwd)
    hs_b, cache_b = lstm_forward(xs[::-1], bwd)
    states = np.concatenate([hs_f, hs_b[::-1]], axis=1)
    return states, (cache_f, cache_b)


def bilstm_backward(dstates, caches, fwd, bwd, grads_fwd, grads_bwd):
    cache_f, cache_b = caches
    h = fwd.hidden_size
    dxs = lstm_backward(np.ascontiguousarray(dstates[:, :h]), cache_f, fwd,
                        grads_fwd)
    dxs_b = lstm_backward(np.ascontiguousarray(dstates[::-1, h:]), cache_b,
                          bwd, grads_bwd)
    return dxs + dxs_b[::-1]


# ---------------------------------------------------------------------------
# Attention pooling


def attention_pool(states, params, mask=None):
    """Softmax attention over (T, s) states with a learned context vector.

    u_t = tanh(W state_t + b); score_t = u_t . u; weights = softmax(scores);
    pooled = sum_t weights_t * state_t. Masked positions (mask False) get an
    additive -inf score, i.e. exactly zero weight. Returns (pooled, weights).
    """
    pooled, weights, _ = attention_forward(states, params, mask)
    return pooled, weights


def attention_forward(states, params, mask=None):
    states = np.asarray(states, dtype=np.float64)
    if states.shape[0] == 0:
        raise NeuralError("attention over an empty state list")
    proj = np.tanh(states @ params.W.T + params.b)  # (T, a)
    scores = proj @ params.u
    if mask is not None:
        scores = np.where(mask, scores, -np.inf)
    z = scores - scores.max()
    e = np.exp(z)
    weights = e / e.sum()
    pooled = weights @ states
    return pooled, weights, (states, proj, weights)


def attention_backward(dpooled, cache, params, grads):
    """Backprop through attention_forward; returns dstates (T, s)."""
    states, proj, weights = cache
    dstates = np.outer(weights, dpooled)
    dw = states @ dpooled
    dscores = weights * (dw - weights @ dw)
    grads.u += proj.T @ dscores
    dpre = np.outer(dscores, params.u) * (1.0 - proj ** 2)
    grads.W += dpre.T @ states
    grads.b += dpre.sum(axis=0)
    dstates += dpre @ params.W
    return dstates


# ---------------------------------------------------------------------------
# Classifier head


def dense_softmax_xent(v, label, W_c, b_c):
    """Affine + softmax + cross-entropy with log-sum-exp stabilization.

    Returns (probabilities, loss, (dv, dW_c, db_c)).
    """
    if not 0 <= label < W_c.shape[0]:
        raise NeuralError(f"label {label} out of range for {W_c.shape[0]} classes")
    logits = W_c @ v + b_c
    m = logits.max()
    log_z = m + np.log(np.exp(logits - m).sum())
    log_probs = logits - log_z
    probs = np.exp(log_probs)
    loss = -log_probs[label]
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    dv = W_c.T @ dlogits
    dW_c = np.outer(dlogits, v)
    db_c = dlogits
    return probs, loss, (dv, dW_c, db_c)


# ---------------------------------------------------------------------------
# Parameter registry and gradient checking


class ParamStore:
    """Named parameter tensors alongside same-shaped gradient buffers.

    Registration stores references, not copies, so layer dataclasses and the
    store always see the same memory.
    """

    def __init__(self):
        self._params = {}
        self._grads = {}

    def register(self, name, param, grad):
        if param.shape != grad.shape:
            raise NeuralError(f"{name}: grad shape {grad.shape} != param "
                              f"shape {param.shape}")
        self._params[name] = param
        self._grads[name] = grad

    def names(self):
        return list(self._params)

    def param(self, name):
        return self._params[name]

    def grad(self, name):
        return self._grads[name]

    def zero_grads(self):
        for g in self._grads.values():
            g[...] = 0.0

    def grad_norm(self):
        return float(np.sqrt(sum(float((g ** 2).sum())
                                 for g in self._grads.values())))

    def clip_grads(self, max_norm):
        norm = self.grad_norm()
        if norm > max_norm:
            scale = max_norm / norm
            for g in self._grads.values():
                g *= scale
        return norm

    def sgd_step(self, lr):
        for name, p in self._params.items():
            p -= lr * self._grads[name]


def finite_difference_check(loss_and_grad, store, epsilon=1e-5,
                            samples_per_tensor=50, seed=0):
    """Compare analytic gradients with central finite differences.

    `loss_and_grad(store)` must deterministically return a scalar loss and
    leave the matching analytic gradients in the store. At least
    `samples_per_tensor` coordinates of every tensor (all of them for small
    tensors) are perturbed by +/- epsilon. Returns the worst relative error.
    Coordinates whose analytic and numeric gradients agree within an
    absolute 1e-8 count as exact: near-zero gradients carry no relative
    precision, so dividing there would only amplify roundoff.
    """
    base = float(loss_and_grad(store))
    if not np.isfinite(base):
        raise NeuralError("loss is not finite at the evaluation point")
    analytic = {name: store.grad(name).copy() for name in store.names()}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name in store.names():
        param = store.param(name)
        flat = param.reshape(-1)
        size = flat.shape[0]
        if size <= samples_per_tensor:
            coords = np.arange(size)
        else:
            coords = np.sort(rng.choice(size, size=samples_per_tensor,
                                        replace=False))
        a_flat = analytic[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + epsilon
            f_plus = float(loss_and_grad(store))
            flat[idx] = orig - epsilon
            f_minus = float(loss_and_grad(store))
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            diff = abs(a_flat[idx] - numeric)
            if diff > 1e-8:
                worst = max(worst, diff / (abs(a_flat[idx]) + abs(numeric)))
    loss_and_grad(store)  # leave grads consistent with unperturbed params
    return worst
