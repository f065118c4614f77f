"""Minimal differentiable function stack: MLPs, Adam, diagonal-Gaussian policy heads.

Plain numpy float64 throughout. Forward maps are affine + tanh compositions with
a linear final layer; gradients are exact reverse-mode and are checked against
central finite differences in the test suite. All operations are pure given an
explicit PRNG.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class MLPParams:
    layer_dims: list[int]
    weights: list[np.ndarray]   # flat per layer, reshaped to (out, in) on use
    biases: list[np.ndarray]
    activation: str = "tanh"

    def param_list(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def with_params(self, params: list[np.ndarray]) -> "MLPParams":
        weights = [params[2 * i] for i in range(len(self.weights))]
        biases = [params[2 * i + 1] for i in range(len(self.biases))]
        return MLPParams(list(self.layer_dims), weights, biases, self.activation)


def mlp_init(layer_dims: list[int], rng: np.random.Generator, final_scale: float = 1.0) -> MLPParams:
    """He-style normal init scaled by 1/sqrt(fan_in); final layer optionally shrunk."""
    weights, biases = [], []
    n_layers = len(layer_dims) - 1
    for i in range(n_layers):
        fan_in, fan_out = layer_dims[i], layer_dims[i + 1]
        scale = 1.0 / math.sqrt(fan_in)
        if i == n_layers - 1:
            scale *= final_scale
        w = rng.normal(0.0, scale, size=fan_out * fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MLPParams(list(layer_dims), weights, biases)


def _as_batch(x: np.ndarray, dim: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != dim:
        raise ValueError(f"{what} dim mismatch: expected {dim}, got {x.shape[1]}")
    return x, single


def _forward_cached(params: MLPParams, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first, linear output last."""
    acts = [x]
    h = x
    n_layers = len(params.weights)
    for i in range(n_layers):
        w = params.weights[i].reshape(params.layer_dims[i + 1], params.layer_dims[i])
        z = h @ w.T + params.biases[i]
        h = z if i == n_layers - 1 else np.tanh(z)
        acts.append(h)
    return acts


def mlp_forward(params: MLPParams, x: np.ndarray) -> np.ndarray:
    xb, single = _as_batch(x, params.layer_dims[0], "input")
    y = _forward_cached(params, xb)[-1]
    return y[0] if single else y


def mlp_grad(
    params: MLPParams, x: np.ndarray, upstream_grad: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients of the forward map.

    Returns (param_grads, input_grad) where param_grads matches
    params.param_list() ordering: [w0, b0, w1, b1, ...], each flat.
    """
    xb, single = _as_batch(x, params.layer_dims[0], "input")
    gb, gsingle = _as_batch(upstream_grad, params.layer_dims[-1], "upstream_grad")
    if single != gsingle or xb.shape[0] != gb.shape[0]:
        raise ValueError(
            f"upstream_grad batch mismatch: input rows {xb.shape[0]}, grad rows {gb.shape[0]}"
        )
    acts = _forward_cached(params, xb)
    n_layers = len(params.weights)
    w_grads: list[np.ndarray] = [None] * n_layers
    b_grads: list[np.ndarray] = [None] * n_layers
    g = gb
    for i in range(n_layers - 1, -1, -1):
        h_in = acts[i]
        w = params.weights[i].reshape(params.layer_dims[i + 1], params.layer_dims[i])
        w_grads[i] = (g.T @ h_in).ravel()
        b_grads[i] = g.sum(axis=0)
        g = g @ w
        if i > 0:
            g = g * (1.0 - acts[i] * acts[i])  # back through tanh
    grads = []
    for wg, bg in zip(w_grads, b_grads):
        grads.append(wg)
        grads.append(bg)
    input_grad = g[0] if single else g
    return grads, input_grad


# -- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: list[np.ndarray], lr: float = 3e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        step=0,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(
    state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]
) -> tuple[AdamState, list[np.ndarray]]:
    """Standard bias-corrected Adam update; pure (returns new state and params)."""
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("param/grad shape mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ValueError("gradient divergence")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m2 = b1 * m + (1.0 - b1) * g
        v2 = b2 * v + (1.0 - b2) * g * g
        m_hat = m2 / bc1
        v_hat = v2 / bc2
        new_m.append(m2)
        new_v.append(v2)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return AdamState(t, new_m, new_v, state.lr, b1, b2, state.eps), new_p


# -- Gaussian policy heads ------------------------------------------------------


@dataclass
class GaussianPolicy:
    """Diagonal Gaussian over actions.

    log_std is a state-independent parameter vector; when None, the mean net
    outputs [mean, log_std] (a state-dependent head, used with squashing).
    squash applies tanh with the log-det correction in logprob.
    """

    mean_net: MLPParams
    log_std: np.ndarray | None = None
    squash: bool = False

    @property
    def action_dim(self) -> int:
        out = self.mean_net.layer_dims[-1]
        return out // 2 if self.log_std is None else out

    def param_list(self) -> list[np.ndarray]:
        params = self.mean_net.param_list()
        if self.log_std is not None:
            params = params + [self.log_std]
        return params

    def with_params(self, params: list[np.ndarray]) -> "GaussianPolicy":
        if self.log_std is not None:
            return GaussianPolicy(self.mean_net.with_params(params[:-1]),
                                  np.asarray(params[-1]), self.squash)
        return GaussianPolicy(self.mean_net.with_params(params), None, self.squash)


def make_policy(obs_dim: int, act_dim: int, hidden: tuple[int, ...], rng: np.random.Generator,
                squash: bool = False, std_head: bool = False,
                init_log_std: float = -0.5) -> GaussianPolicy:
    out = 2 * act_dim if std_head else act_dim
    net = mlp_init([obs_dim, *hidden, out], rng, final_scale=0.01)
    log_std = None if std_head else np.full(act_dim, init_log_std)
    return GaussianPolicy(net, log_std, squash)


def policy_mean_logstd(policy: GaussianPolicy, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pre-squash mean and clamped log-std for a batch (or single) state."""
    out = mlp_forward(policy.mean_net, state)
    if policy.log_std is None:
        k = policy.action_dim
        mean = out[..., :k]
        log_std = np.clip(out[..., k:], LOG_STD_MIN, LOG_STD_MAX)
    else:
        mean = out
        log_std = np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX)
        log_std = np.broadcast_to(log_std, mean.shape)
    return mean, log_std


def _diag_gauss_logprob(u: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (u - mean) / np.exp(log_std)
    return (-0.5 * z * z - log_std - 0.5 * LOG_2PI).sum(axis=-1)


def _tanh_log_det(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) = 2 * (log 2 - u - softplus(-2u)), numerically stable
    return (2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))).sum(axis=-1)


def gaussian_head(
    policy: GaussianPolicy,
    state: np.ndarray,
    mode: str,
    action: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
):
    """Evaluate the policy head.

    mode "mean": deterministic action (tanh-squashed when squash).
    mode "sample": (action, logprob); consumes the caller-provided rng.
    mode "logprob": log density of `action`.
    mode "entropy": entropy of the pre-squash diagonal Gaussian.
    """
    mean, log_std = policy_mean_logstd(policy, state)
    if mode == "mean":
        return np.tanh(mean) if policy.squash else mean
    if mode == "entropy":
        return (log_std + 0.5 * (1.0 + LOG_2PI)).sum(axis=-1)
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode requires rng")
        noise = rng.standard_normal(mean.shape)
        u = mean + np.exp(log_std) * noise
        logp = _diag_gauss_logprob(u, mean, log_std)
        if policy.squash:
            return np.tanh(u), logp - _tanh_log_det(u)
        return u, logp
    if mode == "logprob":
        if action is None:
            raise ValueError("logprob mode requires action")
        a = np.asarray(action, dtype=np.float64)
        if policy.squash:
            if np.any(np.abs(a) >= 1.0):
                raise ValueError("action outside open interval (-1, 1)")
            u = np.arctanh(a)
            return _diag_gauss_logprob(u, mean, log_std) - _tanh_log_det(u)
        return _diag_gauss_logprob(a, mean, log_std)
    raise ValueError(f"unknown mode {mode!r}")


# -- policy files ----------------------------------------------------------------

POLICY_FILE_VERSION = 1


def save_policy(path: str, policy: GaussianPolicy, obs_layout: dict, action_scale: float) -> None:
    """Versioned JSON policy file; numbers keep full round-trip precision."""
    doc = {
        "version": POLICY_FILE_VERSION,
        "kind": "squashed_gaussian_head" if policy.log_std is None else "gaussian",
        "layer_dims": list(policy.mean_net.layer_dims),
        "activation": policy.mean_net.activation,
        "weights": [w.tolist() for w in policy.mean_net.weights],
        "biases": [b.tolist() for b in policy.mean_net.biases],
        "log_std": None if policy.log_std is None else policy.log_std.tolist(),
        "squash": policy.squash,
        "obs_layout": obs_layout,
        "action_scale": action_scale,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(doc, f)
    os.replace(tmp, path)


def load_policy(path: str) -> tuple[GaussianPolicy, dict]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != POLICY_FILE_VERSION:
        raise ValueError(f"unsupported policy file version {doc.get('version')!r}")
    net = MLPParams(
        layer_dims=list(doc["layer_dims"]),
        weights=[np.asarray(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in doc["biases"]],
        activation=doc["activation"],
    )
    log_std = None if doc["log_std"] is None else np.asarray(doc["log_std"], dtype=np.float64)
    policy = GaussianPolicy(net, log_std, bool(doc["squash"]))
    return policy, doc
