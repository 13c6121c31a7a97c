"""Dense tanh MLPs, the Gaussian actor-critic built from them, and Adam."""

from __future__ import annotations

import math

import numpy as np

LOG_2PI_E = math.log(2.0 * math.pi * math.e)
LOG_2PI = math.log(2.0 * math.pi)


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class MLP:
    """Stack of dense layers, tanh between them, linear output.

    Weights are stored as (fan_in, fan_out) so a batch ``X`` maps to ``X @ W + b``.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]

    @classmethod
    def init(cls, sizes: list[int], rng: np.random.Generator, out_gain: float = 1.0) -> "MLP":
        ws, bs = [], []
        for n, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = n == len(sizes) - 2
            ws.append(_orthogonal(rng, fan_in, fan_out, out_gain if last else math.sqrt(2.0)))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: np.ndarray):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for n, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if n == last else np.tanh(z)
            acts.append(h)
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Parameter gradients in ``params()`` order, given dLoss/dOutput."""
        grads: list[np.ndarray] = []
        g = grad_out
        last = len(self.weights) - 1
        for n in range(last, -1, -1):
            if n != last:
                g = g * (1.0 - acts[n + 1] ** 2)
            grads = [acts[n].T @ g, g.sum(axis=0)] + grads
            g = g @ self.weights[n].T
        return grads


class Policy:
    """Gaussian actor with a state-independent log std, plus a value critic."""

    def __init__(self, actor: MLP, log_std: np.ndarray, critic: MLP):
        self.actor = actor
        self.log_std = np.asarray(log_std, dtype=np.float64)
        self.critic = critic

    @classmethod
    def init(cls, state_dim: int, action_dim: int, hidden: list[int], rng: np.random.Generator,
             log_std_init: float = 0.0) -> "Policy":
        actor = MLP.init([state_dim, *hidden, action_dim], rng, out_gain=0.01)
        critic = MLP.init([state_dim, *hidden, 1], rng, out_gain=1.0)
        return cls(actor, np.full(action_dim, log_std_init), critic)

    @property
    def state_dim(self) -> int:
        return self.actor.sizes[0]

    @property
    def action_dim(self) -> int:
        return self.actor.sizes[-1]

    def params(self) -> list[np.ndarray]:
        return self.actor.params() + [self.log_std] + self.critic.params()

    def entropy(self) -> float:
        return float(np.sum(self.log_std + 0.5 * LOG_2PI_E))

    def _check(self, states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.shape[-1] != self.state_dim:
            raise ValueError(
                f"state has dimension {states.shape[-1]}, policy expects {self.state_dim}"
            )
        return states

    def mean(self, states: np.ndarray) -> np.ndarray:
        return self.actor(self._check(states))

    def value(self, states: np.ndarray) -> np.ndarray:
        return self.critic(self._check(states))[..., 0]

    def log_prob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        mu = self.mean(states)
        z = (np.asarray(actions) - mu) / np.exp(self.log_std)
        return np.sum(-0.5 * z * z - self.log_std - 0.5 * LOG_2PI, axis=-1)


def sample_action(policy: Policy, state: np.ndarray, rng: np.random.Generator):
    """Draw a Gaussian action; returns ``(action, joint log density)``."""
    state = np.asarray(state, dtype=np.float64)
    mu = policy.mean(state)
    action = mu + np.exp(policy.log_std) * rng.standard_normal(mu.shape)
    return action, policy.log_prob(state, action)


def act_deterministic(policy: Policy, state: np.ndarray) -> np.ndarray:
    return policy.mean(np.asarray(state, dtype=np.float64))


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
