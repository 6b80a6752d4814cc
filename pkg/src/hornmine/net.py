"""Policy-value network over flattened pair-feature states, trained by SGD.

Two ReLU hidden layers feed a masked-softmax policy head over all relation pairs
and a tanh value head. Forward and backward passes are written directly in numpy;
the first layer and the policy head are evaluated sparsely because a state touches
only the pairs present in the current paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import SparseState

COUNT_SCALE = 32.0  # divisor for count/position channels
SCORE_SCALE = 10.0  # divisor for the memory-score channel


class NumericError(RuntimeError):
    pass


def scale_values(idx: np.ndarray, vals: np.ndarray, k: int) -> np.ndarray:
    """Standardize raw feature values: counts and positions down by a fixed cap,
    scores likewise, flags untouched. Channel index is idx mod k."""
    ch = idx % k
    out = vals.astype(float).copy()
    stat = ch <= 2
    out[stat] /= COUNT_SCALE
    score = ch == 8
    out[score] /= SCORE_SCALE
    if k > 9:
        extra = ch >= 9
        out[extra] /= COUNT_SCALE
    return out


@dataclass
class NetSample:
    """One training tuple: sparse input, valid-action ids, search target, reward."""

    idx: np.ndarray
    vals: np.ndarray
    action_ids: np.ndarray
    pi: np.ndarray
    z: float


def make_net_sample(state: SparseState, pi: np.ndarray, z: float) -> NetSample:
    idx, vals = state.flat_input()
    return NetSample(idx, scale_values(idx, vals, state.k), state.action_ids(), pi, float(z))


class PolicyValueNet:
    def __init__(
        self,
        total: int,
        k: int,
        hidden: int = 128,
        l2: float = 1e-4,
        clip_norm: float = 5.0,
        seed: int = 0,
    ):
        self.total = total
        self.k = k
        self.hidden = hidden
        self.l2 = l2
        self.clip_norm = clip_norm
        self.input_dim = total * total * k
        self.n_actions = total * total
        rng = np.random.default_rng(seed)
        h = hidden
        # Hidden layers get small random weights; both heads start at zero so the
        # initial policy is uniform over valid actions and the initial value is 0.
        self.W1 = rng.normal(0.0, 0.05, size=(self.input_dim, h))
        self.b1 = np.zeros(h)
        self.W2 = rng.normal(0.0, np.sqrt(2.0 / h), size=(h, h))
        self.b2 = np.zeros(h)
        self.Wp = np.zeros((h, self.n_actions))
        self.bp = np.zeros(self.n_actions)
        self.wv = np.zeros(h)
        self.bv = 0.0

    def param_items(self) -> list[tuple[str, np.ndarray]]:
        return [
            ("W1", self.W1), ("b1", self.b1),
            ("W2", self.W2), ("b2", self.b2),
            ("Wp", self.Wp), ("bp", self.bp),
            ("wv", self.wv),
        ]

    # -- forward ---------------------------------------------------------------

    def forward_sample(self, s: NetSample) -> tuple[np.ndarray, float, dict]:
        z1 = self.W1[s.idx, :].T @ s.vals + self.b1
        h1 = np.maximum(z1, 0.0)
        z2 = self.W2 @ h1 + self.b2
        h2 = np.maximum(z2, 0.0)
        logits = self.Wp[:, s.action_ids].T @ h2 + self.bp[s.action_ids]
        shifted = logits - logits.max()
        exps = np.exp(shifted)
        rho = exps / exps.sum()
        vraw = float(self.wv @ h2 + self.bv)
        v = float(np.tanh(vraw))
        cache = {"z1": z1, "h1": h1, "z2": z2, "h2": h2, "logits": logits, "rho": rho, "v": v}
        return rho, v, cache

    def policy_value(self, state: SparseState) -> tuple[np.ndarray, float]:
        """Masked policy over state.order and the value estimate."""
        s = make_net_sample(state, np.zeros(len(state.order)), 0.0)
        rho, v, _ = self.forward_sample(s)
        return rho, v

    # -- loss and gradients ------------------------------------------------------

    def _l2_sum(self) -> float:
        return float(sum(np.sum(p * p) for _, p in self.param_items()) + self.bv * self.bv)

    def sample_loss(self, s: NetSample) -> float:
        rho, v, cache = self.forward_sample(s)
        return self._data_loss(s, cache) + self.l2 * self._l2_sum()

    def _data_loss(self, s: NetSample, cache: dict) -> float:
        logits = cache["logits"]
        logp = logits - logits.max()
        logp = logp - np.log(np.exp(logp).sum())
        support = s.pi > 0
        ce = -float(np.sum(s.pi[support] * logp[support]))
        return (s.z - cache["v"]) ** 2 + ce

    def loss_and_grads(self, batch: list[NetSample]) -> tuple[float, dict]:
        """Mean loss over the batch and gradients for every parameter.

        dW1 and dWp are accumulated only at rows/columns the batch touches; the L2
        term is applied densely afterwards.
        """
        h = self.hidden
        grads = {
            "W1": np.zeros_like(self.W1), "b1": np.zeros(h),
            "W2": np.zeros_like(self.W2), "b2": np.zeros(h),
            "Wp": np.zeros_like(self.Wp), "bp": np.zeros(self.n_actions),
            "wv": np.zeros(h), "bv": 0.0,
        }
        total_loss = 0.0
        inv_b = 1.0 / len(batch)
        for s in batch:
            rho, v, cache = self.forward_sample(s)
            total_loss += self._data_loss(s, cache)
            # policy head: softmax cross-entropy against the search distribution
            dlogits = (rho - s.pi) * inv_b
            # value head: squared error through tanh
            dvraw = 2.0 * (v - s.z) * (1.0 - v * v) * inv_b
            h2 = cache["h2"]
            grads["Wp"][:, s.action_ids] += np.outer(h2, dlogits)
            np.add.at(grads["bp"], s.action_ids, dlogits)
            grads["wv"] += h2 * dvraw
            grads["bv"] += dvraw
            dh2 = self.Wp[:, s.action_ids] @ dlogits + self.wv * dvraw
            dz2 = dh2 * (cache["z2"] > 0.0)
            grads["W2"] += np.outer(dz2, cache["h1"])
            grads["b2"] += dz2
            dh1 = self.W2.T @ dz2
            dz1 = dh1 * (cache["z1"] > 0.0)
            grads["W1"][s.idx, :] += np.outer(s.vals, dz1)
            grads["b1"] += dz1
        loss = total_loss * inv_b + self.l2 * self._l2_sum()
        for name, p in self.param_items():
            grads[name] += 2.0 * self.l2 * p
        grads["bv"] += 2.0 * self.l2 * self.bv
        return loss, grads

    def train_step(self, batch: list[NetSample], lr: float) -> float:
        if not batch:
            raise ValueError("empty batch")
        loss, grads = self.loss_and_grads(batch)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss {loss}")
        sq = sum(float(np.sum(g * g)) for g in grads.values() if isinstance(g, np.ndarray))
        sq += grads["bv"] ** 2
        norm = np.sqrt(sq)
        scale = self.clip_norm / norm if norm > self.clip_norm else 1.0
        for name, p in self.param_items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient in {name}")
            p -= lr * scale * g
        self.bv -= lr * scale * grads["bv"]
        return loss

    # -- persistence ---------------------------------------------------------------

    def save(self, path: str) -> None:
        np.savez(
            path,
            format_version=1,
            total=self.total, k=self.k, hidden=self.hidden,
            l2=self.l2, clip_norm=self.clip_norm,
            W1=self.W1, b1=self.b1, W2=self.W2, b2=self.b2,
            Wp=self.Wp, bp=self.bp, wv=self.wv, bv=self.bv,
        )

    @classmethod
    def load(cls, path: str) -> "PolicyValueNet":
        data = np.load(path)
        net = cls(
            total=int(data["total"]), k=int(data["k"]), hidden=int(data["hidden"]),
            l2=float(data["l2"]), clip_norm=float(data["clip_norm"]),
        )
        for name in ("W1", "b1", "W2", "b2", "Wp", "bp", "wv"):
            getattr(net, name)[...] = data[name]
        net.bv = float(data["bv"])
        return net

    def params_hash(self) -> str:
        import hashlib

        digest = hashlib.sha256()
        for _, p in self.param_items():
            digest.update(np.ascontiguousarray(p).tobytes())
        digest.update(np.float64(self.bv).tobytes())
        return digest.hexdigest()


def numeric_gradient(
    net: PolicyValueNet,
    s: NetSample,
    coords: list[tuple[str, tuple]],
    h: float = 1e-4,
) -> dict[tuple[str, tuple], float]:
    """Central finite differences of the single-sample loss at selected coordinates."""
    out: dict[tuple[str, tuple], float] = {}
    params = dict(net.param_items())
    for name, index in coords:
        if name == "bv":
            orig = net.bv
            net.bv = orig + h
            up = net.sample_loss(s)
            net.bv = orig - h
            down = net.sample_loss(s)
            net.bv = orig
        else:
            p = params[name]
            orig = p[index]
            p[index] = orig + h
            up = net.sample_loss(s)
            p[index] = orig - h
            down = net.sample_loss(s)
            p[index] = orig
        out[(name, index)] = (up - down) / (2.0 * h)
    return out
