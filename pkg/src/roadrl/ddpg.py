"""Deep deterministic policy gradient on top of the hand-rolled networks.

One actor, one critic, slow-moving target copies of both, a uniform ring
replay buffer, and an AR(2) exploration process whose amplitude decays late
in training. Persistence writes each network (live and target weights) into
a self-describing binary container plus a human-readable text config.
"""

from __future__ import annotations

import json
import math
import re
import struct
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path as FsPath

import numpy as np

from .errors import NotWarm, ShapeMismatch, TruncatedFile, VersionMismatch
from .nn import AdamState, Mlp, soft_update

MODEL_MAGIC = b"ACN1"
MODEL_SUFFIX = ".acnet"
MODEL_FILE_RE = re.compile(
    r"^\d+(?:-\d+)+_\d{8}_\d{6}_\d+_(actor|critic)\.(?:acnet|txt)$"
)


def reward_speed_limit(v: float, v_max: float, width: float = 2.5) -> float:
    """Gaussian reward in (-1, 0], peaking where velocity meets the limit."""
    z = (v_max - v) / width
    return math.exp(-0.5 * z * z) - 1.0


class ReplayBuffer:
    """Fixed-capacity ring of (s, a, r, s') transitions; uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int = 1):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros((capacity, 1))
        self.s2 = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.size = 0

    def push(self, s, a, r, s2) -> None:
        i = self.cursor
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise NotWarm(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, size=batch)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]


class ExplorationState:
    """AR(2) noise with a late-decaying exploration rate.

    n(t) = c1*n(t-1) + c2*n(t-2) + N(0, sigma^2); the returned value is
    epsilon(step) * n(t) where epsilon holds its initial value until
    decay_start and shrinks geometrically afterwards.
    """

    def __init__(
        self,
        c1: float = 0.29,
        c2: float = 0.7,
        sigma: float = math.sqrt(0.05),
        epsilon_init: float = 0.99995,
        decay: float = 0.99995,
        decay_start: int = 40_000,
    ):
        self.c1 = c1
        self.c2 = c2
        self.sigma = sigma
        self.epsilon_init = epsilon_init
        self.decay = decay
        self.decay_start = decay_start
        self.n_prev1 = 0.0
        self.n_prev2 = 0.0
        self.epsilon = epsilon_init

    def noise(self, step: int, rng: np.random.Generator) -> float:
        n = self.c1 * self.n_prev1 + self.c2 * self.n_prev2 + rng.normal(0.0, self.sigma)
        self.n_prev2 = self.n_prev1
        self.n_prev1 = n
        self.epsilon = self.epsilon_init * self.decay ** max(0, step - self.decay_start)
        return self.epsilon * n


def explore_noise(es: ExplorationState, step: int, rng: np.random.Generator) -> float:
    return es.noise(step, rng)


class DdpgAgent:
    def __init__(
        self,
        state_dim: int,
        action_dim: int = 1,
        hidden=(400, 300, 200),
        actor_lr: float = 5e-5,
        critic_lr: float = 1e-3,
        tau: float = 0.01,
        gamma: float = 0.99,
        batch_size: int = 32,
        warmup: int = 10_000,
        init_std: float = 0.05,
        rng: np.random.Generator | None = None,
    ):
        hidden = tuple(int(h) for h in hidden)
        acts = ["leaky_relu"] * len(hidden)
        self.actor = Mlp([state_dim, *hidden, action_dim], acts + ["tanh"], rng, init_std)
        self.critic = Mlp([state_dim + action_dim, *hidden, 1], acts + ["linear"], rng, init_std)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = AdamState(self.actor.params(), lr=actor_lr)
        self.critic_opt = AdamState(self.critic.params(), lr=critic_lr)
        self.tau = tau
        self.gamma = gamma
        self.batch_size = batch_size
        self.warmup = warmup
        self.training_enabled = True
        self.exploration_enabled = True

    @property
    def state_dim(self) -> int:
        return self.actor.sizes[0]

    @property
    def action_dim(self) -> int:
        return self.actor.sizes[-1]

    def act(self, state) -> float:
        y, _ = self.actor.forward(state)
        return float(np.clip(y[0], -1.0, 1.0))

    def select_action(
        self, state, step: int, es: ExplorationState, rng: np.random.Generator
    ) -> float:
        """Exploration-overlaid policy action; pure noise during warm-up."""
        if self.exploration_enabled and step < self.warmup:
            return float(np.clip(es.noise(step, rng), -1.0, 1.0))
        a = self.act(state)
        if self.exploration_enabled:
            a += es.noise(step, rng)
        return float(np.clip(a, -1.0, 1.0))

    def update(self, batch) -> tuple[float, float]:
        """One gradient step on critic and actor from a sampled batch.

        Critic regresses onto the bootstrapped target values, the actor
        follows the critic's action gradient, then both targets take a soft
        step toward their live networks.
        """
        s, a, r, s2 = batch
        n = s.shape[0]
        a2, _ = self.target_actor.forward(s2)
        q2, _ = self.target_critic.forward(np.hstack([s2, a2]))
        y = r + self.gamma * q2

        q, cache = self.critic.forward(np.hstack([s, a]))
        err = q - y
        critic_loss = float(np.mean(err * err))
        grads, _ = self.critic.backward(cache, 2.0 * err / n)
        self.critic.apply_gradients(self.critic_opt, grads)

        a_pred, actor_cache = self.actor.forward(s)
        q_pred, critic_cache = self.critic.forward(np.hstack([s, a_pred]))
        actor_objective = float(np.mean(q_pred))
        d_input = self.critic.backward_input(critic_cache, np.full((n, 1), -1.0 / n))
        d_action = d_input[:, self.state_dim:]
        actor_grads, _ = self.actor.backward(actor_cache, d_action)
        self.actor.apply_gradients(self.actor_opt, actor_grads)

        soft_update(self.target_actor, self.actor, self.tau)
        soft_update(self.target_critic, self.critic, self.tau)
        return critic_loss, actor_objective


ddpg_update = DdpgAgent.update


# -- persistence ---------------------------------------------------------------

def _net_blob(net: Mlp) -> bytes:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def _write_net_file(path: FsPath, net: Mlp, target: Mlp, kind: str, steps: int, stamp: str):
    header = {
        "v": 1,
        "kind": kind,
        "sizes": net.sizes,
        "activations": net.activations,
        "steps": steps,
        "saved": stamp,
        "targets": True,
    }
    hb = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(_net_blob(net))
        fh.write(_net_blob(target))


def _layer_config(net: Mlp) -> str:
    return "-".join(str(s) for s in net.sizes)


def save_model(agent: DdpgAgent, out_dir, steps: int, now: datetime | None = None) -> list[FsPath]:
    """Write the four model files and return their paths (actor/critic x acnet/txt)."""
    out_dir = FsPath(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    now = now or datetime.now()
    stamp = now.strftime("%Y%m%d_%H%M%S")
    files: list[FsPath] = []
    for kind, net, target in (
        ("actor", agent.actor, agent.target_actor),
        ("critic", agent.critic, agent.target_critic),
    ):
        base = f"{_layer_config(net)}_{stamp}_{steps}_{kind}"
        bin_path = out_dir / f"{base}{MODEL_SUFFIX}"
        _write_net_file(bin_path, net, target, kind, steps, stamp)
        txt_path = out_dir / f"{base}.txt"
        txt_path.write_text(
            "\n".join(
                [
                    f"kind: {kind}",
                    f"layers: {_layer_config(net)}",
                    f"activations: {', '.join(net.activations)}",
                    f"parameters: {sum(p.size for p in net.params())}",
                    f"steps: {steps}",
                    f"saved: {stamp}",
                ]
            )
            + "\n",
            encoding="utf-8",
        )
        files.extend([bin_path, txt_path])
    return files


def _read_net_file(path) -> tuple[dict, Mlp, Mlp]:
    blob = FsPath(path).read_bytes()
    if len(blob) < 8:
        raise TruncatedFile(f"{path}: too short")
    if blob[:4] != MODEL_MAGIC:
        raise VersionMismatch(f"{path}: bad magic {blob[:4]!r}")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + hlen:
        raise TruncatedFile(f"{path}: truncated header")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFile(f"{path}: bad header: {exc}") from exc
    if header.get("v") != 1:
        raise VersionMismatch(f"{path}: unsupported model version {header.get('v')}")
    sizes = [int(s) for s in header["sizes"]]
    acts = list(header["activations"])
    n_params = sum(a * b + b for a, b in zip(sizes, sizes[1:]))
    n_copies = 2 if header.get("targets", False) else 1
    payload = blob[8 + hlen :]
    if len(payload) != 4 * n_params * n_copies:
        raise TruncatedFile(
            f"{path}: payload holds {len(payload)} bytes, expected {4 * n_params * n_copies}"
        )

    def read_net(offset: int) -> tuple[Mlp, int]:
        net = Mlp(sizes, acts)
        for l, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
            w_bytes = 4 * n_in * n_out
            net.weights[l] = (
                np.frombuffer(payload, dtype="<f4", count=n_in * n_out, offset=offset)
                .reshape(n_in, n_out)
                .copy()
            )
            offset += w_bytes
            net.biases[l] = np.frombuffer(payload, dtype="<f4", count=n_out, offset=offset).copy()
            offset += 4 * n_out
        net.invalidate_cache()
        return net, offset

    live, offset = read_net(0)
    if n_copies == 2:
        target, _ = read_net(offset)
    else:
        target = live.copy()
    return header, live, target


def load_model(actor_file, critic_file, **agent_kwargs) -> DdpgAgent:
    """Rebuild an agent from a matched pair of model files.

    The critic must consume the actor's state and action widths; anything
    else (including swapped files) is a ShapeMismatch. Optimizer state is not
    persisted, so training resumes with fresh Adam moments.
    """
    _, actor, target_actor = _read_net_file(actor_file)
    _, critic, target_critic = _read_net_file(critic_file)
    if critic.sizes[0] != actor.sizes[0] + actor.sizes[-1] or critic.sizes[-1] != 1:
        raise ShapeMismatch(
            f"critic input width {critic.sizes[0]} does not match "
            f"state {actor.sizes[0]} + action {actor.sizes[-1]}"
        )
    agent = DdpgAgent(
        state_dim=actor.sizes[0],
        action_dim=actor.sizes[-1],
        hidden=tuple(actor.sizes[1:-1]),
        **agent_kwargs,
    )
    agent.actor = actor
    agent.target_actor = target_actor
    agent.critic = critic
    agent.target_critic = target_critic
    agent.actor_opt = AdamState(actor.params(), lr=agent.actor_opt.lr)
    agent.critic_opt = AdamState(critic.params(), lr=agent.critic_opt.lr)
    return agent
