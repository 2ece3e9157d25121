"""Simulation engine: run configuration, vehicle placement, the tick loop, statistics.

One shared agent learns from every vehicle's transitions. Each tick senses,
acts, moves, and rewards every vehicle in id order against the world state
captured at the start of the tick, then performs at most one gradient update.
Vehicles that reach their goal immediately receive a fresh one so runs are
open-ended.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, fields
from math import fsum

import numpy as np

from .ddpg import DdpgAgent, ExplorationState, ReplayBuffer, reward_speed_limit
from .dynamics import (
    DEFAULT_HORIZON,
    MotionState,
    PathFrame,
    PhysConstants,
    VehiclePose,
    VehicleProps,
    accel_lat,
    read_sensors,
    step_motion,
    velocity,
)
from .errors import (
    ConfigError,
    NoData,
    NumericFault,
    PlacementFailed,
    TooManyVehicles,
)
from .graph import RoadGraph
from .routing import Path, PathMode, dijkstra


@dataclass
class RunConfig:
    """Everything a reproducible run needs; defaults mirror the reference experiment."""

    seed: int = 0
    # physics
    sampling_period: float = 0.1
    gravity: float = 9.81
    static_friction: float = 0.8
    # vehicles (each range is drawn uniformly per vehicle, rounded to 3 decimals)
    n_vehicles: int = 1
    mass_range: tuple[float, float] = (900.0, 1600.0)
    force_range: tuple[float, float] = (3000.0, 8000.0)
    friction_range: tuple[float, float] = (30.0, 70.0)
    brake_factor_range: tuple[float, float] = (0.8, 1.2)
    length_range: tuple[float, float] = (3.5, 5.0)
    path_mode: str = "fastest"
    # agent
    hidden_sizes: tuple[int, ...] = (400, 300, 200)
    actor_lr: float = 5e-5
    critic_lr: float = 1e-3
    target_rate: float = 0.01
    batch_size: int = 32
    buffer_capacity: int = 10_000
    warmup_steps: int = 10_000
    gamma: float = 0.99
    weight_init_std: float = 0.05
    # exploration
    noise_coeff1: float = 0.29
    noise_coeff2: float = 0.7
    noise_scale: float = 0.05
    noise_scale_is_variance: bool = True
    epsilon_init: float = 0.99995
    epsilon_decay: float = 0.99995
    epsilon_decay_start: int = 40_000
    # reward and state
    reward_width: float = 2.5
    state_scale: float = 10.0
    sensor_horizon: float = DEFAULT_HORIZON
    # bookkeeping
    stats_window: int = 1_000
    tick_hz: float = 0.0
    broadcast_interval: int = 10
    log_interval: int = 100
    checkpoint_interval: int = 10_000

    def noise_sigma(self) -> float:
        return math.sqrt(self.noise_scale) if self.noise_scale_is_variance else self.noise_scale

    def mode(self) -> PathMode:
        try:
            return PathMode(self.path_mode)
        except ValueError as exc:
            raise ConfigError(f"unknown path_mode {self.path_mode!r}") from exc

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        text = open(path, "r", encoding="utf-8").read()
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                return cls.from_dict(json.loads(text))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            raw = raw.strip()
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[key.strip()] = value
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.n_vehicles < 1:
            raise ConfigError("n_vehicles must be at least 1")
        for name in ("mass_range", "force_range", "friction_range",
                     "brake_factor_range", "length_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: lower bound {lo} above upper bound {hi}")
        if self.sampling_period <= 0:
            raise ConfigError("sampling_period must be positive")
        self.mode()


@dataclass
class VehicleSettings:
    """Placement inputs: fleet size plus the five property ranges."""

    n_vehicles: int
    mass_range: tuple[float, float]
    force_range: tuple[float, float]
    friction_range: tuple[float, float]
    brake_factor_range: tuple[float, float]
    length_range: tuple[float, float]

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "VehicleSettings":
        return cls(cfg.n_vehicles, cfg.mass_range, cfg.force_range,
                   cfg.friction_range, cfg.brake_factor_range, cfg.length_range)


class StatRings:
    """The five bounded per-vehicle series plus the windowed-reward extrema."""

    def __init__(self, window: int = 1000):
        self.window = window
        self.actions: deque[float] = deque(maxlen=window)
        self.velocities: deque[float] = deque(maxlen=window)
        self.accel_long: deque[float] = deque(maxlen=window)
        self.accel_lat: deque[float] = deque(maxlen=window)
        self.rewards: deque[float] = deque(maxlen=window)
        self.min_ever: float | None = None
        self.max_ever: float | None = None
        self._reward_sum = 0.0
        self._pushes_since_sync = 0

    def push(self, action: float, v: float, a_long: float, a_lat: float, reward: float):
        if len(self.rewards) == self.window:
            self._reward_sum -= self.rewards[0]
        self.actions.append(action)
        self.velocities.append(v)
        self.accel_long.append(a_long)
        self.accel_lat.append(a_lat)
        self.rewards.append(reward)
        self._reward_sum += reward
        self._pushes_since_sync += 1
        if self._pushes_since_sync >= self.window:
            self._reward_sum = fsum(self.rewards)  # shed float drift
            self._pushes_since_sync = 0
        avg = self._reward_sum / len(self.rewards)
        if self.min_ever is None or avg < self.min_ever:
            self.min_ever = avg
        if self.max_ever is None or avg > self.max_ever:
            self.max_ever = avg

    def reward_avg(self) -> float:
        if not self.rewards:
            raise NoData("no rewards recorded yet")
        return self._reward_sum / len(self.rewards)

    def color_fraction(self) -> float:
        """Position of the current window average within [min_ever, max_ever]."""
        avg = self.reward_avg()
        if self.max_ever == self.min_ever:
            return 0.5
        return (avg - self.min_ever) / (self.max_ever - self.min_ever)

    def as_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "velocities": list(self.velocities),
            "accel_long": list(self.accel_long),
            "accel_lat": list(self.accel_lat),
            "rewards": list(self.rewards),
        }


def color_fraction(rings: StatRings) -> float:
    return rings.color_fraction()


@dataclass
class VehicleRuntime:
    vid: int
    props: VehicleProps
    start: int
    goal: int
    path: Path
    frame: PathFrame
    motion: MotionState
    stats: StatRings
    prev_v: float = 0.0

    @property
    def arc(self) -> float:
        return self.motion.p


def place_vehicles(
    g: RoadGraph,
    settings: VehicleSettings,
    mode: PathMode,
    rng: np.random.Generator,
    stats_window: int = 1000,
) -> list[VehicleRuntime]:
    """Draw properties and routed start/goal pairs for the whole fleet.

    Start nodes come uniformly from nodes not yet hosting a vehicle, goals
    uniformly from everything else; both are redrawn until a path exists.
    """
    n_v, n_n = settings.n_vehicles, g.n_nodes
    if n_v > n_n:
        raise TooManyVehicles(f"{n_v} vehicles but only {n_n} nodes")
    if n_n < 2:
        raise PlacementFailed("graph has no distinct start/goal pair")
    free = list(range(n_n))
    vehicles = []
    for vid in range(n_v):
        props = VehicleProps(
            m=_draw(rng, settings.mass_range),
            f_max=_draw(rng, settings.force_range),
            eta=_draw(rng, settings.friction_range),
            tau=_draw(rng, settings.brake_factor_range),
            length=_draw(rng, settings.length_range),
        )
        placed = False
        for _ in range(10 * n_n):
            start = free[int(rng.integers(len(free)))]
            goal = _other_node(rng, n_n, start)
            path = dijkstra(g, start, goal, mode)
            if path is not None:
                free.remove(start)
                vehicles.append(
                    VehicleRuntime(
                        vid=vid,
                        props=props,
                        start=start,
                        goal=goal,
                        path=path,
                        frame=PathFrame(g, path),
                        motion=MotionState(0.0, 0.0),
                        stats=StatRings(stats_window),
                    )
                )
                placed = True
                break
        if not placed:
            raise PlacementFailed(f"no routable start/goal for vehicle {vid}")
    return vehicles


def _draw(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    if lo == hi:
        return lo
    return round(float(rng.uniform(lo, hi)), 3)


def _other_node(rng: np.random.Generator, n_nodes: int, excluded: int) -> int:
    j = int(rng.integers(n_nodes - 1))
    return j if j < excluded else j + 1


class World:
    """Owner of all mutable simulation state; stepped by tick()."""

    def __init__(self, graph: RoadGraph, cfg: RunConfig, agent: DdpgAgent | None = None):
        cfg.validate()
        self.graph = graph
        self.cfg = cfg
        self.constants = PhysConstants(cfg.sampling_period, cfg.gravity, cfg.static_friction)
        seq = np.random.SeedSequence(cfg.seed)
        place_seq, weight_seq, noise_seq, replay_seq = seq.spawn(4)
        self.noise_rng = np.random.default_rng(noise_seq)
        self.replay_rng = np.random.default_rng(replay_seq)
        self.agent = agent if agent is not None else DdpgAgent(
            state_dim=2,
            hidden=cfg.hidden_sizes,
            actor_lr=cfg.actor_lr,
            critic_lr=cfg.critic_lr,
            tau=cfg.target_rate,
            gamma=cfg.gamma,
            batch_size=cfg.batch_size,
            warmup=cfg.warmup_steps,
            init_std=cfg.weight_init_std,
            rng=np.random.default_rng(weight_seq),
        )
        self.replay = ReplayBuffer(cfg.buffer_capacity, self.agent.state_dim,
                                   self.agent.action_dim)
        self.exploration = ExplorationState(
            c1=cfg.noise_coeff1,
            c2=cfg.noise_coeff2,
            sigma=cfg.noise_sigma(),
            epsilon_init=cfg.epsilon_init,
            decay=cfg.epsilon_decay,
            decay_start=cfg.epsilon_decay_start,
        )
        self._placement_rng = np.random.default_rng(place_seq)
        self.vehicles = place_vehicles(
            graph, VehicleSettings.from_config(cfg), cfg.mode(),
            self._placement_rng, cfg.stats_window,
        )
        self.intersections = graph.intersections()
        self.tick_no = 0
        self.last_critic_loss = math.nan
        self.last_actor_objective = math.nan

    # -- control -----------------------------------------------------------

    def set_flags(self, training: bool | None = None, exploration: bool | None = None):
        if training is not None:
            self.agent.training_enabled = bool(training)
        if exploration is not None:
            self.agent.exploration_enabled = bool(exploration)

    # -- stepping ----------------------------------------------------------

    def state_vector(self, v: float, v_limit: float) -> np.ndarray:
        return np.array([v, v_limit]) / self.cfg.state_scale

    def tick(self) -> None:
        cfg, k = self.cfg, self.constants
        poses = [VehiclePose(veh.frame, veh.arc, veh.props.length) for veh in self.vehicles]
        step = self.tick_no
        for veh in self.vehicles:
            others = [p for i, p in enumerate(poses) if i != veh.vid]
            sensors = read_sensors(
                veh.frame, veh.arc, velocity(veh.motion, k), veh.prev_v,
                veh.props.length, others, self.intersections, k, cfg.sensor_horizon,
            )
            state = self.state_vector(sensors.v, sensors.v_limit)
            action = self.agent.select_action(state, step, self.exploration, self.noise_rng)
            try:
                veh.motion = step_motion(veh.motion, action, veh.props, k)
            except NumericFault as exc:
                raise NumericFault(f"vehicle {veh.vid}: {exc}") from exc
            veh.prev_v = sensors.v
            while veh.motion.p >= veh.frame.length:
                self._assign_next_goal(veh)
            v2 = velocity(veh.motion, k)
            a_long = (v2 - sensors.v) / k.t
            a_lat = accel_lat(v2, veh.frame, veh.arc)
            v_limit2 = veh.frame.v_limit_at(veh.arc)
            reward = reward_speed_limit(v2, v_limit2, cfg.reward_width)
            state2 = self.state_vector(v2, v_limit2)
            self.replay.push(state, action, reward, state2)
            veh.stats.push(action, v2, a_long, a_lat, reward)
        if (
            self.agent.training_enabled
            and step >= self.agent.warmup
            and self.replay.size >= self.agent.batch_size
        ):
            batch = self.replay.sample(self.agent.batch_size, self.replay_rng)
            self.last_critic_loss, self.last_actor_objective = self.agent.update(batch)
        self.tick_no += 1

    def _assign_next_goal(self, veh: VehicleRuntime) -> None:
        """Route onward from the reached goal, carrying overshoot and velocity."""
        g, rng = self.graph, self._placement_rng
        start = veh.path.nodes[-1]
        for _ in range(10 * g.n_nodes):
            goal = _other_node(rng, g.n_nodes, start)
            path = dijkstra(g, start, goal, self.cfg.mode())
            if path is not None:
                leftover = veh.motion.p - veh.frame.length
                v = velocity(veh.motion, self.constants)
                veh.start, veh.goal, veh.path = start, goal, path
                veh.frame = PathFrame(g, path)
                veh.motion = MotionState(leftover, leftover - v * self.constants.t)
                return
        raise PlacementFailed(f"vehicle {veh.vid}: no onward goal from node {start}")

    # -- reporting -----------------------------------------------------------

    def windowed_reward(self) -> float:
        """Mean of the per-vehicle window averages (nan before any reward)."""
        avgs = []
        for veh in self.vehicles:
            try:
                avgs.append(veh.stats.reward_avg())
            except NoData:
                pass
        return fsum(avgs) / len(avgs) if avgs else math.nan

    def snapshot(self, selected: int | None = None) -> dict:
        k = self.constants
        vehicles = []
        for veh in self.vehicles:
            lat, lon, heading = veh.frame.point_at(veh.arc)
            try:
                frac = veh.stats.color_fraction()
            except NoData:
                frac = 0.5
            vehicles.append(
                {
                    "id": veh.vid,
                    "lat": lat,
                    "lon": lon,
                    "heading_deg": heading,
                    "color_frac": frac,
                    "v": velocity(veh.motion, k),
                    "v_limit": veh.frame.v_limit_at(veh.arc),
                }
            )
        snap = {
            "v": 1,
            "tick": self.tick_no,
            "vehicles": vehicles,
            "flags": {
                "training": self.agent.training_enabled,
                "exploration": self.agent.exploration_enabled,
            },
            "selected": None,
        }
        if selected is not None and 0 <= selected < len(self.vehicles):
            snap["selected"] = {"id": selected, **self.vehicles[selected].stats.as_dict()}
        return snap
