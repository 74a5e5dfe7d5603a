"""Interactive playground: a live episode served over a websocket.

The simulation loop runs on its own thread at real-time pace (policy rate
times a speed factor) and exchanges immutable messages with the socket side:
snapshots out through a bounded deque, commands in through a queue.  The
client renders exclusively from snapshot frames; it never simulates.

Frame types: hello, snapshot, command, ack, error, bye.
"""

from __future__ import annotations

import asyncio
import collections
import json
import logging
import math
import queue
import threading
import time

import numpy as np

from ..bipedsim import BipedSim, ControlTarget, N_JOINTS, Observer, integrate_action
from ..bipedsim.model import application_point
from ..disturbance import PushEvent, pack_events
from ..envloop import (PolicySnapshot, _make_sample, make_references,
                       sample_initial_state)
from ..features import extract_features
from ..policynet import forward_actor
from ..reward import RewardComputer, total_reward
from ..termination import TerminationChecker
from .config import RunConfig

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
MAX_PUSH_N = 2000.0
MAX_PUSH_S = 2.0


class LiveSession:
    """One live episode advanced step by step; continues past termination so
    the outcome stays visible, but flags the verdict cause."""

    def __init__(self, cfg: RunConfig, snapshot: PolicySnapshot, seed: int = 0,
                 deterministic: bool = True):
        self.cfg = cfg
        self.snapshot = snapshot
        self.deterministic = deterministic
        self.sim = BipedSim(cfg.model)
        self.refs = make_references(self.sim, cfg.episode)
        self.observer = Observer(cfg.model, cfg.episode.dt_policy)
        self.rewarder = RewardComputer(cfg.model, cfg.reward)
        self.checker = TerminationChecker(cfg.termination, cfg.model)
        self.seed = seed
        self._episode = 0
        self.reset()

    def reset(self) -> None:
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence([self.seed, self._episode])))
        self._episode += 1
        self.rng = rng
        self.state, self.ref = sample_initial_state(
            self.sim, self.refs, self.cfg.episode, self.cfg.termination, rng)
        self.observer.reset()
        self.rewarder.reset()
        self.checker.reset()
        feats = extract_features(self.sim, self.state)
        self.checker.check(_make_sample(self.sim, self.state, feats, self.ref))
        self.prev_target = ControlTarget(q=self.ref.pd_target.copy(),
                                         qd=np.zeros(N_JOINTS))
        self.events: list[PushEvent] = []
        self.verdict_cause = "none"
        self.last_costs = None
        self.last_reward = 0.0

    def add_push(self, angle: float, magnitude: float, duration: float,
                 point: str) -> PushEvent:
        ev = PushEvent(start=self.state.t + self.cfg.episode.dt_physics,
                       duration=duration, magnitude=magnitude, angle=angle,
                       point=point)
        self.events.append(ev)
        return ev

    def step(self) -> dict:
        cfg = self.cfg
        obs = self.observer.observe(self.state, self.prev_target, self.rng)
        o_norm = self.snapshot.stats.normalize(obs.vec)
        mu = forward_actor(self.snapshot.params, o_norm)
        action = mu if self.deterministic else \
            mu + self.snapshot.params.sigma * self.rng.standard_normal(len(mu))
        target = integrate_action(self.prev_target,
                                  action * np.asarray(cfg.model.velocity_limit),
                                  cfg.episode.dt_policy, cfg.model)
        packed = pack_events(self.events,
                             lambda name: application_point(cfg.model, name))
        vel_accum = np.zeros(4)
        self.state = self.sim.pd_tick(
            self.state, target, packed, cfg.episode.dt_physics,
            cfg.episode.substeps_per_pd, cfg.episode.pd_per_policy, vel_accum)
        self.prev_target = target

        feats = extract_features(self.sim, self.state)
        from ..reward import StepAverages
        averages = StepAverages(
            odom_velocity=np.array([vel_accum[0] / max(vel_accum[3], 1), 0.0, 0.0]),
            pitch_rate=vel_accum[2] / max(vel_accum[3], 1))
        costs = self.rewarder.compute_costs(self.state, feats, averages,
                                            self.ref.frame)
        reward = total_reward(costs, cfg.reward)
        verdict = self.checker.check(_make_sample(self.sim, self.state, feats,
                                                  self.ref))
        if not verdict.alive and self.verdict_cause == "none":
            self.verdict_cause = verdict.cause
        self.last_costs = costs
        self.last_reward = reward
        # drop expired pushes
        self.events = [e for e in self.events
                       if e.start + e.duration > self.state.t]
        return self._snapshot_dict(feats, costs, reward)

    def _snapshot_dict(self, feats, costs, reward) -> dict:
        cfg = self.cfg.model
        poses = self.sim.body_poses(self.state)
        links = []

        def seg(name, body, a, b):
            th, x, z = poses[body]
            c, s = math.cos(th), math.sin(th)
            links.append({
                "name": name,
                "x1": x + c * a[0] - s * a[1], "z1": z + s * a[0] + c * a[1],
                "x2": x + c * b[0] - s * b[1], "z2": z + s * b[0] + c * b[1]})

        seg("torso", 2, (0.0, 0.0), (0.0, cfg.torso_length))
        seg("l_thigh", 3, (0.0, 0.0), (0.0, -cfg.thigh_length))
        seg("l_shank", 4, (0.0, 0.0), (0.0, -cfg.shank_length))
        seg("l_foot", 5, (-cfg.heel_offset, -cfg.ankle_height),
            (cfg.toe_offset, -cfg.ankle_height))
        seg("r_thigh", 6, (0.0, 0.0), (0.0, -cfg.thigh_length))
        seg("r_shank", 7, (0.0, 0.0), (0.0, -cfg.shank_length))
        seg("r_foot", 8, (-cfg.heel_offset, -cfg.ankle_height),
            (cfg.toe_offset, -cfg.ankle_height))

        contacts = []
        for k in range(4):
            body = self.sim.tree.contact_body[k]
            th, x, z = poses[body]
            ox, oz = self.sim.tree.contact_off[k]
            contacts.append({
                "x": x + math.cos(th) * ox - math.sin(th) * oz,
                "z": z + math.sin(th) * ox + math.cos(th) * oz,
                "fx": float(self.state.contact_fx[k]),
                "fz": float(self.state.contact_fz[k]),
                "active": bool(self.state.contact_flag[k] > 0.0)})

        pushes = []
        for ev in self.events:
            if ev.start <= self.state.t <= ev.start + ev.duration:
                progress = (self.state.t - ev.start) / ev.duration
            else:
                progress = 0.0
            body, off = application_point(cfg, ev.point)
            th, x, z = poses[body]
            pushes.append({
                "angle": ev.angle, "magnitude": ev.magnitude,
                "progress": progress, "point": ev.point,
                "x": x + math.cos(th) * off[0] - math.sin(th) * off[1],
                "z": z + math.sin(th) * off[0] + math.cos(th) * off[1]})

        from ..reward import COST_NAMES, rbf_kernel
        cost_map = dict(zip(COST_NAMES, costs.as_array()))
        return {
            "type": "snapshot",
            "t": self.state.t,
            "reward": reward,
            "costs": {k: float(v) for k, v in cost_map.items()},
            "kernels": {k: rbf_kernel(float(v), self.cfg.reward.cutoffs[k])
                        for k, v in cost_map.items()},
            "verdict": self.verdict_cause,
            "base": {"x": float(self.state.q[0]), "z": float(self.state.q[1]),
                     "pitch": float(self.state.q[2])},
            "links": links,
            "contacts": contacts,
            "markers": {
                "cp": [float(feats.cp[0]), float(feats.cp[1])],
                "zmp": None if feats.zmp_point is None else
                       [float(feats.zmp_point[0]), float(feats.zmp_point[1])],
                "support": [float(feats.support[0]), float(feats.support[1])]},
            "pushes": pushes,
        }


class PlaygroundServer:
    def __init__(self, cfg: RunConfig, snapshot: PolicySnapshot, *,
                 checkpoint_hash: str = "", seed: int = 0):
        self.session = LiveSession(cfg, snapshot, seed=seed)
        self.checkpoint_hash = checkpoint_hash
        self.commands: queue.Queue = queue.Queue()
        self.snapshots: collections.deque = collections.deque(maxlen=4)
        self.paused = False
        self.speed = 1.0
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._clients: set = set()
        self._acks: collections.deque = collections.deque(maxlen=32)

    # -- simulation thread --------------------------------------------------

    def _sim_loop(self) -> None:
        dt = self.session.cfg.episode.dt_policy
        next_t = time.perf_counter()
        while not self._stop.is_set():
            self._drain_commands()
            if self.paused:
                time.sleep(0.01)
                next_t = time.perf_counter()
                continue
            snap = self.session.step()
            snap["paused"] = self.paused
            snap["speed"] = self.speed
            self.snapshots.append(snap)
            next_t += dt / self.speed
            delay = next_t - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            else:
                next_t = time.perf_counter()

    def _drain_commands(self) -> None:
        while True:
            try:
                cmd = self.commands.get_nowait()
            except queue.Empty:
                return
            action = cmd.get("action")
            try:
                if action == "push":
                    if self.paused:
                        raise ValueError("push rejected: session is paused")
                    magnitude = float(cmd["magnitude"])
                    duration = float(cmd.get("duration", 0.4))
                    angle = float(cmd["angle"])
                    point = str(cmd.get("point", "pelvis"))
                    if not 0.0 <= magnitude <= MAX_PUSH_N:
                        raise ValueError(f"magnitude outside [0, {MAX_PUSH_N}] N")
                    if not 0.0 < duration <= MAX_PUSH_S:
                        raise ValueError(f"duration outside (0, {MAX_PUSH_S}] s")
                    application_point(self.session.cfg.model, point)
                    self.session.add_push(angle, magnitude, duration, point)
                elif action == "reset":
                    self.session.reset()
                elif action == "pause":
                    self.paused = True
                elif action == "resume":
                    self.paused = False
                elif action == "speed":
                    factor = float(cmd["factor"])
                    if not 0.05 <= factor <= 4.0:
                        raise ValueError("speed factor outside [0.05, 4]")
                    self.speed = factor
                else:
                    raise ValueError(f"unknown action {action!r}")
                self._acks.append({"type": "ack", "action": action})
            except (KeyError, TypeError, ValueError) as exc:
                self._acks.append({"type": "error",
                                   "message": f"{action}: {exc}"})

    # -- websocket side -----------------------------------------------------

    def hello_frame(self) -> dict:
        cfg = self.session.cfg
        return {
            "type": "hello", "version": PROTOCOL_VERSION,
            "model": "planar-biped",
            "total_mass": cfg.model.total_mass,
            "checkpoint_hash": self.checkpoint_hash,
            "dt_policy": cfg.episode.dt_policy,
            "push_limits": {"max_magnitude": MAX_PUSH_N,
                            "max_duration": MAX_PUSH_S},
            "application_points": sorted(cfg.model.application_points),
        }

    async def _handler(self, ws) -> None:
        self._clients.add(ws)
        try:
            await ws.send(json.dumps(self.hello_frame()))
            async for raw in ws:
                try:
                    cmd = json.loads(raw)
                    if not isinstance(cmd, dict) or cmd.get("type") != "command":
                        raise ValueError("frames must be command objects")
                except (json.JSONDecodeError, ValueError) as exc:
                    await ws.send(json.dumps({"type": "error",
                                              "message": str(exc)}))
                    continue
                if cmd.get("action") == "bye":
                    await ws.send(json.dumps({"type": "bye"}))
                    break
                self.commands.put(cmd)
        finally:
            self._clients.discard(ws)

    async def _broadcaster(self) -> None:
        last_sent = None
        while not self._stop.is_set():
            sent_something = False
            if self.snapshots:
                snap = self.snapshots[-1]
                if snap is not last_sent:
                    last_sent = snap
                    data = json.dumps(snap)
                    for ws in list(self._clients):
                        try:
                            await ws.send(data)
                        except Exception:
                            self._clients.discard(ws)
                    sent_something = True
            while self._acks:
                frame = json.dumps(self._acks.popleft())
                for ws in list(self._clients):
                    try:
                        await ws.send(frame)
                    except Exception:
                        self._clients.discard(ws)
            await asyncio.sleep(0.002 if sent_something else 0.004)

    async def serve(self, host: str = "127.0.0.1", port: int = 8765,
                    ready: asyncio.Event | None = None,
                    max_seconds: float | None = None) -> None:
        import websockets

        self._thread = threading.Thread(target=self._sim_loop, daemon=True)
        self._thread.start()
        broadcaster = asyncio.create_task(self._broadcaster())
        try:
            async with websockets.serve(self._handler, host, port,
                                        max_queue=8):
                log.info("playground listening on ws://%s:%d", host, port)
                if ready is not None:
                    ready.set()
                if max_seconds is None:
                    await asyncio.Future()
                else:
                    await asyncio.sleep(max_seconds)
        finally:
            self._stop.set()
            broadcaster.cancel()
            if self._thread is not None:
                self._thread.join(timeout=2.0)


def serve_playground(cfg: RunConfig, checkpoint_path=None, *,
                     host: str = "127.0.0.1", port: int = 8765,
                     seed: int = 0, max_seconds: float | None = None) -> None:
    """Blocking entry point used by the CLI."""
    from .evalrun import load_snapshot, pd_hold_snapshot

    if checkpoint_path is None:
        snapshot = pd_hold_snapshot(cfg)
        ck_hash = "pd-hold"
    else:
        snapshot, meta = load_snapshot(checkpoint_path)
        ck_hash = meta["config_hash"]
    server = PlaygroundServer(cfg, snapshot, checkpoint_hash=ck_hash, seed=seed)
    asyncio.run(server.serve(host=host, port=port, max_seconds=max_seconds))
