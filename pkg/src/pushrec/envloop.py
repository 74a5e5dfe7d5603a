"""Episode orchestration: references, initialization, and the control cascade.

Each policy step (25 Hz) integrates the commanded joint velocities into
position targets, runs four 100 Hz PD ticks of ten 1 ms physics substeps
each (with scheduled pushes applied inside), then computes features, reward
and the termination verdict from the resulting state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bipedsim import (BipedSim, ControlTarget, ModelConfig, N_JOINTS, Observer,
                       SimState, integrate_action)
from .bipedsim.model import ConfigError, application_point
from .disturbance import PushEvent, pack_events, schedule_pushes
from .features import extract_features, relative_foot_pose
from .policynet import NormStats, PolicyParams, forward_actor, forward_critic, log_prob
from .ppo import Rollout
from .reward import (CostVector, ReferenceFrameData, RewardComputer, RewardConfig,
                     StepAverages, total_reward)
from .termination import Sample, TerminationChecker, TerminationConfig, Verdict


@dataclass
class EpisodeConfig:
    horizon: float = 60.0
    dt_physics: float = 1e-3
    substeps_per_pd: int = 10
    pd_per_policy: int = 4
    # push schedule
    pushes_enabled: bool = True
    push_period: float = 3.0
    push_jitter: float = 2.0
    push_magnitude: float = 800.0 * 60.0 / 135.0   # full-scale 800 N, mass-rescaled
    push_duration: float = 0.4
    push_point: str = "pelvis"
    # initial-state noise
    noise_joint_pos: float = 0.03
    noise_joint_vel: float = 0.10
    noise_base_pos: float = 0.01
    noise_base_pitch: float = 0.02
    noise_base_vel: float = 0.05
    noise_base_pitch_rate: float = 0.10
    init_max_tries: int = 100
    # reference set
    references: tuple[str, ...] = ("standing", "squat", "shifted")
    pelvis_height: float = 0.95
    squat_depth: float = 0.12
    stance_shift: float = 0.06

    @property
    def dt_pd(self) -> float:
        return self.dt_physics * self.substeps_per_pd

    @property
    def dt_policy(self) -> float:
        return self.dt_pd * self.pd_per_policy

    @property
    def max_steps(self) -> int:
        steps = self.horizon / self.dt_policy
        return int(round(steps))

    def validate(self) -> None:
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be positive")
        for name in ("noise_joint_pos", "noise_joint_vel", "noise_base_pos",
                     "noise_base_pitch", "noise_base_vel", "noise_base_pitch_rate"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"{name} must be >= 0")
        if not self.references:
            raise ConfigError("reference set must be non-empty")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["references"] = list(self.references)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        d = dict(d)
        if "references" in d:
            d["references"] = tuple(d["references"])
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ReferenceTrajectory:
    """Static reference pose with its precomputed tracked features.

    ``pd_target`` holds gravity-compensated joint targets: the positions the
    PD controllers must aim at so that the loaded equilibrium configuration
    coincides with ``q``.  Pure position tracking of ``q`` itself would sag
    under gravity and park the CoM away from the intended balance point.
    """

    label: str
    q: np.ndarray                   # (9,) full configuration
    frame: ReferenceFrameData
    pd_target: np.ndarray           # (6,) joint-space PD setpoints

    def state(self) -> SimState:
        return SimState(q=self.q.copy())

    def odom(self, t: float) -> np.ndarray:
        return np.array([self.q[0], 0.0, 0.0])


def _leg_ik(cfg: ModelConfig, dx: float, dz_down: float) -> tuple[float, float, float]:
    """Hip/knee/ankle angles placing the ankle at (dx, -dz_down) from the hip
    with a flat foot; knee-forward branch."""
    l1, l2 = cfg.thigh_length, cfg.shank_length
    reach = math.hypot(dx, dz_down)
    if reach >= l1 + l2 or reach <= abs(l1 - l2):
        raise ConfigError(
            f"leg IK target out of reach: dist {reach:.3f} vs [{abs(l1 - l2):.3f}, "
            f"{l1 + l2:.3f}]")
    alpha = math.atan2(dx, dz_down)
    gamma_hip = math.acos((l1 * l1 + reach * reach - l2 * l2) / (2.0 * l1 * reach))
    gamma_knee = math.acos((l2 * l2 + reach * reach - l1 * l1) / (2.0 * l2 * reach))
    theta_thigh = alpha + gamma_hip
    theta_shank = alpha - gamma_knee
    q_hip = theta_thigh
    q_knee = theta_shank - theta_thigh
    q_ankle = -theta_shank
    return q_hip, q_knee, q_ankle


def _reference_frame(sim: BipedSim, q: np.ndarray) -> ReferenceFrameData:
    from .features import foot_pose_from_sim

    state = SimState(q=q.copy())
    foot_r = foot_pose_from_sim(sim, state, "right")
    foot_l = foot_pose_from_sim(sim, state, "left")
    p_rel, q_rel = relative_foot_pose(foot_r, foot_l)
    com_x, _, _, _ = sim.com_state(state)
    return ReferenceFrameData(
        joint_pos=q[3:].copy(),
        odom_velocity=np.zeros(3),
        cp_rel=np.array([com_x - q[0], 0.0]),
        foot_rel_pos=p_rel,
        foot_rel_quat=q_rel,
        pitch_rate=0.0,
        contact_r=True, contact_l=True)


def _balanced_pose(sim: BipedSim, height: float, shifts: tuple[float, float],
                   ) -> np.ndarray:
    """IK pose at the given pelvis height with the ankles placed under the CoM."""
    from .bipedsim import dynamics as dyn

    cfg = sim.config
    dz = height - cfg.ankle_height
    dx = 0.0
    q = np.zeros(9)
    for _ in range(8):
        q[:] = 0.0
        q[1] = height
        q[3:6] = _leg_ik(cfg, dx + shifts[0], dz)
        q[6:9] = _leg_ik(cfg, dx + shifts[1], dz)
        com_x, _, _, _ = dyn.com_state(sim.tree, q, np.zeros(9))
        if abs(com_x - dx) < 1e-10:
            break
        dx = com_x
    # re-center so the spawned odometry origin is x = 0
    q[0] = -dx
    q[3:6] = _leg_ik(cfg, dx + shifts[0], dz)
    q[6:9] = _leg_ik(cfg, dx + shifts[1], dz)
    return q


def _sensor_point_positions(sim: BipedSim, q: np.ndarray) -> np.ndarray:
    """World (x, z) of the four foot sensor points."""
    from .bipedsim import dynamics as dyn

    poses = dyn.fk_world_poses(sim.tree, q)
    out = np.zeros((4, 2))
    for k in range(4):
        b = sim.tree.contact_body[k]
        th, x, z = poses[b]
        ox, oz = sim.tree.contact_off[k]
        out[k] = (x + math.cos(th) * ox - math.sin(th) * oz,
                  z + math.sin(th) * ox + math.cos(th) * oz)
    return out


def _static_pd_targets(sim: BipedSim, q_des: np.ndarray) -> np.ndarray:
    """Gravity-compensated PD setpoints for a static pose.

    Solves the static equilibrium at q_des assuming the weight splits evenly
    between the feet with each foot's center of pressure under the CoM, then
    offsets the position targets so the pure PD law produces exactly those
    torques at the desired configuration.
    """
    from .bipedsim import dynamics as dyn

    cfg = sim.config
    tree = sim.tree
    weight = cfg.weight
    com_x, _, _, _ = dyn.com_state(tree, q_des, np.zeros(9))
    pts = _sensor_point_positions(sim, q_des)
    fz = np.zeros(4)
    for heel, toe in ((0, 1), (2, 3)):
        xh, xt = pts[heel, 0], pts[toe, 0]
        alpha = min(1.0, max(0.0, (com_x - xh) / (xt - xh)))
        fz[toe] = 0.5 * weight * alpha
        fz[heel] = 0.5 * weight * (1.0 - alpha)

    tau = dyn.inverse_dynamics(tree, q_des, np.zeros(9), np.zeros(9))
    h = 1e-6
    for k in range(4):
        jac = np.zeros((2, 9))
        for j in range(9):
            qp = q_des.copy()
            qp[j] += h
            qm = q_des.copy()
            qm[j] -= h
            jac[:, j] = (_sensor_point_positions(sim, qp)[k]
                         - _sensor_point_positions(sim, qm)[k]) / (2.0 * h)
        tau -= jac.T @ np.array([0.0, fz[k]])
    if np.max(np.abs(tau[:3])) > 0.02 * weight:
        raise ConfigError(
            f"static equilibrium infeasible for the reference pose "
            f"(base residual {tau[:3]})")
    return np.clip(q_des[3:] + tau[3:] / np.asarray(cfg.kp),
                   np.asarray(cfg.joint_lower), np.asarray(cfg.joint_upper))


def make_references(sim: BipedSim, ep_cfg: EpisodeConfig) -> list[ReferenceTrajectory]:
    """Procedural static references: standing, squat, shifted stance."""
    out = []
    for label in ep_cfg.references:
        if label == "standing":
            height = ep_cfg.pelvis_height
            shifts = (0.0, 0.0)
        elif label == "squat":
            height = ep_cfg.pelvis_height - ep_cfg.squat_depth
            shifts = (0.0, 0.0)
        elif label == "shifted":
            height = ep_cfg.pelvis_height - 0.02
            shifts = (ep_cfg.stance_shift, -ep_cfg.stance_shift)
        else:
            raise ConfigError(f"unknown reference label {label!r}")
        q = _balanced_pose(sim, height, shifts)
        out.append(ReferenceTrajectory(
            label=label, q=q, frame=_reference_frame(sim, q),
            pd_target=_static_pd_targets(sim, q)))
    return out


def sample_initial_state(sim: BipedSim, references: list[ReferenceTrajectory],
                         ep_cfg: EpisodeConfig, term_cfg: TerminationConfig,
                         rng: np.random.Generator,
                         ) -> tuple[SimState, ReferenceTrajectory]:
    """Uniform reference choice plus Gaussian noise, rejection-sampled against
    the instantaneous termination conditions."""
    checker = TerminationChecker(term_cfg, sim.config)
    for _ in range(ep_cfg.init_max_tries):
        ref = references[rng.integers(len(references))]
        state = ref.state()
        state.q[0] += ep_cfg.noise_base_pos * rng.standard_normal()
        state.q[1] += ep_cfg.noise_base_pos * rng.standard_normal()
        state.q[2] += ep_cfg.noise_base_pitch * rng.standard_normal()
        state.q[3:] += ep_cfg.noise_joint_pos * rng.standard_normal(N_JOINTS)
        state.v[0:2] = ep_cfg.noise_base_vel * rng.standard_normal(2)
        state.v[2] = ep_cfg.noise_base_pitch_rate * rng.standard_normal()
        state.v[3:] = ep_cfg.noise_joint_vel * rng.standard_normal(N_JOINTS)
        # keep spawned feet at or above the ground
        poses = sim.body_poses(state)
        low = min(_contact_point_heights(sim, poses))
        if low < 0.0:
            state.q[1] -= low
        feats = extract_features(sim, state)
        checker.reset()
        verdict = checker.check(_make_sample(sim, state, feats, ref))
        if verdict.alive:
            return state, ref
    raise ConfigError(
        "could not sample a valid initial state; initial noise too large for "
        "the termination conditions")


def _contact_point_heights(sim: BipedSim, poses: np.ndarray) -> list[float]:
    heights = []
    tree = sim.tree
    for k in range(len(tree.contact_body)):
        b = tree.contact_body[k]
        th, x, z = poses[b]
        ox, oz = tree.contact_off[k]
        heights.append(z + math.sin(th) * ox + math.cos(th) * oz)
    return heights


def _make_sample(sim: BipedSim, state: SimState, feats, ref: ReferenceTrajectory,
                 ) -> Sample:
    return Sample(
        t=state.t,
        pelvis_height=float(state.q[1]),
        roll=0.0,
        pitch=float(state.q[2]),
        hull_dist=feats.hull_dist,
        joint_pos=state.joint_pos.copy(),
        joint_vel=state.joint_vel.copy(),
        odom=feats.odom.as_array(),
        odom_ref=ref.odom(state.t),
        tracking_error=float(np.linalg.norm(state.joint_pos - ref.frame.joint_pos)),
        power=sim.power(state),
    )


@dataclass
class PolicySnapshot:
    """Immutable parameter + normalization snapshot a worker rolls out with."""

    params: PolicyParams
    stats: NormStats


@dataclass
class StepRecord:
    """One policy step as written to the trajectory log."""

    t: float
    reward: float
    costs: CostVector
    verdict: Verdict
    action: np.ndarray
    mu: np.ndarray
    state: SimState


def run_episode(sim: BipedSim, snapshot: PolicySnapshot, ep_cfg: EpisodeConfig,
                reward_cfg: RewardConfig, term_cfg: TerminationConfig,
                rng: np.random.Generator, *,
                deterministic: bool = False,
                push_events: list[PushEvent] | None = None,
                max_steps: int | None = None,
                start_state: SimState | None = None,
                reference: ReferenceTrajectory | None = None,
                references: list[ReferenceTrajectory] | None = None,
                step_callback=None,
                worker_id: int = 0, fragment_index: int = 0,
                episode_seed: tuple = ()) -> Rollout:
    """Roll one episode (or fragment) under a frozen policy snapshot."""
    ep_cfg.validate()
    cfg = sim.config
    params, stats = snapshot.params, snapshot.stats
    if references is None:
        references = make_references(sim, ep_cfg)
    if start_state is not None:
        state = start_state.copy()
        ref = reference or references[0]
    else:
        state, ref = sample_initial_state(sim, references, ep_cfg, term_cfg, rng)

    if push_events is None:
        if ep_cfg.pushes_enabled:
            push_events = schedule_pushes(
                ep_cfg.horizon, ep_cfg.push_period, ep_cfg.push_jitter,
                ep_cfg.push_magnitude, ep_cfg.push_duration, rng,
                point=ep_cfg.push_point)
        else:
            push_events = []
    events = pack_events(push_events, lambda name: application_point(cfg, name))

    observer = Observer(cfg, ep_cfg.dt_policy)
    observer.reset()
    rewarder = RewardComputer(cfg, reward_cfg)
    checker = TerminationChecker(term_cfg, cfg)
    checker.reset()
    feats0 = extract_features(sim, state)
    checker.check(_make_sample(sim, state, feats0, ref))  # seed history at t0

    prev_target = ControlTarget(q=ref.pd_target.copy(), qd=np.zeros(N_JOINTS))
    vlim = np.asarray(cfg.velocity_limit)
    horizon_steps = ep_cfg.max_steps
    steps = horizon_steps if max_steps is None else min(max_steps, horizon_steps)

    obs_raw, obs_norm_l, actions, mus, logps, rewards, values, costs_l = \
        [], [], [], [], [], [], [], []
    terminated = False
    cause = "none"
    abnormal = False
    n_sub_per_step = ep_cfg.pd_per_policy * ep_cfg.substeps_per_pd

    obs = observer.observe(state, prev_target, rng)
    step = 0
    while step < steps:
        o_norm = stats.normalize(obs.vec)
        mu = forward_actor(params, o_norm)
        if deterministic:
            action = mu.copy()
        else:
            action = mu + params.sigma * rng.standard_normal(params.act_dim)
        lp = float(log_prob(mu, params.sigma, action))
        value = float(forward_critic(params, o_norm))

        target = integrate_action(prev_target, action * vlim, ep_cfg.dt_policy, cfg)
        vel_accum = np.zeros(4)
        state = sim.pd_tick(state, target, events, ep_cfg.dt_physics,
                            ep_cfg.substeps_per_pd, ep_cfg.pd_per_policy,
                            vel_accum)
        assert int(vel_accum[3]) == n_sub_per_step

        if state.finite_check() is not None:
            abnormal = True
            break

        averages = StepAverages(
            odom_velocity=np.array([vel_accum[0] / vel_accum[3], 0.0, 0.0]),
            pitch_rate=vel_accum[2] / vel_accum[3])
        feats = extract_features(sim, state)
        costs = rewarder.compute_costs(state, feats, averages, ref.frame)
        r = total_reward(costs, reward_cfg)
        verdict = checker.check(_make_sample(sim, state, feats, ref))

        obs_raw.append(obs.vec)
        obs_norm_l.append(o_norm)
        actions.append(action)
        mus.append(mu)
        logps.append(lp)
        rewards.append(r)
        values.append(value)
        costs_l.append(costs.as_array())
        if step_callback is not None:
            step_callback(StepRecord(t=state.t, reward=r, costs=costs,
                                     verdict=verdict, action=action, mu=mu,
                                     state=state))
        prev_target = target
        step += 1
        if not verdict.alive:
            terminated = True
            cause = verdict.cause
            break
        obs = observer.observe(state, prev_target, rng)

    complete = terminated or (step >= horizon_steps)
    if terminated or abnormal:
        bootstrap = 0.0
    else:
        # `obs` already holds the observation of the final state (computed at
        # the end of the last loop iteration)
        bootstrap = float(forward_critic(params, stats.normalize(obs.vec)))

    n = len(rewards)
    return Rollout(
        obs_raw=np.array(obs_raw).reshape(n, -1),
        obs_norm=np.array(obs_norm_l).reshape(n, -1),
        actions=np.array(actions).reshape(n, -1),
        mu=np.array(mus).reshape(n, -1),
        log_probs=np.array(logps),
        rewards=np.array(rewards),
        values=np.array(values),
        costs=np.array(costs_l).reshape(n, -1),
        terminated=terminated,
        cause=cause,
        bootstrap_value=bootstrap,
        complete=complete,
        worker_id=worker_id,
        fragment_index=fragment_index,
        episode_seed=episode_seed,
        abnormal=abnormal,
    )
