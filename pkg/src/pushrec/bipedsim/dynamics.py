"""Articulated-body dynamics kernels for planar kinematic trees.

All kernels are numba-compiled and operate on the packed arrays of a
:class:`~pushrec.bipedsim.model.DynTree`.  Conventions (frames, planar motion
and force vectors) are documented in :mod:`pushrec.bipedsim.planar`; the
formulas here are the same ones, inlined.

Forward dynamics is the O(n) articulated-body recursion.  Inverse dynamics
(recursive Newton-Euler) is provided for the test oracles, which rebuild the
joint-space mass matrix by unit-acceleration probing and cross-check the
accelerations returned here.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .model import JT_PX, JT_REV, DynTree

# ground contact: penalty normal spring-damper plus an anchored tangential
# spring-damper clamped to the friction cone (anchor drags when sliding)


@njit(cache=True)
def _joint_frame(jtype, q, ox, oz):
    """Pose (theta, px, pz) of a joint's child frame in its parent frame."""
    if jtype == JT_REV:
        return q, ox, oz
    elif jtype == JT_PX:
        return 0.0, ox + q, oz
    else:
        return 0.0, ox, oz + q


@njit(cache=True)
def _xmot(th, px, pz, out):
    """Motion transform for a child frame at (px, pz) rotated by th."""
    c = math.cos(th)
    s = math.sin(th)
    out[0, 0] = 1.0
    out[0, 1] = 0.0
    out[0, 2] = 0.0
    out[1, 0] = s * px - c * pz
    out[1, 1] = c
    out[1, 2] = s
    out[2, 0] = c * px + s * pz
    out[2, 1] = -s
    out[2, 2] = c


@njit(cache=True)
def _spatial_inertia(m, ic, cx, cz, out):
    out[0, 0] = ic + m * (cx * cx + cz * cz)
    out[0, 1] = -m * cz
    out[0, 2] = m * cx
    out[1, 0] = -m * cz
    out[1, 1] = m
    out[1, 2] = 0.0
    out[2, 0] = m * cx
    out[2, 1] = 0.0
    out[2, 2] = m


@njit(cache=True)
def _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose):
    """Per-body transforms, body-frame velocities and world poses.

    pose[i] = (theta, px, pz) of body frame i in world coordinates.
    vb[i] = planar motion vector of body i in its own frame.
    """
    nb = parent.shape[0]
    for i in range(nb):
        th, px, pz = _joint_frame(jtype[i], q[i], joint_off[i, 0], joint_off[i, 1])
        _xmot(th, px, pz, Xup[i])
        p = parent[i]
        if p < 0:
            pth, ppx, ppz = 0.0, 0.0, 0.0
            vw, vx, vz = 0.0, 0.0, 0.0
        else:
            pth, ppx, ppz = pose[p, 0], pose[p, 1], pose[p, 2]
            vw, vx, vz = vb[p, 0], vb[p, 1], vb[p, 2]
        # world pose
        c = math.cos(pth)
        s = math.sin(pth)
        pose[i, 0] = pth + th
        pose[i, 1] = ppx + c * px - s * pz
        pose[i, 2] = ppz + s * px + c * pz
        # velocity across the joint plus transformed parent velocity
        X = Xup[i]
        vb[i, 0] = X[0, 0] * vw
        vb[i, 1] = X[1, 0] * vw + X[1, 1] * vx + X[1, 2] * vz
        vb[i, 2] = X[2, 0] * vw + X[2, 1] * vx + X[2, 2] * vz
        qd = v[i]
        if jtype[i] == JT_REV:
            vb[i, 0] += qd
        elif jtype[i] == JT_PX:
            vb[i, 1] += qd
        else:
            vb[i, 2] += qd


@njit(cache=True)
def _fext_to_body(pose_i, fext_i, out):
    """World-aligned spatial force about the body origin -> body coordinates."""
    c = math.cos(pose_i[0])
    s = math.sin(pose_i[0])
    out[0] = fext_i[0]
    out[1] = c * fext_i[1] + s * fext_i[2]
    out[2] = -s * fext_i[1] + c * fext_i[2]


@njit(cache=True)
def _aba(parent, jtype, joint_off, mass, inertia, com, q, v, tau, fext, g):
    """Articulated-body forward dynamics; returns generalized accelerations.

    fext[i] is the net external planar force on body i, expressed in world
    axes about the body-frame origin.
    """
    nb = parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose)

    IA = np.empty((nb, 3, 3))
    pA = np.empty((nb, 3))
    cvec = np.empty((nb, 3))
    fb = np.empty(3)
    for i in range(nb):
        _spatial_inertia(mass[i], inertia[i], com[i, 0], com[i, 1], IA[i])
        w = vb[i, 0]
        vx = vb[i, 1]
        vz = vb[i, 2]
        # c = v x vJ, with vJ = S qdot
        qd = v[i]
        if jtype[i] == JT_REV:
            cvec[i, 0] = 0.0
            cvec[i, 1] = vz * qd
            cvec[i, 2] = -vx * qd
        elif jtype[i] == JT_PX:
            cvec[i, 0] = 0.0
            cvec[i, 1] = 0.0
            cvec[i, 2] = w * qd
        else:
            cvec[i, 0] = 0.0
            cvec[i, 1] = -w * qd
            cvec[i, 2] = 0.0
        # momentum h = I v
        h0 = IA[i, 0, 0] * w + IA[i, 0, 1] * vx + IA[i, 0, 2] * vz
        h1 = IA[i, 1, 0] * w + IA[i, 1, 1] * vx
        h2 = IA[i, 2, 0] * w + IA[i, 2, 2] * vz
        # bias force crf(v) @ h = (-vz*h1 + vx*h2, -w*h2, w*h1)
        _fext_to_body(pose[i], fext[i], fb)
        pA[i, 0] = -vz * h1 + vx * h2 - fb[0]
        pA[i, 1] = -w * h2 - fb[1]
        pA[i, 2] = w * h1 - fb[2]

    U = np.empty((nb, 3))
    D = np.empty(nb)
    uu = np.empty(nb)
    Ia = np.empty((3, 3))
    pa = np.empty(3)
    tmp = np.empty((3, 3))
    for i in range(nb - 1, -1, -1):
        if jtype[i] == JT_REV:
            s_idx = 0
        elif jtype[i] == JT_PX:
            s_idx = 1
        else:
            s_idx = 2
        for r in range(3):
            U[i, r] = IA[i][r, s_idx]
        D[i] = U[i, s_idx]
        uu[i] = tau[i] - pA[i][s_idx]
        p = parent[i]
        if p >= 0:
            invD = 1.0 / D[i]
            for r in range(3):
                for col in range(3):
                    Ia[r, col] = IA[i][r, col] - U[i, r] * invD * U[i, col]
            coef = uu[i] * invD
            for r in range(3):
                pa[r] = pA[i][r] \
                    + Ia[r, 0] * cvec[i, 0] + Ia[r, 1] * cvec[i, 1] + Ia[r, 2] * cvec[i, 2] \
                    + U[i, r] * coef
            X = Xup[i]
            # IA[p] += X^T Ia X ; pA[p] += X^T pa
            for r in range(3):
                for col in range(3):
                    tmp[r, col] = Ia[r, 0] * X[0, col] + Ia[r, 1] * X[1, col] + Ia[r, 2] * X[2, col]
            for r in range(3):
                for col in range(3):
                    IA[p][r, col] += X[0, r] * tmp[0, col] + X[1, r] * tmp[1, col] + X[2, r] * tmp[2, col]
            for r in range(3):
                pA[p][r] += X[0, r] * pa[0] + X[1, r] * pa[1] + X[2, r] * pa[2]

    a = np.empty((nb, 3))
    qdd = np.empty(nb)
    ap = np.empty(3)
    for i in range(nb):
        p = parent[i]
        X = Xup[i]
        if p < 0:
            aw, ax, az = 0.0, 0.0, g
        else:
            aw, ax, az = a[p, 0], a[p, 1], a[p, 2]
        ap[0] = X[0, 0] * aw + cvec[i, 0]
        ap[1] = X[1, 0] * aw + X[1, 1] * ax + X[1, 2] * az + cvec[i, 1]
        ap[2] = X[2, 0] * aw + X[2, 1] * ax + X[2, 2] * az + cvec[i, 2]
        if jtype[i] == JT_REV:
            s_idx = 0
        elif jtype[i] == JT_PX:
            s_idx = 1
        else:
            s_idx = 2
        qdd[i] = (uu[i] - (U[i, 0] * ap[0] + U[i, 1] * ap[1] + U[i, 2] * ap[2])) / D[i]
        a[i, 0] = ap[0]
        a[i, 1] = ap[1]
        a[i, 2] = ap[2]
        a[i, s_idx] += qdd[i]
    return qdd


@njit(cache=True)
def _rnea(parent, jtype, joint_off, mass, inertia, com, q, v, qdd, fext, g):
    """Recursive Newton-Euler inverse dynamics; returns generalized forces."""
    nb = parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose)

    ab = np.empty((nb, 3))
    f = np.empty((nb, 3))
    I = np.empty((3, 3))
    fb = np.empty(3)
    for i in range(nb):
        p = parent[i]
        X = Xup[i]
        if p < 0:
            aw, ax, az = 0.0, 0.0, g
        else:
            aw, ax, az = ab[p, 0], ab[p, 1], ab[p, 2]
        ab[i, 0] = X[0, 0] * aw
        ab[i, 1] = X[1, 0] * aw + X[1, 1] * ax + X[1, 2] * az
        ab[i, 2] = X[2, 0] * aw + X[2, 1] * ax + X[2, 2] * az
        w = vb[i, 0]
        vx = vb[i, 1]
        vz = vb[i, 2]
        qd = v[i]
        if jtype[i] == JT_REV:
            ab[i, 0] += qdd[i]
            ab[i, 1] += vz * qd
            ab[i, 2] += -vx * qd
        elif jtype[i] == JT_PX:
            ab[i, 1] += qdd[i]
            ab[i, 2] += w * qd
        else:
            ab[i, 2] += qdd[i]
            ab[i, 1] += -w * qd
        _spatial_inertia(mass[i], inertia[i], com[i, 0], com[i, 1], I)
        h0 = I[0, 0] * w + I[0, 1] * vx + I[0, 2] * vz
        h1 = I[1, 0] * w + I[1, 1] * vx
        h2 = I[2, 0] * w + I[2, 2] * vz
        _fext_to_body(pose[i], fext[i], fb)
        f[i, 0] = I[0, 0] * ab[i, 0] + I[0, 1] * ab[i, 1] + I[0, 2] * ab[i, 2] \
            + (-vz * h1 + vx * h2) - fb[0]
        f[i, 1] = I[1, 0] * ab[i, 0] + I[1, 1] * ab[i, 1] + I[1, 2] * ab[i, 2] \
            + (-w * h2) - fb[1]
        f[i, 2] = I[2, 0] * ab[i, 0] + I[2, 1] * ab[i, 1] + I[2, 2] * ab[i, 2] \
            + (w * h1) - fb[2]

    tau = np.zeros(nb)
    for i in range(nb - 1, -1, -1):
        if jtype[i] == JT_REV:
            tau[i] = f[i, 0]
        elif jtype[i] == JT_PX:
            tau[i] = f[i, 1]
        else:
            tau[i] = f[i, 2]
        p = parent[i]
        if p >= 0:
            X = Xup[i]
            for r in range(3):
                f[p, r] += X[0, r] * f[i, 0] + X[1, r] * f[i, 1] + X[2, r] * f[i, 2]
    return tau


@njit(cache=True)
def _point_states(pose, vb, contact_body, contact_off, out_pos, out_vel):
    """World positions and velocities of the contact points."""
    nc = contact_body.shape[0]
    for k in range(nc):
        b = contact_body[k]
        th = pose[b, 0]
        c = math.cos(th)
        s = math.sin(th)
        ox = contact_off[k, 0]
        oz = contact_off[k, 1]
        rx = c * ox - s * oz
        rz = s * ox + c * oz
        out_pos[k, 0] = pose[b, 1] + rx
        out_pos[k, 1] = pose[b, 2] + rz
        w = vb[b, 0]
        vox = c * vb[b, 1] - s * vb[b, 2]
        voz = s * vb[b, 1] + c * vb[b, 2]
        out_vel[k, 0] = vox - w * rz
        out_vel[k, 1] = voz + w * rx


@njit(cache=True)
def _contact_pass(pose, vb, contact_body, contact_off,
                  kn, dn, kt, dt_fric, mu,
                  flags, anchors, fxs, fzs, fext):
    """Penalty contact forces; mutates the contact state and accumulates fext."""
    nc = contact_body.shape[0]
    pos = np.empty((nc, 2))
    vel = np.empty((nc, 2))
    _point_states(pose, vb, contact_body, contact_off, pos, vel)
    for k in range(nc):
        px = pos[k, 0]
        pz = pos[k, 1]
        pen = -pz
        if pen <= 0.0:
            flags[k] = 0.0
            anchors[k] = px
            fxs[k] = 0.0
            fzs[k] = 0.0
            continue
        fz = kn * pen - dn * vel[k, 1]
        if fz < 0.0:
            fz = 0.0
        if flags[k] == 0.0:
            anchors[k] = px
        ft = -kt * (px - anchors[k]) - dt_fric * vel[k, 0]
        lim = mu * fz
        if ft > lim:
            ft = lim
            anchors[k] = px + ft / kt
        elif ft < -lim:
            ft = -lim
            anchors[k] = px + ft / kt
        flags[k] = 1.0
        fxs[k] = ft
        fzs[k] = fz
        b = contact_body[k]
        rx = px - pose[b, 1]
        rz = pz - pose[b, 2]
        fext[b, 0] += rx * fz - rz * ft
        fext[b, 1] += ft
        fext[b, 2] += fz


@njit(cache=True)
def _push_pass(pose, events, t, fext):
    """Accumulate scheduled bell-profile push forces active at time t."""
    ne = events.shape[0]
    for e in range(ne):
        t0 = events[e, 0]
        dur = events[e, 1]
        if t < t0 or t >= t0 + dur:
            continue
        mag = events[e, 2] * math.sin(math.pi * (t - t0) / dur) ** 2
        fx = mag * events[e, 3]
        fz = mag * events[e, 4]
        b = int(events[e, 5])
        th = pose[b, 0]
        c = math.cos(th)
        s = math.sin(th)
        rx = c * events[e, 6] - s * events[e, 7]
        rz = s * events[e, 6] + c * events[e, 7]
        fext[b, 0] += rx * fz - rz * fx
        fext[b, 1] += fx
        fext[b, 2] += fz


@njit(cache=True)
def _stop_torques(q, v, q_lower, q_upper, stop_kp, stop_kd, tau):
    nd = q.shape[0]
    for i in range(nd):
        if q[i] > q_upper[i]:
            tau[i] += -stop_kp * (q[i] - q_upper[i]) - stop_kd * v[i]
        elif q[i] < q_lower[i]:
            tau[i] += -stop_kp * (q[i] - q_lower[i]) - stop_kd * v[i]


@njit(cache=True)
def _substep(parent, jtype, joint_off, mass, inertia, com,
             q_lower, q_upper, stop_kp, stop_kd,
             contact_body, contact_off, kn, dn, kt, dt_fric, mu, g,
             t, q, v, u, act_idx, events, point_forces,
             flags, anchors, fxs, fzs, dt):
    """One semi-implicit Euler physics step; mutates q, v and contact state.

    point_forces rows are (body, offx, offz, fx, fz): constant external point
    forces held over the step (used by the public single-step API).
    """
    nb = parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose)

    fext = np.zeros((nb, 3))
    _contact_pass(pose, vb, contact_body, contact_off, kn, dn, kt, dt_fric, mu,
                  flags, anchors, fxs, fzs, fext)
    _push_pass(pose, events, t, fext)
    for r in range(point_forces.shape[0]):
        b = int(point_forces[r, 0])
        th = pose[b, 0]
        c = math.cos(th)
        s = math.sin(th)
        rx = c * point_forces[r, 1] - s * point_forces[r, 2]
        rz = s * point_forces[r, 1] + c * point_forces[r, 2]
        fx = point_forces[r, 3]
        fz = point_forces[r, 4]
        fext[b, 0] += rx * fz - rz * fx
        fext[b, 1] += fx
        fext[b, 2] += fz

    tau = np.zeros(nb)
    for j in range(act_idx.shape[0]):
        tau[act_idx[j]] = u[j]
    _stop_torques(q, v, q_lower, q_upper, stop_kp, stop_kd, tau)

    qdd = _aba(parent, jtype, joint_off, mass, inertia, com, q, v, tau, fext, g)
    for i in range(nb):
        v[i] += dt * qdd[i]
        q[i] += dt * v[i]
    return t + dt


@njit(cache=True)
def _pd_ticks(parent, jtype, joint_off, mass, inertia, com,
              q_lower, q_upper, stop_kp, stop_kd,
              contact_body, contact_off, kn, dn, kt, dt_fric, mu, g,
              t, q, v, u_out, act_idx, kp, kd, torque_limit,
              target_q, target_qd, events,
              flags, anchors, fxs, fzs, dt, n_sub, n_ticks, vel_accum):
    """PD controller ticks: per tick, compute torques once and hold them for
    n_sub physics substeps.

    vel_accum accumulates (sum vx, sum vz, sum pitch rate, count) over the
    substeps for the averaged reward terms.
    """
    na = act_idx.shape[0]
    point_forces = np.zeros((0, 5))
    for _tick in range(n_ticks):
        for j in range(na):
            i = act_idx[j]
            raw = kp[j] * (target_q[j] - q[i]) + kd[j] * (target_qd[j] - v[i])
            if raw > torque_limit[j]:
                raw = torque_limit[j]
            elif raw < -torque_limit[j]:
                raw = -torque_limit[j]
            u_out[j] = raw
        for _k in range(n_sub):
            t = _substep(parent, jtype, joint_off, mass, inertia, com,
                         q_lower, q_upper, stop_kp, stop_kd,
                         contact_body, contact_off, kn, dn, kt, dt_fric, mu, g,
                         t, q, v, u_out, act_idx, events, point_forces,
                         flags, anchors, fxs, fzs, dt)
            vel_accum[0] += v[0]
            vel_accum[1] += v[1]
            vel_accum[2] += v[2]
            vel_accum[3] += 1.0
    return t


@njit(cache=True)
def _energy(parent, jtype, joint_off, mass, inertia, com, q, v, g):
    """Total mechanical energy (kinetic + gravitational potential)."""
    nb = parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose)
    I = np.empty((3, 3))
    ke = 0.0
    pe = 0.0
    for i in range(nb):
        _spatial_inertia(mass[i], inertia[i], com[i, 0], com[i, 1], I)
        w = vb[i, 0]
        vx = vb[i, 1]
        vz = vb[i, 2]
        ke += 0.5 * (w * (I[0, 0] * w + I[0, 1] * vx + I[0, 2] * vz)
                     + vx * (I[1, 0] * w + I[1, 1] * vx)
                     + vz * (I[2, 0] * w + I[2, 2] * vz))
        th = pose[i, 0]
        cz = pose[i, 2] + math.sin(th) * com[i, 0] + math.cos(th) * com[i, 1]
        pe += mass[i] * g * cz
    return ke + pe


@njit(cache=True)
def _com_state(parent, jtype, joint_off, mass, com, q, v):
    """Whole-body center of mass position and velocity in world coordinates."""
    nb = parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(parent, jtype, joint_off, q, v, Xup, vb, pose)
    total = 0.0
    cx = 0.0
    cz = 0.0
    cvx = 0.0
    cvz = 0.0
    for i in range(nb):
        m = mass[i]
        if m == 0.0:
            continue
        th = pose[i, 0]
        c = math.cos(th)
        s = math.sin(th)
        rx = c * com[i, 0] - s * com[i, 1]
        rz = s * com[i, 0] + c * com[i, 1]
        px = pose[i, 1] + rx
        pz = pose[i, 2] + rz
        w = vb[i, 0]
        vox = c * vb[i, 1] - s * vb[i, 2]
        voz = s * vb[i, 1] + c * vb[i, 2]
        total += m
        cx += m * px
        cz += m * pz
        cvx += m * (vox - w * rz)
        cvz += m * (voz + w * rx)
    return cx / total, cz / total, cvx / total, cvz / total


def forward_dynamics(tree: DynTree, q, v, tau, fext=None) -> np.ndarray:
    """Generalized accelerations via the articulated-body algorithm."""
    nb = tree.parent.shape[0]
    if fext is None:
        fext = np.zeros((nb, 3))
    return _aba(tree.parent, tree.jtype, tree.joint_off, tree.mass, tree.inertia,
                tree.com, np.asarray(q, float), np.asarray(v, float),
                np.asarray(tau, float), np.asarray(fext, float), tree.gravity)


def inverse_dynamics(tree: DynTree, q, v, qdd, fext=None, gravity=None) -> np.ndarray:
    """Generalized forces via recursive Newton-Euler (test oracle support)."""
    nb = tree.parent.shape[0]
    if fext is None:
        fext = np.zeros((nb, 3))
    g = tree.gravity if gravity is None else gravity
    return _rnea(tree.parent, tree.jtype, tree.joint_off, tree.mass, tree.inertia,
                 tree.com, np.asarray(q, float), np.asarray(v, float),
                 np.asarray(qdd, float), np.asarray(fext, float), g)


def fk_world_poses(tree: DynTree, q) -> np.ndarray:
    """World (theta, x, z) of every body frame."""
    nb = tree.parent.shape[0]
    Xup = np.empty((nb, 3, 3))
    vb = np.empty((nb, 3))
    pose = np.empty((nb, 3))
    _kinematics(tree.parent, tree.jtype, tree.joint_off, np.asarray(q, float),
                np.zeros(nb), Xup, vb, pose)
    return pose


def total_energy(tree: DynTree, q, v) -> float:
    return float(_energy(tree.parent, tree.jtype, tree.joint_off, tree.mass,
                         tree.inertia, tree.com, np.asarray(q, float),
                         np.asarray(v, float), tree.gravity))


def com_state(tree: DynTree, q, v) -> tuple[float, float, float, float]:
    """(com_x, com_z, com_vx, com_vz)."""
    return _com_state(tree.parent, tree.jtype, tree.joint_off, tree.mass,
                      tree.com, np.asarray(q, float), np.asarray(v, float))
