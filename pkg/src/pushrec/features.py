"""Kinematic and dynamic balance features shared by reward and termination.

Everything here works on a generic 3D pose representation (position plus unit
quaternion, ground plane x-y, gravity along -z).  The planar simulator embeds
into it: the sagittal plane maps to x-z, feet get fixed lateral offsets of
half the hip width, and pitch becomes a rotation about the y axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bipedsim import BipedSim, SimState
from .bipedsim.model import L_FOOT, R_FOOT


# -- quaternions (w, x, y, z) -------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    w, x, y, z = q
    u = np.array([x, y, z])
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def quat_from_pitch(theta: float) -> np.ndarray:
    """Embedding of a sagittal-plane rotation (CCW x toward z) as a quaternion."""
    half = -0.5 * theta
    return np.array([math.cos(half), 0.0, math.sin(half), 0.0])


def rotation_log(q: np.ndarray) -> np.ndarray:
    """SO(3) log map: rotation vector (axis * angle) of a unit quaternion."""
    w, x, y, z = q
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    vn = math.sqrt(x * x + y * y + z * z)
    if vn < 1e-15:
        return np.zeros(3)
    angle = 2.0 * math.atan2(vn, w)
    return np.array([x, y, z]) * (angle / vn)


def rotation_error(qa: np.ndarray, qb: np.ndarray) -> float:
    """||log(R_a R_b^T)||: geodesic angle between two orientations."""
    return float(np.linalg.norm(rotation_log(quat_mul(qa, quat_conj(qb)))))


# -- domain types -------------------------------------------------------------

@dataclass
class FootPose:
    """World pose of one foot plus its footprint polygon in the foot frame."""

    position: np.ndarray          # (3,)
    orientation: np.ndarray       # unit quaternion (4,)
    footprint: np.ndarray         # (n, 3) vertices in foot frame, n >= 2

    def __post_init__(self):
        if abs(np.linalg.norm(self.orientation) - 1.0) > 1e-9:
            raise ValueError("foot orientation must be a unit quaternion")
        if len(self.footprint) < 2:
            raise ValueError("footprint needs at least two vertices")

    def ground_vertices(self) -> np.ndarray:
        """Footprint vertices projected onto the ground plane, world frame (n, 2)."""
        world = self.position + np.array(
            [quat_rotate(self.orientation, v) for v in self.footprint])
        return world[:, :2]


@dataclass
class OdometryPose:
    """Planar base position and yaw, the slowly drifting unobservable frame."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.yaw))):
            raise ValueError("non-finite odometry pose")
        # wrap yaw to (-pi, pi]
        yaw = math.fmod(self.yaw, 2.0 * math.pi)
        if yaw > math.pi:
            yaw -= 2.0 * math.pi
        elif yaw <= -math.pi:
            yaw += 2.0 * math.pi
        object.__setattr__(self, "yaw", yaw)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw])


# -- balance points -----------------------------------------------------------

def capture_point(com_xy, com_vxy, com_height: float, g: float = 9.81) -> np.ndarray:
    """Instantaneous capture point of the linear inverted pendulum model."""
    if com_height <= 0.0:
        raise ValueError(f"CoM height must be positive, got {com_height}")
    return np.asarray(com_xy, float) + np.asarray(com_vxy, float) * math.sqrt(com_height / g)


def zmp(contact_points, force_epsilon: float = 1e-6) -> np.ndarray | None:
    """Zero-moment point of a flat-ground contact set; None when airborne.

    contact_points: iterable of (position (>=2 components), force (>=3, F_z last
    or index 2)).  Only the vertical force component enters the flat-ground
    moment balance.
    """
    num = np.zeros(2)
    den = 0.0
    for pos, force in contact_points:
        fz = float(force[2]) if len(force) >= 3 else float(force[1])
        num += np.asarray(pos[:2], float) * fz
        den += fz
    if den <= force_epsilon:
        return None
    return num / den


def _convex_hull_tuples(points) -> list[tuple[float, float]]:
    """Monotone-chain convex hull, CCW, on (x, y) tuples; degenerate inputs allowed."""
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if not hull:  # all collinear: keep the extremes
        return [pts[0], pts[-1]]
    return hull


def _convex_hull(points: np.ndarray) -> np.ndarray:
    return np.array(_convex_hull_tuples(np.asarray(points, float)))


def _polygon_centroid(points) -> np.ndarray:
    """Area centroid of the convex hull; degenerates to segment midpoint/point."""
    hull = _convex_hull_tuples(points)
    if len(hull) == 1:
        return np.array(hull[0])
    if len(hull) == 2:
        return np.array([0.5 * (hull[0][0] + hull[1][0]),
                         0.5 * (hull[0][1] + hull[1][1])])
    area2 = 0.0
    cx = 0.0
    cy = 0.0
    n = len(hull)
    for i in range(n):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % n]
        w = x0 * y1 - x1 * y0
        area2 += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    if abs(area2) < 1e-12:
        lo = min(hull)
        hi = max(hull)
        return np.array([0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])])
    return np.array([cx / (3.0 * area2), cy / (3.0 * area2)])


def support_center(right: FootPose, left: FootPose,
                   right_contact: bool, left_contact: bool) -> np.ndarray:
    """Centroid of the ground projection of the footprints in contact.

    With both feet airborne the centroid of both projections is used, so the
    quantity is always defined.
    """
    verts = []
    if right_contact:
        verts.append(right.ground_vertices())
    if left_contact:
        verts.append(left.ground_vertices())
    if not verts:
        verts = [right.ground_vertices(), left.ground_vertices()]
    return _polygon_centroid(np.vstack(verts))


def mean_foot_frame(right: FootPose, left: FootPose) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric mid-frame of the feet: mean position, sign-aligned mean quaternion."""
    qr = right.orientation
    ql = left.orientation
    dot = float(np.dot(qr, ql))
    if dot <= -1.0 + 1e-9:
        raise ValueError("antipodal foot quaternions: mean frame is degenerate")
    if dot < 0.0:
        ql = -ql
    qm = quat_normalize(qr + ql)
    pm = 0.5 * (right.position + left.position)
    return pm, qm


def relative_foot_pose(right: FootPose, left: FootPose,
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Relative foot position and rotation expressed in the mean foot frame.

    The relative rotation R_r R_l^T is conjugated into the mean frame
    (similarity transform), which makes both outputs invariant under any
    rigid transform applied to both feet; that invariance is what decouples
    the foot-geometry rewards from the base pose.
    """
    pm, qm = mean_foot_frame(right, left)
    qm_inv = quat_conj(qm)
    p_rel = quat_rotate(qm_inv, right.position - left.position)
    q_rel = quat_mul(qm_inv, quat_mul(
        quat_mul(right.orientation, quat_conj(left.orientation)), qm))
    return p_rel, quat_normalize(q_rel)


def _seg_seg_distance(p1, p2, q1, q2) -> float:
    """Euclidean distance between two 2D segments (degenerate ones allowed)."""
    d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
    d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
    rx, ry = p1[0] - q1[0], p1[1] - q1[1]
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    if a <= 1e-30 and e <= 1e-30:
        return math.hypot(rx, ry)
    if a <= 1e-30:
        s, t = 0.0, min(1.0, max(0.0, f / e))
    else:
        c = d1x * rx + d1y * ry
        if e <= 1e-30:
            t, s = 0.0, min(1.0, max(0.0, -c / a))
        else:
            b = d1x * d2x + d1y * d2y
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > 1e-30 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    dx = (p1[0] + s * d1x) - (q1[0] + t * d2x)
    dy = (p1[1] + s * d1y) - (q1[1] + t * d2y)
    return math.hypot(dx, dy)


def _point_in_hull(point, hull) -> bool:
    if len(hull) < 3:
        return False
    n = len(hull)
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        if (b[0] - a[0]) * (point[1] - a[1]) - (b[1] - a[1]) * (point[0] - a[0]) < 0.0:
            return False
    return True


def hull_distance(right_points, left_points) -> float:
    """Distance between the convex hulls of two ground-projected point sets."""
    hr = _convex_hull_tuples(right_points)
    hl = _convex_hull_tuples(left_points)
    if len(hr) == 0 or len(hl) == 0:
        raise ValueError("hull distance needs non-empty point sets")
    if _point_in_hull(hl[0], hr) or _point_in_hull(hr[0], hl):
        return 0.0
    nr = len(hr)
    nl = len(hl)
    best = math.inf
    for i in range(nr):
        a0 = hr[i]
        a1 = hr[(i + 1) % nr] if nr > 1 else hr[i]
        for j in range(nl):
            b0 = hl[j]
            b1 = hl[(j + 1) % nl] if nl > 1 else hl[j]
            d = _seg_seg_distance(a0, a1, b0, b1)
            if d < best:
                best = d
                if best == 0.0:
                    return 0.0
    return best


def odometry(state: SimState) -> OdometryPose:
    """Ground-truth planar odometry; y and yaw vanish in the sagittal embedding."""
    return OdometryPose(x=float(state.q[0]), y=0.0, yaw=0.0)


# -- planar embedding and the per-step feature bundle -------------------------

@dataclass
class FeatureBundle:
    foot_r: FootPose
    foot_l: FootPose
    contact_r: bool
    contact_l: bool
    fz_r: float
    fz_l: float
    tangential: np.ndarray      # sensed tangential force components (4,)
    zmp_point: np.ndarray | None
    support: np.ndarray         # (2,)
    cp: np.ndarray              # (2,)
    com_xy: np.ndarray          # (2,)
    com_height: float
    odom: OdometryPose
    hull_dist: float
    foot_rel_pos: np.ndarray    # (3,) relative foot position, mean-foot frame
    foot_rel_quat: np.ndarray   # (4,)


def _footprint(cfg) -> np.ndarray:
    w = cfg.foot_half_width
    return np.array([
        (-cfg.heel_offset, -w, -cfg.ankle_height),
        (-cfg.heel_offset, w, -cfg.ankle_height),
        (cfg.toe_offset, w, -cfg.ankle_height),
        (cfg.toe_offset, -w, -cfg.ankle_height),
    ])


def foot_pose_from_sim(sim: BipedSim, state: SimState, side: str) -> FootPose:
    """Embed a planar foot into the generic 3D pose representation."""
    poses = sim.body_poses(state)
    body = R_FOOT if side == "right" else L_FOOT
    y = -0.5 * sim.config.hip_width if side == "right" else 0.5 * sim.config.hip_width
    th, x, z = poses[body]
    return FootPose(
        position=np.array([x, y, z]),
        orientation=quat_from_pitch(th),
        footprint=_footprint(sim.config),
    )


def _rect_ground_extent(cfg, th: float, x: float) -> tuple[float, float]:
    """Ground-projected x extent of a pitched footprint rectangle."""
    c, s = math.cos(th), math.sin(th)
    xa = x + c * (-cfg.heel_offset) + s * cfg.ankle_height
    xb = x + c * cfg.toe_offset + s * cfg.ankle_height
    return (xa, xb) if xa <= xb else (xb, xa)


def extract_features(sim: BipedSim, state: SimState,
                     zmp_epsilon: float | None = None) -> FeatureBundle:
    """Compute the per-step feature bundle shared by reward and termination.

    This is the planar fast path: the generic 3D operations reduce to closed
    forms for pitch-only foot rotations at fixed lateral offsets, which the
    tests cross-check against the generic implementations above.
    """
    cfg = sim.config
    poses = sim.body_poses(state)
    th_l, x_l, z_l = poses[L_FOOT]
    th_r, x_r, z_r = poses[R_FOOT]
    y_l = 0.5 * cfg.hip_width
    y_r = -0.5 * cfg.hip_width
    footprint = _footprint(cfg)
    foot_l = FootPose(position=np.array([x_l, y_l, z_l]),
                      orientation=quat_from_pitch(th_l), footprint=footprint)
    foot_r = FootPose(position=np.array([x_r, y_r, z_r]),
                      orientation=quat_from_pitch(th_r), footprint=footprint)

    flags = state.contact_flag
    contact_l = bool(flags[0] > 0.0 or flags[1] > 0.0)
    contact_r = bool(flags[2] > 0.0 or flags[3] > 0.0)
    fz_l = float(state.contact_fz[0] + state.contact_fz[1])
    fz_r = float(state.contact_fz[2] + state.contact_fz[3])
    tangential = state.contact_fx[:4].copy()

    # ZMP from the loaded foot sensors (flat-ground moment balance)
    eps = zmp_epsilon if zmp_epsilon is not None else 1e-3 * cfg.weight
    num_x = num_y = den = 0.0
    for k, (th, bx, yc) in enumerate(((th_l, x_l, y_l), (th_l, x_l, y_l),
                                      (th_r, x_r, y_r), (th_r, x_r, y_r))):
        fz = state.contact_fz[k]
        if fz <= 0.0:
            continue
        ox, oz = sim.tree.contact_off[k]
        px = bx + math.cos(th) * ox - math.sin(th) * oz
        num_x += px * fz
        num_y += yc * fz
        den += fz
    zmp_point = np.array([num_x / den, num_y / den]) if den > eps else None

    # support center: area centroid of the hull of grounded footprint rectangles
    lo_l, hi_l = _rect_ground_extent(cfg, th_l, x_l)
    lo_r, hi_r = _rect_ground_extent(cfg, th_r, x_r)
    w = cfg.foot_half_width
    rect_l = [(lo_l, y_l - w), (lo_l, y_l + w), (hi_l, y_l - w), (hi_l, y_l + w)]
    rect_r = [(lo_r, y_r - w), (lo_r, y_r + w), (hi_r, y_r - w), (hi_r, y_r + w)]
    if contact_l and not contact_r:
        verts = rect_l
    elif contact_r and not contact_l:
        verts = rect_r
    else:
        verts = rect_l + rect_r
    support = _polygon_centroid(verts)

    # foot clearance: the projections are axis-aligned rectangles
    gap_x = max(lo_l - hi_r, lo_r - hi_l, 0.0)
    gap_y = max((y_l - w) - (y_r + w), (y_r - w) - (y_l + w), 0.0)
    hd = math.hypot(gap_x, gap_y)

    com_x, com_z, com_vx, _ = sim.com_state(state)
    # the CoM can only graze the ground in fully collapsed states; keep the
    # LIP height argument valid there
    cp = capture_point((com_x, 0.0), (com_vx, 0.0), max(com_z, 1e-2), cfg.gravity)
    odom = odometry(state)

    # relative foot pose, planar closed form (pitch-only rotations commute,
    # so the similarity conjugation collapses to the pitch difference)
    th_m = 0.5 * (th_r + th_l)
    cm, sm = math.cos(th_m), math.sin(th_m)
    dx, dy, dz = x_r - x_l, y_r - y_l, z_r - z_l
    foot_rel_pos = np.array([cm * dx + sm * dz, dy, -sm * dx + cm * dz])
    foot_rel_quat = quat_from_pitch(th_r - th_l)
    return FeatureBundle(
        foot_r=foot_r, foot_l=foot_l, contact_r=contact_r, contact_l=contact_l,
        fz_r=fz_r, fz_l=fz_l, tangential=tangential, zmp_point=zmp_point,
        support=support, cp=cp, com_xy=np.array([com_x, 0.0]), com_height=com_z,
        odom=odom, hull_dist=hd, foot_rel_pos=foot_rel_pos,
        foot_rel_quat=foot_rel_quat)
