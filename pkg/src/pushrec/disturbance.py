"""External push scheduling and force profiles.

Pushes are smooth finite bumps: zero-valued and zero-sloped at both ends,
peaking mid-event.  The profile is sin^2, whose impulse has the closed form
F_max * d / 2.  Schedules space events by a base period plus uniform jitter,
with directions drawn uniformly in the plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ScheduleError(ValueError):
    """Raised for infeasible schedule parameter combinations."""


@dataclass(frozen=True)
class PushEvent:
    start: float        # s
    duration: float     # s
    magnitude: float    # peak force, N
    angle: float        # in-plane direction, rad
    point: str = "pelvis"

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ScheduleError(f"push duration must be positive, got {self.duration}")
        if self.magnitude < 0.0:
            raise ScheduleError(f"push magnitude must be >= 0, got {self.magnitude}")
        if self.start < 0.0:
            raise ScheduleError(f"push start must be >= 0, got {self.start}")

    @property
    def direction(self) -> tuple[float, float]:
        return (math.cos(self.angle), math.sin(self.angle))

    @property
    def impulse(self) -> float:
        """Integral of the force magnitude over the event."""
        return self.magnitude * self.duration / 2.0


def schedule_pushes(episode_length: float, base_period: float, jitter: float,
                    magnitude: float, duration: float, rng: np.random.Generator,
                    point: str = "pelvis") -> list[PushEvent]:
    """Draw the push schedule for one episode.

    Successive start times are separated by base_period + U(-jitter, +jitter);
    the constraint duration < base_period - jitter guarantees events never
    overlap.
    """
    if jitter < 0.0 or base_period <= 0.0:
        raise ScheduleError("base_period must be > 0 and jitter >= 0")
    if jitter >= base_period:
        raise ScheduleError(
            f"jitter ({jitter}) must be smaller than the base period ({base_period})")
    if duration >= base_period - jitter:
        raise ScheduleError(
            f"duration ({duration}) must be smaller than base_period - jitter "
            f"({base_period - jitter})")
    events = []
    t = 0.0
    while True:
        gap = base_period + (rng.uniform(-jitter, jitter) if jitter > 0.0 else 0.0)
        t += gap
        if t > episode_length:
            break
        angle = rng.uniform(0.0, 2.0 * math.pi)
        events.append(PushEvent(start=t, duration=duration, magnitude=magnitude,
                                angle=angle, point=point))
    return events


def push_force(event: PushEvent, t: float) -> np.ndarray:
    """World-frame force vector of a push event at time t (zero outside it)."""
    if t < event.start or t > event.start + event.duration:
        return np.zeros(2)
    mag = event.magnitude * math.sin(math.pi * (t - event.start) / event.duration) ** 2
    dx, dz = event.direction
    return np.array([mag * dx, mag * dz])


def pack_events(events: list[PushEvent], body_resolver) -> np.ndarray:
    """Pack events for the physics kernels.

    body_resolver maps an application-point name to (body index, offset).
    Rows: t0, duration, magnitude, dir_x, dir_z, body, off_x, off_z.
    """
    out = np.zeros((len(events), 8))
    for i, ev in enumerate(events):
        body, off = body_resolver(ev.point)
        dx, dz = ev.direction
        out[i] = (ev.start, ev.duration, ev.magnitude, dx, dz, body, off[0], off[1])
    return out
