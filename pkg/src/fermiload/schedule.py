"""Piecewise-linear drive profiles for the Rabi amplitude and resonant energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear profile on [times[0], times[-1]]."""

    times: tuple
    values: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        v = tuple(float(x) for x in self.values)
        if len(t) != len(v) or len(t) < 2:
            raise ValueError("need matching times/values with at least two knots")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("knot times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def end(self) -> float:
        return self.times[-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.start - 1e-12) or np.any(t > self.end + 1e-12):
            raise ValueError(
                f"time {t} outside schedule domain [{self.start}, {self.end}]"
            )
        out = np.interp(np.clip(t, self.start, self.end),
                        self.times, self.values)
        return float(out) if out.ndim == 0 else out

    def maximum(self) -> float:
        return max(self.values)

    @classmethod
    def constant(cls, value: float, duration: float,
                 start: float = 0.0) -> "PiecewiseLinear":
        return cls((start, start + duration), (value, value))

    @classmethod
    def linear(cls, v0: float, v1: float, duration: float,
               start: float = 0.0) -> "PiecewiseLinear":
        return cls((start, start + duration), (v0, v1))

    @classmethod
    def ramp_hold(cls, v_max: float, reach_at: float, duration: float,
                  start: float = 0.0) -> "PiecewiseLinear":
        """Linear ramp from 0 reaching v_max at reach_at, constant after."""
        if not start < start + reach_at < start + duration:
            raise ValueError("ramp end must fall inside the schedule")
        return cls((start, start + reach_at, start + duration),
                   (0.0, v_max, v_max))

    def with_switch_off(self, off_start: float) -> "PiecewiseLinear":
        """Hold the profile until off_start, then ramp linearly to 0 at the end."""
        if not self.start < off_start < self.end:
            raise ValueError("switch-off must start inside the schedule")
        times = [t for t in self.times if t < off_start]
        values = [v for v, t in zip(self.values, self.times) if t < off_start]
        times += [off_start, self.end]
        values += [float(self(off_start)), 0.0]
        return PiecewiseLinear(tuple(times), tuple(values))


@dataclass(frozen=True)
class DriveSchedule:
    """Rabi amplitude Omega(t) >= 0 and resonant energy eps(t), on [0, T]."""

    rabi: PiecewiseLinear
    epsilon: PiecewiseLinear

    def __post_init__(self):
        if min(self.rabi.values) < 0:
            raise ValueError("Rabi amplitude must be non-negative")
        if self.rabi.start != self.epsilon.start or \
                self.rabi.end != self.epsilon.end:
            raise ValueError("rabi and epsilon profiles must share one domain")

    @property
    def start(self) -> float:
        return self.rabi.start

    @property
    def duration(self) -> float:
        return self.rabi.end - self.rabi.start

    @property
    def end(self) -> float:
        return self.rabi.end

    def breakpoints(self) -> np.ndarray:
        pts = set(self.rabi.times) | set(self.epsilon.times)
        return np.array(sorted(pts))

    def max_rabi(self) -> float:
        return self.rabi.maximum()
