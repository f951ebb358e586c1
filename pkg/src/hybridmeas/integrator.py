"""Explicit Runge-Kutta integration: classical RK4 and adaptive Dormand-Prince 5(4).

State vectors may be arrays of any shape; a batch of independent systems
can be advanced together by stacking them along a leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["StepControl", "IntegrationError", "step_rk4", "integrate"]

Rhs = Callable[[float, np.ndarray], np.ndarray]
Observer = Callable[[float, np.ndarray], None]


class IntegrationError(ArithmeticError):
    """Numerical failure inside the integrator (blowup or step-size underflow)."""


@dataclass(frozen=True)
class StepControl:
    """Step-size policy.

    Fixed mode uses ``dt``; adaptive mode uses ``rtol``, ``atol``, ``dt_min``
    and ``dt_max`` (``dt`` is then the initial trial step).
    """

    dt: float = 1e-3
    adaptive: bool = False
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_min: float = 1e-12
    dt_max: float = 0.1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.adaptive:
            if not 0 < self.dt_min <= self.dt_max:
                raise ValueError("need 0 < dt_min <= dt_max")
            if not self.rtol > 0:
                raise ValueError("rtol must be positive")
            if not self.atol >= 0:
                raise ValueError("atol must be non-negative")

    @classmethod
    def fixed(cls, dt: float) -> "StepControl":
        return cls(dt=dt)

    @classmethod
    def adaptive_mode(cls, rtol: float = 1e-8, atol: float = 1e-10,
                      dt_min: float = 1e-12, dt_max: float = 0.1,
                      dt0: Optional[float] = None) -> "StepControl":
        return cls(dt=dt0 if dt0 is not None else min(1e-3, dt_max), adaptive=True,
                   rtol=rtol, atol=atol, dt_min=dt_min, dt_max=dt_max)


def _check_finite(y: np.ndarray, t: float) -> None:
    # a single reduction is cheaper than isfinite on every element; inf and nan both propagate
    if not math.isfinite(float(np.sum(y))):
        raise IntegrationError(f"numerical blowup at t={t!r}")


def step_rk4(rhs: Rhs, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=float)
    k1 = np.asarray(rhs(t, y))
    half = 0.5 * dt
    k2 = rhs(t + half, y + half * k1)
    k3 = rhs(t + half, y + half * k2)
    k4 = rhs(t + dt, y + dt * k3)
    y_new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    _check_finite(y_new, t + dt)
    return y_new


# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_DP_E = tuple(b5 - b4 for b5, b4 in zip(_DP_B5, _DP_B4))


def _dopri_step(rhs: Rhs, t: float, y: np.ndarray, dt: float, k1: np.ndarray):
    ks = [k1]
    for i in range(1, 7):
        yi = y + dt * sum(a * k for a, k in zip(_DP_A[i], ks) if a != 0.0)
        ks.append(np.asarray(rhs(t + _DP_C[i] * dt, yi)))
    # FSAL: stage 7 is evaluated at the propagated solution
    y_new = y + dt * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
    err = dt * sum(e * k for e, k in zip(_DP_E, ks) if e != 0.0)
    return y_new, err, ks[-1]


def integrate(rhs: Rhs, t0: float, y0, t_end: float, ctl: StepControl,
              observer: Optional[Observer] = None) -> np.ndarray:
    """Advance ``y0`` from ``t0`` to exactly ``t_end``.

    ``observer(t, y)`` is called after every accepted step. In fixed mode the
    step times are ``t0 + i*dt`` and the last step is truncated to land on
    ``t_end``.
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    y = np.array(y0, dtype=float)
    _check_finite(y, t0)
    # overflow surfaces as a non-finite state and is reported as a blowup
    with np.errstate(over="ignore", invalid="ignore"):
        if not ctl.adaptive:
            return _integrate_fixed(rhs, t0, y, t_end, ctl.dt, observer)
        return _integrate_adaptive(rhs, t0, y, t_end, ctl, observer)


def _integrate_fixed(rhs, t0, y, t_end, dt, observer):
    n = math.ceil((t_end - t0) / dt)
    # guard against a sliver step from rounding in the division
    if n > 1 and t0 + (n - 1) * dt >= t_end - 1e-12 * max(1.0, abs(t_end)):
        n -= 1
    t = t0
    for i in range(1, n + 1):
        t_next = t_end if i == n else t0 + i * dt
        y = step_rk4(rhs, t, y, t_next - t)
        t = t_next
        if observer is not None:
            observer(t, y)
    return y


def _integrate_adaptive(rhs, t0, y, t_end, ctl, observer):
    safety, fac_min, fac_max = 0.9, 0.2, 5.0
    t = t0
    dt = min(ctl.dt, ctl.dt_max, t_end - t0)
    k1 = np.asarray(rhs(t, y))
    _check_finite(k1, t)
    while t < t_end:
        last = t + dt >= t_end
        h = t_end - t if last else dt
        y_new, err, k_last = _dopri_step(rhs, t, y, h, k1)
        scale = ctl.atol + ctl.rtol * np.abs(y)
        with np.errstate(invalid="ignore", divide="ignore"):
            enorm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if not math.isfinite(enorm):
            enorm = math.inf
        if enorm <= 1.0:
            _check_finite(y_new, t + h)
            t = t_end if last else t + h
            y = y_new
            k1 = k_last
            if observer is not None:
                observer(t, y)
            fac = fac_max if enorm == 0.0 else min(fac_max, max(fac_min, safety * enorm ** -0.2))
            dt = min(ctl.dt_max, h * fac)
        else:
            dt = h * max(fac_min, safety * enorm ** -0.2) if math.isfinite(enorm) else h * fac_min
            if dt < ctl.dt_min:
                raise IntegrationError(f"step-size underflow at t={t!r} (dt={dt:.3e} < dt_min)")
    return y
