"""Leading Lyapunov exponents of the hybrid system.

Three phase-space channels are tracked: classical ``(X, Xdot)``, packet
centre ``(xbar, xbardot)`` and packet width ``(delta, deltadot)``. Two
estimators are offered: a log-linear regression on a single pair of nearby
trajectories, cut off where the separation saturates, and the
rescale-and-average (Benettin) estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import HybridRhs
from .integrator import StepControl, integrate
from .model import STATE_FIELDS, HybridParams, HybridState

__all__ = [
    "CHANNELS",
    "LyapunovError",
    "DivergenceSeries",
    "LyapunovEstimate",
    "make_offset",
    "divergence_series",
    "saturation_time",
    "fit_exponent",
    "renormalized_exponent",
]

# channel -> (position index, velocity index) in the state vector
CHANNELS = {"cl": (0, 1), "qu": (2, 3), "width": (4, 5)}
_CHANNEL_COORD = {"cl": "X", "qu": "xbar", "width": "delta"}


class LyapunovError(ValueError):
    pass


@dataclass
class DivergenceSeries:
    t: np.ndarray
    delta_cl: np.ndarray
    delta_qu: np.ndarray
    delta_width: np.ndarray
    offset: np.ndarray
    params: HybridParams

    @property
    def initial_distance(self) -> float:
        return float(np.linalg.norm(self.offset))

    def channel(self, name: str) -> np.ndarray:
        try:
            return {"cl": self.delta_cl, "qu": self.delta_qu, "width": self.delta_width}[name]
        except KeyError:
            raise LyapunovError(f"unknown channel {name!r}") from None


@dataclass
class LyapunovEstimate:
    exponent: float
    prefactor: float
    window: tuple[float, float]
    residual: float
    method: str
    channel: str = "cl"
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "channel": self.channel,
            "method": self.method,
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "window": list(self.window),
            "residual": self.residual,
        }
        rec.update(self.extra)
        return rec


def make_offset(magnitude: float = 1e-7, coordinate: str = "X") -> np.ndarray:
    """Perturbation vector with ``magnitude`` in a single state coordinate."""
    if coordinate not in STATE_FIELDS:
        raise LyapunovError(f"unknown coordinate {coordinate!r}")
    v = np.zeros(len(STATE_FIELDS))
    v[STATE_FIELDS.index(coordinate)] = magnitude
    return v


def _pair_distance(Y: np.ndarray, channel: str, ref: int = 0, other: int = 1) -> float:
    i, j = CHANNELS[channel]
    return math.hypot(Y[other, i] - Y[ref, i], Y[other, j] - Y[ref, j])


def divergence_series(params: HybridParams, init: HybridState, offset=None,
                      t_end: float = 200.0, ctl: StepControl | None = None,
                      stride: int = 1) -> DivergenceSeries:
    """Integrate ``init`` and ``init + offset`` side by side and record their separations.

    ``offset`` defaults to ``1e-7`` on ``X``. Both copies are advanced in one
    batched integration so they see bit-identical step sequences.
    """
    offset = make_offset() if offset is None else np.asarray(offset, dtype=float)
    if offset.shape != (len(STATE_FIELDS),):
        raise LyapunovError("offset must have one entry per state coordinate")
    if not np.any(offset != 0):
        raise LyapunovError("offset must be nonzero")
    ctl = ctl or StepControl.fixed(0.01)
    f = HybridRhs(params)
    y0 = init.to_array()
    Y0 = np.stack([y0, y0 + offset])
    ts, rows = [init.t], [[_pair_distance(Y0, c) for c in CHANNELS]]
    count = 0

    def observe(t, Y):
        nonlocal count
        count += 1
        if count % stride == 0 or t == t_end:
            ts.append(t)
            rows.append([_pair_distance(Y, c) for c in CHANNELS])

    integrate(f, init.t, Y0, t_end, ctl, observe)
    d = np.array(rows)
    return DivergenceSeries(np.array(ts), d[:, 0], d[:, 1], d[:, 2], offset, params)


def saturation_time(series: DivergenceSeries, channel: str = "cl", saturation: float = 1.0) -> float:
    """First sample time at which the channel distance reaches ``saturation`` (inf if never)."""
    d = series.channel(channel)
    hit = np.nonzero(d >= saturation)[0]
    return float(series.t[hit[0]]) if hit.size else math.inf


def fit_exponent(series: DivergenceSeries, channel: str = "cl", saturation: float = 1.0,
                 skip: float = 1.0, t_max: float | None = None, floor: float = 1e-13,
                 min_points: int = 10) -> LyapunovEstimate:
    """Least-squares line through ``ln(distance)`` against time.

    Only data before the separation first reaches ``saturation`` (and before
    ``t_max``, if given) are used, after dropping ``t < t0 + skip``. Points
    below ``floor`` are ignored since their logarithm is rounding noise.
    """
    t = series.t
    d = series.channel(channel)
    t_cut = min(saturation_time(series, channel, saturation), math.inf if t_max is None else t_max)
    use = (t >= t[0] + skip) & (t < t_cut) & (d > floor)
    if np.count_nonzero(use) < min_points:
        raise LyapunovError("insufficient pre-saturation data")
    tt = t[use]
    logd = np.log(d[use])
    slope, intercept = np.polyfit(tt, logd, 1)
    resid = logd - (slope * tt + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return LyapunovEstimate(float(slope), float(math.exp(intercept)), (float(tt[0]), float(tt[-1])),
                            rms, "regression", channel)


def renormalized_exponent(params: HybridParams, init: HybridState, offset_magnitude: float = 1e-7,
                          renorm_interval: float = 1.0, n_intervals: int = 1000,
                          ctl: StepControl | None = None,
                          channels: Sequence[str] = ("cl", "qu", "width"),
                          perturb: str | Mapping[str, str] = "own",
                          discard: int | None = None) -> dict[str, LyapunovEstimate]:
    """Rescale-and-average estimate of the leading exponent seen by each channel.

    One perturbed copy per channel is integrated alongside the reference.
    After every ``renorm_interval`` the growth ``ln(d_end / d_start)`` of that
    channel's distance is recorded and the whole separation vector is scaled
    so the channel distance returns to ``offset_magnitude``. The exponent is
    the mean rate over the intervals after the first ``discard``
    (default ``n_intervals // 10``).

    ``perturb="own"`` seeds each channel's copy in its own position
    coordinate (``X``, ``xbar`` or ``delta``); a coordinate name such as
    ``"X"`` seeds every copy there instead.

    The reported ``residual`` is the standard error of the mean rate and
    ``prefactor`` is the initial offset magnitude.
    """
    if not renorm_interval > 0:
        raise LyapunovError("renorm_interval must be positive")
    if n_intervals < 10:
        raise LyapunovError("n_intervals must be >= 10")
    if not offset_magnitude > 0:
        raise LyapunovError("offset must be nonzero")
    discard = n_intervals // 10 if discard is None else discard
    if not 0 <= discard < n_intervals:
        raise LyapunovError("discard must leave at least one interval")
    channels = list(channels)
    for c in channels:
        if c not in CHANNELS:
            raise LyapunovError(f"unknown channel {c!r}")
    ctl = ctl or StepControl.fixed(0.01)
    f = HybridRhs(params)

    y0 = init.to_array()
    Y = np.tile(y0, (len(channels) + 1, 1))
    for k, c in enumerate(channels, start=1):
        coord = _CHANNEL_COORD[c] if perturb == "own" else (
            perturb[c] if isinstance(perturb, Mapping) else perturb)
        Y[k] += make_offset(offset_magnitude, coord)

    rates = np.full((n_intervals, len(channels)), np.nan)
    start = np.array([_pair_distance(Y, c, 0, k) for k, c in enumerate(channels, start=1)])
    t = init.t
    for n in range(n_intervals):
        t_next = init.t + (n + 1) * renorm_interval
        Y = integrate(f, t, Y, t_next, ctl)
        t = t_next
        for k, c in enumerate(channels, start=1):
            sep = Y[k] - Y[0]
            d = _pair_distance(Y, c, 0, k)
            if d == 0.0 or not math.isfinite(d):
                raise LyapunovError(f"separation underflow in channel {c!r} at t={t!r}")
            if start[k - 1] > 0:
                rates[n, k - 1] = math.log(d / start[k - 1]) / renorm_interval
            Y[k] = Y[0] + sep * (offset_magnitude / d)
            start[k - 1] = offset_magnitude

    out = {}
    t_a = init.t + discard * renorm_interval
    for k, c in enumerate(channels):
        r = rates[discard:, k]
        r = r[np.isfinite(r)]
        stderr = float(np.std(r, ddof=1) / math.sqrt(r.size)) if r.size > 1 else 0.0
        out[c] = LyapunovEstimate(float(np.mean(r)), offset_magnitude, (t_a, t), stderr,
                                  "renormalized", c, {"n_intervals": int(r.size)})
    return out
