"""Gaussian packet under continuous measurement, in hydrodynamic (Bohmian) form.

Writing ``psi = phi * exp(i S / hbar)`` for the Gaussian solution centred on
the measurement record, the phase is quadratic in ``x - xbar`` with chirp
coefficient ``deltadot/delta + 1/(2 tau)``. The extra ``1/(2 tau)`` comes
from the imaginary measurement term, which also adds a source to the
continuity equation::

    d(rho)/dt + d(rho v)/dx = -(1/(2 tau)) [(x - xbar)**2/delta**2 - 1] rho

Because of that source, particles moving with the phase-gradient velocity
are *not* distributed as ``rho``. The source can be written as a flux,
``(1/(2 tau)) d((x - xbar) rho)/dx``, and moving it to the left-hand side
gives the transport velocity ``xbardot + (deltadot/delta)(x - xbar)`` that
carries ``rho`` without a source. Both fields are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.stats import norm

from .dynamics import TrajectoryInterpolant
from .integrator import step_rk4
from .model import HybridParams, HybridState, Trajectory

__all__ = [
    "WavePacket",
    "BohmEnsemble",
    "density",
    "amplitude",
    "psi",
    "phase",
    "chirp",
    "bohm_velocity",
    "transport_velocity",
    "quantum_potential",
    "continuity_source",
    "sample_positions",
    "advance_ensemble",
]


@dataclass(frozen=True)
class WavePacket:
    xbar: float
    xbardot: float
    delta: float
    deltadot: float
    m: float = 1.0
    hbar: float = 1.0
    tau: float = math.inf

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")

    @classmethod
    def from_state(cls, s: HybridState, params: HybridParams) -> "WavePacket":
        return cls(s.xbar, s.xbardot, s.delta, s.deltadot, params.m, params.hbar, params.tau)


def density(wp: WavePacket, x):
    """Probability density ``|psi|**2``; a normalised Gaussian of std ``delta``."""
    y = np.asarray(x) - wp.xbar
    return np.exp(-0.5 * (y / wp.delta) ** 2) / math.sqrt(2.0 * math.pi * wp.delta**2)


def amplitude(wp: WavePacket, x):
    """``phi = |psi| = sqrt(rho)``."""
    y = np.asarray(x) - wp.xbar
    return (2.0 * math.pi * wp.delta**2) ** -0.25 * np.exp(-0.25 * (y / wp.delta) ** 2)


def chirp(wp: WavePacket) -> float:
    """Linear coefficient of the phase-gradient velocity field."""
    return wp.deltadot / wp.delta + 0.5 / wp.tau


def phase(wp: WavePacket, x):
    """Action ``S(x)``, gauged so that ``S(xbar) = 0``."""
    y = np.asarray(x) - wp.xbar
    return wp.m * (0.5 * chirp(wp) * y**2 + wp.xbardot * y)


def psi(wp: WavePacket, x):
    return amplitude(wp, x) * np.exp(1j * phase(wp, x) / wp.hbar)


def bohm_velocity(wp: WavePacket, x):
    """Guidance velocity ``(1/m) dS/dx``."""
    return wp.xbardot + chirp(wp) * (np.asarray(x) - wp.xbar)


def transport_velocity(wp: WavePacket, x):
    """Velocity that carries ``rho`` with no source term (equivariant field)."""
    return wp.xbardot + (wp.deltadot / wp.delta) * (np.asarray(x) - wp.xbar)


def quantum_potential(wp: WavePacket, x):
    """``-(hbar**2 / (2 m phi)) phi''`` for the Gaussian amplitude."""
    y = np.asarray(x) - wp.xbar
    return wp.hbar**2 / (4.0 * wp.m * wp.delta**2) * (1.0 - y**2 / (2.0 * wp.delta**2))


def continuity_source(wp: WavePacket, x):
    """Source on the right of the continuity equation from the measurement term."""
    y = np.asarray(x) - wp.xbar
    return -(0.5 / wp.tau) * ((y / wp.delta) ** 2 - 1.0) * density(wp, x)


def sample_positions(wp: WavePacket, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` positions from ``density(wp, .)`` by inverse CDF."""
    if n < 1:
        raise ValueError("need at least one particle")
    u = np.random.default_rng(seed).random(n)
    return norm.ppf(u, loc=wp.xbar, scale=wp.delta)


@dataclass
class BohmEnsemble:
    positions: np.ndarray
    trajectory: Trajectory
    seed: int | None = None

    def __post_init__(self):
        self.positions = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if self.positions.size < 1:
            raise ValueError("ensemble needs at least one particle")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("particle positions must be finite")

    @classmethod
    def sample(cls, traj: Trajectory, n: int, seed: int) -> "BohmEnsemble":
        wp0 = WavePacket.from_state(traj.state(0), traj.params)
        return cls(sample_positions(wp0, n, seed), traj, seed)


Guidance = Literal["phase", "transport"]


def advance_ensemble(ens: BohmEnsemble, traj: Trajectory | None = None,
                     guidance: Guidance = "transport", substeps: int = 1,
                     t_end: float | None = None, record_stride: int = 1):
    """Move every particle through the packet's velocity field.

    Packet parameters come from cubic Hermite interpolation of the trajectory.
    One RK4 step is taken per trajectory interval (``substeps`` per interval
    if larger). ``guidance="phase"`` uses the phase-gradient velocity,
    ``"transport"`` the source-free transport velocity.

    Positions are recorded every ``record_stride`` intervals and at the end.
    Returns ``(times, positions)`` with ``positions.shape == (len(times), N)``.
    """
    traj = traj if traj is not None else ens.trajectory
    if guidance not in ("phase", "transport"):
        raise ValueError(f"unknown guidance {guidance!r}")
    path = TrajectoryInterpolant(traj)
    extra = 0.5 / traj.params.tau if guidance == "phase" else 0.0

    def velocity(t, x):
        xb = float(path.xbar(t))
        rate = float(path.deltadot(t)) / float(path.delta(t)) + extra
        return float(path.xbardot(t)) + rate * (x - xb)

    t_stop = traj.t[-1] if t_end is None else t_end
    knots = traj.t[traj.t <= t_stop]
    if knots[-1] < t_stop:
        knots = np.append(knots, t_stop)
    x = ens.positions.copy()
    times = [knots[0]]
    out = [x.copy()]
    last = len(knots) - 1
    for i, (t_a, t_b) in enumerate(zip(knots[:-1], knots[1:]), start=1):
        h = (t_b - t_a) / substeps
        for k in range(substeps):
            x = step_rk4(velocity, t_a + k * h, x, h)
        if i % record_stride == 0 or i == last:
            times.append(t_b)
            out.append(x.copy())
    return np.array(times), np.array(out)
