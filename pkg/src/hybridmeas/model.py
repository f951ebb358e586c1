"""Parameter and state types for the classical-Duffing / measured-oscillator system."""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterator

import numpy as np

__all__ = [
    "HybridParams",
    "HybridState",
    "Trajectory",
    "ParameterError",
    "STATE_FIELDS",
    "validate",
    "params_to_config",
    "params_from_mapping",
]

STATE_FIELDS = ("X", "Xdot", "xbar", "xbardot", "delta", "deltadot")


class ParameterError(ValueError):
    """Raised when a parameter set or state violates its invariants."""


@dataclass(frozen=True)
class HybridParams:
    """Physical constants of the coupled classical/quantum system.

    ``tau`` may be ``inf`` to switch the measurement off (``1/tau == 0``);
    every other field must be finite.
    """

    M: float = 1.0
    A: float = 1.0
    B: float = 1.0
    Lambda: float = 0.3
    Omega: float = 1.0
    lambda_c: float = 0.01
    m: float = 1.0
    omega: float = 1.0
    tau: float = 10.0
    hbar: float = 1.0
    gamma_cl: float = 0.0

    @property
    def inv_tau(self) -> float:
        return 1.0 / self.tau

    def stationary_width(self) -> float:
        """Fixed point of the width equation, ``delta0**4 = hbar**2 / (4 m**2 K)``.

        ``K = omega**2 + 1/(4 tau**2)``; infinite when ``K == 0``.
        """
        K = self.omega**2 + 0.25 * self.inv_tau**2
        if K == 0.0:
            return math.inf
        return (self.hbar**2 / (4.0 * self.m**2 * K)) ** 0.25

    def with_(self, **changes: float) -> "HybridParams":
        return replace(self, **changes)


_POSITIVE = ("M", "m", "tau", "hbar")
_NONNEGATIVE = ("Omega", "omega", "gamma_cl")


def validate(params: HybridParams) -> None:
    """Check every invariant of ``params``; raise ParameterError naming the first violation."""
    for f in fields(HybridParams):
        value = getattr(params, f.name)
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ParameterError(f"{f.name} must be a real number") from None
        if math.isnan(value):
            raise ParameterError(f"{f.name} must be finite")
        if math.isinf(value) and not (f.name == "tau" and value > 0):
            raise ParameterError(f"{f.name} must be finite")
    for name in _POSITIVE:
        if not getattr(params, name) > 0:
            raise ParameterError(f"{name} must be positive")
    for name in _NONNEGATIVE:
        if not getattr(params, name) >= 0:
            raise ParameterError(f"{name} must be non-negative")


@dataclass(frozen=True)
class HybridState:
    """Instantaneous state ``(X, Xdot, xbar, xbardot, delta, deltadot)`` at time ``t``."""

    t: float = 0.0
    X: float = 0.0
    Xdot: float = 0.0
    xbar: float = 0.0
    xbardot: float = 0.0
    delta: float = 1.0
    deltadot: float = 0.0

    def __post_init__(self) -> None:
        values = (self.t,) + tuple(getattr(self, k) for k in STATE_FIELDS)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError("state fields must be finite")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in STATE_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, t: float, y) -> "HybridState":
        return cls(float(t), *(float(v) for v in y))

    @classmethod
    def default(cls, params: HybridParams) -> "HybridState":
        """Small symmetric displacement with the width at its fixed point."""
        return cls(0.0, 0.1, 0.0, 0.1, 0.0, params.stationary_width(), 0.0)


@dataclass
class Trajectory:
    """Samples of the hybrid state at strictly increasing times.

    ``states`` has shape ``(n, 6)`` with columns in ``STATE_FIELDS`` order.
    """

    t: np.ndarray
    states: np.ndarray
    params: HybridParams
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape != (self.t.size, len(STATE_FIELDS)):
            raise ValueError("states must have shape (len(t), 6)")
        if self.t.size > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return self.t.size

    def __iter__(self) -> Iterator[HybridState]:
        for i in range(len(self)):
            yield self.state(i)

    def state(self, i: int) -> HybridState:
        return HybridState.from_array(self.t[i], self.states[i])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_FIELDS.index(name)]

    @property
    def X(self) -> np.ndarray:
        return self.column("X")

    @property
    def xbar(self) -> np.ndarray:
        return self.column("xbar")

    @property
    def delta(self) -> np.ndarray:
        return self.column("delta")


def params_from_mapping(values: dict[str, Any], base: HybridParams | None = None) -> HybridParams:
    """Build params from string or numeric values keyed by field name.

    Keys absent from ``values`` come from ``base``; with no base every field
    is required and the first missing key is reported.
    """
    kwargs = {}
    for f in fields(HybridParams):
        if f.name in values:
            try:
                kwargs[f.name] = float(values[f.name])
            except (TypeError, ValueError):
                raise ParameterError(f"{f.name}: cannot parse {values[f.name]!r} as a number") from None
        elif base is not None:
            kwargs[f.name] = getattr(base, f.name)
        elif f.name == "gamma_cl":
            kwargs[f.name] = 0.0
        else:
            raise ParameterError(f"missing parameter key '{f.name}'")
    unknown = set(values) - {f.name for f in fields(HybridParams)}
    if unknown:
        raise ParameterError(f"unknown parameter key(s): {', '.join(sorted(unknown))}")
    params = HybridParams(**kwargs)
    validate(params)
    return params


def params_to_config(params: HybridParams, path: str | Path | None = None) -> str:
    """Serialize to the ``[params]`` section format, full precision (``repr``)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["params"] = {k: repr(float(v)) for k, v in asdict(params).items()}
    lines = ["[params]"] + [f"{k} = {v}" for k, v in cp["params"].items()]
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
