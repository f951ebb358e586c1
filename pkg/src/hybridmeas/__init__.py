"""Classical Duffing oscillator continuously measuring a quantum oscillator.

Coupled ODEs for the classical particle, the packet centre and the packet
width; Bohmian quantities of the Gaussian packet; Lyapunov estimators; and a
grid solver of the measurement Schrodinger equation used to certify the
Gaussian reduction.
"""

__version__ = "0.1.0"

from .model import HybridParams, HybridState, ParameterError, Trajectory, validate  # noqa: E402
from .integrator import IntegrationError, StepControl, integrate, step_rk4  # noqa: E402
from .dynamics import HybridRhs, WidthCollapseError, simulate  # noqa: E402

__all__ = [
    "HybridParams",
    "HybridState",
    "Trajectory",
    "ParameterError",
    "validate",
    "StepControl",
    "IntegrationError",
    "integrate",
    "step_rk4",
    "HybridRhs",
    "WidthCollapseError",
    "simulate",
]
