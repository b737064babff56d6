"""Longitudinal short-period dynamics of a tail-controlled interceptor.

State is (alpha, q) in degrees / degrees-per-second; the fin deflection delta
is in degrees.  Aerodynamic polynomials are degree-referenced fits, valid for
|alpha| <= 20 deg.  Integration is classical RK4 with the deflection held
constant over the step; the fin servo is a separate rate- and
position-limited first-order lag.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

ALPHA_VALID_DEG = 20.0


@dataclass
class PhysicalParams:
    """Airframe and flight-condition constants (one operating point).

    g : gravitational acceleration [m/s^2]
    W : weight [kg]
    V : speed [m/s]
    Iyy : pitch moment of inertia [kg m^2]
    f : radians-to-degrees factor
    Q : dynamic pressure [kg/m^2]
    S : reference area [m^2]
    d : reference diameter [m]
    b_z, b_m : fin effectiveness in the normal-force / moment polynomials
    """

    g: float = 9.815
    W: float = 204.3
    V: float = 947.715
    Iyy: float = 247.438
    f: float = 180.0 / math.pi
    Q: float = 29969.861
    S: float = 0.041
    d: float = 0.229
    b_z: float = -0.034
    b_m: float = -0.206

    def __post_init__(self):
        for name in ("g", "W", "V", "Iyy", "f", "Q", "S", "d"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"PhysicalParams.{name} must be positive")

    @property
    def alpha_gain(self) -> float:
        """Coefficient f*g*Q*S/(W*V) multiplying the normal-force bracket in alpha_dot."""
        return self.f * self.g * self.Q * self.S / (self.W * self.V)

    @property
    def q_gain(self) -> float:
        """Coefficient f*Q*S*d/Iyy multiplying the moment bracket in q_dot."""
        return self.f * self.Q * self.S * self.d / self.Iyy


@dataclass
class VehicleState:
    """alpha [deg], q [deg/s]."""

    alpha: float = 0.0
    q: float = 0.0


def _check_alpha(alpha: float) -> None:
    if abs(alpha) > ALPHA_VALID_DEG:
        warnings.warn(
            f"alpha = {alpha:.3f} deg is outside the +/-{ALPHA_VALID_DEG:.0f} deg "
            "validity range of the aerodynamic fit",
            RuntimeWarning,
            stacklevel=3,
        )


def phi_z(alpha: float) -> float:
    """Normal-force polynomial [deg-referenced]; odd in alpha."""
    _check_alpha(alpha)
    return 0.000103 * alpha * alpha * alpha - 0.00945 * alpha * abs(alpha) - 0.170 * alpha


def phi_m(alpha: float) -> float:
    """Pitch-moment polynomial [deg-referenced]; odd in alpha."""
    _check_alpha(alpha)
    return 0.000215 * alpha * alpha * alpha - 0.0195 * alpha * abs(alpha) - 0.051 * alpha


def phi_z_prime(alpha: float) -> float:
    """d(phi_z)/d(alpha); even in alpha."""
    return 3.0 * 0.000103 * alpha * alpha - 2.0 * 0.00945 * abs(alpha) - 0.170


def state_derivative(state: VehicleState, delta: float, params: PhysicalParams) -> tuple[float, float]:
    """(alpha_dot, q_dot) at the given state and fin deflection [deg, deg/s units]."""
    alpha_rad = math.radians(state.alpha)
    alpha_dot = params.alpha_gain * math.cos(alpha_rad) * (phi_z(state.alpha) + params.b_z * delta) + state.q
    q_dot = params.q_gain * (phi_m(state.alpha) + params.b_m * delta)
    return alpha_dot, q_dot


def rk4_step(state: VehicleState, delta: float, h: float, params: PhysicalParams) -> VehicleState:
    """One classical RK4 step of size h with delta held constant."""
    if h <= 0.0:
        raise ValueError("step size h must be positive")
    a0, q0 = state.alpha, state.q

    k1a, k1q = state_derivative(state, delta, params)
    k2a, k2q = state_derivative(VehicleState(a0 + 0.5 * h * k1a, q0 + 0.5 * h * k1q), delta, params)
    k3a, k3q = state_derivative(VehicleState(a0 + 0.5 * h * k2a, q0 + 0.5 * h * k2q), delta, params)
    k4a, k4q = state_derivative(VehicleState(a0 + h * k3a, q0 + h * k3q), delta, params)

    return VehicleState(
        a0 + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a),
        q0 + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
    )


@dataclass
class ActuatorState:
    """Fin servo: first-order lag with rate and position limits.

    delta : current deflection [deg]
    tau : lag time constant [s]
    rate_limit : max |delta_dot| [deg/s]
    pos_limit : max |delta| [deg]
    """

    delta: float = 0.0
    tau: float = 0.005
    rate_limit: float = 600.0
    pos_limit: float = 20.0

    def __post_init__(self):
        if self.tau <= 0.0 or self.rate_limit <= 0.0 or self.pos_limit <= 0.0:
            raise ValueError("actuator tau and limits must be positive")


def actuator_step(act: ActuatorState, delta_cmd: float, h: float) -> ActuatorState:
    """Advance the servo by h seconds toward delta_cmd.

    The first-order lag is integrated exactly for the constant command
    (delta -> cmd + (delta - cmd) * exp(-h/tau)), then the realized motion is
    rate-clamped to +/- rate_limit * h, then the position is clamped to
    +/- pos_limit.  Order fixed: lag, rate clamp, position clamp.
    """
    if h <= 0.0:
        raise ValueError("step size h must be positive")
    unconstrained = delta_cmd + (act.delta - delta_cmd) * math.exp(-h / act.tau)
    move = unconstrained - act.delta
    max_move = act.rate_limit * h
    if move > max_move:
        move = max_move
    elif move < -max_move:
        move = -max_move
    new_delta = act.delta + move
    if new_delta > act.pos_limit:
        new_delta = act.pos_limit
    elif new_delta < -act.pos_limit:
        new_delta = -act.pos_limit
    return replace(act, delta=new_delta)
