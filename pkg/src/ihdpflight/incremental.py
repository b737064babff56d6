"""Online identification of the per-channel incremental (delta-state) models.

Two independent 2-parameter recursive-least-squares estimators with
forgetting:

    alpha channel:  d_alpha_next ~ F1 * d_alpha + G1 * d_q
    q channel:      d_q_next     ~ F2 * d_q     + G2 * d_delta

Coefficients start from structure-only guesses (G1 = dt from kinematics; the
q channel starts at zero, no plant knowledge) and are refined every step from
observed increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import PhysicalParams, VehicleState, phi_z, phi_z_prime


@njit(cache=True)
def rls_update(theta, P, phi0, phi1, y, lam, p0, p_reset):
    """One forgetting-factor RLS step in place; returns False on a zero regressor.

    K = P phi / (lam + phi' P phi);  theta += K (y - phi' theta);
    P = (P - K phi' P) / lam, re-symmetrized.  If the largest eigenvalue of P
    exceeds p_reset, P is reset to p0 * I.
    """
    if phi0 == 0.0 and phi1 == 0.0:
        return False
    p00 = P[0, 0]
    p01 = P[0, 1]
    p10 = P[1, 0]
    p11 = P[1, 1]
    a0 = p00 * phi0 + p01 * phi1
    a1 = p10 * phi0 + p11 * phi1
    denom = lam + phi0 * a0 + phi1 * a1
    k0 = a0 / denom
    k1 = a1 / denom
    err = y - (theta[0] * phi0 + theta[1] * phi1)
    theta[0] += k0 * err
    theta[1] += k1 * err
    b0 = phi0 * p00 + phi1 * p10
    b1 = phi0 * p01 + phi1 * p11
    n00 = (p00 - k0 * b0) / lam
    n11 = (p11 - k1 * b1) / lam
    s01 = 0.5 * ((p01 - k0 * b1) / lam + (p10 - k1 * b0) / lam)
    tr = n00 + n11
    det = n00 * n11 - s01 * s01
    disc = tr * tr - 4.0 * det
    if disc < 0.0:
        disc = 0.0
    if 0.5 * (tr + math.sqrt(disc)) > p_reset:
        P[0, 0] = p0
        P[0, 1] = 0.0
        P[1, 0] = 0.0
        P[1, 1] = p0
    else:
        P[0, 0] = n00
        P[0, 1] = s01
        P[1, 0] = s01
        P[1, 1] = n11
    return True


@dataclass
class IncrementRecord:
    """One step's observed increments: d_x = x_k - x_{k-1}, d_x_next = x_{k+1} - x_k."""

    d_alpha: float
    d_q: float
    d_delta: float
    d_alpha_next: float
    d_q_next: float


class IncrementalModel:
    """Paired RLS estimators for the alpha and q incremental channels."""

    def __init__(self, dt: float, forgetting: float = 0.995, p0: float = 1e6,
                 p_reset: float = 1e9):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if not (0.0 < forgetting <= 1.0):
            raise ValueError("forgetting must be in (0, 1]")
        if p0 <= 0.0 or p_reset <= p0:
            raise ValueError("need p_reset > p0 > 0")
        self.dt = float(dt)
        self.forgetting = float(forgetting)
        self.p0 = float(p0)
        self.p_reset = float(p_reset)
        self.theta_alpha = np.array([0.0, dt])
        self.theta_q = np.zeros(2)
        self.P_alpha = p0 * np.eye(2)
        self.P_q = p0 * np.eye(2)
        self.update_count = 0

    @property
    def F1(self) -> float:
        return float(self.theta_alpha[0])

    @property
    def G1(self) -> float:
        return float(self.theta_alpha[1])

    @property
    def F2(self) -> float:
        return float(self.theta_q[0])

    @property
    def G2(self) -> float:
        return float(self.theta_q[1])

    def coeffs(self, channel: str) -> tuple[float, float]:
        """(F, G) for channel "alpha" or "q"."""
        if channel == "alpha":
            return self.F1, self.G1
        if channel == "q":
            return self.F2, self.G2
        raise ValueError(f"unknown channel {channel!r}")

    def update(self, rec: IncrementRecord) -> None:
        rls_update(self.theta_alpha, self.P_alpha, rec.d_alpha, rec.d_q,
                   rec.d_alpha_next, self.forgetting, self.p0, self.p_reset)
        rls_update(self.theta_q, self.P_q, rec.d_q, rec.d_delta,
                   rec.d_q_next, self.forgetting, self.p0, self.p_reset)
        self.update_count += 1

    def predict(self, d_alpha: float, d_q: float, d_delta: float) -> tuple[float, float]:
        """(d_alpha_next_hat, d_q_next_hat) under the current coefficients."""
        return (self.F1 * d_alpha + self.G1 * d_q,
                self.F2 * d_q + self.G2 * d_delta)


def analytic_jacobians(state: VehicleState, delta: float, dt: float,
                       params: PhysicalParams) -> tuple[float, float, float, float]:
    """True (F1, G1, F2, G2) of the Euler one-step maps, for comparing estimates.

    F1 = d(alpha + dt*alpha_dot)/d(alpha), G1 = d(.)/d(q) = dt,
    F2 = d(q + dt*q_dot)/d(q) = 1,        G2 = d(.)/d(delta) = dt*q_gain*b_m.
    """
    a_rad = math.radians(state.alpha)
    dfz = params.alpha_gain * (
        -math.sin(a_rad) * (math.pi / 180.0) * (phi_z(state.alpha) + params.b_z * delta)
        + math.cos(a_rad) * phi_z_prime(state.alpha)
    )
    f1 = 1.0 + dt * dfz
    g1 = dt
    f2 = 1.0
    g2 = dt * params.q_gain * params.b_m
    return f1, g1, f2, g2
