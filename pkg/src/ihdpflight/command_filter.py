"""Second-order low-pass filter for the inter-loop command.

Continuous form (unit DC gain):

    d1_dot = d2
    d2_dot = -2 zeta omega_n d2 - omega_n^2 (d1 - u)

integrated by RK4 over each step with the raw command u held constant.  d1 is
the filtered command.  ``printed_damping`` switches the damping term to
-2 zeta omega_n^2 d2, a published variant kept only for comparison (it is
dimensionally inconsistent and effectively overdamped at omega_n = 20).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class CommandFilter:
    """State and coefficients of the command low-pass filter.

    zeta : damping ratio; omega_n : natural frequency [rad/s];
    d1, d2 : filter state (d1 is the output).
    """

    zeta: float = 0.7
    omega_n: float = 20.0
    d1: float = 0.0
    d2: float = 0.0
    printed_damping: bool = False
    _primed: bool = False

    def __post_init__(self):
        if self.zeta <= 0.0 or self.omega_n <= 0.0:
            raise ValueError("zeta and omega_n must be positive")

    def _deriv(self, d1: float, d2: float, u: float) -> tuple[float, float]:
        damping = 2.0 * self.zeta * (self.omega_n ** 2 if self.printed_damping else self.omega_n)
        return d2, -damping * d2 - self.omega_n ** 2 * (d1 - u)

    def step(self, u: float, h: float) -> float:
        """Advance by h seconds toward raw command u; returns the filtered command.

        The first call primes the state at d1 = u, d2 = 0 (no startup transient).
        """
        if h <= 0.0:
            raise ValueError("step size h must be positive")
        if not self._primed:
            self.d1 = float(u)
            self.d2 = 0.0
            self._primed = True
        d1, d2 = self.d1, self.d2
        k1a, k1b = self._deriv(d1, d2, u)
        k2a, k2b = self._deriv(d1 + 0.5 * h * k1a, d2 + 0.5 * h * k1b, u)
        k3a, k3b = self._deriv(d1 + 0.5 * h * k2a, d2 + 0.5 * h * k2b, u)
        k4a, k4b = self._deriv(d1 + h * k3a, d2 + h * k3b, u)
        self.d1 = d1 + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        self.d2 = d2 + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        return self.d1
