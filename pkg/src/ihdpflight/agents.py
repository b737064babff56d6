"""Actor-critic agents that learn online against an identified incremental model.

Each agent owns three approximators: a critic V(state, error) with absolute-value
output, a soft-updated target critic, and a bounded actor u = scale*tanh(.) over
the observation (error, state, extra).  Per control step the agent runs a fixed
number of policy iterations; each iteration re-predicts the next state through
the incremental model, then runs a critic update phase (repeat Adam steps on the
squared temporal-difference error until it falls below a threshold or an
iteration cap) followed by an actor update phase (repeat Adam steps on the
one-step-ahead loss until the loss starts increasing, then roll the last update
back, optimizer state included).

The actor loss is

    L = e_next_hat^2 + w*u^2 + gamma*V_target(next) + lam*|actor(pred_obs) - u|

and its gradient is the full total derivative: the action changes the predicted
next state through the identified control gain G, which feeds the cost, the
target-critic term, and both arguments of the smoothness penalty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .incremental import IncrementalModel
from .networks import (
    ACT_ABS,
    ACT_SCALED_TANH,
    Approximator,
    adam_step,
    mlp_forward,
    mlp_grad_input,
    mlp_grad_params,
    soft_update,
)


@dataclass
class AgentConfig:
    """Learning hyperparameters for one agent.

    Rates and the smoothness weight may be zero (inference mode / smoothing
    disabled); remaining fields must be strictly valid.
    """

    critic_lr: float
    actor_lr: float
    gamma: float = 0.6
    tau: float = 1.0
    control_weight: float = 1e-5
    ts_weight: float = 0.0
    policy_iters: int = 3
    critic_loss_threshold: float = 1e-4
    max_updates: int = 50
    action_scale: float = 20.0

    def __post_init__(self):
        if self.critic_lr < 0.0 or self.actor_lr < 0.0 or self.ts_weight < 0.0:
            raise ValueError("learning rates and ts_weight must be >= 0")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must be in (0, 1)")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must be in (0, 1]")
        if self.control_weight <= 0.0 or self.critic_loss_threshold <= 0.0:
            raise ValueError("control_weight and critic_loss_threshold must be positive")
        if self.policy_iters < 1 or self.max_updates < 1:
            raise ValueError("policy_iters and max_updates must be >= 1")
        if self.action_scale <= 0.0:
            raise ValueError("action_scale must be positive")

    @classmethod
    def for_alpha_loop(cls) -> "AgentConfig":
        """Defaults for the outer (angle-of-attack) agent."""
        return cls(critic_lr=0.1, actor_lr=5e-7, gamma=0.6, tau=1.0,
                   control_weight=5e-6, ts_weight=9.3e-4, policy_iters=3,
                   critic_loss_threshold=2.5e-4, max_updates=50, action_scale=20.0)

    @classmethod
    def for_q_loop(cls) -> "AgentConfig":
        """Defaults for the inner (pitch-rate) agent."""
        return cls(critic_lr=0.1, actor_lr=1e-7, gamma=0.6, tau=1.0,
                   control_weight=1e-5, ts_weight=1e-5, policy_iters=3,
                   critic_loss_threshold=5e-5, max_updates=50, action_scale=20.0)


def one_step_cost(e_next_hat: float, action: float, weight: float) -> float:
    """Quadratic one-step cost: predicted next tracking error plus weighted effort."""
    return e_next_hat * e_next_hat + weight * action * action


def td_error(cost: float, v_target_next: float, v_now: float, gamma: float) -> float:
    """cost + gamma * V_target(next) - V(now)."""
    return cost + gamma * v_target_next - v_now


def online_ts_loss(actor: Approximator, obs_now, obs_pred) -> float:
    """|actor(obs_pred) - actor(obs_now)|: the action change the policy would make."""
    return abs(actor(obs_pred) - actor(obs_now))


@njit(cache=True)
def _critic_phase(theta, m, v, step, act, scale, x_now, cost, v_target, gamma,
                  lr, beta1, beta2, eps, threshold, max_updates):
    """Adam on 0.5*td^2 until td^2/2 < threshold or max_updates; returns (iters, ok)."""
    n_in = x_now.shape[0]
    iters = 0
    ok = True
    while True:
        y, _ = mlp_forward(theta, n_in, act, scale, x_now)
        td = cost + gamma * v_target - y
        loss = 0.5 * td * td
        if not np.isfinite(loss):
            ok = False
            break
        if loss < threshold or iters >= max_updates:
            break
        grad = mlp_grad_params(theta, n_in, act, scale, x_now, -td)
        adam_step(theta, grad, m, v, step, lr, beta1, beta2, eps)
        iters += 1
    return iters, ok


@njit(cache=True)
def _actor_phase(theta, m, v, step, act_a, scale_a, tc_theta, tc_act, tc_scale,
                 x_now, base, gain, u_prev, ref_next, extra_next,
                 w_ctrl, lam, gamma, lr, beta1, beta2, eps, max_updates):
    """Adam on the one-step actor loss until it reverses; returns (iters, ok).

    The loss is evaluated before each update; on a strict increase the last
    update (parameters and Adam state) is rolled back and the phase ends.  A
    non-finite loss also rolls back and flags ok=False.  iters counts applied
    updates, including one that was subsequently rolled back.
    """
    n = theta.shape[0]
    n_in = x_now.shape[0]
    nc_in = 2
    ck_theta = np.empty(n)
    ck_m = np.empty(n)
    ck_v = np.empty(n)
    ck_step = np.int64(0)
    have_ck = False
    prev_loss = np.inf
    iters = 0
    ok = True
    x_next = np.empty(2)
    x_pred = np.empty(n_in)
    while True:
        u, _ = mlp_forward(theta, n_in, act_a, scale_a, x_now)
        s_hat = base + gain * (u - u_prev)
        e_hat = s_hat - ref_next
        x_next[0] = s_hat
        x_next[1] = e_hat
        vt, _ = mlp_forward(tc_theta, nc_in, tc_act, tc_scale, x_next)
        loss = e_hat * e_hat + w_ctrl * u * u + gamma * vt
        sgn = 0.0
        if lam != 0.0:
            x_pred[0] = e_hat
            x_pred[1] = s_hat
            x_pred[2] = extra_next
            v_pred, _ = mlp_forward(theta, n_in, act_a, scale_a, x_pred)
            diff = v_pred - u
            loss = loss + lam * abs(diff)
            if diff > 0.0:
                sgn = 1.0
            elif diff < 0.0:
                sgn = -1.0
        if not np.isfinite(loss):
            ok = False
            if have_ck:
                theta[:] = ck_theta
                m[:] = ck_m
                v[:] = ck_v
                step[0] = ck_step
            break
        if loss > prev_loss:
            theta[:] = ck_theta
            m[:] = ck_m
            v[:] = ck_v
            step[0] = ck_step
            break
        ck_theta[:] = theta
        ck_m[:] = m
        ck_v[:] = v
        ck_step = step[0]
        have_ck = True
        prev_loss = loss
        if iters >= max_updates:
            break
        gtc = mlp_grad_input(tc_theta, nc_in, tc_act, tc_scale, x_next)
        scalar = 2.0 * e_hat * gain + 2.0 * w_ctrl * u + gamma * (gtc[0] + gtc[1]) * gain
        grad = mlp_grad_params(theta, n_in, act_a, scale_a, x_now, 1.0)
        if sgn != 0.0:
            gap = mlp_grad_input(theta, n_in, act_a, scale_a, x_pred)
            scalar += lam * sgn * ((gap[0] + gap[1]) * gain - 1.0)
            gp = mlp_grad_params(theta, n_in, act_a, scale_a, x_pred, lam * sgn)
            for i in range(n):
                grad[i] = scalar * grad[i] + gp[i]
        else:
            for i in range(n):
                grad[i] = scalar * grad[i]
        adam_step(theta, grad, m, v, step, lr, beta1, beta2, eps)
        iters += 1
    return iters, ok


class StepDiagnostics(NamedTuple):
    critic_iters: int
    actor_iters: int
    ok: bool


class Agent:
    """One cascade level: critic + target critic + bounded actor on one channel."""

    def __init__(self, channel: str, critic: Approximator, target_critic: Approximator,
                 actor: Approximator, config: AgentConfig):
        if channel not in ("alpha", "q"):
            raise ValueError("channel must be 'alpha' or 'q'")
        if critic.n_in != 2 or target_critic.n_in != 2:
            raise ValueError("critics take (state, error): n_in must be 2")
        if actor.n_in != 3:
            raise ValueError("actor takes (error, state, extra): n_in must be 3")
        self.channel = channel
        self.critic = critic
        self.target_critic = target_critic
        self.actor = actor
        self.config = config
        self._last_ok = True

    @classmethod
    def build(cls, channel: str, config: AgentConfig, rng: np.random.Generator,
              init_range: float = 0.1) -> "Agent":
        """Random-init agent; draw order is critic then actor, target is a copy."""
        critic = Approximator.random(2, "abs", 1.0, rng, init_range)
        target = critic.copy()
        actor = Approximator.random(3, "scaled_tanh", config.action_scale, rng, init_range)
        return cls(channel, critic, target, actor, config)

    def action(self, observation) -> float:
        """Actor output for observation (error, state, extra)."""
        return self.actor(observation)

    def critic_update_phase(self, x_now, predicted_next, cost: float) -> int:
        """Fit V(x_now) toward cost + gamma*V_target(predicted_next); soft-update target.

        Returns the number of Adam iterations used (0 if already under threshold).
        """
        cfg = self.config
        v_target = self.target_critic(predicted_next)
        x_now = np.ascontiguousarray(x_now, dtype=np.float64)
        c = self.critic
        iters, ok = _critic_phase(
            c.theta, c.m, c.v, c.adam_t, c._act, c.scale, x_now,
            float(cost), float(v_target), cfg.gamma,
            cfg.critic_lr, 0.9, 0.999, 1e-8,
            cfg.critic_loss_threshold, cfg.max_updates,
        )
        soft_update(self.target_critic, self.critic, cfg.tau)
        self._last_ok = getattr(self, "_last_ok", True) and ok
        return iters

    def actor_update_phase(self, observation, base: float, gain: float, u_prev: float,
                           ref_next: float, extra_next: float) -> int:
        """Improve the actor against the frozen target critic; returns iterations used."""
        cfg = self.config
        a = self.actor
        tc = self.target_critic
        x_now = np.ascontiguousarray(observation, dtype=np.float64)
        iters, ok = _actor_phase(
            a.theta, a.m, a.v, a.adam_t, a._act, a.scale,
            tc.theta, tc._act, tc.scale,
            x_now, float(base), float(gain), float(u_prev),
            float(ref_next), float(extra_next),
            cfg.control_weight, cfg.ts_weight, cfg.gamma,
            cfg.actor_lr, 0.9, 0.999, 1e-8, cfg.max_updates,
        )
        self._last_ok = getattr(self, "_last_ok", True) and ok
        return iters

    def step(self, observation, d_s: float, u_prev: float, extra_next: float,
             ref_next: float, model: IncrementalModel) -> tuple[float, StepDiagnostics]:
        """Run the per-step policy iterations and return the action to apply.

        observation = (error, state, extra); d_s is the channel state increment
        over the previous step; u_prev is the previous value of the quantity the
        action sets; extra_next is the predicted next value of the extra input.
        """
        cfg = self.config
        f_coef, g_coef = model.coeffs(self.channel)
        obs = np.ascontiguousarray(observation, dtype=np.float64)
        s_now = float(obs[1])
        e_now = float(obs[0])
        base = s_now + f_coef * d_s
        x_now_critic = np.array([s_now, e_now])
        self._last_ok = True
        critic_iters = 0
        actor_iters = 0
        for _ in range(cfg.policy_iters):
            u = self.actor(obs)
            s_hat = base + g_coef * (u - u_prev)
            e_hat = s_hat - ref_next
            cost = one_step_cost(e_hat, u, cfg.control_weight)
            critic_iters += self.critic_update_phase(
                x_now_critic, np.array([s_hat, e_hat]), cost)
            actor_iters += self.actor_update_phase(
                obs, base, g_coef, u_prev, ref_next, extra_next)
        return self.actor(obs), StepDiagnostics(critic_iters, actor_iters, self._last_ok)
