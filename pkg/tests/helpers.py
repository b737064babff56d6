"""Shared test oracles: independent replicas of the agent objectives.

These are written against the public Approximator API only, so they can
cross-check the jitted update kernels without touching their internals.
"""

import math

import numpy as np

from ihdpflight.agents import Agent, AgentConfig
from ihdpflight.command_filter import CommandFilter
from ihdpflight.dynamics import (
    ActuatorState,
    PhysicalParams,
    VehicleState,
    actuator_step,
    rk4_step,
)
from ihdpflight.incremental import IncrementRecord

ACCEPTANCE_SEEDS = (0, 1, 2, 3, 4)


def make_config(**kw):
    base = dict(critic_lr=0.1, actor_lr=5e-7, gamma=0.6, tau=1.0,
                control_weight=5e-6, ts_weight=0.0, policy_iters=3,
                critic_loss_threshold=2.5e-4, max_updates=50, action_scale=20.0)
    base.update(kw)
    return AgentConfig(**base)


def actor_loss_replica(actor, target_critic, x_now, base, gain, u_prev,
                       ref_next, extra_next, w_ctrl, lam, gamma):
    """Independent evaluation of the per-iteration actor objective."""
    u = actor(x_now)
    s_hat = base + gain * (u - u_prev)
    e_hat = s_hat - ref_next
    loss = e_hat**2 + w_ctrl * u**2 + gamma * target_critic(np.array([s_hat, e_hat]))
    if lam:
        x_pred = np.array([e_hat, s_hat, extra_next])
        loss += lam * abs(actor(x_pred) - u)
    return loss


def actor_grad_replica(actor, target_critic, x_now, base, gain, u_prev,
                       ref_next, extra_next, w_ctrl, lam, gamma):
    """Total derivative of the replica objective wrt the actor parameters."""
    u = actor(x_now)
    s_hat = base + gain * (u - u_prev)
    e_hat = s_hat - ref_next
    gtc = target_critic.grad_input(np.array([s_hat, e_hat]))
    scalar = 2 * e_hat * gain + 2 * w_ctrl * u + gamma * (gtc[0] + gtc[1]) * gain
    grad = actor.grad_params(x_now, upstream=1.0)
    if lam:
        x_pred = np.array([e_hat, s_hat, extra_next])
        diff = actor(x_pred) - u
        sgn = float(np.sign(diff))
        if sgn:
            gap = actor.grad_input(x_pred)
            scalar += lam * sgn * ((gap[0] + gap[1]) * gain - 1.0)
            return scalar * grad + actor.grad_params(x_pred, upstream=lam * sgn)
    return scalar * grad


def random_instance(rng, lam):
    """One randomized actor-objective instance (agent + frozen scene)."""
    cfg = make_config(ts_weight=lam)
    agent = Agent.build("alpha", cfg, rng)
    # Random but sane scene values
    scene = dict(
        x_now=rng.uniform(-5, 5, size=3),
        base=float(rng.uniform(-5, 5)),
        gain=float(rng.uniform(-0.05, 0.05)),
        u_prev=float(rng.uniform(-10, 10)),
        ref_next=float(rng.uniform(-5, 5)),
        extra_next=float(rng.uniform(-5, 5)),
        w_ctrl=cfg.control_weight,
        lam=lam,
        gamma=cfg.gamma,
    )
    return agent, scene


def simulate_increments(n_steps, dt=0.001, seed=0):
    """Run the open-loop plant with a persistently exciting fin command and
    yield the increment records a closed-loop run would feed the estimator."""
    rng = np.random.default_rng(seed)
    p = PhysicalParams()
    state = VehicleState(2.0, 0.0)
    act = ActuatorState()
    hist = [(state.alpha, state.q, act.delta)]
    t = 0.0
    for _ in range(n_steps + 1):
        cmd = 4.0 * math.sin(2 * math.pi * 1.3 * t) + 2.5 * math.sin(2 * math.pi * 7.1 * t + 1.0) \
            + 1.5 * rng.normal()
        act = actuator_step(act, cmd, dt)
        state = rk4_step(state, act.delta, dt, p)
        hist.append((state.alpha, state.q, act.delta))
        t += dt
    recs = []
    # The deflection stored at hist[j+1] is the one that drove the j -> j+1
    # transition, so the regressor increment pairs hist[k+1] with hist[k].
    for k in range(1, n_steps):
        a_prev, q_prev, _ = hist[k - 1]
        a_now, q_now, d_now = hist[k]
        a_next, q_next, d_next = hist[k + 1]
        recs.append(IncrementRecord(a_now - a_prev, q_now - q_prev, d_next - d_now,
                                    a_next - a_now, q_next - q_now))
    return recs, hist


def measure_gain(omega, zeta=0.7, omega_n=20.0, h=0.001, settle_cycles=6, measure_cycles=4):
    """Drive the filter with a unit sinusoid and return the steady amplitude ratio."""
    filt = CommandFilter(zeta=zeta, omega_n=omega_n)
    filt.step(0.0, h)  # prime at zero so the sine starts from equilibrium
    period = 2 * math.pi / omega
    n_settle = round(settle_cycles * period / h)
    n_measure = round(measure_cycles * period / h)
    t = 0.0
    out = []
    for k in range(n_settle + n_measure):
        t += h
        y = filt.step(math.sin(omega * t), h)
        if k >= n_settle:
            out.append(y)
    return (max(out) - min(out)) / 2.0


def analytic_gain(omega, zeta=0.7, omega_n=20.0):
    return abs(omega_n**2 / complex(omega_n**2 - omega**2, 2 * zeta * omega_n * omega))
