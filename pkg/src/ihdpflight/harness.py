"""Closed-loop simulation harness: cascaded agents, plant, logging, comparison.

A run wires the outer (angle-of-attack) agent, the optional command low-pass
filter, the inner (pitch-rate) agent, the rate/position-limited fin servo, the
RK4 plant, and the shared incremental-model identifier into one deterministic
loop.  Everything observable per step lands in a SimulationTrace that can be
written to disk byte-reproducibly.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .agents import Agent, AgentConfig, one_step_cost, td_error
from .analysis import SmoothnessReport, smoothness_report
from .command_filter import CommandFilter
from .dynamics import (
    ALPHA_VALID_DEG,
    ActuatorState,
    PhysicalParams,
    VehicleState,
    actuator_step,
    rk4_step,
)
from .incremental import IncrementalModel, IncrementRecord

MODES = ("vanilla", "ts", "ts_filter")

#: abort threshold on |alpha|, |q|, |delta| (divergence guard)
STATE_ABORT_LIMIT = 1e9


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    """Everything that determines a run; two identical configs + seeds give
    byte-identical artifacts."""

    mode: str = "ts"
    duration: float = 40.0
    dt: float = 0.001
    seed: int = 0
    ref_amplitude: float = 10.0
    ref_period: float = 10.0
    init_range: float = 0.1
    warmup_steps: int = 5
    snapshot_stride: int = 100
    rls_forgetting: float = 0.995
    rls_p0: float = 1e6
    rls_p_reset: float = 1e9
    filter_zeta: float = 0.7
    filter_omega_n: float = 20.0
    filter_printed_damping: bool = False
    higher: AgentConfig = field(default_factory=AgentConfig.for_alpha_loop)
    lower: AgentConfig = field(default_factory=AgentConfig.for_q_loop)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.duration <= 0.0 or self.dt <= 0.0:
            raise ConfigError("duration and dt must be positive")
        if self.duration < self.dt:
            raise ConfigError("duration must be at least one step")
        if self.ref_amplitude < 0.0 or self.ref_period <= 0.0:
            raise ConfigError("need ref_amplitude >= 0 and ref_period > 0")
        if self.ref_amplitude > ALPHA_VALID_DEG:
            raise ConfigError(
                f"ref_amplitude exceeds the {ALPHA_VALID_DEG:.0f} deg aero validity range")
        if self.init_range < 0.0:
            raise ConfigError("init_range must be >= 0")
        if self.warmup_steps < 0 or self.snapshot_stride < 0:
            raise ConfigError("warmup_steps and snapshot_stride must be >= 0")
        if isinstance(self.higher, dict):
            self.higher = AgentConfig(**self.higher)
        if isinstance(self.lower, dict):
            self.lower = AgentConfig(**self.lower)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def effective_agent_configs(config: RunConfig) -> tuple[AgentConfig, AgentConfig]:
    """Per-mode agent configs: vanilla forces both smoothness weights to zero."""
    if config.mode == "vanilla":
        return (replace(config.higher, ts_weight=0.0),
                replace(config.lower, ts_weight=0.0))
    return config.higher, config.lower


def reference(t: float, amplitude: float, period: float) -> float:
    """Sinusoidal angle-of-attack reference [deg]."""
    return amplitude * math.sin(2.0 * math.pi * t / period)


TRACE_COLUMNS = [
    "t", "alpha", "q", "delta", "delta_cmd", "alpha_ref", "q_ref_raw", "q_ref_filt",
    "e_alpha", "e_q", "cost_high", "cost_low", "td_high", "td_low", "ts_high",
    "ts_low", "z_out_high", "z_out_low", "gain_high", "gain_low",
    "f1", "g1", "f2", "g2",
    "critic_iters_high", "actor_iters_high", "critic_iters_low", "actor_iters_low",
    "critic_dpsi_high", "critic_dpsi_low", "alpha_in_range", "nonfinite_events",
]

_INT_COLUMNS = {
    "critic_iters_high", "actor_iters_high", "critic_iters_low", "actor_iters_low",
    "alpha_in_range", "nonfinite_events",
}


class SimulationTrace:
    """Column store for one run plus parameter snapshots and run status."""

    def __init__(self, config: RunConfig, data: dict[str, np.ndarray], status: str,
                 divergence_step: int | None, param_snapshots: np.ndarray,
                 param_names: list[str], wall_time: float = 0.0):
        self.config = config
        self.data = data
        self.status = status
        self.divergence_step = divergence_step
        self.param_snapshots = param_snapshots
        self.param_names = param_names
        self.wall_time = wall_time

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    @property
    def n_steps(self) -> int:
        return len(self.data["t"])

    def time_slice(self, t_lo: float, t_hi: float | None = None) -> slice:
        """Index slice with t_lo <= t (< t_hi if given)."""
        t = self.data["t"]
        lo = int(np.searchsorted(t, t_lo, side="left"))
        hi = len(t) if t_hi is None else int(np.searchsorted(t, t_hi, side="left"))
        return slice(lo, hi)

    def summary(self) -> dict:
        d = self.data
        e_a = d["e_alpha"]
        half = self.time_slice(self.config.duration / 2.0)
        settled = e_a[half] if half.stop > half.start else e_a
        inc_q = np.abs(np.diff(d["q_ref_filt"])) if len(e_a) > 1 else np.zeros(1)
        inc_d = np.abs(np.diff(d["delta"])) if len(e_a) > 1 else np.zeros(1)
        return {
            "status": self.status,
            "divergence_step": self.divergence_step,
            "n_steps": self.n_steps,
            "duration_completed": float(self.n_steps * self.config.dt),
            "mode": self.config.mode,
            "seed": self.config.seed,
            "rms_e_alpha": float(np.sqrt(np.mean(e_a ** 2))) if len(e_a) else float("nan"),
            "rms_e_alpha_settled": float(np.sqrt(np.mean(settled ** 2))) if len(settled) else float("nan"),
            "rms_e_q": float(np.sqrt(np.mean(d["e_q"] ** 2))) if len(e_a) else float("nan"),
            "mean_abs_increment_qref": float(np.mean(inc_q)),
            "max_abs_increment_qref": float(np.max(inc_q)),
            "mean_abs_increment_delta": float(np.mean(inc_d)),
            "fraction_z_high_in_pm2": float(np.mean(np.abs(d["z_out_high"]) <= 2.0)) if len(e_a) else float("nan"),
            "fraction_z_low_in_pm2": float(np.mean(np.abs(d["z_out_low"]) <= 2.0)) if len(e_a) else float("nan"),
            "final_f1": float(d["f1"][-1]) if len(e_a) else float("nan"),
            "final_g1": float(d["g1"][-1]) if len(e_a) else float("nan"),
            "final_f2": float(d["f2"][-1]) if len(e_a) else float("nan"),
            "final_g2": float(d["g2"][-1]) if len(e_a) else float("nan"),
            "nonfinite_events": int(np.sum(d["nonfinite_events"])),
            "config": self.config.to_dict(),
        }

    def save(self, out_dir) -> Path:
        """Write trace.csv, summary.json, params.csv under out_dir; returns the dir."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        mat = np.column_stack([self.data[c] for c in TRACE_COLUMNS])
        fmts = ["%d" if c in _INT_COLUMNS else "%.17g" for c in TRACE_COLUMNS]
        np.savetxt(out / "trace.csv", mat, fmt=fmts, delimiter=",",
                   header=",".join(TRACE_COLUMNS), comments="")
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        np.savetxt(out / "params.csv", self.param_snapshots, fmt="%.17g",
                   delimiter=",", header=",".join(self.param_names), comments="")
        return out


def load_trace_csv(path) -> dict[str, np.ndarray]:
    """Read a trace.csv back into a column dict."""
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    mat = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if mat.shape[1] != len(names):
        raise ValueError(f"{path}: header has {len(names)} columns, data has {mat.shape[1]}")
    return {name: mat[:, i].copy() for i, name in enumerate(names)}


def _param_names(agents: list[tuple[str, Agent]]) -> list[str]:
    names = ["t"]
    for label, agent in agents:
        for part, net in (("critic", agent.critic), ("target", agent.target_critic),
                          ("actor", agent.actor)):
            names.extend(f"{part}_{label}_{i:02d}" for i in range(net.n_params))
    return names


def _param_row(t: float, agents: list[tuple[str, Agent]]) -> np.ndarray:
    chunks = [np.array([t])]
    for _, agent in agents:
        chunks.extend([agent.critic.theta, agent.target_critic.theta, agent.actor.theta])
    return np.concatenate(chunks)


def run(config: RunConfig) -> SimulationTrace:
    """Simulate one run under config; deterministic for a given (config, seed)."""
    rng = np.random.default_rng(config.seed)
    params = PhysicalParams()
    h = config.dt
    n = int(round(config.duration / h))
    cfg_high, cfg_low = effective_agent_configs(config)

    # build order fixed for reproducibility: higher nets first, then lower
    higher = Agent.build("alpha", cfg_high, rng, config.init_range)
    lower = Agent.build("q", cfg_low, rng, config.init_range)
    model = IncrementalModel(h, config.rls_forgetting, config.rls_p0, config.rls_p_reset)
    lpf = CommandFilter(config.filter_zeta, config.filter_omega_n,
                        printed_damping=config.filter_printed_damping)
    use_filter = config.mode == "ts_filter"

    state = VehicleState()
    act = ActuatorState()

    cols = {name: np.zeros(n) for name in TRACE_COLUMNS}
    agents_l = [("high", higher), ("low", lower)]
    param_names = _param_names(agents_l)
    snapshots = []

    lam1 = cfg_high.ts_weight
    lam2 = cfg_low.ts_weight
    a_weight = cfg_high.control_weight
    b_weight = cfg_low.control_weight

    d_alpha = 0.0
    d_q = 0.0
    q_prev = state.q
    status = "completed"
    divergence_step = None

    t0 = time.perf_counter()
    for k in range(n):
        t = k * h
        if config.snapshot_stride and k % config.snapshot_stride == 0:
            snapshots.append(_param_row(t, agents_l))

        alpha_k, q_k = state.alpha, state.q
        delta_before = act.delta
        alpha_ref = reference(t, config.ref_amplitude, config.ref_period)
        alpha_ref_next = reference(t + h, config.ref_amplitude, config.ref_period)
        e_alpha = alpha_k - alpha_ref

        f1, g1 = model.coeffs("alpha")
        alpha_drift_next = alpha_k + f1 * d_alpha + g1 * d_q

        # outer agent: pitch-rate command from the alpha error
        obs1 = np.array([e_alpha, alpha_k, delta_before])
        psi1_before = higher.critic.theta.copy()
        q_ref_raw, diag1 = higher.step(obs1, d_alpha, q_prev, delta_before,
                                       alpha_ref_next, model)
        q_ref_eff = lpf.step(q_ref_raw, h) if use_filter else q_ref_raw
        e_q = q_k - q_ref_eff

        # inner agent: fin command from the pitch-rate error
        obs2 = np.array([e_q, q_k, alpha_k])
        psi2_before = lower.critic.theta.copy()
        delta_cmd, diag2 = lower.step(obs2, d_q, delta_before, alpha_drift_next,
                                      q_ref_eff, model)

        act = actuator_step(act, delta_cmd, h)
        delta_applied = act.delta
        state = rk4_step(state, delta_applied, h, params)

        # book-keeping at the post-update policies for the logged diagnostics
        f1, g1 = model.coeffs("alpha")
        f2, g2 = model.coeffs("q")
        alpha_hat = alpha_k + f1 * d_alpha + g1 * (q_ref_raw - q_prev)
        e_alpha_hat = alpha_hat - alpha_ref_next
        cost1 = one_step_cost(e_alpha_hat, q_ref_raw, a_weight)
        td1 = td_error(cost1, higher.target_critic(np.array([alpha_hat, e_alpha_hat])),
                       higher.critic(np.array([alpha_k, e_alpha])), cfg_high.gamma)
        q_hat = q_k + f2 * d_q + g2 * (delta_cmd - delta_before)
        e_q_hat = q_hat - q_ref_eff
        cost2 = one_step_cost(e_q_hat, delta_cmd, b_weight)
        td2 = td_error(cost2, lower.target_critic(np.array([q_hat, e_q_hat])),
                       lower.critic(np.array([q_k, e_q])), cfg_low.gamma)
        _, cache1 = higher.actor.forward(obs1)
        _, cache2 = lower.actor.forward(obs2)
        ts1 = lam1 * abs(higher.actor(np.array([e_alpha_hat, alpha_hat, delta_before]))
                         - q_ref_raw)
        ts2 = lam2 * abs(lower.actor(np.array([e_q_hat, q_hat, alpha_drift_next]))
                         - delta_cmd)

        row = cols
        row["t"][k] = t
        row["alpha"][k] = alpha_k
        row["q"][k] = q_k
        row["delta"][k] = delta_applied
        row["delta_cmd"][k] = delta_cmd
        row["alpha_ref"][k] = alpha_ref
        row["q_ref_raw"][k] = q_ref_raw
        row["q_ref_filt"][k] = q_ref_eff
        row["e_alpha"][k] = e_alpha
        row["e_q"][k] = e_q
        row["cost_high"][k] = cost1
        row["cost_low"][k] = cost2
        row["td_high"][k] = td1
        row["td_low"][k] = td2
        row["ts_high"][k] = ts1
        row["ts_low"][k] = ts2
        row["z_out_high"][k] = cache1.z_out
        row["z_out_low"][k] = cache2.z_out
        row["gain_high"][k] = higher.actor.grad_input(obs1)[0]
        row["gain_low"][k] = lower.actor.grad_input(obs2)[0]
        row["f1"][k] = f1
        row["g1"][k] = g1
        row["f2"][k] = f2
        row["g2"][k] = g2
        row["critic_iters_high"][k] = diag1.critic_iters
        row["actor_iters_high"][k] = diag1.actor_iters
        row["critic_iters_low"][k] = diag2.critic_iters
        row["actor_iters_low"][k] = diag2.actor_iters
        row["critic_dpsi_high"][k] = float(np.linalg.norm(higher.critic.theta - psi1_before))
        row["critic_dpsi_low"][k] = float(np.linalg.norm(lower.critic.theta - psi2_before))
        row["alpha_in_range"][k] = 1.0 if abs(alpha_k) <= ALPHA_VALID_DEG else 0.0
        row["nonfinite_events"][k] = (0 if diag1.ok else 1) + (0 if diag2.ok else 1)

        bad = (not (math.isfinite(state.alpha) and math.isfinite(state.q)
                    and math.isfinite(delta_applied))
               or abs(state.alpha) > STATE_ABORT_LIMIT or abs(state.q) > STATE_ABORT_LIMIT
               or abs(delta_applied) > STATE_ABORT_LIMIT)
        if bad:
            status = "diverged"
            divergence_step = k
            n = k + 1
            break

        if k >= config.warmup_steps:
            model.update(IncrementRecord(
                d_alpha=d_alpha, d_q=d_q, d_delta=delta_applied - delta_before,
                d_alpha_next=state.alpha - alpha_k, d_q_next=state.q - q_k))

        d_alpha = state.alpha - alpha_k
        d_q = state.q - q_k
        q_prev = q_k
    wall = time.perf_counter() - t0

    snapshots.append(_param_row(n * h, agents_l))
    data = {name: arr[:n] for name, arr in cols.items()}
    return SimulationTrace(config, data, status, divergence_step,
                           np.vstack(snapshots), param_names, wall_time=wall)


@dataclass
class ComparisonReport:
    """Side-by-side smoothness statistics with ratios against the first run."""

    labels: list[str]
    reports: list[SmoothnessReport]
    band: tuple[float, float]

    def to_text(self) -> str:
        metrics = [f.name for f in fields(SmoothnessReport)]
        lines = ["metric," + ",".join(self.labels) + ","
                 + ",".join(f"{lab}/{self.labels[0]}" for lab in self.labels[1:])]
        base = self.reports[0]
        for name in metrics:
            vals = [getattr(r, name) for r in self.reports]
            ratios = []
            for v in vals[1:]:
                b = getattr(base, name)
                ratios.append(v / b if b != 0.0 else float("nan"))
            lines.append(name + "," + ",".join(f"{v:.6g}" for v in vals) + ","
                         + ",".join(f"{r:.4g}" for r in ratios))
        return "\n".join(lines) + "\n"


def compare(traces: list, labels: list[str] | None = None,
            band: tuple[float, float] = (10.0, 40.0)) -> ComparisonReport:
    """Smoothness statistics for several runs of the same scenario.

    Accepts SimulationTrace objects or column dicts (from load_trace_csv); all
    must share the same sample interval.
    """
    if len(traces) < 2:
        raise ValueError("compare needs at least two runs")
    datas = [tr.data if isinstance(tr, SimulationTrace) else tr for tr in traces]
    dts = [float(d["t"][1] - d["t"][0]) for d in datas]
    if any(abs(dt - dts[0]) > 1e-12 for dt in dts[1:]):
        raise ValueError("runs have different sample intervals")
    if labels is None:
        labels = [f"run{i}" for i in range(len(datas))]
    if len(labels) != len(datas):
        raise ValueError("one label per run required")
    reports = []
    for d in datas:
        reports.append(smoothness_report(
            d["q_ref_filt"], d["delta"], d["z_out_high"], d["z_out_low"],
            d["gain_high"], d["gain_low"], d["cost_high"], d["cost_low"],
            fs=1.0 / dts[0], band=band))
    return ComparisonReport(labels=list(labels), reports=reports, band=band)
