"""Release gates for the package, one test per gate.

The first five gates are deterministic property checks (gradients, integrator,
estimator, filter, spectra).  The remaining ones measure closed-loop behavior
on the shared set of full-length nominal runs (see conftest.nominal_traces)
and compare medians over seeds against fixed bounds.  Every test prints the
measured quantity next to the bound it must meet, so a transcript of this file
doubles as the release report.
"""

import math
import time

import numpy as np

from ihdpflight.analysis import band_energy, fft_magnitude, sensitivity_measure
from ihdpflight.agents import Agent
from ihdpflight.command_filter import CommandFilter
from ihdpflight.dynamics import (
    ActuatorState,
    PhysicalParams,
    VehicleState,
    actuator_step,
    phi_m,
    phi_z,
    rk4_step,
)
from ihdpflight.harness import RunConfig, run
from ihdpflight.incremental import IncrementalModel, IncrementRecord, analytic_jacobians
from ihdpflight.networks import Approximator

from helpers import (
    ACCEPTANCE_SEEDS,
    actor_grad_replica,
    actor_loss_replica,
    analytic_gain,
    make_config,
    measure_gain,
    random_instance,
    simulate_increments,
)

SEEDS = ACCEPTANCE_SEEDS


def _fd_grad(loss_fn, theta, h=1e-6):
    """Central finite differences of loss_fn() over the flat parameter vector."""
    g = np.empty_like(theta)
    for i in range(theta.size):
        keep = theta[i]
        theta[i] = keep + h
        up = loss_fn()
        theta[i] = keep - h
        down = loss_fn()
        theta[i] = keep
        g[i] = (up - down) / (2.0 * h)
    return g


def _rel_err(analytic, numeric):
    return float(np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1e-12))


# ------------------------------------------------------------------ gradients

def test_gradients_match_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    errors = []

    # Value-function update target: 0.5 * (cost + gamma * v_target - V(x))^2.
    n_critic = 0
    while n_critic < 40:
        net = Approximator.random(2, "abs", 1.0, rng)
        x = rng.uniform(-5.0, 5.0, size=2)
        if abs(net.forward(x)[1].z_out) < 1e-4:
            continue  # too close to the |z| kink for finite differences
        cost = float(rng.uniform(0.0, 25.0))
        v_target = float(rng.uniform(0.0, 10.0))
        gamma = 0.6

        def critic_loss():
            td = cost + gamma * v_target - net(x)
            return 0.5 * td * td

        td_now = cost + gamma * v_target - net(x)
        analytic = -td_now * net.grad_params(x, upstream=1.0)
        errors.append(_rel_err(analytic, _fd_grad(critic_loss, net.theta)))
        n_critic += 1

    # Policy objective with control penalty and (for lam > 0) the smoothness term.
    n_actor = 0
    for lam in (0.0, 9.3e-4, 1.0):
        per_lam = 0
        while per_lam < 20:
            agent, scene = random_instance(rng, lam)
            u = agent.actor(scene["x_now"])
            s_hat = scene["base"] + scene["gain"] * (u - scene["u_prev"])
            e_hat = s_hat - scene["ref_next"]
            if abs(agent.target_critic.forward(np.array([s_hat, e_hat]))[1].z_out) < 1e-4:
                continue
            if lam:
                x_pred = np.array([e_hat, s_hat, scene["extra_next"]])
                if abs(agent.actor(x_pred) - u) < 1e-4:
                    continue
            analytic = actor_grad_replica(agent.actor, agent.target_critic, **scene)
            numeric = _fd_grad(
                lambda: actor_loss_replica(agent.actor, agent.target_critic, **scene),
                agent.actor.theta)
            errors.append(_rel_err(analytic, numeric))
            per_lam += 1
        n_actor += per_lam

    # Saturation diagnostic: d(action)/d(first observation component).
    n_sens = 0
    for _ in range(20):
        agent = Agent.build("alpha", make_config(), rng)
        obs = rng.uniform(-5.0, 5.0, size=3)
        h = 1e-6
        hi = agent.action(obs + np.array([h, 0.0, 0.0]))
        lo = agent.action(obs - np.array([h, 0.0, 0.0]))
        numeric = (hi - lo) / (2.0 * h)
        analytic = sensitivity_measure(agent, obs)
        errors.append(abs(analytic - numeric) / max(abs(numeric), 1e-12))
        n_sens += 1

    elapsed = time.perf_counter() - t0
    worst = max(errors)
    total = n_critic + n_actor + n_sens
    print(f"gradient battery: {total} instances "
          f"({n_critic} value, {n_actor} policy, {n_sens} sensitivity), "
          f"worst relative error {worst:.3g} (require <= 1e-5), "
          f"elapsed {elapsed:.2f} s (require < 10 s)")
    assert total >= 100
    assert worst <= 1e-5
    assert elapsed < 10.0


# ------------------------------------------------------------------- dynamics

def test_integrator_and_actuator_fidelity():
    p = PhysicalParams()

    def integrate(n):
        s = VehicleState(8.0, -5.0)
        h = 0.2 / n
        for _ in range(n):
            s = rk4_step(s, 6.0, h, p)
        return np.array([s.alpha, s.q])

    ref = integrate(4096)
    errs = [float(np.max(np.abs(integrate(n) - ref))) for n in (8, 16, 32, 64)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]

    rng = np.random.default_rng(3)
    alphas = rng.uniform(0.0, 20.0, size=200)
    odd_ok = all(phi_z(-a) == -phi_z(a) and phi_m(-a) == -phi_m(a) for a in alphas)

    h = 1e-3
    act = ActuatorState()
    deltas = np.empty(100_000)
    prev = act.delta
    max_rate = 0.0
    for k in range(100_000):
        act = actuator_step(act, float(rng.uniform(-60.0, 60.0)), h)
        deltas[k] = act.delta
        max_rate = max(max_rate, abs(act.delta - prev) / h)
        prev = act.delta

    print(f"step-halving orders {['%.3f' % o for o in orders]} (require >= 3.8); "
          f"odd symmetry exact: {odd_ok}; actuator fuzz 1e5 steps: "
          f"max |delta| {np.max(np.abs(deltas)):.3f} (<= 20), "
          f"max rate {max_rate:.1f} deg/s (<= 600)")
    assert min(orders) >= 3.8
    assert odd_ok
    assert np.max(np.abs(deltas)) <= 20.0
    assert max_rate <= 600.0 + 1e-9


# --------------------------------------------------------- incremental model

def test_model_recovery_and_control_gain_sign():
    rng = np.random.default_rng(5)
    model = IncrementalModel(dt=1e-3)
    truth = (0.93, 0.004, 0.988, -0.022)  # (f1, g1, f2, g2)
    for _ in range(300):
        d_a, d_q, d_d = rng.normal(size=3)
        model.update(IncrementRecord(
            d_a, d_q, d_d,
            truth[0] * d_a + truth[1] * d_q,
            truth[2] * d_q + truth[3] * d_d))
    est = (model.F1, model.G1, model.F2, model.G2)
    worst = max(abs(e - t) for e, t in zip(est, truth))

    plant = IncrementalModel(dt=1e-3)
    recs, hist = simulate_increments(2000, dt=1e-3)  # 2 s of excitation
    for rec in recs:
        plant.update(rec)
    a_end, q_end, d_end = hist[-1]
    _, _, _, g2_true = analytic_jacobians(VehicleState(a_end, q_end), d_end, 1e-3,
                                          PhysicalParams())

    print(f"synthetic recovery worst coefficient error {worst:.3g} (require <= 1e-8); "
          f"plant-identified control gain {plant.G2:.5g} "
          f"(require < 0; analytic {g2_true:.5g})")
    assert worst <= 1e-8
    assert plant.G2 < 0.0


# --------------------------------------------------------------------- filter

def test_filter_frequency_response():
    rows = []
    for omega in (4.0, 20.0, 100.0):
        measured = measure_gain(omega)
        expected = analytic_gain(omega)
        rows.append((omega, measured, expected, abs(measured / expected - 1.0)))

    filt = CommandFilter()
    dc_exact = all(filt.step(5.0, 1e-3) == 5.0 for _ in range(1000))

    detail = "; ".join(f"w={w:g}: {m:.4f} vs {e:.4f} (err {r:.2%})"
                       for w, m, e, r in rows)
    print(f"filter gains {detail} (require within 5%); "
          f"DC hold exact: {dc_exact}")
    for _, _, _, r in rows:
        assert r <= 0.05
    assert dc_exact


# ------------------------------------------------------------------- spectra

def test_fft_parseval_and_peak():
    rng = np.random.default_rng(11)
    n = 1023  # odd length: every non-DC bin has a mirrored partner
    x = rng.normal(size=n)
    spec = fft_magnitude(x, fs=1000.0)
    e_freq = (spec.magnitudes[0] ** 2 + 2.0 * np.sum(spec.magnitudes[1:] ** 2)) / n
    e_time = float(np.sum(x ** 2))
    parseval_err = abs(e_freq - e_time) / e_time

    m = 1000
    t = np.arange(m) / 1000.0
    tone = np.sin(2.0 * math.pi * 50.0 * t)
    peak_spec = fft_magnitude(tone, fs=1000.0)
    k = int(np.argmax(peak_spec.magnitudes[1:])) + 1
    peak_err = abs(peak_spec.magnitudes[k] - m / 2.0)

    print(f"Parseval relative error {parseval_err:.3g} (require <= 1e-9); "
          f"integer-bin tone: peak at {peak_spec.freqs[k]:.1f} Hz, "
          f"|peak - n/2| = {peak_err:.3g} (require <= 1e-6)")
    assert parseval_err <= 1e-9
    assert peak_spec.freqs[k] == 50.0
    assert peak_err <= 1e-6


# ------------------------------------------- closed-loop behavior, 40 s runs

def test_ts_tracking_error_settles(nominal_traces):
    rms = []
    statuses = []
    for seed in SEEDS:
        tr = nominal_traces[("ts", seed)]
        sl = tr.time_slice(20.0, 40.0)
        rms.append(float(np.sqrt(np.mean(tr["e_alpha"][sl] ** 2))))
        statuses.append(tr.status)
    med = float(np.median(rms))
    print(f"settled RMS tracking error per seed {['%.3f' % r for r in rms]} deg, "
          f"median {med:.3f} (require < 1.0); statuses {statuses}")
    assert all(s == "completed" for s in statuses)
    assert med < 1.0


def test_ts_reduces_command_increments(nominal_traces):
    med = {}
    for mode in ("vanilla", "ts"):
        per_seed = [float(np.mean(np.abs(np.diff(nominal_traces[(mode, s)]["q_ref_raw"]))))
                    for s in SEEDS]
        med[mode] = float(np.median(per_seed))
    ratio = med["vanilla"] / med["ts"]

    late_max = []
    for s in SEEDS:
        tr = nominal_traces[("ts", s)]
        sl = tr.time_slice(10.0)
        late_max.append(float(np.max(np.abs(np.diff(tr["q_ref_raw"][sl])))))
    med_late = float(np.median(late_max))

    print(f"mean |rate-command increment|: vanilla {med['vanilla']:.4g}, "
          f"ts {med['ts']:.4g}, ratio {ratio:.2f} (require >= 2.0); "
          f"median max increment after 10 s {med_late:.3f} deg/s (require <= 0.75)")
    assert ratio >= 2.0
    assert med_late <= 0.75


def test_ts_keeps_preactivation_in_linear_band(nominal_traces):
    fracs = [float(np.mean(np.abs(nominal_traces[("ts", s)]["z_out_high"]) <= 2.0))
             for s in SEEDS]
    med = float(np.median(fracs))
    print(f"fraction of steps with outer-actor pre-activation in [-2, 2]: "
          f"{['%.3f' % f for f in fracs]}, median {med:.3f} (require >= 0.95)")
    assert med >= 0.95


def test_filter_attenuates_band_energy(nominal_traces):
    reductions = []
    for s in SEEDS:
        e_raw = band_energy(
            fft_magnitude(nominal_traces[("ts", s)]["q_ref_filt"], fs=1000.0),
            10.0, 40.0)
        e_filt = band_energy(
            fft_magnitude(nominal_traces[("ts_filter", s)]["q_ref_filt"], fs=1000.0),
            10.0, 40.0)
        reductions.append(10.0 * math.log10(e_raw / e_filt))
    med = float(np.median(reductions))
    print(f"10-40 Hz energy reduction with the command filter: "
          f"{['%.1f' % r for r in reductions]} dB, median {med:.1f} "
          f"(require >= 6.0)")
    assert med >= 6.0


def test_runtime_within_minutes(nominal_traces):
    walls = sorted(tr.wall_time for tr in nominal_traces.values())
    print(f"wall time per 40 s run: min {walls[0]:.1f} s, "
          f"median {walls[len(walls) // 2]:.1f} s, max {walls[-1]:.1f} s "
          f"(require max < 300 s)")
    assert walls[-1] < 300.0


def test_identical_config_gives_identical_files(nominal_traces, tmp_path):
    fresh = run(RunConfig(mode="ts", seed=0))
    first = tmp_path / "first"
    second = tmp_path / "second"
    nominal_traces[("ts", 0)].save(first)
    fresh.save(second)
    same = {name: (first / name).read_bytes() == (second / name).read_bytes()
            for name in ("trace.csv", "summary.json", "params.csv")}
    print(f"independent identical-config runs produce byte-identical files: {same}")
    assert all(same.values())
