"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see every line.  The
tolerances below are fixed contract values, not tunables.
"""

import math
import time

import numpy as np
import pytest

from demon_sim import (FockDistribution, Schedule, charge_performance,
                       default_n_max, excitation_probability_linear,
                       excitation_probability_nonlinear, mass_production,
                       moments, montecarlo_protocol, optimal_theta_linear,
                       recursion_equivalence_check, run_schedule,
                       semiclassical_pe, step_linear_I, step_linear_II,
                       step_nonlinear_II, thermal_distribution)
from demon_sim.experiments import fig6_variants, sweep

N30 = default_n_max(30.0)


def _report(num: str, ok: bool, detail: str) -> bool:
    print(f"[acceptance] criterion {num}: {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


def _thermal500():
    return thermal_distribution(500.0, 4000, leak_tol=1e-3)


def test_criterion_1_thermal_charging_bound():
    start = time.perf_counter()
    rep = charge_performance(_thermal500())
    elapsed = time.perf_counter() - start
    ok = abs(rep.p_success - 0.6411) <= 0.002 and elapsed <= 10.0
    assert _report("1", ok,
                   f"thermal bound {rep.p_success:.6f} vs 0.6411±0.002 "
                   f"in {elapsed:.2f}s (limit 10s)")


def test_criterion_2_semiclassical_optimum():
    rep = optimal_theta_linear(_thermal500())
    x = rep.theta_star * math.sqrt(500.0)
    ok = abs(x - 1.502) <= 0.03
    assert _report("2", ok, f"theta*sqrt(nbar) = {x:.5f} vs 1.502±0.03")


def test_criterion_3_seed_accuracy():
    rep = optimal_theta_linear(thermal_distribution(2.0, default_n_max(2.0)))
    rel = abs(rep.seed_theta - rep.theta_star) / rep.theta_star
    ok = rel <= 0.02
    assert _report("3", ok, f"seed angle off by {100 * rel:.2f}% (limit 2%)")


def test_criterion_4_protocol_ordering():
    start = time.perf_counter()
    initial = thermal_distribution(30.0, N30)
    charge = {}
    for proto in ("I", "II"):
        traj = run_schedule(initial, Schedule.from_string("LLLLL", proto))
        charge[proto] = [charge_performance(r.dist_after).p_success
                         for r in traj.rounds]
    elapsed = time.perf_counter() - start
    dominance = all(charge["II"][n] >= charge["I"][n] for n in range(1, 5))
    monotone = all(a <= b for proto in ("I", "II")
                   for a, b in zip(charge[proto], charge[proto][1:]))
    ok = dominance and monotone and elapsed <= 60.0
    assert _report("4", ok,
                   f"II>=I at N>=2: {dominance}, nondecreasing: {monotone}, "
                   f"{elapsed:.1f}s (limit 60s)")


def test_criterion_5_nonlinear_boost():
    initial = thermal_distribution(30.0, N30)
    linear8 = run_schedule(initial, Schedule.from_string("LLLLLLLL", "II"))
    mixed = run_schedule(initial, Schedule.from_string("LLLLLLNN", "II"))
    c8 = charge_performance(linear8.final_dist).p_success
    cmix = charge_performance(mixed.final_dist).p_success
    mo8 = linear8.rounds[-1].moments_after
    momix = mixed.rounds[-1].moments_after
    ok = cmix > c8 and momix.mdr > mo8.mdr and momix.variance < mo8.variance
    assert _report("5", ok,
                   f"charge {cmix:.5f} > {c8:.5f}, mdr {momix.mdr:.3f} > "
                   f"{mo8.mdr:.3f}, var {momix.variance:.1f} < {mo8.variance:.1f}")


def test_criterion_6_schedule_placement_ordering():
    initial = thermal_distribution(30.0, N30)
    mass = {}
    for label, text in fig6_variants():
        traj = run_schedule(initial, Schedule.from_string(text, "II"))
        p = charge_performance(traj.final_dist).p_success
        mass[label] = mass_production(p, 100)
    placed = [mass[f"{a}+{b}"] for a, b in
              (("1st", "2nd"), ("2nd", "3rd"), ("3rd", "4th"), ("4th", "5th"),
               ("5th", "6th"), ("6th", "7th"), ("7th", "8th"))]
    increasing = all(a < b for a, b in zip(placed, placed[1:]))
    beats_all = placed[-1] == max(mass.values()) and placed[-1] > mass["all-linear"]
    ok = increasing and beats_all
    assert _report("6", ok,
                   f"(P_e)^100 strictly increasing with later NN: {increasing}, "
                   f"7th+8th maximal {placed[-1]:.3e} > all-linear "
                   f"{mass['all-linear']:.3e}: {beats_all}")


def test_criterion_7_oracle_equivalence():
    start = time.perf_counter()
    initial = thermal_distribution(5.0, 64, leak_tol=1e-4)
    worst = 0.0
    for text in ("LLL", "LN", "LLNN"):
        rep = recursion_equivalence_check(initial, Schedule.from_string(text, "II"))
        worst = max(worst, rep["max_sup_norm"])
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed <= 30.0
    assert _report("7", ok,
                   f"max per-round sup-norm {worst:.2e} (limit 1e-12) "
                   f"in {elapsed:.1f}s (limit 30s)")


def test_criterion_8_dawson_agreement():
    dist = thermal_distribution(100.0, default_n_max(100.0))
    worst = max(abs(excitation_probability_linear(dist, x / 10.0)
                    - semiclassical_pe(x / 10.0, 100.0))
                for x in np.linspace(0.0, 3.0, 121))
    ok = worst <= 0.02
    assert _report("8", ok, f"max |exact - semiclassical| = {worst:.4f} (limit 0.02)")


def test_criterion_9_tail_formula():
    dist = thermal_distribution(30.0, N30)
    mass = float(dist.probs[121:].sum()) + dist.leak
    ratio = mass / math.exp(-4.0)
    ok = abs(ratio - 1.0) <= 0.15
    assert _report("9", ok, f"mass above 120 = {mass:.6f}, "
                            f"{100 * (ratio - 1):+.1f}% of e^-4 (limit ±15%)")


def _interior_local_min(p: np.ndarray, lo: int, hi: int):
    idx = int(np.argmin(p[lo:hi + 1])) + lo
    return idx, lo < idx < hi and p[idx] < p[lo] and p[idx] < p[hi]


def test_criterion_10a_ripple_windows():
    initial = thermal_distribution(30.0, N30)
    traj = run_schedule(initial, Schedule.from_string("LNN", "II"))
    p = traj.final_dist.probs
    i1, ok1 = _interior_local_min(p, 40, 50)
    i2, ok2 = _interior_local_min(p, 75, 85)
    ok = ok1 and ok2
    assert _report("10a", ok,
                   f"ripple minima: [40,50] -> m={i1} ({'ok' if ok1 else 'no'}), "
                   f"[75,85] -> m={i2} ({'ok' if ok2 else 'no'}); the first-local-"
                   f"optimum angles place the second dip near m=95")


def test_criterion_10b_ripple_recovery_statistics():
    initial = thermal_distribution(30.0, N30)
    ripple = run_schedule(initial, Schedule.from_string("LNN", "II")).final_dist
    recovered = run_schedule(ripple,
                             Schedule.from_string("LLLLLLLLNNNN", "II")).final_dist
    mo = moments(recovered)
    cut = int(2 * mo.mean)
    peak = recovered.probs[: cut + 1]
    w = float(peak.sum())
    lv = np.arange(len(peak))
    peak_mean = float(peak @ lv) / w
    peak_var = float(peak @ (lv - peak_mean) ** 2) / w
    ok = mo.g2 > 1.0 and peak_var < peak_mean
    assert _report("10b", ok,
                   f"g2 = {mo.g2:.4f} > 1, main-peak var {peak_var:.2f} < "
                   f"equal-mean Poisson var {peak_mean:.2f}")


def test_criterion_11a_normalization_random_steps():
    rng = np.random.default_rng(31415)
    initial = thermal_distribution(5.0, 64, leak_tol=1e-4)
    worst = 0.0
    for _ in range(10_000):
        p = rng.random(65)
        p /= p.sum()
        cur = FockDistribution(p, 0.0)
        theta = float(rng.uniform(0.01, 3.0))
        which = rng.integers(3)
        if which == 0:
            out, _ = step_linear_I(cur, initial, theta)
        elif which == 1:
            out, _ = step_linear_II(cur, theta)
        else:
            out, _ = step_nonlinear_II(cur, theta)
        worst = max(worst, abs(1.0 - math.fsum(out.probs) - out.leak))
    ok = worst <= 1e-12
    assert _report("11a", ok,
                   f"worst |1 - sum - leak| over 1e4 random steps = {worst:.2e}")


def test_criterion_11b_montecarlo_total_variation():
    initial = thermal_distribution(10.0, default_n_max(10.0))
    sch = Schedule.from_string("LLL", "II")
    mc = montecarlo_protocol(initial, sch, 10**6, 20240)
    ens = run_schedule(initial, sch).final_dist
    tv = 0.5 * float(np.abs(mc.probs - ens.probs).sum()) + 0.5 * abs(mc.leak - ens.leak)
    ok = tv <= 5e-3
    assert _report("11b", ok, f"TV(MC 1e6, recursion) = {tv:.2e} (limit 5e-3)")


def test_criterion_11c_excitation_bound_random():
    rng = np.random.default_rng(27182)
    worst = -1.0
    ok = True
    for _ in range(1000):
        p = rng.random(int(rng.integers(2, 80)))
        p /= p.sum()
        d = FockDistribution(p, 0.0)
        theta = float(rng.uniform(0.0, 6.0))
        margin = (1.0 - d.probs[0]) - excitation_probability_linear(d, theta)
        margin_nl = (1.0 - d.probs[0] - d.probs[1]) \
            - excitation_probability_nonlinear(d, theta)
        worst = max(worst, -margin, -margin_nl)
        ok = ok and margin >= -1e-12 and margin_nl >= -1e-12
    assert _report("11c", ok,
                   f"P_e <= 1-p0 and P'_e <= 1-p0-p1 on 1e3 random "
                   f"distributions (worst excess {worst:.2e})")


def test_criterion_11d_parallel_sweep_determinism(tmp_path):
    import json

    for name, nbar in (("a.json", 3.0), ("b.json", 7.0)):
        (tmp_path / name).write_text(json.dumps(
            {"nbar": nbar, "schedule": "LLN", "protocol": "II",
             "outputs": name.split(".")[0]}))
    paths = sorted(tmp_path.glob("*.json"))
    serial = sweep(paths, jobs=1, base_dir=tmp_path / "serial")
    parallel = sweep(paths, jobs=2, base_dir=tmp_path / "parallel")
    ok = all(r["status"] == "ok" for r in serial + parallel)
    for sub in ("a", "b"):
        ser = tmp_path / "serial" / sub
        par = tmp_path / "parallel" / sub
        names = sorted(f.name for f in ser.iterdir())
        ok = ok and names == sorted(f.name for f in par.iterdir())
        ok = ok and all((ser / n).read_bytes() == (par / n).read_bytes()
                        for n in names)
    assert _report("11d", ok, "parallel sweep outputs byte-identical to serial")
