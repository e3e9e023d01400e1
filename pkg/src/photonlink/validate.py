"""Closed-form-versus-oracle check battery.

Every analytic result in the package has an independent route: defining
integrals by quadrature, exhaustive enumeration, or event-driven Monte
Carlo.  The battery runs them side by side and reports one line per
check; the CLI `validate` command exits nonzero if any fails.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from . import detection, link, saturation
from .physics import (
    CycleTiming,
    DeviceParams,
    Environment,
    PulseProfile,
    ground_return_prob,
    single_photon_excitation,
    single_photon_excitation_double_integral,
    thermal_photon_rate,
    transition_kernels,
)
from .rng import substream

__all__ = ["CheckResult", "run_checks", "CHECKS"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name: str, passed: bool, detail: str) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), detail=detail)


def check_trivial_identities(level: str, seed: int) -> CheckResult:
    tol = 1e-12
    vals = {
        "E_S(0)": saturation.survivor_moments_given_count(0, 0.1, 1.0).mean,
        "E_S(1)-1": saturation.survivor_moments_given_count(1, 0.1, 1.0).mean - 1.0,
        "D_S(1)-1": saturation.survivor_moments_given_count(1, 0.1, 1.0).second_moment - 1.0,
        "E_S(7)|tau=0 - 7": saturation.survivor_moments_given_count(7, 0.0, 1.0).mean - 7.0,
        "delta(0)": saturation.delta_lambda(0.0, 0.1, 1.0),
        "f_b(0)": ground_return_prob(0.0, DeviceParams(kappa=8.0, gamma=1.0)),
        "f2(0)": transition_kernels(0.0, 0.0, DeviceParams(kappa=8.0, gamma=1.0))[1],
        "n_e(T_e=0)": thermal_photon_rate(Environment(t_e=0.0, nu=1e10, cycles_per_symbol=800)),
    }
    bad = {k: v for k, v in vals.items() if abs(v) > tol}
    return _result("trivial-identities", not bad, f"max |err| {max(abs(v) for v in vals.values()):.2e}")


def check_ground_return_quadrature(level: str, seed: int) -> CheckResult:
    worst = 0.0
    for kappa, gamma, t in [
        (8.0, 1.0, 1.0),
        (8.0, 2.0 * (1 - 1e-4), 0.7),
        (8.0, 2.0 * (1 + 1e-4), 0.7),
        (8.0, 2.0, 0.7),
        (2 * np.pi * 1e9, 2 * np.pi * 1e5, 230e-9),
    ]:
        dev = DeviceParams(kappa=kappa, gamma=gamma)
        closed = ground_return_prob(t, dev)
        numeric, _ = integrate.quad(
            lambda s: (kappa / 4) * math.exp(-kappa * s / 4) * (1 - math.exp(-gamma * (t - s))),
            0.0,
            t,
            epsabs=1e-14,
            epsrel=1e-12,
        )
        worst = max(worst, abs(closed - numeric) / max(abs(numeric), 1e-30))
    return _result("ground-return-quadrature", worst < 1e-8, f"max rel err {worst:.2e}")


def check_single_photon_quadrature(level: str, seed: int) -> CheckResult:
    worst = 0.0
    for shape in ("rectangular", "gaussian"):
        pulse = PulseProfile(l=2.0, shape=shape)
        for kappa, gamma, t_obs in [(8.0, 1.0, 1.5), (8.0, 2.0, 1.1), (3.0, 0.0, 2.0)]:
            dev = DeviceParams(kappa=kappa, gamma=gamma)
            a = single_photon_excitation(pulse, t_obs, dev)
            b = single_photon_excitation_double_integral(pulse, t_obs, dev)
            worst = max(worst, abs(a - b) / max(abs(b), 1e-30))
    return _result("single-photon-quadrature", worst < 1e-8, f"max rel err {worst:.2e}")


def check_dp_vs_enumeration(level: str, seed: int) -> CheckResult:
    rng = substream(seed, 0x01)
    worst = 0.0
    worst_total = 0.0
    for i in range(30):
        n = int(rng.integers(1, 7))
        t_c = float(rng.uniform(0.5, 2.0))
        times = np.sort(rng.random(n) * t_c)
        dev = DeviceParams(kappa=float(rng.uniform(2, 40)), gamma=float(rng.uniform(0.0, 5.0)))
        trace = detection.ArrivalTrace(times, t_c)
        dp = detection.excitation_given_arrivals(trace, dev)
        en = detection.excitation_given_arrivals_bruteforce(trace, dev)
        worst = max(worst, abs(dp - en))
        total = sum(
            detection.transition_set_probability(trace, dev, [0] + [j + 1 for j, b in enumerate(mask) if b])
            for mask in itertools.product((0, 1), repeat=n - 1)
        )
        worst_total = max(worst_total, abs(total - 1.0))
    ok = worst < 1e-12 and worst_total < 1e-12
    return _result("dp-vs-enumeration", ok, f"max |dp-enum| {worst:.2e}, max |sum P(K)-1| {worst_total:.2e}")


def check_poisson_excitation_vs_mc(level: str, seed: int) -> CheckResult:
    n_points = 20 if level == "full" else 5
    replicas = 1_000_000 if level == "full" else 100_000
    mc_samples = 100_000 if level == "full" else 20_000
    rng = substream(seed, 0x02)
    worst_z = 0.0
    for i in range(n_points):
        t_c = float(rng.uniform(0.5, 2.0))
        timing = CycleTiming(t_c=t_c, delta_o=t_c * float(rng.uniform(0.01, 0.3)), t_w=t_c * 0.1)
        dev = DeviceParams(kappa=float(rng.uniform(4, 80)), gamma=float(rng.uniform(0.0, 4.0)))
        lam = float(rng.uniform(0.1, 3.0)) / t_c
        analytic = detection.excitation_poisson(lam, timing, dev, rng_seed=seed + i, mc_samples=mc_samples)
        mc = detection.mc_detector(lam, timing, dev, replicas=replicas, rng=substream(seed, 0x02, i))
        se = math.hypot(analytic.stderr, mc.excited_at_obs.stderr)
        z = abs(analytic.value - mc.excited_at_obs.value) / max(se, 1e-12)
        worst_z = max(worst_z, z)
    return _result("poisson-excitation-vs-mc", worst_z < 4.0, f"{n_points} points, max |z| {worst_z:.2f}")


def check_survivor_moments_vs_mc(level: str, seed: int) -> CheckResult:
    replicas = 1_000_000 if level == "full" else 200_000
    rng = substream(seed, 0x03)
    worst_z = 0.0
    cases_n = [(n, ratio) for n in (2, 5, 10, 20) for ratio in (4.0, 8.0, 16.0)]
    if level != "full":
        cases_n = cases_n[::3]
    for n, ratio in cases_n:
        t_c, tau = 1.0, 1.0 / ratio
        s = _survivor_counts_fixed(rng, n, tau, t_c, replicas)
        m = saturation.survivor_moments_given_count(n, tau, t_c)
        worst_z = max(worst_z, _moment_z(s, m.mean, m.second_moment, replicas))
    cases_p = [(a, ratio) for a in (0.05, 0.3, 1.0, 3.0) for ratio in (4.0, 8.0, 16.0)]
    if level != "full":
        cases_p = cases_p[::3]
    for a, ratio in cases_p:
        t_c, tau = 1.0, 1.0 / ratio
        lam = a / tau
        s = _survivor_counts_poisson(rng, lam, tau, t_c, replicas)
        m = saturation.survivor_moments_poisson(lam, tau, t_c)
        worst_z = max(worst_z, _moment_z(s, m.mean, m.second_moment, replicas))
    return _result("survivor-moments-vs-mc", worst_z < 4.0, f"max |z| {worst_z:.2f}")


def _survivor_counts_fixed(rng, n, tau, t_c, replicas, block=200_000) -> np.ndarray:
    out = np.empty(replicas)
    done = 0
    while done < replicas:
        m = min(block, replicas - done)
        t = np.sort(rng.random((m, n)) * t_c, axis=1)
        out[done : done + m] = saturation.survivor_mask(t, tau).sum(axis=1)
        done += m
    return out


def _survivor_counts_poisson(rng, lam, tau, t_c, replicas, block=100_000) -> np.ndarray:
    out = np.empty(replicas)
    done = 0
    while done < replicas:
        m = min(block, replicas - done)
        arr, _ = saturation._poisson_sorted_arrivals(rng, lam * t_c, m, t_c)
        out[done : done + m] = saturation.survivor_mask(arr, tau).sum(axis=1)
        done += m
    return out


def _moment_z(s: np.ndarray, mean: float, second: float, replicas: int) -> float:
    z1 = abs(s.mean() - mean) / max(s.std(ddof=1) / math.sqrt(replicas), 1e-12)
    s2 = s * s
    z2 = abs(s2.mean() - second) / max(s2.std(ddof=1) / math.sqrt(replicas), 1e-12)
    return max(z1, z2)


def check_lemma_series(level: str, seed: int) -> CheckResult:
    worst = 0.0
    from scipy import stats

    for alpha, lam in [(0.5, 2.0), (1.0, 3.0), (0.9, 0.0), (0.2, 7.0)]:
        closed = saturation.poisson_weighted_moments(alpha, lam)
        n = np.arange(0, 200)
        w = stats.poisson.pmf(n, lam)
        series = (
            float(np.sum(w * alpha**n)),
            float(np.sum(w * n * alpha**n)),
            float(np.sum(w * n * n * alpha**n)),
        )
        worst = max(worst, max(abs(a - b) for a, b in zip(closed, series)))
    return _result("lemma-series", worst < 1e-12, f"max |err| {worst:.2e}")


def check_theorem2_vs_mixture(level: str, seed: int) -> CheckResult:
    worst = 0.0
    for a, ratio in [(0.05, 4.0), (0.5, 8.0), (2.0, 16.0), (5.0, 10.0)]:
        tau, t_c = 1.0, ratio
        lam = a / tau
        big = lam * t_c
        x = [1.0 - k * tau / t_c for k in (1, 2, 3, 4)]
        e = [saturation.poisson_weighted_moments(xk, big) for xk in x]
        mean_mix = 2 * e[0][0] + e[1][1] - 2 * e[1][0]
        second_mix = (
            2 * e[0][0]
            + e[1][1]
            + 4 * e[1][0]
            + e[3][2]
            - 7 * e[3][1]
            + 12 * e[3][0]
            + 6 * e[2][1]
            - 18 * e[2][0]
        )
        m = saturation.survivor_moments_poisson(lam, tau, t_c)
        worst = max(worst, abs(mean_mix - m.mean), abs(second_mix - m.second_moment))
    return _result("theorem2-vs-mixture", worst < 1e-10, f"max |err| {worst:.2e}")


def check_pair_survival_pieces(level: str, seed: int) -> CheckResult:
    ns = (2, 3, 7) if level == "full" else (2, 3)
    worst = 0.0
    worst_comb = 0.0
    for n in ns:
        for ratio in (0.05, 0.2):
            p = saturation.pair_survival_integrals(n, ratio, 1.0)
            for num, clo in zip(p.numeric, p.closed):
                worst = max(worst, abs(num - clo) / max(abs(clo), 1e-30))
            m = saturation.survivor_moments_given_count(n, ratio, 1.0)
            recombined = n * (m.mean / n) + n * (n - 1) * p.pair_survival_numeric
            worst_comb = max(worst_comb, abs(recombined - m.second_moment) / m.second_moment)
    ok = worst < 1e-8 and worst_comb < 1e-9
    return _result("pair-survival-pieces", ok, f"max piece rel {worst:.2e}, recombination rel {worst_comb:.2e}")


def check_delta_sign_structure(level: str, seed: int) -> CheckResult:
    ok = True
    details = []
    for ratio in (4.0, 10.0, 100.0):
        tau, t_c = 1.0, ratio
        a_grid = np.geomspace(1e-3, 50.0, 1000)
        deltas = np.array([saturation.delta_lambda(a / tau, tau, t_c) for a in a_grid])
        signs = np.sign(deltas)
        changes = int(np.sum(np.abs(np.diff(signs)) > 0))
        lam0 = saturation.find_lambda0(tau, t_c)
        below = deltas[a_grid < lam0 * tau]
        above = deltas[a_grid > lam0 * tau]
        this_ok = changes == 1 and np.all(below > 0) and np.all(above < 0)
        ok = ok and this_ok
        details.append(f"T/tau={ratio}: changes={changes}, lam0*tau={lam0 * tau:.4f}")
    return _result("delta-sign-structure", ok, "; ".join(details))


def _ref_spec(mc_samples: int = 20_000, seed: int = 0) -> link.HmmSpec:
    dev = DeviceParams(kappa=2 * np.pi * 1e9, gamma=2 * np.pi * 1e5)
    timing = CycleTiming(230e-9, 35e-9, 48e-9)
    env = Environment(t_e=8.0, nu=1e10, cycles_per_symbol=800)
    cfg = link.LinkConfig(dev=dev, timing=timing, env=env, mc_samples=mc_samples)
    return cfg.build_spec(-148.3, seed=seed)


def check_hmm_emission_normalization(level: str, seed: int) -> CheckResult:
    spec_full = _ref_spec(seed=seed)
    worst_sum = 0.0
    worst_pair = 0.0
    rng = substream(seed, 0x04)
    for n in (1, 3, 8, 12):
        spec = link.HmmSpec(kernel0=spec_full.kernel0, kernel1=spec_full.kernel1, n_cycles=n)
        probs, frames = spec.enumerate_block_probs()
        worst_sum = max(worst_sum, float(np.abs(probs.sum(axis=0) - 1.0).max()))
        sub = frames[rng.integers(0, len(frames), size=min(64, len(frames)))]
        a = spec.block_emission_logprob(sub)
        b = spec.block_emission_logprob_matrix(sub)
        finite = np.isfinite(a) & np.isfinite(b)
        worst_pair = max(worst_pair, float(np.abs(a[finite] - b[finite]).max()))
        if not np.array_equal(np.isfinite(a), np.isfinite(b)):
            worst_pair = math.inf
    ok = worst_sum < 1e-12 and worst_pair < 1e-10
    return _result("hmm-emission-normalization", ok, f"max |sum-1| {worst_sum:.2e}, paths diff {worst_pair:.2e}")


def check_viterbi_bruteforce(level: str, seed: int) -> CheckResult:
    base = _ref_spec(seed=seed)
    rng = substream(seed, 0x05)
    mismatches = 0
    for trial in range(40):
        n = int(rng.integers(1, 4))
        t = int(rng.integers(1, 4))
        spec = link.HmmSpec(kernel0=base.kernel0, kernel1=base.kernel1, n_cycles=n)
        frames = (rng.random((t, n)) < rng.uniform(0.1, 0.9)).astype(np.int64)
        got = link.viterbi_decode(spec, frames)
        emis = spec.block_emission_logprob(frames)
        log_a = np.log(spec.transition)
        log_pi = np.log(spec.initial + 1e-300)
        best_score, best_path = -math.inf, None
        for path in itertools.product(range(4), repeat=t):
            score = log_pi[path[0]] + emis[0, path[0]]
            for u in range(1, t):
                score += log_a[path[u - 1], path[u]] + emis[u, path[u]]
            if score > best_score + 1e-12:
                best_score, best_path = score, path
        want = np.array([p % 2 for p in best_path])
        if not np.array_equal(got, want):
            mismatches += 1
    return _result("viterbi-bruteforce", mismatches == 0, f"{mismatches} mismatches over 40 trials")


def check_forward_total_probability(level: str, seed: int) -> CheckResult:
    base = _ref_spec(seed=seed)
    worst = 0.0
    for n, t in [(2, 2), (3, 2), (2, 3), (4, 3)]:
        spec = link.HmmSpec(kernel0=base.kernel0, kernel1=base.kernel1, n_cycles=n)
        total = 0.0
        for seq in itertools.product(range(2**n), repeat=t):
            frames = ((np.array(seq)[:, None] >> np.arange(n)[None, ::-1]) & 1).astype(np.int64)
            total += 2.0 ** float(link.forward_loglik(spec, frames).sum())
        worst = max(worst, abs(total - 1.0))
    return _result("forward-total-probability", worst < 1e-10, f"max |sum-1| {worst:.2e}")


def check_fit_recovery(level: str, seed: int) -> CheckResult:
    xs = np.geomspace(100.0, 1e5, 9)
    ys = 1.457 * xs**1.132 - 0.8766
    fit = saturation.fit_cutoff_curve(list(zip(xs, ys)))
    err = max(abs(fit.a - 1.457), abs(fit.b - 1.132), abs(fit.c + 0.8766))
    rng = substream(seed, 0x06)
    noisy = ys * (1.0 + 0.05 * rng.standard_normal(ys.size))
    fit_noisy = saturation.fit_cutoff_curve(list(zip(xs, noisy)))
    ok = err < 1e-6 and abs(fit_noisy.b - 1.132) < 0.05
    return _result("fit-recovery", ok, f"exact err {err:.2e}, noisy b {fit_noisy.b:.4f}")


def check_kernel_vs_mc_detector(level: str, seed: int) -> CheckResult:
    replicas = 1_000_000 if level == "full" else 200_000
    dev = DeviceParams(kappa=2 * np.pi * 1e9, gamma=2 * np.pi * 1e5)
    timing = CycleTiming(230e-9, 35e-9, 48e-9)
    env = Environment(t_e=8.0, nu=1e10, cycles_per_symbol=800)
    cfg = link.LinkConfig(dev=dev, timing=timing, env=env, mc_samples=50_000)
    spec = cfg.build_spec(-150.0, seed=seed)
    worst_z = 0.0
    for sym, kern in ((0, spec.kernel0), (1, spec.kernel1)):
        for entry, flag in ((0, False), (1, True)):
            st = detection.mc_detector(
                kern.rate, timing, dev, enter_excited=flag, replicas=replicas,
                rng=substream(seed, 0x07, sym, entry),
            )
            p1 = kern.bit_given_entry[entry, 1]
            z = abs(st.readout_bit.value - p1) / max(st.readout_bit.stderr, 1e-12)
            worst_z = max(worst_z, z)
    return _result("kernel-vs-mc-detector", worst_z < 4.0, f"max |z| {worst_z:.2f}")


def check_saturation_negligible_low_power(level: str, seed: int) -> CheckResult:
    dev = DeviceParams(kappa=2 * np.pi * 1e9, gamma=2 * np.pi * 1e5)
    timing = CycleTiming(230e-9, 35e-9, 48e-9)
    replicas = 1_000_000 if level == "full" else 200_000
    worst = 0.0
    for mean in (0.02, 0.1):
        lam = mean / timing.t_c
        gap, sat = saturation.saturation_gap(
            lam, timing, dev, replicas=replicas, rng=substream(seed, 0x08, int(mean * 1000))
        )
        # the paired gap must sit far inside two unpaired Monte Carlo
        # standard errors of the saturated estimate itself
        unpaired_se = math.sqrt(max(sat.value * (1 - sat.value), 1e-12) / replicas)
        worst = max(worst, (abs(gap.value) + 2 * gap.stderr) / (2 * unpaired_se))
    return _result(
        "saturation-negligible-low-power", worst < 1.0, f"max (|gap|+2se)/(2 mc se) {worst:.3f}"
    )


CHECKS: tuple = (
    check_trivial_identities,
    check_ground_return_quadrature,
    check_single_photon_quadrature,
    check_dp_vs_enumeration,
    check_lemma_series,
    check_theorem2_vs_mixture,
    check_pair_survival_pieces,
    check_delta_sign_structure,
    check_fit_recovery,
    check_hmm_emission_normalization,
    check_viterbi_bruteforce,
    check_forward_total_probability,
    check_kernel_vs_mc_detector,
    check_poisson_excitation_vs_mc,
    check_survivor_moments_vs_mc,
    check_saturation_negligible_low_power,
)


def run_checks(level: str = "quick", seed: int = 0, names: Optional[list] = None) -> list:
    """Run the battery; returns one CheckResult per check."""
    if level not in ("quick", "full"):
        raise ValueError("level must be quick or full")
    results = []
    for fn in CHECKS:
        name = fn.__name__.removeprefix("check_").replace("_", "-")
        if names and name not in names:
            continue
        results.append(fn(level, seed))
    return results
