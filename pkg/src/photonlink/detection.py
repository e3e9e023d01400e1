"""Excitation and detection probabilities under Poisson photon arrival.

Two independent routes are kept side by side on purpose: the analytic
route (renewal dynamic program over transition photons, mixed over the
Poisson count) and an event-driven Monte Carlo of the raw two-clock
process.  They are compared against each other in the validation suite.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .physics import CycleTiming, DeviceParams, excited_kernel, ground_return_prob
from .report import Estimate, SweepReport
from .rng import substream

__all__ = [
    "ArrivalTrace",
    "DetectorStats",
    "StageProbabilities",
    "excitation_given_arrivals",
    "excitation_given_arrivals_bruteforce",
    "transition_set_probability",
    "excitation_given_count",
    "ConditionalExcitationTable",
    "excitation_poisson",
    "mc_detector",
    "stage_probabilities",
    "miss_probability_sweep",
    "MISS_SWEEP_COLUMNS",
]

_DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class ArrivalTrace:
    """Time-ordered photon arrival instants within one capture window."""

    times: np.ndarray
    t_c: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if not self.t_c > 0:
            raise ValueError("t_c must be > 0")
        if times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ValueError("arrival times must be nondecreasing")
            if times[0] < 0 or times[-1] > self.t_c:
                raise ValueError("arrival times must lie in [0, t_c]")

    def __len__(self) -> int:
        return int(self.times.size)


def _dp_batch(times: np.ndarray, t_c: float, dev: DeviceParams) -> np.ndarray:
    """Renewal DP over a batch of traces, all with the same photon count.

    times has shape (m, n), rows sorted.  W[:, j] is the probability that
    photon j causes a transition and no photon between the previous
    transition photon and j does; the factor for a step from transition
    photon i to j is f_b(t_j - t_i) - f_b(t_{j-1} - t_i).  The excited
    weight of the last transition photon closes the sum.
    """
    m, n = times.shape
    if n == 0:
        return np.zeros(m)
    kappa, gamma = dev.kappa, dev.gamma
    W = np.zeros((m, n))
    W[:, 0] = 1.0
    for j in range(1, n):
        dt_g = times[:, j : j + 1] - times[:, :j]
        dt_e = times[:, j - 1 : j] - times[:, :j]
        step = ground_return_prob(dt_g, dev) - ground_return_prob(dt_e, dev)
        W[:, j] = np.einsum("ij,ij->i", W[:, :j], step)
    tail = excited_kernel(t_c - times, kappa, gamma)
    return np.clip(np.einsum("ij,ij->i", W, tail), 0.0, 1.0)


def excitation_given_arrivals(trace: ArrivalTrace, dev: DeviceParams) -> float:
    """Excitation probability at the end of capture, given the exact arrivals.

    O(n^2) dynamic program; the first photon always begins a transition
    (the system enters the window in ground).
    """
    if len(trace) == 0:
        return 0.0
    return float(_dp_batch(trace.times[None, :], trace.t_c, dev)[0])


def transition_set_probability(trace: ArrivalTrace, dev: DeviceParams, k_set: Sequence[int]) -> float:
    """Probability that exactly the photons with indices k_set transition.

    Indices are 0-based, must start at 0 and be strictly increasing.
    """
    t = trace.times
    n = t.size
    k = list(k_set)
    if not k or k[0] != 0 or any(b <= a for a, b in zip(k, k[1:])) or k[-1] >= n:
        raise ValueError("k_set must start at photon 0 and increase")
    p = 1.0
    for a, b in zip(k, k[1:]):
        p *= ground_return_prob(t[b] - t[a], dev) - ground_return_prob(t[b - 1] - t[a], dev)
    # the photons after the last transition photon must all stay silent
    p *= 1.0 - ground_return_prob(t[n - 1] - t[k[-1]], dev)
    return p


def excitation_given_arrivals_bruteforce(trace: ArrivalTrace, dev: DeviceParams) -> float:
    """Exhaustive sum over all admissible transition-photon subsets.

    Exponential in the photon count; oracle for the dynamic program.
    """
    t = trace.times
    n = t.size
    if n == 0:
        return 0.0
    if n > 20:
        raise ValueError("brute force limited to 20 photons")
    kappa, gamma = dev.kappa, dev.gamma
    total = 0.0
    for mask in itertools.product((0, 1), repeat=n - 1):
        k = [0] + [i + 1 for i, b in enumerate(mask) if b]
        p = transition_set_probability(trace, dev, k)
        kp = k[-1]
        tt = trace.t_c - t[kp]
        t0 = t[n - 1] - t[kp]
        f2 = excited_kernel(tt, kappa, gamma)
        f1 = math.exp(-dev.transition_rate * t0) + excited_kernel(t0, kappa, gamma) - f2
        denom = f1 + f2
        if denom > 0:
            total += p * f2 / denom
    return total


def mean_single_photon_conditional(t_c: float, dev: DeviceParams, epsabs: float = 1e-12) -> float:
    """Mean excitation for one photon uniform on [0, t_c], by quadrature."""
    val, _ = integrate.quad(
        lambda u: float(excited_kernel(u, dev.kappa, dev.gamma)), 0.0, t_c, epsabs=epsabs, limit=200
    )
    return val / t_c


def excitation_given_count(
    n: int,
    t_c: float,
    dev: DeviceParams,
    mc_samples: int = _DEFAULT_MC_SAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> Estimate:
    """Excitation probability given exactly n uniform arrivals in [0, t_c].

    Exact for n <= 1 (quadrature); Monte Carlo over sorted uniforms for
    n >= 2, where the order-statistics integral has no closed form.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return Estimate(0.0, 0.0)
    if n == 1:
        return Estimate(mean_single_photon_conditional(t_c, dev), 0.0)
    if mc_samples < 2:
        raise ValueError("mc_samples must be >= 2")
    if rng is None:
        rng = substream(0, 0xD0)
    vals = np.empty(mc_samples)
    block = max(1, min(mc_samples, int(2e6 // max(n, 1))))
    done = 0
    while done < mc_samples:
        m = min(block, mc_samples - done)
        times = np.sort(rng.random((m, n)) * t_c, axis=1)
        vals[done : done + m] = _dp_batch(times, t_c, dev)
        done += m
    return Estimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_samples)))


def _poisson_n_max(mean: float, eps: float) -> int:
    """Smallest n with upper Poisson tail mass below eps.

    Chernoff bound first, then walk the exact survival function.
    """
    if mean <= 0:
        return 0
    n = int(mean)
    # Chernoff: P(N > n) <= exp(-mean) (e*mean/n)^n for n > mean
    while True:
        n += 1
        if n > mean and n * (1.0 + math.log(mean / n)) - mean < math.log(eps):
            break
    while n > 1 and stats.poisson.sf(n - 1, mean) < eps:
        n -= 1
    while stats.poisson.sf(n, mean) >= eps:
        n += 1
    return n


class ConditionalExcitationTable:
    """Cache of excitation probabilities conditioned on the photon count.

    Each count gets its own deterministic substream, so a sweep that
    shares the table across arrival rates is reproducible no matter in
    which order the rates are visited.
    """

    def __init__(
        self,
        t_c: float,
        dev: DeviceParams,
        mc_samples: int = _DEFAULT_MC_SAMPLES,
        seed: int = 0,
        key: Sequence[int] = (),
    ):
        self.t_c = float(t_c)
        self.dev = dev
        self.mc_samples = int(mc_samples)
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self._values: dict[int, Estimate] = {}

    def conditional(self, n: int) -> Estimate:
        if n not in self._values:
            rng = substream(self.seed, *self.key, n)
            self._values[n] = excitation_given_count(n, self.t_c, self.dev, self.mc_samples, rng)
        return self._values[n]

    def poisson_mixture(self, lam: float, delta_o: float = 0.0, eps_trunc: float = 1e-10) -> Estimate:
        """Mixture over the Poisson count, decayed from capture end to observation."""
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        if lam == 0.0:
            return Estimate(0.0, 0.0)
        mean = lam * self.t_c
        n_max = _poisson_n_max(mean, eps_trunc)
        weights = stats.poisson.pmf(np.arange(n_max + 1), mean)
        value = 0.0
        var = 0.0
        for n in range(1, n_max + 1):
            est = self.conditional(n)
            value += weights[n] * est.value
            var += (weights[n] * est.stderr) ** 2
        decay = math.exp(-self.dev.gamma * delta_o)
        return Estimate(value * decay, math.sqrt(var) * decay)


def excitation_poisson(
    lam: float,
    timing: CycleTiming,
    dev: DeviceParams,
    eps_trunc: float = 1e-10,
    rng_seed: int = 0,
    mc_samples: int = _DEFAULT_MC_SAMPLES,
) -> Estimate:
    """Excitation probability at the observation time under Poisson arrival."""
    table = ConditionalExcitationTable(timing.t_c, dev, mc_samples, seed=rng_seed)
    return table.poisson_mixture(lam, delta_o=timing.delta_o, eps_trunc=eps_trunc)


@dataclass(frozen=True)
class DetectorStats:
    """Empirical outcome frequencies of the event-driven detector."""

    excited_at_tc: Estimate
    excited_at_obs: Estimate
    readout_bit: Estimate
    reset_ok: Estimate
    replicas: int


def _binomial_estimate(successes: float, n: int) -> Estimate:
    p = successes / n
    return Estimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / n))


def mc_detector(
    lam: float,
    timing: CycleTiming,
    dev: DeviceParams,
    enter_excited: bool = False,
    replicas: int = _DEFAULT_MC_SAMPLES,
    rng: Optional[np.random.Generator] = None,
    block: int = 200_000,
) -> DetectorStats:
    """Event-driven Monte Carlo of one full detection cycle.

    Arrival times are Poisson on [0, t_c]; an available system arms on
    arrival, jumps to excited after an exp(kappa/4) wait (only jumps that
    land inside the capture stage count), and decays back after exp(gamma).
    Photons arriving before the previous transition fully completes are
    lost.  Readout succeeds with exp(-gamma t_w); reset leaves the system
    excited with p_reset_e / p_reset_g depending on the readout outcome.

    A cycle entered in the excited level (wrong reset) only decays: the
    qubit cannot be re-excited within that cycle, matching the analytic
    kernel it serves as oracle for.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if rng is None:
        rng = substream(0, 0xAC)
    t_c, t_obs = timing.t_c, timing.t_obs
    kappa, gamma = dev.kappa, dev.gamma
    mu = lam * t_c
    sums = np.zeros(4)
    done = 0
    while done < replicas:
        m = min(block, replicas - done)
        counts = rng.poisson(mu, m)
        n_max = int(counts.max()) if m else 0
        if enter_excited:
            init_decay = rng.exponential(1.0 / gamma, m) if gamma > 0 else np.full(m, np.inf)
            last_fire = np.zeros(m)
            last_decay = init_decay
            n_max = 0  # decay-only cycle, the photon stream is ignored
        else:
            avail = np.zeros(m)
            last_fire = np.full(m, np.inf)
            last_decay = np.full(m, np.inf)
        if n_max > 0:
            arrivals = rng.random((m, n_max)) * t_c
            arrivals[np.arange(n_max)[None, :] >= counts[:, None]] = np.inf
            arrivals.sort(axis=1)
            fire_w = rng.exponential(4.0 / kappa, (m, n_max))
            decay_w = rng.exponential(1.0 / gamma, (m, n_max)) if gamma > 0 else np.full((m, n_max), np.inf)
            for j in range(n_max):
                t = arrivals[:, j]
                take = (t >= avail) & (t <= t_c)
                fire = t + fire_w[:, j]
                decay = fire + decay_w[:, j]
                last_fire = np.where(take, fire, last_fire)
                last_decay = np.where(take, decay, last_decay)
                avail = np.where(take, decay, avail)
        exc_tc = (last_fire <= t_c) & (last_decay > t_c)
        exc_obs = (last_fire <= t_c) & (last_decay > t_obs)
        if dev.p0 > 0:
            exc_obs = exc_obs ^ (rng.random(m) < dev.p0)
        p_w = math.exp(-gamma * timing.t_w)
        bit = exc_obs & (rng.random(m) < p_w)
        reset_draw = rng.random(m)
        exit_excited = np.where(bit, reset_draw < dev.p_reset_e, reset_draw < dev.p_reset_g)
        sums += np.array([exc_tc.sum(), exc_obs.sum(), bit.sum(), (~exit_excited).sum()], dtype=float)
        done += m
    return DetectorStats(
        excited_at_tc=_binomial_estimate(sums[0], replicas),
        excited_at_obs=_binomial_estimate(sums[1], replicas),
        readout_bit=_binomial_estimate(sums[2], replicas),
        reset_ok=_binomial_estimate(sums[3], replicas),
        replicas=replicas,
    )


@dataclass(frozen=True)
class StageProbabilities:
    """Chained capture / readout / reset-error probabilities."""

    p_capture: Estimate
    p_readout: Estimate
    p_reset_err: Estimate

    @property
    def p_miss(self) -> Estimate:
        return Estimate(1.0 - self.p_readout.value, self.p_readout.stderr)


def stage_probabilities(
    lam: float,
    timing: CycleTiming,
    dev: DeviceParams,
    mc_samples: int = _DEFAULT_MC_SAMPLES,
    eps_trunc: float = 1e-10,
    rng_seed: int = 0,
    table: Optional[ConditionalExcitationTable] = None,
) -> StageProbabilities:
    """Capture, readout and reset-error probabilities at arrival rate lam."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if table is None:
        table = ConditionalExcitationTable(timing.t_c, dev, mc_samples, seed=rng_seed)
    p_exc = table.poisson_mixture(lam, delta_o=timing.delta_o, eps_trunc=eps_trunc)
    p_cap = Estimate(
        (1.0 - dev.p0) * p_exc.value + dev.p0 * (1.0 - p_exc.value),
        abs(1.0 - 2.0 * dev.p0) * p_exc.stderr,
    )
    p_w = math.exp(-dev.gamma * timing.t_w)
    p_out = p_cap.scaled(p_w)
    p_re = Estimate(
        dev.p_reset_g * (1.0 - p_out.value) + dev.p_reset_e * p_out.value,
        abs(dev.p_reset_e - dev.p_reset_g) * p_out.stderr,
    )
    return StageProbabilities(p_capture=p_cap, p_readout=p_out, p_reset_err=p_re)


MISS_SWEEP_COLUMNS = (
    "lambda",
    "kappa",
    "gamma",
    "t_c",
    "delta_o",
    "t_w",
    "p_capture",
    "p_readout",
    "p_miss",
    "stderr",
    "replicas",
    "seed",
)


def miss_probability_sweep(
    grid: Sequence[tuple],
    timing: CycleTiming,
    dev_template: DeviceParams,
    mc_samples: int = _DEFAULT_MC_SAMPLES,
    seed: int = 0,
    eps_trunc: float = 1e-10,
) -> SweepReport:
    """Miss probability over a grid of (lambda, kappa, gamma) points.

    Points sharing (kappa, gamma) share one conditional-excitation table,
    keyed by the first grid index of the group, so the curve along lambda
    is smooth and the result does not depend on evaluation order.
    """
    if not len(grid):
        raise ValueError("grid must be nonempty")
    report = SweepReport(columns=MISS_SWEEP_COLUMNS, meta={"seed": seed, "mc_samples": mc_samples})
    tables: dict[tuple, ConditionalExcitationTable] = {}
    for idx, (lam, kappa, gamma) in enumerate(grid):
        dkey = (float(kappa), float(gamma))
        if dkey not in tables:
            dev = DeviceParams(
                kappa=kappa,
                gamma=gamma,
                p0=dev_template.p0,
                p_reset_g=dev_template.p_reset_g,
                p_reset_e=dev_template.p_reset_e,
                alpha_sat=dev_template.alpha_sat,
            )
            tables[dkey] = ConditionalExcitationTable(
                timing.t_c, dev, mc_samples, seed=seed, key=(0xD1, idx)
            )
        table = tables[dkey]
        probs = stage_probabilities(lam, timing, table.dev, table=table, eps_trunc=eps_trunc)
        report.append(
            **{
                "lambda": float(lam),
                "kappa": float(kappa),
                "gamma": float(gamma),
                "t_c": timing.t_c,
                "delta_o": timing.delta_o,
                "t_w": timing.t_w,
                "p_capture": probs.p_capture.value,
                "p_readout": probs.p_readout.value,
                "p_miss": probs.p_miss.value,
                "stderr": probs.p_readout.stderr,
                "replicas": mc_samples,
                "seed": seed,
            }
        )
    return report
