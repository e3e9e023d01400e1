"""Closed-form single-photon and single-cycle physics of the detector.

The detector is an effective two-step stochastic machine: an absorbed
photon starts an exponential transition clock with rate kappa/4 toward
the excited level, and the excited level decays back to ground with
rate gamma.  Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.constants import h as PLANCK_H
from scipy.constants import k as BOLTZMANN_K

__all__ = [
    "DeviceParams",
    "CycleTiming",
    "PulseProfile",
    "Environment",
    "ground_return_prob",
    "transition_kernels",
    "excited_kernel",
    "single_photon_excitation",
    "single_photon_excitation_double_integral",
    "detection_prob_single",
    "thermal_photon_rate",
    "power_to_rate",
    "dbm_to_watts",
]

#: Relative half-width of the series window around a removable singularity.
_SERIES_EPS = 1e-8


def _phi(x):
    """Stable (1 - exp(-x)) / x, equal to 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_EPS
    xs = np.where(small, 1.0, x)
    out = -np.expm1(-xs) / xs
    # second-order series through the removable singularity
    return np.where(small, 1.0 - x / 2.0 + x * x / 6.0, out)


@dataclass(frozen=True)
class DeviceParams:
    """Effective detector rates and error probabilities.

    kappa and gamma are angular rates in rad/s; the effective transition
    rate of the absorption model is kappa/4 and is always derived, never
    stored.  p_reset_g / p_reset_e are the probabilities that the reset
    stage leaves the system excited given it ended the cycle in ground /
    excited; the defaults are documented modelling assumptions.
    """

    kappa: float
    gamma: float
    p0: float = 0.0
    p_reset_g: float = 0.01
    p_reset_e: float = 0.05
    alpha_sat: float = 1.14

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        for name in ("p0", "p_reset_g", "p_reset_e"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if not self.alpha_sat > 0:
            raise ValueError(f"alpha_sat must be > 0, got {self.alpha_sat}")

    @property
    def transition_rate(self) -> float:
        """Effective ground-to-excited transition rate, kappa/4."""
        return self.kappa / 4.0


@dataclass(frozen=True)
class CycleTiming:
    """Durations of one detection cycle, in seconds."""

    t_c: float
    delta_o: float
    t_w: float

    def __post_init__(self):
        for name in ("t_c", "delta_o", "t_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def period(self) -> float:
        return self.t_c + self.delta_o + self.t_w

    @property
    def t_obs(self) -> float:
        """Observation instant measured from the start of the capture stage."""
        return self.t_c + self.delta_o


@dataclass(frozen=True)
class PulseProfile:
    """Arrival-time density of a single signal photon.

    The density rho(t) lives on [-t_i, t_i] with t_i = (beta*l + w) / 2.
    Shapes: "rectangular" (uniform), "gaussian" (sigma = l/4, truncated
    and renormalized), "tabulated" (piecewise-linear through the given
    nodes, renormalized).
    """

    l: float
    shape: str = "rectangular"
    beta: float = 1.0
    w: float = 0.0
    nodes: Optional[Sequence[tuple]] = None

    def __post_init__(self):
        if self.shape not in ("rectangular", "gaussian", "tabulated"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")
        if not self.l > 0 or not self.beta > 0 or self.w < 0:
            raise ValueError("require l > 0, beta > 0, w >= 0")
        if self.shape == "tabulated":
            if not self.nodes or len(self.nodes) < 2:
                raise ValueError("tabulated pulse needs at least two (t, rho) nodes")
            t = np.asarray([n[0] for n in self.nodes], dtype=float)
            r = np.asarray([n[1] for n in self.nodes], dtype=float)
            if np.any(np.diff(t) <= 0):
                raise ValueError("tabulated nodes must have strictly increasing t")
            if np.any(r < 0):
                raise ValueError("tabulated density must be nonnegative")
            area = np.trapezoid(r, t)
            if area <= 0:
                raise ValueError("tabulated density has zero mass")
        if not self.t_i > 0:
            raise ValueError("pulse support collapsed, t_i must be > 0")

    @property
    def t_i(self) -> float:
        return (self.beta * self.l + self.w) / 2.0

    def density(self, t) -> np.ndarray:
        """Evaluate rho(t); zero outside [-t_i, t_i]."""
        t = np.asarray(t, dtype=float)
        ti = self.t_i
        inside = (t >= -ti) & (t <= ti)
        if self.shape == "rectangular":
            rho = np.full_like(t, 1.0 / (2.0 * ti))
        elif self.shape == "gaussian":
            sigma = self.l / 4.0
            rho = np.exp(-0.5 * (t / sigma) ** 2)
            # renormalize the truncated gaussian to unit mass on [-t_i, t_i]
            norm = sigma * math.sqrt(2 * math.pi) * math.erf(ti / (sigma * math.sqrt(2)))
            rho = rho / norm
        else:
            knots_t = np.asarray([n[0] for n in self.nodes], dtype=float)
            knots_r = np.asarray([n[1] for n in self.nodes], dtype=float)
            area = np.trapezoid(knots_r, knots_t)
            rho = np.interp(t, knots_t, knots_r, left=0.0, right=0.0) / area
        return np.where(inside, rho, 0.0)

    def check_normalization(self, tol: float = 1e-9) -> float:
        """Integrated mass of rho; raises if it differs from 1 beyond tol."""
        ti = self.t_i
        if self.shape == "tabulated":
            pts = sorted(set([-ti, ti] + [float(n[0]) for n in self.nodes if -ti < n[0] < ti]))
            total = sum(
                integrate.quad(lambda t: float(self.density(t)), a, b, epsabs=1e-12)[0]
                for a, b in zip(pts[:-1], pts[1:])
            )
        else:
            total = integrate.quad(lambda t: float(self.density(t)), -ti, ti, epsabs=1e-12)[0]
        if abs(total - 1.0) > tol:
            raise ValueError(f"pulse density mass {total} differs from 1 beyond {tol}")
        return total


@dataclass(frozen=True)
class Environment:
    """Receiver environment: noise temperature, carrier, cycles per symbol."""

    t_e: float
    nu: float
    cycles_per_symbol: int

    def __post_init__(self):
        if self.t_e < 0:
            raise ValueError(f"t_e must be >= 0, got {self.t_e}")
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.cycles_per_symbol < 1:
            raise ValueError(f"cycles_per_symbol must be >= 1, got {self.cycles_per_symbol}")


def excited_kernel(t, kappa: float, gamma: float):
    """P(excited at t | transition clock started at 0).

    Equals kappa/(kappa - 4*gamma) * (exp(-gamma t) - exp(-kappa t / 4)).
    Evaluated as r*t*exp(-min(r,gamma)*t)*phi(|r-gamma|*t) with r = kappa/4,
    which is stable on both sides of the removable r = gamma singularity
    and never overflows.
    """
    t = np.asarray(t, dtype=float)
    r = kappa / 4.0
    x = (r - gamma) * t
    lead = np.exp(-np.where(x >= 0, gamma, r) * t)
    return r * t * lead * _phi(np.abs(x))


def ground_return_prob(t, dev: DeviceParams):
    """Probability of a full transition-and-decay cycle completing by time t.

    This is the probability the system, having started a transition at
    time 0, is back in ground before t: monotone nondecreasing, 0 at 0,
    1 as t grows (for gamma > 0).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    fired = -np.expm1(-dev.transition_rate * t)
    out = fired - excited_kernel(t, dev.kappa, dev.gamma)
    res = np.clip(out, 0.0, 1.0)
    return float(res) if np.ndim(t) == 0 else res


def transition_kernels(t, t0, dev: DeviceParams):
    """Joint state weights at time t given a transition started at 0 and
    the system completed no full cycle before t0.

    Returns (f1, f2): f1 is the weight of occupying ground at t, f2 the
    weight of occupying the excited level at t (f2 does not depend on t0:
    the excited level at t >= t0 already implies no earlier completed
    cycle).  f1 + f2 = 1 - ground_return_prob(t0).
    """
    t = np.asarray(t, dtype=float)
    t0 = np.asarray(t0, dtype=float)
    if np.any(t0 < 0) or np.any(t0 > t):
        raise ValueError("require 0 <= t0 <= t")
    f2 = excited_kernel(t, dev.kappa, dev.gamma)
    f1 = np.exp(-dev.transition_rate * t0) + excited_kernel(t0, dev.kappa, dev.gamma) - f2
    f1 = np.clip(f1, 0.0, 1.0)
    f2 = np.clip(f2, 0.0, 1.0)
    if np.ndim(t) == 0 and np.ndim(t0) == 0:
        return float(f1), float(f2)
    return f1, f2


def single_photon_excitation(
    pulse: PulseProfile,
    t_obs: float,
    dev: DeviceParams,
    epsabs: float = 1e-10,
) -> float:
    """Excitation probability at the observation time for one signal photon.

    Integrates rho(t) * P(excited at t_i | arrival at t) over the pulse
    support by adaptive quadrature, then decays the result from the end
    of the drive to t_obs.  The transition window closes at t_i (end of
    the drive), after which only decay acts.
    """
    ti = pulse.t_i
    if t_obs < ti:
        raise ValueError(f"t_obs {t_obs} must be >= pulse half-width {ti}")
    gamma = dev.gamma

    def integrand(t: float) -> float:
        return float(pulse.density(t)) * float(excited_kernel(ti - t, dev.kappa, gamma))

    pts = None
    if pulse.shape == "tabulated":
        pts = [float(n[0]) for n in pulse.nodes if -ti < n[0] < ti]
    val, _ = integrate.quad(integrand, -ti, ti, epsabs=epsabs, limit=400, points=pts)
    val *= math.exp(-gamma * (t_obs - ti))
    return min(max(val, 0.0), 1.0)


def single_photon_excitation_double_integral(
    pulse: PulseProfile,
    t_obs: float,
    dev: DeviceParams,
    epsabs: float = 1e-12,
) -> float:
    """Same quantity by the raw double integral; quadrature cross-check path."""
    ti = pulse.t_i
    if t_obs < ti:
        raise ValueError(f"t_obs {t_obs} must be >= pulse half-width {ti}")
    r = dev.transition_rate
    gamma = dev.gamma
    val, _ = integrate.dblquad(
        lambda q, t: float(pulse.density(t)) * r * math.exp(-r * (q - t)) * math.exp(-gamma * (t_obs - q)),
        -ti,
        ti,
        lambda t: t,
        lambda t: ti,
        epsabs=epsabs,
    )
    return val


def detection_prob_single(p_exc: float, dev: DeviceParams) -> float:
    """Single-photon detection probability with dark-count flipping.

    (1 - P0) * p_exc + P0 * (1 - p_exc); equals p_exc when P0 = 0.
    """
    if not 0.0 <= p_exc <= 1.0:
        raise ValueError(f"p_exc must be in [0, 1], got {p_exc}")
    return (1.0 - dev.p0) * p_exc + dev.p0 * (1.0 - p_exc)


def thermal_photon_rate(env: Environment) -> float:
    """Mean thermal photon count per capture window.

    k_B * T_e / (N * h * nu) with the signal bandwidth 1 / (N * T_c)
    folded in, so the result is already per window.
    """
    return BOLTZMANN_K * env.t_e / (env.cycles_per_symbol * PLANCK_H * env.nu)


def dbm_to_watts(power_dbm: float) -> float:
    """dBm to watts; -inf maps to 0 (carrier off)."""
    if power_dbm == -math.inf:
        return 0.0
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def power_to_rate(power_dbm: float, nu: float) -> float:
    """Received power in dBm to photon arrival rate in photons/s."""
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    return dbm_to_watts(power_dbm) / (PLANCK_H * nu)
