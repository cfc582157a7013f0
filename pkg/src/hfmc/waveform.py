"""Hyperbolic FM subcarrier synthesis and correlation.

The carrier family used throughout this package is a set of delayed copies of
one hyperbolic FM pulse.  The pulse sweeps its instantaneous frequency as
fm_rate / (ref_time + t), so a time-scaled copy of it is again a member of the
same family up to a delay and a complex gain.  That closure under time
scaling is what makes the multicarrier scheme robust to wideband Doppler.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "HfmSignalDef",
    "HfmcParams",
    "SubcarrierIndexMap",
    "InvariantViolation",
    "hfm_eval",
    "subcarrier_delay",
    "delay_grid",
    "subcarrier_amplitude",
    "subcarrier_eval",
    "correlation_closed_form",
    "correlation_approx",
    "index_map",
    "validate_params",
    "truncate_transmit",
]


class InvariantViolation(ValueError):
    """A parameter set breaks one of the documented design invariants."""


@dataclass(frozen=True)
class HfmSignalDef:
    """Reference hyperbolic FM pulse.

    fm_rate : float
        Frequency-modulation rate (Hz * s, i.e. the product of instantaneous
        frequency and elapsed hyperbolic time).  Instantaneous frequency at
        time t is fm_rate / (ref_time + t).
    ref_time : float
        Hyperbolic reference time; sets where the frequency sweep would
        diverge (t = -ref_time).
    """

    fm_rate: float
    ref_time: float

    def __post_init__(self):
        if self.fm_rate <= 0:
            raise ValueError(f"fm_rate must be positive, got {self.fm_rate}")
        if self.ref_time <= 0:
            raise ValueError(f"ref_time must be positive, got {self.ref_time}")

    def instantaneous_freq(self, t):
        return self.fm_rate / (self.ref_time + np.asarray(t))

    def stationary_phase_ratio(self, symbol_time: float) -> float:
        """fm_rate * T^2 / (ref_time * (ref_time + T)).

        The stationary-phase spectrum model is reliable when this ratio is
        large (roughly > 100).
        """
        t0 = self.ref_time
        return self.fm_rate * symbol_time ** 2 / (t0 * (t0 + symbol_time))


def hfm_eval(sig: HfmSignalDef, t):
    """Evaluate the reference pulse at times t.

    g(t) = exp(j * 2*pi * fm_rate * ln(1 + t/ref_time)) / (1 + t/ref_time)

    Defined for t > -ref_time only; earlier times are a domain error rather
    than silently evaluating the log of a nonpositive number.
    """
    t = np.asarray(t, dtype=float)
    u = 1.0 + t / sig.ref_time
    if np.any(u <= 0):
        raise ValueError(
            "hfm_eval: time reaches the hyperbolic singularity "
            f"(need t > {-sig.ref_time})"
        )
    return np.exp(2j * np.pi * sig.fm_rate * np.log(u)) / u


@dataclass(frozen=True)
class HfmcParams:
    """Complete multicarrier parameter set.

    Produced by the design routines; most code should treat instances as
    immutable records.  Delay indexing: transmit subcarriers use
    m in [0, num_tx), receive correlators extend to n in [-q_neg,
    num_tx + q_pos) to catch energy spread by the channel.
    """

    epsilon: float        # relative delay-spread error threshold
    t0_ref: float         # hyperbolic reference time (s)
    fm_rate: float        # FM rate shared by all subcarriers
    delay_res: float      # delay-grid resolution t_r (s)
    delay_origin: float   # delay of subcarrier m = 0 (s)
    num_tx: int           # transmit subcarrier count
    q_extra: int          # extra guard taps on each side of the leakage range
    q_neg: int            # receive extension below m = 0
    q_pos: int            # receive extension above m = num_tx - 1
    num_rx: int           # total receive correlator count
    symbol_time: float    # T (s)
    prefix_time: float    # guard prefix T_p (s)
    a_max: float          # worst-case Doppler scale magnitude
    f_c: float            # carrier (band-center) frequency (Hz)
    bandwidth: float      # occupied bandwidth (Hz)
    sample_rate: float    # nominal complex sample rate (Hz)

    @property
    def signal(self) -> HfmSignalDef:
        return HfmSignalDef(fm_rate=self.fm_rate, ref_time=self.t0_ref)


@dataclass(frozen=True)
class SubcarrierIndexMap:
    tx_range: range
    rx_range: range


def index_map(p: HfmcParams) -> SubcarrierIndexMap:
    return SubcarrierIndexMap(
        tx_range=range(0, p.num_tx),
        rx_range=range(-p.q_neg, p.num_tx + p.q_pos),
    )


def truncate_transmit(p: HfmcParams, num_tx: int) -> HfmcParams:
    """Same geometry, fewer transmit subcarriers.

    Used for reduced-size runs: the delay grid, FM rate, and guard taps stay
    exactly those of the full design, so small experiments exercise the same
    per-subcarrier physics as the full-size one.
    """
    if not (1 <= num_tx <= p.num_tx):
        raise ValueError(f"num_tx must be in [1, {p.num_tx}], got {num_tx}")
    return replace(p, num_tx=num_tx, num_rx=num_tx + p.q_neg + p.q_pos)


def subcarrier_delay(p: HfmcParams, m):
    """Delay t_m = delay_origin + m * delay_res for index m (scalar or array)."""
    return p.delay_origin + np.asarray(m) * p.delay_res


def delay_grid(p: HfmcParams) -> np.ndarray:
    """Delays for the full receive index range [-q_neg, num_tx + q_pos)."""
    idx = np.arange(-p.q_neg, p.num_tx + p.q_pos)
    return subcarrier_delay(p, idx)


def subcarrier_amplitude(p: HfmcParams, m):
    """Normalizing amplitude giving each subcarrier unit energy on [0, T].

    A_m = sqrt((t0 + T - t_m) * (t0 - t_m) / (t0^2 * T))
    """
    t0, T = p.t0_ref, p.symbol_time
    tm = subcarrier_delay(p, m)
    val = (t0 + T - tm) * (t0 - tm) / (t0 * t0 * T)
    if np.any(val <= 0):
        raise InvariantViolation(
            "subcarrier delay outside the hyperbolic support; "
            "amplitude undefined"
        )
    return np.sqrt(val)


def subcarrier_eval(p: HfmcParams, m, t):
    """Subcarrier waveform phi_m(t) = A_m * g(t - t_m).

    m scalar with t of any shape, or broadcastable shapes.
    """
    tm = subcarrier_delay(p, m)
    amp = subcarrier_amplitude(p, m)
    return amp * hfm_eval(p.signal, np.asarray(t) - tm)


def _sin_log_ratio(x, fm_rate):
    """sin(pi * K * log1p(x)) / (pi * K * x), continuously extended at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(np.pi * fm_rate * np.log1p(x)) / (np.pi * fm_rate * x)
    return np.where(x == 0.0, 1.0, val)


def _log_pair_ratio(p: HfmcParams, tn, tm):
    """ln of the ratio of hyperbolic support products for two delays."""
    t0, T = p.t0_ref, p.symbol_time
    return np.log((t0 - tm) * (t0 + T - tm)) - np.log((t0 - tn) * (t0 + T - tn))


def _pair_correlation_exact(p: HfmcParams, tn, tm, amp_n, amp_m):
    """Inner product over [0, T] of two unit-energy subcarriers at delays tn, tm.

    Shared kernel: the same expression with the transmit delay replaced by a
    channel-mapped effective delay gives each path's contribution to the
    equivalent channel matrix.
    """
    t0, T = p.t0_ref, p.symbol_time
    # Relative delay offset in hyperbolic time; the correlation is a
    # sin(log)/x kernel in this variable.
    x = (tm - tn) * T / ((t0 + T - tn) * (t0 - tm))
    pref = amp_n * amp_m * t0 * t0 * T / ((t0 + T - tn) * (t0 - tm))
    phase = np.exp(1j * np.pi * p.fm_rate * _log_pair_ratio(p, tn, tm))
    return pref * phase * _sin_log_ratio(x, p.fm_rate)


def correlation_closed_form(p: HfmcParams, n, m):
    """Exact subcarrier cross-correlation <phi_m, phi_n> over [0, T].

    n, m are subcarrier indices (scalars or broadcastable integer arrays).
    The diagonal is exactly 1 by the unit-energy normalization.
    """
    tn = subcarrier_delay(p, n)
    tm = subcarrier_delay(p, m)
    return _pair_correlation_exact(
        p, tn, tm, subcarrier_amplitude(p, n), subcarrier_amplitude(p, m)
    )


def correlation_approx(p: HfmcParams, n, m, check: bool = True):
    """Grid-aligned sinc approximation of the cross-correlation.

    Valid when all delays are small next to the reference time (the design
    keeps |t_m| < epsilon * t0 for transmit indices).  On the designed delay
    grid the sinc argument is an integer, so off-diagonal values vanish.
    check=False evaluates the formula outside its validity domain anyway,
    which metric sweeps over infeasible design points need.
    """
    tn = subcarrier_delay(p, n)
    tm = subcarrier_delay(p, m)
    lim = p.epsilon * p.t0_ref * (1 + 1e-9)
    if check and (np.any(np.abs(tn) > lim) or np.any(np.abs(tm) > lim)):
        raise InvariantViolation(
            "correlation_approx: delay outside the small-offset regime "
            f"(|t| < {p.epsilon * p.t0_ref:.6g} required)"
        )
    t0, T = p.t0_ref, p.symbol_time
    arg = p.fm_rate * (tn - tm) * T / ((t0 + T) * t0)
    phase = np.exp(1j * np.pi * p.fm_rate * _log_pair_ratio(p, tn, tm))
    return phase * np.sinc(arg)


def validate_params(p: HfmcParams, stationary_phase_threshold: float = 100.0):
    """Audit the invariants a designed parameter set must satisfy.

    Raises InvariantViolation naming the first failed check.  The receive
    delay range is allowed to run past epsilon * t0 by the guard taps plus
    one grid step on each side; that slack is what the q_neg / q_pos
    extensions exist for.
    """
    t0, T, K = p.t0_ref, p.symbol_time, p.fm_rate
    tol = 1e-9

    tr_expect = (t0 + T) * t0 / (K * T)
    if abs(p.delay_res - tr_expect) > tol * tr_expect:
        raise InvariantViolation(
            f"delay_res {p.delay_res!r} != (t0+T)*t0/(K*T) = {tr_expect!r}"
        )
    if p.num_rx != p.num_tx + p.q_neg + p.q_pos:
        raise InvariantViolation("num_rx != num_tx + q_neg + q_pos")
    if not (p.q_neg >= p.q_extra and p.q_pos >= p.q_extra):
        raise InvariantViolation("receive extensions smaller than guard taps")

    tx = subcarrier_delay(p, np.arange(p.num_tx))
    eps_bound = p.epsilon * t0
    if np.any(np.abs(tx) >= eps_bound):
        raise InvariantViolation(
            f"transmit delay magnitude reaches epsilon*t0 = {eps_bound:.6g}"
        )
    rx = delay_grid(p)
    rx_bound = eps_bound + (p.q_extra + 1) * p.delay_res
    if np.any(np.abs(rx) > rx_bound * (1 + tol)):
        raise InvariantViolation(
            "receive delay runs past epsilon*t0 plus the guard-tap slack"
        )

    # Band placement: the first transmit subcarrier starts exactly at the
    # lower band edge, the last must still end inside the upper edge.
    lo_edge = t0 + (1 + p.a_max) * T - K / (p.f_c - p.bandwidth / 2)
    hi_edge = t0 - p.prefix_time - K / (p.f_c + p.bandwidth / 2)
    if np.any(tx < lo_edge - tol * max(abs(lo_edge), 1.0)):
        raise InvariantViolation("transmit delay below the lower band-edge bound")
    if np.any(tx >= hi_edge):
        raise InvariantViolation("transmit delay at or above the upper band-edge bound")

    k_lo = (p.f_c + p.bandwidth / 2) * (1 + p.a_max - p.epsilon) * t0
    k_hi = (p.f_c - p.bandwidth / 2) * ((1 - p.a_max + p.epsilon) * t0 + (1 + p.a_max) * T)
    if not (k_lo < K <= k_hi * (1 + tol)):
        raise InvariantViolation(
            f"fm_rate {K:.6g} outside its feasible window ({k_lo:.6g}, {k_hi:.6g}]"
        )
    k_spectral = ((p.f_c - p.bandwidth / 2) * (p.f_c + p.bandwidth / 2)
                  / p.bandwidth) * (p.prefix_time + (1 + p.a_max) * T)
    if K <= k_spectral:
        raise InvariantViolation(
            f"fm_rate {K:.6g} below the spectral-support minimum {k_spectral:.6g}"
        )

    ratio = p.signal.stationary_phase_ratio(T)
    if ratio < stationary_phase_threshold:
        warnings.warn(
            f"stationary-phase validity ratio {ratio:.1f} below "
            f"{stationary_phase_threshold:.0f}; spectrum model may be coarse",
            stacklevel=2,
        )

    gamma = p.sample_rate / p.bandwidth
    if abs(gamma - round(gamma)) > 1e-9 or round(gamma) < 2:
        raise InvariantViolation(
            f"sample_rate must be an integer multiple (>= 2) of bandwidth, "
            f"got ratio {gamma!r}"
        )
    return True
