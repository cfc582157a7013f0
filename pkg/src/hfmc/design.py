"""Feasibility algebra and parameter selection.

All constraints reduce to a box on two knobs once the system numbers
(band, symbol length, guard, worst-case Doppler scale) are fixed: the
relative delay-error threshold epsilon, and the reference time expressed
as a multiple c_t0 of the symbol time.  The selection routine sweeps both
on fixed grids, smallest values first, until the requested subcarrier
count fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .waveform import HfmcParams, truncate_transmit, validate_params

__all__ = [
    "SystemConfig",
    "FeasibilityRanges",
    "InfeasibleDesignError",
    "a_max_from_velocity",
    "epsilon_bounds",
    "ct0_bounds",
    "k_from_t0",
    "capacity_quotient",
    "max_subcarriers",
    "diversity_bandwidth",
    "leakage_ranges",
    "design_at",
    "select_parameters",
    "tradeoff_sweep",
    "tradeoff_coefficients",
    "design_sheet",
]


class InfeasibleDesignError(ValueError):
    """No parameter choice satisfies the requested constraints."""


def a_max_from_velocity(v_max: float, medium_speed: float) -> float:
    """Worst-case Doppler scale magnitude for a relative speed bound.

    v_max may be 0 (static scenario).  Speeds at or above the propagation
    speed are rejected.
    """
    if medium_speed <= 0:
        raise ValueError("medium_speed must be positive")
    if not (0 <= v_max < medium_speed):
        raise ValueError(f"need 0 <= v_max < medium_speed, got {v_max}")
    return v_max / medium_speed


@dataclass(frozen=True)
class SystemConfig:
    """Fixed scenario numbers a design starts from."""

    f_c: float                  # band-center frequency (Hz)
    bandwidth: float            # occupied bandwidth (Hz)
    symbol_time: float          # T (s)
    prefix_time: float          # guard prefix length (s)
    a_max: float                # worst-case |Doppler scale|
    min_subcarriers: int        # requested transmit subcarrier count
    step_eps: float = 1e-3      # epsilon search step
    step_ct0: float = 1e-2      # c_t0 search step
    sample_rate: float = 0.0    # complex sample rate; 0 -> 8 * bandwidth

    def __post_init__(self):
        if self.sample_rate == 0.0:
            object.__setattr__(self, "sample_rate", 8.0 * self.bandwidth)
        if self.bandwidth <= 0 or self.f_c <= self.bandwidth / 2:
            raise ValueError("need 0 < bandwidth and f_c > bandwidth / 2")
        if self.symbol_time <= 0 or self.prefix_time <= 0:
            raise ValueError("symbol_time and prefix_time must be positive")
        if not (0 <= self.a_max < 0.2):
            raise ValueError(f"a_max out of the supported range: {self.a_max}")
        if self.min_subcarriers < 1:
            raise ValueError("min_subcarriers must be at least 1")
        if self.step_eps <= 0 or self.step_ct0 <= 0:
            raise ValueError("search steps must be positive")
        gamma = self.sample_rate / self.bandwidth
        if abs(gamma - round(gamma)) > 1e-9 or round(gamma) < 2:
            raise ValueError(
                "sample_rate must be an integer multiple (>= 2) of bandwidth"
            )

    @classmethod
    def from_velocity(cls, v_max: float, medium_speed: float, **kwargs) -> "SystemConfig":
        return cls(a_max=a_max_from_velocity(v_max, medium_speed), **kwargs)


@dataclass(frozen=True)
class FeasibilityRanges:
    eps_min: float
    eps_max: float
    ct0_min: float   # at eps = eps value used for the query
    ct0_max: float
    epsilon: float   # epsilon the c_t0 range was evaluated at


def _edge_freqs(cfg: SystemConfig):
    return cfg.f_c - cfg.bandwidth / 2, cfg.f_c + cfg.bandwidth / 2


def _bound_coeffs(cfg: SystemConfig):
    """The two recurring dimensionless combinations in the epsilon bounds."""
    f_lo, f_hi = _edge_freqs(cfg)
    c1 = f_lo * (1 + cfg.a_max) / cfg.bandwidth
    c2 = c1 + (f_hi / cfg.bandwidth) * (cfg.prefix_time / cfg.symbol_time)
    return c1, c2


def epsilon_bounds(cfg: SystemConfig):
    """Feasible range (eps_min, eps_max) for the delay-error threshold.

    eps_max keeps the reference-time upper bound positive; eps_min is where
    the lower and upper c_t0 bounds would cross.
    """
    a = cfg.a_max
    c1, c2 = _bound_coeffs(cfg)
    ratio = 2 * cfg.f_c / cfg.bandwidth
    eps_min = (c2 + a * c2 * ratio + c1 * a - c1) / (c1 + c2 * ratio)
    eps_max = a + cfg.bandwidth / (2 * cfg.f_c)
    if eps_min >= eps_max:
        raise InfeasibleDesignError(
            f"empty epsilon range: eps_min {eps_min:.6g} >= eps_max {eps_max:.6g}"
        )
    return eps_min, eps_max


def ct0_bounds(cfg: SystemConfig, epsilon: float):
    """Feasible (ct0_min, ct0_max) for the reference time at a given epsilon,
    both as multiples of the symbol time."""
    a = cfg.a_max
    f_lo, _ = _edge_freqs(cfg)
    denom = cfg.bandwidth + 2 * cfg.f_c * (a - epsilon)
    if denom <= 0:
        raise InfeasibleDesignError(
            f"epsilon {epsilon:.6g} at or above eps_max; no reference-time bound"
        )
    ct0_max = f_lo * (1 + a) / denom
    _, c2 = _bound_coeffs(cfg)
    ct0_min = c2 / (1 - a + epsilon)
    if ct0_min >= ct0_max:
        raise InfeasibleDesignError(
            f"empty reference-time range at epsilon {epsilon:.6g}: "
            f"({ct0_min:.6g}, {ct0_max:.6g})"
        )
    return ct0_min, ct0_max


def k_from_t0(cfg: SystemConfig, epsilon: float, t0_ref: float) -> float:
    """Largest FM rate keeping every subcarrier inside the band for all
    delays up to epsilon * t0 and Doppler scales up to a_max."""
    f_lo, _ = _edge_freqs(cfg)
    a = cfg.a_max
    return f_lo * ((1 - a + epsilon) * t0_ref + (1 + a) * cfg.symbol_time)


def _delay_res(cfg: SystemConfig, fm_rate: float, t0_ref: float) -> float:
    return (t0_ref + cfg.symbol_time) * t0_ref / (fm_rate * cfg.symbol_time)


def capacity_quotient(cfg: SystemConfig, fm_rate: float, t0_ref: float) -> float:
    """Usable delay span divided by the grid resolution (real-valued)."""
    f_lo, f_hi = _edge_freqs(cfg)
    span = (fm_rate * cfg.bandwidth / (f_lo * f_hi)
            - cfg.prefix_time - (1 + cfg.a_max) * cfg.symbol_time)
    return span / _delay_res(cfg, fm_rate, t0_ref)


def max_subcarriers(cfg: SystemConfig, fm_rate: float, t0_ref: float) -> int:
    """Subcarrier capacity of a candidate (fm_rate, t0_ref) pair.

    Nonpositive values signal an infeasible candidate (the spectral support
    is narrower than the guard plus symbol expansion requires).
    """
    return math.ceil(capacity_quotient(cfg, fm_rate, t0_ref))


def diversity_bandwidth(cfg: SystemConfig, fm_rate: float, t0_ref: float,
                        tau_max: float):
    """Equivalent channel spread after Doppler folding.

    Returns (tau_eq, width): the worst-case equivalent delay spread in
    seconds, and the same spread in delay-grid taps (the half-width of the
    banded equivalent channel).
    """
    tau_eq = tau_max + 2 * cfg.a_max * t0_ref
    return tau_eq, tau_eq / _delay_res(cfg, fm_rate, t0_ref)


def leakage_ranges(cfg: SystemConfig, fm_rate: float, t0_ref: float,
                   tau_max: float, q_extra: int = 4):
    """Receive-side index extensions (q_neg, q_pos).

    A path with Doppler scale -a_max pulls energy below index 0 by up to
    a_max * t0 in delay; a path at +a_max combined with the longest delay
    pushes it above the last transmit index by tau_max + a_max * t0.  q_extra
    guard taps absorb sidelobe leakage beyond those hard offsets.
    """
    tr = _delay_res(cfg, fm_rate, t0_ref)
    q_neg = q_extra + math.ceil(cfg.a_max * t0_ref / tr)
    q_pos = q_extra + math.ceil((tau_max + cfg.a_max * t0_ref) / tr)
    return q_neg, q_pos


def _grid_start(lower: float, step: float) -> int:
    """First integer i with i*step >= lower (tiny slack keeps an exact
    multiple from being skipped by float rounding)."""
    return math.ceil(lower / step - 1e-9)


def _build_params(cfg: SystemConfig, epsilon: float, ct0: float,
                  tau_max: float, q_extra: int) -> HfmcParams:
    t0 = ct0 * cfg.symbol_time
    K = k_from_t0(cfg, epsilon, t0)
    tr = _delay_res(cfg, K, t0)
    f_lo, _ = _edge_freqs(cfg)
    origin = t0 + (1 + cfg.a_max) * cfg.symbol_time - K / f_lo
    q_neg, q_pos = leakage_ranges(cfg, K, t0, tau_max, q_extra)
    m = cfg.min_subcarriers
    return HfmcParams(
        epsilon=epsilon,
        t0_ref=t0,
        fm_rate=K,
        delay_res=tr,
        delay_origin=origin,
        num_tx=m,
        q_extra=q_extra,
        q_neg=q_neg,
        q_pos=q_pos,
        num_rx=m + q_neg + q_pos,
        symbol_time=cfg.symbol_time,
        prefix_time=cfg.prefix_time,
        a_max=cfg.a_max,
        f_c=cfg.f_c,
        bandwidth=cfg.bandwidth,
        sample_rate=cfg.sample_rate,
    )


def design_at(cfg: SystemConfig, epsilon: float, ct0: float,
              tau_max: float | None = None, q_extra: int = 4,
              num_tx: int | None = None, validate: bool = True) -> HfmcParams:
    """Parameter set at an explicit (epsilon, reference-time) point.

    Metric sweeps evaluate designs away from the selected optimum, including
    points outside the feasible region (band-edge constraints are what fail
    first there); validate=False skips the invariant audit for those.
    """
    if tau_max is None:
        tau_max = cfg.prefix_time
    params = _build_params(cfg, epsilon, ct0, tau_max, q_extra)
    if num_tx is not None:
        params = truncate_transmit(params, num_tx)
    if validate:
        validate_params(params)
    return params


def select_parameters(cfg: SystemConfig, tau_max: float | None = None,
                      q_extra: int = 4) -> HfmcParams:
    """Two-stage grid search for the full parameter set.

    Stage one raises epsilon from its lower bound until the capacity at the
    largest admissible reference time covers min_subcarriers.  Stage two
    then shrinks the reference time back down from its lower bound, stepping
    up until the capacity again covers the request, so the final design uses
    the smallest reference time (hence the widest diversity bandwidth) that
    still fits.

    Both knobs move on fixed grids (cfg.step_eps, cfg.step_ct0) starting at
    the first grid multiple at or above the corresponding bound, which keeps
    reported values at tidy grid points.
    """
    if tau_max is None:
        tau_max = cfg.prefix_time
    if not (0 <= tau_max <= cfg.prefix_time):
        raise ValueError("tau_max must lie in [0, prefix_time]")

    eps_min, eps_max = epsilon_bounds(cfg)
    target = cfg.min_subcarriers

    # Stage one: find the smallest grid epsilon whose best-case capacity
    # reaches the target.  Capacity is evaluated at ct0_max because a longer
    # reference time always fits more subcarriers.
    i = _grid_start(eps_min, cfg.step_eps)
    epsilon = None
    while True:
        i += 1
        cand = i * cfg.step_eps
        if cand > eps_max + 1e-12:
            raise InfeasibleDesignError(
                f"capacity never reaches {target} subcarriers for any "
                f"epsilon in ({eps_min:.6g}, {eps_max:.6g}); the band or "
                "symbol length is too small"
            )
        _, ct0_hi = ct0_bounds(cfg, cand)
        t0 = ct0_hi * cfg.symbol_time
        if max_subcarriers(cfg, k_from_t0(cfg, cand, t0), t0) >= target:
            epsilon = cand
            break

    # Stage two: at that epsilon, grow the reference time from its lower
    # bound until the capacity covers the target.
    ct0_lo, ct0_hi = ct0_bounds(cfg, epsilon)
    j = _grid_start(ct0_lo, cfg.step_ct0)
    while True:
        ct0 = j * cfg.step_ct0
        if ct0 > ct0_hi + 1e-12:
            raise InfeasibleDesignError(
                "reference-time sweep exhausted without reaching the "
                f"requested capacity at epsilon {epsilon:.6g}"
            )
        t0 = ct0 * cfg.symbol_time
        if max_subcarriers(cfg, k_from_t0(cfg, epsilon, t0), t0) >= target:
            break
        j += 1

    params = _build_params(cfg, epsilon, ct0, tau_max, q_extra)
    validate_params(params)
    return params


@dataclass(frozen=True)
class SweepRow:
    ct0: float
    fm_rate: float
    quotient: float
    capacity: int
    band_halfwidth: float


def tradeoff_sweep(cfg: SystemConfig, epsilon: float,
                   ct0_values=None, tau_max: float | None = None):
    """Capacity-versus-diversity table over the reference-time range.

    Capacity (subcarrier count) grows with the reference time while the
    equivalent channel band half-width shrinks, so the two columns move in
    opposite directions; picking ct0 is choosing a point on that trade.
    """
    if tau_max is None:
        tau_max = cfg.prefix_time
    lo, hi = ct0_bounds(cfg, epsilon)
    if ct0_values is None:
        ct0_values = np.linspace(lo * 1.001, hi * 0.999, 25)
    rows = []
    for ct0 in np.asarray(ct0_values, dtype=float):
        if not (lo <= ct0 <= hi):
            raise InfeasibleDesignError(
                f"ct0 {ct0:.6g} outside the feasible range ({lo:.6g}, {hi:.6g})"
            )
        t0 = ct0 * cfg.symbol_time
        K = k_from_t0(cfg, epsilon, t0)
        q = capacity_quotient(cfg, K, t0)
        _, width = diversity_bandwidth(cfg, K, t0, tau_max)
        rows.append(SweepRow(float(ct0), K, q, math.ceil(q), width))
    return rows


@dataclass(frozen=True)
class QuotientPoly:
    """Rational form q(lam) = (c*lam^2 + d*lam + e) / (lam * (lam + 1)),
    lam = t0 / T.  Sign conditions on the coefficients decide monotonicity."""

    c: float
    d: float
    e: float

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return (self.c * lam ** 2 + self.d * lam + self.e) / (lam * (lam + 1))

    def increasing(self) -> bool:
        # derivative numerator (c - d) lam^2 - 2 e lam - e is positive for
        # all lam > 0 exactly when c > d and e < 0
        return self.c > self.d and self.e < 0

    def decreasing(self) -> bool:
        return self.c < self.d and self.e > 0


def tradeoff_coefficients(cfg: SystemConfig, epsilon: float,
                          tau_max: float | None = None):
    """Coefficient triples behind the capacity and band-width trades.

    Returns (capacity_poly, band_poly, band_scale): capacity_poly(lam) is
    the capacity quotient, band_scale * band_poly(lam) is the equivalent
    band half-width, both as functions of lam = t0 / T.
    """
    if tau_max is None:
        tau_max = cfg.prefix_time
    a = cfg.a_max
    f_lo, f_hi = _edge_freqs(cfg)
    B, T, Tp = cfg.bandwidth, cfg.symbol_time, cfg.prefix_time
    s = 1 - a + epsilon

    cap = QuotientPoly(
        c=(f_lo / f_hi) * B * T * s * s,
        d=f_lo * s * (2 * (1 + a) * B * T / f_hi - Tp - (1 + a) * T),
        e=-(1 + a) * f_lo * Tp - f_lo * T * (1 + a) ** 2 * f_lo / f_hi,
    )
    band = QuotientPoly(
        c=2 * a * s,
        d=2 * a * (1 + a) + s * tau_max / T,
        e=(1 + a) * tau_max / T,
    )
    return cap, band, f_lo * T


def design_sheet(cfg: SystemConfig, params: HfmcParams,
                 tau_max: float | None = None) -> str:
    """Human-readable summary of a finished design."""
    if tau_max is None:
        tau_max = cfg.prefix_time
    tau_eq, width = diversity_bandwidth(cfg, params.fm_rate, params.t0_ref, tau_max)
    cap = max_subcarriers(cfg, params.fm_rate, params.t0_ref)
    tx_last = params.delay_origin + (params.num_tx - 1) * params.delay_res
    lines = [
        "design sheet",
        f"  epsilon           {params.epsilon:.6g}",
        f"  t0_ref            {params.t0_ref:.9g} s  (x{params.t0_ref / cfg.symbol_time:.6g} symbol)",
        f"  fm_rate           {params.fm_rate:.10g}",
        f"  delay_res         {params.delay_res:.9g} s",
        f"  delay_origin      {params.delay_origin:.9g} s",
        f"  last tx delay     {tx_last:.9g} s",
        f"  num_tx            {params.num_tx}  (capacity {cap})",
        f"  q_neg / q_pos     {params.q_neg} / {params.q_pos}  (q_extra {params.q_extra})",
        f"  num_rx            {params.num_rx}",
        f"  equivalent spread {tau_eq:.6g} s = {width:.4g} taps",
        f"  sample_rate       {params.sample_rate:.6g} Hz",
    ]
    return "\n".join(lines)
