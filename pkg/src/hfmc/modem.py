"""Modulation, matched-filter demodulation, and equivalent channels.

Four waveform families share one interface: the hyperbolic FM multicarrier
scheme under study plus three references (classic OFDM, cyclic single
carrier, and single carrier with an inverse discrete Zak precoder, an
ODDM-style delay-Doppler arrangement).  All signal-level computations run
on a common simulation grid oversampled eight times above the nominal
complex sample rate.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelRealization, GuardViolation
from .waveform import (
    HfmcParams,
    delay_grid,
    hfm_eval,
    subcarrier_amplitude,
    subcarrier_delay,
)

__all__ = [
    "SIM_OVERSAMPLE",
    "SymbolAlphabet",
    "alphabet_from_name",
    "map_bits",
    "demap_symbols",
    "Basis",
    "HfmcBasis",
    "OfdmBasis",
    "ScBasis",
    "OddmBasis",
    "build_basis",
    "AnalyticFrame",
    "modulate",
    "demodulate",
    "EquivalentChannel",
    "equivalent_channel_numerical",
    "equivalent_channel_analytic",
    "band_occupancy",
]

# Simulation grid runs this many times faster than the nominal sample rate;
# quadratures below are rectangle sums on that grid.
SIM_OVERSAMPLE = 8


# ---------------------------------------------------------------------------
# symbol alphabets

@dataclass(frozen=True)
class SymbolAlphabet:
    name: str
    bits_per_symbol: int
    points: np.ndarray   # indexed by the bit group read MSB-first

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=complex))
        if len(self.points) != 2 ** self.bits_per_symbol:
            raise ValueError("points length must be 2**bits_per_symbol")


def _qpsk() -> SymbolAlphabet:
    pts = np.empty(4, dtype=complex)
    for b0 in (0, 1):
        for b1 in (0, 1):
            pts[(b0 << 1) | b1] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2)
    return SymbolAlphabet("qpsk", 2, pts)


def _qam16() -> SymbolAlphabet:
    # Gray-coded levels per axis: 00 01 11 10 -> -3 -1 +1 +3
    level = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
    pts = np.empty(16, dtype=complex)
    for g in range(16):
        i_bits, q_bits = g >> 2, g & 0b11
        pts[g] = (level[i_bits] + 1j * level[q_bits]) / np.sqrt(10)
    return SymbolAlphabet("16qam", 4, pts)


_ALPHABETS = {"qpsk": _qpsk(), "16qam": _qam16()}


def alphabet_from_name(name: str) -> SymbolAlphabet:
    try:
        return _ALPHABETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown alphabet {name!r}; choose from {sorted(_ALPHABETS)}")


def map_bits(bits, alphabet: SymbolAlphabet) -> np.ndarray:
    """Bit vector (0/1) to symbols, bits grouped MSB-first."""
    bits = np.asarray(bits, dtype=int)
    b = alphabet.bits_per_symbol
    if bits.ndim != 1 or len(bits) % b:
        raise ValueError(f"bit count must be a multiple of {b}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    groups = bits.reshape(-1, b)
    idx = groups @ (1 << np.arange(b - 1, -1, -1))
    return alphabet.points[idx]


def demap_symbols(symbols, alphabet: SymbolAlphabet) -> np.ndarray:
    """Hard nearest-point decisions back to bits."""
    symbols = np.asarray(symbols, dtype=complex)
    idx = np.abs(symbols[:, None] - alphabet.points[None, :]).argmin(axis=1)
    b = alphabet.bits_per_symbol
    shifts = np.arange(b - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).reshape(-1)


# ---------------------------------------------------------------------------
# waveform bases

class Basis(ABC):
    """A family of transmit waveforms plus its matched receive filters.

    Transmit indices run over [0, tx_count); receive filters over
    [-rx_offset, tx_count + rx_extra) mapped to rows [0, rx_count).
    """

    name: str
    tx_count: int
    rx_count: int
    rx_offset: int        # row index holding receive filter n = 0
    sim_rate: float
    symbol_time: float
    prefix_time: float
    a_max: float

    _rx_rows: Optional[np.ndarray] = None

    @abstractmethod
    def eval(self, m: int, t) -> np.ndarray:
        """Waveform of subcarrier/chip index m at times t."""

    @abstractmethod
    def _frame_eval(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Superposition sum_m x[m] * eval(m, t), computed efficiently."""

    def rx_indices(self) -> np.ndarray:
        return np.arange(self.rx_count) - self.rx_offset

    def receive_times(self) -> np.ndarray:
        n = int(round(self.symbol_time * self.sim_rate))
        return np.arange(n) / self.sim_rate

    def sample_tx(self, t: np.ndarray) -> np.ndarray:
        """Matrix of transmit waveforms sampled at t (len(t) x tx_count)."""
        t = np.asarray(t, dtype=float)
        out = np.empty((t.size, self.tx_count), dtype=complex)
        for m in range(self.tx_count):
            out[:, m] = self.eval(m, t)
        return out

    def receive_rows(self) -> np.ndarray:
        """Receive filters sampled on the demodulation grid (rx_count x K)."""
        if self._rx_rows is None:
            t = self.receive_times()
            rows = np.empty((self.rx_count, t.size), dtype=complex)
            for r, n in enumerate(self.rx_indices()):
                rows[r] = self.eval(int(n), t)
            self._rx_rows = rows
        return self._rx_rows

    def frame(self, x) -> "AnalyticFrame":
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.tx_count,):
            raise ValueError(f"expected {self.tx_count} symbols, got {x.shape}")
        return AnalyticFrame(self, x)

    @property
    def support(self):
        return (-self.prefix_time, (1 + self.a_max) * self.symbol_time)


@dataclass(frozen=True)
class AnalyticFrame:
    """One transmitted frame, evaluable at arbitrary in-support times."""

    basis: Basis
    symbols: np.ndarray

    def eval(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.basis.support
        tol = 1e-9 * self.basis.symbol_time
        if t.size and (t.min() < lo - tol or t.max() > hi + tol):
            raise GuardViolation(
                f"frame evaluated outside its guard support [{lo:.6g}, {hi:.6g}]"
            )
        return self.basis._frame_eval(self.symbols, t)


class HfmcBasis(Basis):
    """Delayed hyperbolic FM subcarriers on the designed delay grid."""

    name = "hfmc"

    def __init__(self, params: HfmcParams):
        self.params = params
        self.tx_count = params.num_tx
        self.rx_count = params.num_rx
        self.rx_offset = params.q_neg
        self.sim_rate = SIM_OVERSAMPLE * params.sample_rate
        self.symbol_time = params.symbol_time
        self.prefix_time = params.prefix_time
        self.a_max = params.a_max
        # per-index constants reused by the chunked frame evaluation
        self._rx_idx = np.arange(-params.q_neg, params.num_tx + params.q_pos)
        self._tx_delays = subcarrier_delay(params, np.arange(params.num_tx))
        self._tx_amps = subcarrier_amplitude(params, np.arange(params.num_tx))

    def eval(self, m: int, t) -> np.ndarray:
        p = self.params
        return subcarrier_amplitude(p, m) * hfm_eval(p.signal, np.asarray(t) - subcarrier_delay(p, m))

    def _frame_eval(self, x, t):
        p = self.params
        out = np.zeros(t.shape, dtype=complex)
        weights = x * self._tx_amps
        # chunk over subcarriers to bound the (chunk x len(t)) temporaries
        step = max(1, int(4e6 // max(t.size, 1)))
        for lo in range(0, p.num_tx, step):
            hi = min(lo + step, p.num_tx)
            u = 1.0 + (t[None, :] - self._tx_delays[lo:hi, None]) / p.t0_ref
            if np.any(u <= 0):
                raise GuardViolation("sample before the hyperbolic singularity")
            g = np.exp(2j * np.pi * p.fm_rate * np.log(u)) / u
            out += weights[lo:hi] @ g
        return out


class OfdmBasis(Basis):
    """Complex exponentials at bandwidth/tx_count spacing.

    The guard interval is the natural continuation of each exponential; when
    every subcarrier frequency times the symbol length is an integer (true
    for the configurations used here) that continuation coincides exactly
    with a cyclic prefix and suffix.
    """

    name = "ofdm"

    def __init__(self, params: HfmcParams):
        m = params.num_tx
        self.tx_count = m
        self.rx_count = m
        self.rx_offset = 0
        self.sim_rate = SIM_OVERSAMPLE * params.sample_rate
        self.symbol_time = params.symbol_time
        self.prefix_time = params.prefix_time
        self.a_max = params.a_max
        self.spacing = params.bandwidth / m
        self.f_base = params.f_c - params.bandwidth / 2
        self.freqs = self.f_base + self.spacing * np.arange(m)

    def eval(self, m: int, t) -> np.ndarray:
        if not (0 <= m < self.tx_count):
            raise ValueError(f"subcarrier index {m} out of range")
        t = np.asarray(t, dtype=float)
        return np.exp(2j * np.pi * self.freqs[m] * t) / np.sqrt(self.symbol_time)

    def _frame_eval(self, x, t):
        # Horner evaluation in z = exp(j 2 pi spacing t): one transcendental
        # per sample instead of one per (sample, subcarrier) pair.
        z = np.exp(2j * np.pi * self.spacing * t)
        acc = np.full(t.shape, x[-1], dtype=complex)
        for c in x[-2::-1]:
            acc = acc * z + c
        return acc * np.exp(2j * np.pi * self.f_base * t) / np.sqrt(self.symbol_time)


class ScBasis(Basis):
    """Cyclic single carrier: rectangular chips on a common carrier."""

    name = "sc"

    def __init__(self, params: HfmcParams):
        m = params.num_tx
        self.tx_count = m
        self.rx_count = m
        self.rx_offset = 0
        self.sim_rate = SIM_OVERSAMPLE * params.sample_rate
        self.symbol_time = params.symbol_time
        self.prefix_time = params.prefix_time
        self.a_max = params.a_max
        self.f_c = params.f_c

    def _chip_index(self, t):
        frac = np.mod(t, self.symbol_time) / self.symbol_time
        # nudge keeps samples that land within rounding error of a chip
        # boundary on the chip that starts there
        idx = np.floor(frac * self.tx_count + 1e-9).astype(np.int64)
        return np.minimum(idx, self.tx_count - 1)

    def _chips_eval(self, chips, t):
        scale = math.sqrt(self.tx_count / self.symbol_time)
        return chips[self._chip_index(t)] * scale * np.exp(2j * np.pi * self.f_c * t)

    def eval(self, m: int, t) -> np.ndarray:
        if not (0 <= m < self.tx_count):
            raise ValueError(f"chip index {m} out of range")
        t = np.asarray(t, dtype=float)
        onehot = np.zeros(self.tx_count)
        onehot[m] = 1.0
        return self._chips_eval(onehot, t)

    def _frame_eval(self, x, t):
        return self._chips_eval(x, t)


def _zak_precoder(num_delay: int, num_doppler: int) -> np.ndarray:
    """Unitary inverse-Zak precoder from delay-Doppler symbols to chips.

    Chip g = l + m * num_delay collects symbol (l, k) contributions
    exp(j 2 pi k m / num_doppler) / sqrt(num_doppler); symbols are indexed
    s = l + k * num_delay.
    """
    m_total = num_delay * num_doppler
    g = np.arange(m_total)
    l_chip, m_block = g % num_delay, g // num_delay
    s = np.arange(m_total)
    l_sym, k_dopp = s % num_delay, s // num_delay
    z = (l_chip[:, None] == l_sym[None, :]) * np.exp(
        2j * np.pi * k_dopp[None, :] * m_block[:, None] / num_doppler
    )
    return z / np.sqrt(num_doppler)


def _default_oddm_shape(m_total: int):
    n_d = 1 << max(0, int(math.floor(math.log2(math.sqrt(m_total)))))
    while n_d > 1 and m_total % n_d:
        n_d //= 2
    return m_total // n_d, n_d


class OddmBasis(Basis):
    """Single-carrier chips driven through an inverse discrete Zak transform.

    Each transmit index is a delay-Doppler symbol; the unitary precoder
    spreads it over the chip sequence, which then rides the same cyclic
    single-carrier waveform as ScBasis.
    """

    name = "oddm"

    def __init__(self, params: HfmcParams, shape: Optional[tuple] = None):
        m = params.num_tx
        self._sc = ScBasis(params)
        if shape is None:
            shape = _default_oddm_shape(m)
        num_delay, num_doppler = shape
        if num_delay * num_doppler != m:
            raise ValueError(
                f"delay-Doppler shape {shape} does not factor {m} symbols"
            )
        self.shape = (num_delay, num_doppler)
        self.precoder = _zak_precoder(num_delay, num_doppler)
        self.tx_count = m
        self.rx_count = m
        self.rx_offset = 0
        self.sim_rate = self._sc.sim_rate
        self.symbol_time = self._sc.symbol_time
        self.prefix_time = self._sc.prefix_time
        self.a_max = self._sc.a_max

    def eval(self, m: int, t) -> np.ndarray:
        if not (0 <= m < self.tx_count):
            raise ValueError(f"symbol index {m} out of range")
        t = np.asarray(t, dtype=float)
        return self._sc._chips_eval(self.precoder[:, m], t)

    def _frame_eval(self, x, t):
        return self._sc._chips_eval(self.precoder @ x, t)


def build_basis(name: str, params: HfmcParams,
                oddm_shape: Optional[tuple] = None) -> Basis:
    """Construct a waveform basis by name, sharing the frame geometry.

    Reference waveforms reuse the symbol/guard timing, band, and subcarrier
    count of the multicarrier design so that comparisons are like for like.
    """
    name = name.lower()
    if name == "hfmc":
        return HfmcBasis(params)
    if name == "ofdm":
        return OfdmBasis(params)
    if name == "sc":
        return ScBasis(params)
    if name == "oddm":
        return OddmBasis(params, shape=oddm_shape)
    raise ValueError(f"unknown basis {name!r}")


def modulate(x, basis: Basis) -> AnalyticFrame:
    return basis.frame(x)


def demodulate(r, basis: Basis) -> np.ndarray:
    """Matched-filter outputs y_n = (1/F) sum_k conj(phi_n(t_k)) r[k]."""
    r = np.asarray(r, dtype=complex)
    rows = basis.receive_rows()
    if r.shape != rows.shape[1:]:
        raise ValueError(
            f"expected {rows.shape[1]} samples on the receive grid, got {r.shape}"
        )
    return rows.conj() @ r / basis.sim_rate


# ---------------------------------------------------------------------------
# equivalent channels

@dataclass(frozen=True)
class EquivalentChannel:
    """Linear map from transmit symbols to matched-filter outputs.

    matrix[r, m] couples transmit index m into receive row r; receive row r
    corresponds to filter index n = r - row_offset.  per_path holds the
    unit-gain contribution of each channel path, so re-weighting by a new
    gain vector (e.g. a perturbed estimate) is a cheap linear combination.
    """

    matrix: np.ndarray
    row_offset: int
    construction: str
    per_path: Optional[np.ndarray] = None

    def recombine(self, gains) -> np.ndarray:
        if self.per_path is None:
            raise ValueError("per-path stack was not retained")
        return np.tensordot(np.asarray(gains, dtype=complex), self.per_path, axes=1)


def _expm1j(theta):
    """exp(j theta) - 1 without cancellation: 2j sin(theta/2) exp(j theta/2)."""
    half = 0.5 * np.asarray(theta)
    return 2j * np.sin(half) * np.exp(1j * half)


def _geom_sum(beta, count):
    """sum_{k=0}^{count-1} exp(j beta k), stable for small beta."""
    beta = np.asarray(beta, dtype=float)
    num = _expm1j(beta * count)
    den = _expm1j(beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = num / den
    return np.where(np.abs(den) < 1e-14, count + 0j, val)


def _ofdm_path_matrix(basis: OfdmBasis, tau: float, a: float) -> np.ndarray:
    """Rectangle-rule inner products for one path, in closed form."""
    K = int(round(basis.symbol_time * basis.sim_rate))
    f = basis.freqs
    beta = 2 * np.pi * (f[None, :] * (1 + a) - f[:, None]) / basis.sim_rate
    s = _geom_sum(beta, K)
    pre = np.exp(-2j * np.pi * f * tau) / (basis.symbol_time * basis.sim_rate)
    return pre[None, :] * s


def _sc_path_matrix(basis: ScBasis, tau: float, a: float) -> np.ndarray:
    """Rectangle-rule inner products for one path over chip overlaps.

    Chip assignment reuses the basis's own floating chip indexing, so the
    geometric sums reproduce the sampled matrix product exactly (up to
    summation-order rounding) instead of approximating it.
    """
    M = basis.tx_count
    T, F = basis.symbol_time, basis.sim_rate
    K = int(round(T * F))
    per_chip = K // M
    if per_chip * M != K:
        raise ValueError("simulation grid must subdivide chips evenly")
    beta = 2 * np.pi * basis.f_c * a / F
    gain = (M / (T * F)) * np.exp(-2j * np.pi * basis.f_c * tau)

    k = np.arange(K)
    t = basis.receive_times()
    tx_chip = basis._chip_index((1 + a) * (k / F) - tau)
    rx_chip = basis._chip_index(t)
    # runs break wherever either chip index changes
    changed = (np.diff(tx_chip) != 0) | (np.diff(rx_chip) != 0)
    starts = np.concatenate([[0], np.nonzero(changed)[0] + 1])
    stops = np.concatenate([starts[1:], [K]])

    out = np.zeros((M, M), dtype=complex)
    for ka, kb in zip(starts, stops):
        out[rx_chip[ka], tx_chip[ka]] += (
            gain * np.exp(1j * beta * ka) * _geom_sum(beta, kb - ka))
    return out


def equivalent_channel_numerical(basis: Basis, ch: ChannelRealization,
                                 method: str = "auto") -> EquivalentChannel:
    """Equivalent channel by rectangle-rule quadrature on the simulation grid.

    method "auto" uses exact closed forms of the same rectangle sums where
    the basis allows it (the reference waveforms); "brute" always samples
    and multiplies matrices, which is what the closed forms are tested
    against.  The hyperbolic multicarrier basis has no closed rectangle sum
    and always takes the sampled path.
    """
    if method not in ("auto", "brute"):
        raise ValueError(f"unknown method {method!r}")
    t = basis.receive_times()
    rows = basis.receive_rows()
    P = ch.num_paths
    stack = np.empty((P, basis.rx_count, basis.tx_count), dtype=complex)

    for i, (tau, a) in enumerate(zip(ch.delays, ch.scales)):
        closed = None
        if method == "auto":
            if isinstance(basis, OfdmBasis):
                closed = _ofdm_path_matrix(basis, tau, a)
            elif isinstance(basis, OddmBasis):
                q_sc = _sc_path_matrix(basis._sc, tau, a)
                z = basis.precoder
                closed = z.conj().T @ q_sc @ z
            elif isinstance(basis, ScBasis):
                closed = _sc_path_matrix(basis, tau, a)
        if closed is None:
            scaled = basis.sample_tx((1 + a) * t - tau)
            closed = rows.conj() @ scaled / basis.sim_rate
        stack[i] = closed

    H = np.tensordot(ch.gains, stack, axes=1)
    return EquivalentChannel(matrix=H, row_offset=basis.rx_offset,
                             construction=f"numerical-{method}", per_path=stack)


def equivalent_channel_analytic(params: HfmcParams, ch: ChannelRealization,
                                form: str = "exact") -> EquivalentChannel:
    """Closed-form equivalent channel for the hyperbolic multicarrier basis.

    Each path shifts the transmit delay grid to an effective position
    tau + a * t0 (to first order) and scales the correlation kernel; the
    "exact" form keeps the per-pair kernel denominators, the "approx" form
    freezes them at their grid-center values so each path becomes a pure
    sinc profile in the index offset.
    """
    if form not in ("exact", "approx"):
        raise ValueError(f"unknown form {form!r}")
    M = params.num_tx
    t0, T, K = params.t0_ref, params.symbol_time, params.fm_rate
    tn = delay_grid(params)
    tm = subcarrier_delay(params, np.arange(M))
    amp_n = subcarrier_amplitude(params, np.arange(-params.q_neg, M + params.q_pos))
    amp_m = subcarrier_amplitude(params, np.arange(M))

    rx_sup = (t0 - tn) * (t0 + T - tn)
    P = ch.num_paths
    stack = np.empty((P, tn.size, M), dtype=complex)
    for i, (tau, a) in enumerate(zip(ch.delays, ch.scales)):
        lo = t0 - tm - tau
        hi = t0 + (1 + a) * T - tm - tau
        if np.any(lo <= 0) or np.any(hi <= 0):
            raise GuardViolation("path delay outside the hyperbolic support")
        theta = np.log(lo * hi)[None, :] - np.log(rx_sup)[:, None]
        phase = np.exp(1j * np.pi * K * theta)
        shift = (1 + a) * tn[:, None] - tm[None, :] - (tau + a * t0)
        if form == "exact":
            pref = (amp_n[:, None] * amp_m[None, :] * t0 * t0 * T
                    / ((t0 + T - tn)[:, None] * lo[None, :]))
            kern = np.sinc(K * T * shift / ((t0 + T - tn)[:, None] * lo[None, :]))
            stack[i] = pref * phase * kern
        else:
            shift_plain = tn[:, None] - tm[None, :] - (tau + a * t0)
            stack[i] = phase * np.sinc(K * T * shift_plain / ((t0 + T) * t0))

    H = np.tensordot(ch.gains, stack, axes=1)
    return EquivalentChannel(matrix=H, row_offset=params.q_neg,
                             construction=f"analytic-{form}", per_path=stack)


def band_occupancy(eq: EquivalentChannel, energy_fraction: float = 0.999):
    """Dominant index offset and band half-width of an equivalent channel.

    Returns (center, halfwidth): the offset d = n - m carrying the most
    energy, and the smallest half-width around it capturing at least
    energy_fraction of the total squared magnitude.
    """
    H = eq.matrix
    nrows, ncols = H.shape
    mag2 = np.abs(H) ** 2
    total = mag2.sum()
    if total == 0:
        raise ValueError("empty channel matrix")
    # offset d = (row - row_offset) - col; numpy diagonal offset is col - row
    d_lo = -eq.row_offset - (ncols - 1)
    d_hi = nrows - 1 - eq.row_offset
    offsets = np.arange(d_lo, d_hi + 1)
    energy = np.array([
        (np.abs(np.diagonal(H, offset=-eq.row_offset - d)) ** 2).sum()
        for d in offsets
    ])
    center_idx = int(energy.argmax())
    acc = energy[center_idx]
    w = 0
    while acc < energy_fraction * total:
        w += 1
        lo, hi = max(0, center_idx - w), min(len(energy) - 1, center_idx + w)
        acc = energy[lo:hi + 1].sum()
        if lo == 0 and hi == len(energy) - 1:
            break
    return int(offsets[center_idx]), w
