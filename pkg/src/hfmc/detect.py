"""LMMSE equalization and error accounting.

The detector sees the matched-filter output model y = H x + w with x drawn
from a unit-energy alphabet and w treated as white with per-sample variance
noise_var.  Both solvers compute the same regularized least-squares estimate

    x_hat = (H^H H + noise_var I)^(-1) H^H y ;

the banded variant exploits the near-diagonal concentration of the
equivalent channel so the factorization cost stays linear in the symbol
count for a fixed band halfwidth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse

from .modem import SymbolAlphabet

__all__ = [
    "DetectionProblem",
    "ErrorCounts",
    "ConditioningError",
    "BandCoverageError",
    "lmmse_equalize",
    "lmmse_banded",
    "count_errors",
    "merge",
]


class ConditioningError(RuntimeError):
    """The regularized normal matrix could not be factored reliably."""


class BandCoverageError(ValueError):
    """Channel energy outside the stated band is too large to ignore."""


@dataclass(frozen=True)
class DetectionProblem:
    """One frame's worth of equalization input.

    matrix is the (num_rx, num_tx) equivalent channel, received the matched
    filter output of length num_rx.  noise_var is the post-matched-filter
    noise variance per output sample; zero is allowed and degenerates the
    estimator to plain least squares.
    """

    matrix: np.ndarray
    received: np.ndarray
    noise_var: float
    alphabet: Optional[SymbolAlphabet] = None

    def __post_init__(self):
        H = np.asarray(self.matrix)
        y = np.asarray(self.received)
        assert H.ndim == 2, f"channel matrix must be 2-d, got shape {H.shape}"
        assert H.shape[0] >= H.shape[1], (
            f"expected at least as many outputs as symbols, got {H.shape}")
        assert y.shape == (H.shape[0],), (
            f"received vector shape {y.shape} does not match {H.shape[0]} outputs")
        assert np.isfinite(self.noise_var) and self.noise_var >= 0, (
            f"noise variance must be finite and non-negative, got {self.noise_var}")

    @property
    def num_symbols(self) -> int:
        return self.matrix.shape[1]


def lmmse_equalize(problem: DetectionProblem) -> np.ndarray:
    """Dense LMMSE estimate of the transmitted symbol vector."""
    H = np.asarray(problem.matrix, dtype=complex)
    gram = H.conj().T @ H
    gram[np.diag_indices_from(gram)] += problem.noise_var
    rhs = H.conj().T @ problem.received
    try:
        est = scipy.linalg.solve(gram, rhs, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise ConditioningError(f"normal matrix factorization failed: {exc}") from exc
    if not np.all(np.isfinite(est)):
        raise ConditioningError("non-finite LMMSE estimate")
    return est


def _locate_band(H: np.ndarray) -> int:
    """Offset d maximizing the energy of the diagonal H[m + d, m]."""
    n_rows, n_cols = H.shape
    best_d, best_e = 0, -1.0
    for d in range(-(n_cols - 1), n_rows):
        diag = np.diagonal(H, offset=-d)
        e = float(np.sum(np.abs(diag) ** 2))
        if e > best_e:
            best_d, best_e = d, e
    return best_d


def lmmse_banded(problem: DetectionProblem, halfwidth: int,
                 row_offset: Optional[int] = None,
                 coverage_tol: float = 1e-4) -> np.ndarray:
    """LMMSE estimate using a banded factorization of the normal matrix.

    Entries of the channel outside |row - row_offset - col| <= halfwidth are
    dropped; if they carry more than coverage_tol of the total energy the
    band assumption is considered violated and BandCoverageError reports the
    measured fraction.  row_offset None means the strongest diagonal is
    located automatically.  Falls back to the dense solver if the banded
    factorization hits a conditioning alarm.
    """
    assert halfwidth >= 0, f"halfwidth must be non-negative, got {halfwidth}"
    H = np.asarray(problem.matrix, dtype=complex)
    n_rows, n_cols = H.shape
    if row_offset is None:
        row_offset = _locate_band(H)

    rows, cols = np.indices(H.shape)
    inside = np.abs(rows - row_offset - cols) <= halfwidth
    total = float(np.sum(np.abs(H) ** 2))
    outside = float(np.sum(np.abs(H[~inside]) ** 2))
    if total > 0 and outside > coverage_tol * total:
        raise BandCoverageError(
            f"energy fraction outside band halfwidth {halfwidth} is "
            f"{outside / total:.3e} (tolerance {coverage_tol:.1e})")

    data, offs = [], []
    for d in range(-halfwidth, halfwidth + 1):
        diag = np.zeros(n_cols, dtype=complex)
        vals = np.diagonal(H, offset=-(row_offset + d))
        if vals.size:
            if row_offset + d >= 0:
                diag[:vals.size] = vals
            else:
                diag[-(row_offset + d):][:vals.size] = vals
        data.append(diag)
        offs.append(-(row_offset + d))
    Hb = scipy.sparse.dia_matrix((np.array(data), np.array(offs)),
                                 shape=H.shape).tocsr()

    gram = Hb.conj().T @ Hb
    width = 2 * halfwidth
    bands = np.zeros((width + 1, n_cols), dtype=complex)
    for u in range(width + 1):
        # scipy upper form: bands[width - u, j] holds A[j - u, j]
        diag = np.zeros(n_cols, dtype=complex)
        raw = gram.diagonal(u)
        diag[u:] = raw
        bands[width - u] = diag
    bands[width] += problem.noise_var
    rhs = Hb.conj().T @ problem.received

    try:
        est = scipy.linalg.solveh_banded(bands, rhs, lower=False)
        if not np.all(np.isfinite(est)):
            raise scipy.linalg.LinAlgError("non-finite banded solution")
    except scipy.linalg.LinAlgError:
        return lmmse_equalize(problem)
    return est


@dataclass(frozen=True)
class ErrorCounts:
    """Accumulated hard-decision error statistics."""

    bits_total: int = 0
    bits_error: int = 0
    symbols_total: int = 0
    symbols_error: int = 0
    frames: int = 0

    def __post_init__(self):
        assert 0 <= self.bits_error <= self.bits_total, (
            f"bit errors {self.bits_error} exceed total {self.bits_total}")
        assert 0 <= self.symbols_error <= self.symbols_total, (
            f"symbol errors {self.symbols_error} exceed total {self.symbols_total}")

    @property
    def ber(self) -> float:
        return self.bits_error / self.bits_total if self.bits_total else float("nan")

    @property
    def ser(self) -> float:
        return (self.symbols_error / self.symbols_total
                if self.symbols_total else float("nan"))

    def wilson_interval(self, confidence: float = 0.95):
        """Wilson score interval for the bit error rate."""
        from scipy.stats import norm

        n = self.bits_total
        if n == 0:
            return (float("nan"), float("nan"))
        z = float(norm.ppf(0.5 + confidence / 2))
        phat = self.bits_error / n
        denom = 1 + z * z / n
        center = (phat + z * z / (2 * n)) / denom
        half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
        return (max(0.0, center - half), min(1.0, center + half))


def count_errors(est_bits, ref_bits, bits_per_symbol: int = 1) -> ErrorCounts:
    """Exact Hamming accounting of one detected frame against the truth."""
    est = np.asarray(est_bits).ravel()
    ref = np.asarray(ref_bits).ravel()
    if est.shape != ref.shape:
        raise ValueError(f"bit stream lengths differ: {est.shape} vs {ref.shape}")
    if est.size % bits_per_symbol != 0:
        raise ValueError(
            f"{est.size} bits do not group into symbols of {bits_per_symbol}")
    diff = est != ref
    sym_err = int(np.count_nonzero(diff.reshape(-1, bits_per_symbol).any(axis=1)))
    return ErrorCounts(bits_total=est.size, bits_error=int(np.count_nonzero(diff)),
                       symbols_total=est.size // bits_per_symbol,
                       symbols_error=sym_err, frames=1)


def merge(a: ErrorCounts, b: ErrorCounts) -> ErrorCounts:
    """Combine two tallies; associative and commutative by construction."""
    return ErrorCounts(bits_total=a.bits_total + b.bits_total,
                       bits_error=a.bits_error + b.bits_error,
                       symbols_total=a.symbols_total + b.symbols_total,
                       symbols_error=a.symbols_error + b.symbols_error,
                       frames=a.frames + b.frames)
