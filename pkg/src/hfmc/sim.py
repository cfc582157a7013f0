"""Monte Carlo BER engine.

One trial draws a channel realization, a bit vector, and a time-domain
noise realization, then pushes the SAME bits through every configured
waveform over the SAME channel and noise (variance-reduced comparison:
differences between waveforms are never due to different random draws).
Per-trial randomness derives from the master seed through a splittable
seed tree keyed by (trial, purpose, attempt), so results are independent
of worker scheduling and trial order.

The equalizer's channel knowledge is the exact analytic construction for
the hyperbolic waveform (the numerical quadrature route is available as a
cross-check) and the closed rectangle-rule construction for the reference
waveforms.  Imperfect CSI re-weights the per-path matrix stacks with
perturbed gains, so the detector sees an estimation error while the data
was generated by the true channel.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import Dict, Optional, Tuple

import numpy as np

from .channel import ChannelStats, GuardViolation, apply_channel, draw_realization, perturb_csi
from .design import SystemConfig, select_parameters
from .detect import (ConditioningError, DetectionProblem, ErrorCounts,
                     count_errors, lmmse_equalize, merge)
from .modem import (alphabet_from_name, build_basis, demap_symbols, demodulate,
                    equivalent_channel_analytic, equivalent_channel_numerical,
                    map_bits, modulate)
from .waveform import truncate_transmit

__all__ = [
    "WAVEFORMS",
    "ExperimentConfig",
    "CellStats",
    "SimResult",
    "run_ber",
]

WAVEFORMS = ("hfmc", "ofdm", "sc", "oddm")

# purpose codes inside the per-trial seed tree
_SEED_CHANNEL, _SEED_BITS, _SEED_NOISE, _SEED_CSI = 0, 1, 2, 3

# conditioning or guard alarms trigger a full redraw of the trial under a
# fresh attempt index; a trial that keeps failing aborts the run loudly
MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one BER run depends on; hashable and picklable."""

    system: SystemConfig
    waveforms: Tuple[str, ...] = WAVEFORMS
    alphabet: str = "qpsk"
    snr_db: Tuple[float, ...] = (20.0, 25.0)
    trials: int = 200
    master_seed: int = 1234
    channel: ChannelStats = field(default_factory=ChannelStats)
    csi_nmse: Tuple[float, ...] = (0.0,)
    num_tx: Optional[int] = None
    hfmc_numerical_h: bool = False
    oddm_shape: Optional[Tuple[int, int]] = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "waveforms", tuple(self.waveforms))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "csi_nmse",
                           tuple(float(c) for c in self.csi_nmse))
        assert self.trials >= 1, f"trials must be >= 1, got {self.trials}"
        assert len(self.snr_db) > 0, "snr grid must be nonempty"
        assert len(self.waveforms) > 0, "waveform list must be nonempty"
        unknown = set(self.waveforms) - set(WAVEFORMS)
        assert not unknown, f"unknown waveforms {sorted(unknown)}"
        assert len(set(self.waveforms)) == len(self.waveforms), (
            "duplicate waveform names")
        assert len(self.csi_nmse) > 0, "csi_nmse list must be nonempty"
        assert all(c >= 0 for c in self.csi_nmse), "csi_nmse must be >= 0"
        assert self.workers >= 1, f"workers must be >= 1, got {self.workers}"
        alphabet_from_name(self.alphabet)
        assert self.channel.guard <= self.system.prefix_time + 1e-12, (
            f"channel guard {self.channel.guard} exceeds the prefix "
            f"{self.system.prefix_time}")
        assert self.channel.a_max <= self.system.a_max + 1e-15, (
            "channel scale bound exceeds the design's a_max")


@dataclass
class CellStats:
    """Tally plus apportioned wall time for one (waveform, snr, nmse) cell."""

    counts: ErrorCounts
    wall_time: float = 0.0


CellKey = Tuple[str, float, float]


@dataclass
class SimResult:
    config: ExperimentConfig
    cells: Dict[CellKey, CellStats]
    redraws: int = 0

    def counts(self, waveform: str, snr_db: float,
               csi_nmse: float = None) -> ErrorCounts:
        if csi_nmse is None:
            csi_nmse = self.config.csi_nmse[0]
        return self.cells[(waveform, float(snr_db), float(csi_nmse))].counts

    def rows(self):
        """CSV-ready rows in a fixed deterministic order."""
        out = []
        for wf in self.config.waveforms:
            for snr in self.config.snr_db:
                for nmse in self.config.csi_nmse:
                    c = self.cells[(wf, snr, nmse)].counts
                    out.append((wf, snr, nmse, c.frames, c.bits_total,
                                c.bits_error, c.symbols_total, c.symbols_error,
                                c.ber, c.ser))
        return out


def _rng(master: int, trial: int, purpose: int, attempt: int,
         extra: Optional[int] = None) -> np.random.Generator:
    key = (trial, purpose, attempt)
    if extra is not None:
        key = key + (extra,)
    return np.random.default_rng(np.random.SeedSequence(entropy=master,
                                                        spawn_key=key))


class _Workspace:
    """Per-process heavy state: design, bases, cached receive filters."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        params = select_parameters(cfg.system)
        if cfg.num_tx is not None:
            params = truncate_transmit(params, cfg.num_tx)
        self.params = params
        self.alphabet = alphabet_from_name(cfg.alphabet)
        self.bases = {name: build_basis(name, params, oddm_shape=cfg.oddm_shape)
                      for name in cfg.waveforms}
        grids = {b.receive_times().size for b in self.bases.values()}
        assert len(grids) == 1, f"receive grids disagree: {grids}"
        self.times = next(iter(self.bases.values())).receive_times()
        self.sim_rate = next(iter(self.bases.values())).sim_rate

    def equivalent(self, name: str, ch):
        if name == "hfmc" and not self.cfg.hfmc_numerical_h:
            return equivalent_channel_analytic(self.params, ch, form="exact")
        return equivalent_channel_numerical(self.bases[name], ch)

    def attempt_trial(self, trial: int, attempt: int):
        cfg = self.cfg
        ch = draw_realization(cfg.channel,
                              _rng(cfg.master_seed, trial, _SEED_CHANNEL, attempt))
        bits = _rng(cfg.master_seed, trial, _SEED_BITS, attempt).integers(
            0, 2, self.params.num_tx * self.alphabet.bits_per_symbol)
        x = map_bits(bits, self.alphabet)
        noise_rng = _rng(cfg.master_seed, trial, _SEED_NOISE, attempt)
        w_unit = (noise_rng.standard_normal(self.times.size)
                  + 1j * noise_rng.standard_normal(self.times.size)) / np.sqrt(2)
        est_gains = {}
        for idx, nmse in enumerate(cfg.csi_nmse):
            if nmse > 0:
                pert = perturb_csi(ch, nmse,
                                   _rng(cfg.master_seed, trial, _SEED_CSI,
                                        attempt, idx))
                est_gains[nmse] = pert.gains

        counts: Dict[CellKey, ErrorCounts] = {}
        walls: Dict[CellKey, float] = {}
        for wf in cfg.waveforms:
            basis = self.bases[wf]
            t0 = time.perf_counter()
            frame = modulate(x, basis)
            r_clean = apply_channel(frame, ch, self.times)
            z_clean = demodulate(r_clean, basis)
            z_noise = demodulate(w_unit, basis)
            eq = self.equivalent(wf, ch)
            trunk = time.perf_counter() - t0
            share = trunk / (len(cfg.snr_db) * len(cfg.csi_nmse))
            for nmse in cfg.csi_nmse:
                h_det = eq.matrix if nmse == 0 else eq.recombine(est_gains[nmse])
                for snr in cfg.snr_db:
                    t1 = time.perf_counter()
                    n0 = 0.0 if np.isinf(snr) else 10.0 ** (-snr / 10.0)
                    y = z_clean + np.sqrt(n0 * self.sim_rate) * z_noise
                    problem = DetectionProblem(h_det, y, n0, self.alphabet)
                    est = lmmse_equalize(problem)
                    got = demap_symbols(est, self.alphabet)
                    key = (wf, snr, nmse)
                    counts[key] = count_errors(
                        got, bits, bits_per_symbol=self.alphabet.bits_per_symbol)
                    walls[key] = share + (time.perf_counter() - t1)
        return counts, walls

    def run_trial(self, trial: int):
        for attempt in range(MAX_ATTEMPTS):
            try:
                counts, walls = self.attempt_trial(trial, attempt)
                return counts, walls, attempt
            except (ConditioningError, GuardViolation):
                continue
        raise RuntimeError(
            f"trial {trial} hit conditioning/guard alarms on all "
            f"{MAX_ATTEMPTS} attempts; the configuration looks degenerate")


def _simulate_range(cfg: ExperimentConfig, start: int, stop: int):
    ws = _Workspace(cfg)
    counts: Dict[CellKey, ErrorCounts] = {}
    walls: Dict[CellKey, float] = {}
    redraws = 0
    for trial in range(start, stop):
        c, w, attempts = ws.run_trial(trial)
        redraws += attempts
        for key, val in c.items():
            counts[key] = merge(counts[key], val) if key in counts else val
            walls[key] = walls.get(key, 0.0) + w[key]
    return counts, walls, redraws


def run_ber(cfg: ExperimentConfig) -> SimResult:
    """Run the full Monte Carlo grid; deterministic for a given config."""
    spans = []
    per = cfg.trials // cfg.workers
    extra = cfg.trials % cfg.workers
    lo = 0
    for w in range(cfg.workers):
        hi = lo + per + (1 if w < extra else 0)
        if hi > lo:
            spans.append((lo, hi))
        lo = hi

    partials = []
    if cfg.workers == 1 or len(spans) <= 1:
        partials.append(_simulate_range(cfg, 0, cfg.trials))
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            partials = list(pool.map(_simulate_range, repeat(cfg),
                                     [s[0] for s in spans],
                                     [s[1] for s in spans]))

    cells: Dict[CellKey, CellStats] = {}
    redraws = 0
    for counts, walls, rd in partials:
        redraws += rd
        for key, val in counts.items():
            if key in cells:
                cells[key] = CellStats(merge(cells[key].counts, val),
                                       cells[key].wall_time + walls[key])
            else:
                cells[key] = CellStats(val, walls[key])
    expected = {(wf, snr, nmse) for wf in cfg.waveforms
                for snr in cfg.snr_db for nmse in cfg.csi_nmse}
    assert set(cells) == expected, "missing cells in aggregation"
    return SimResult(config=cfg, cells=cells, redraws=redraws)
